#pragma once

#include "dilute/audit.hpp"
#include "dilute/config.hpp"
#include "dilute/experiment.hpp"
#include "dilute/flow.hpp"
#include "dilute/grid.hpp"
#include "dilute/kernels.hpp"
#include "dilute/neighbors.hpp"
#include "dilute/parallel.hpp"
#include "dilute/point_process.hpp"
#include "dilute/quadrature.hpp"
#include "dilute/reflections.hpp"
#include "dilute/stokes.hpp"
#include "dilute/types.hpp"
