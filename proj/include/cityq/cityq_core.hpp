#pragma once

// Solver library for the urban service-choice problem: semi-discrete
// transport, global optimum, Nash equilibrium, and k = 2 adjustment
// dynamics, without the CLI and file-format layers.

#include "cityq/dynamics.hpp"
#include "cityq/equilibrium.hpp"
#include "cityq/geometry.hpp"
#include "cityq/lp_oracle.hpp"
#include "cityq/optimum.hpp"
#include "cityq/queue_function.hpp"
#include "cityq/scenario.hpp"
#include "cityq/transport.hpp"
#include "cityq/config.hpp"
