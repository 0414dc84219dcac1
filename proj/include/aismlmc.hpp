#pragma once

// Adaptive importance-sampling multilevel Monte Carlo for Euler schemes.

#include "aismlmc/errors.hpp"
#include "aismlmc/importance.hpp"
#include "aismlmc/mlmc.hpp"
#include "aismlmc/oracle.hpp"
#include "aismlmc/parallel.hpp"
#include "aismlmc/payoff.hpp"
#include "aismlmc/random.hpp"
#include "aismlmc/sde.hpp"
#include "aismlmc/stochastic_approx.hpp"
