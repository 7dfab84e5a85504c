#pragma once

#include "agent_dynamics.hpp"
#include "config.hpp"
#include "controllers.hpp"
#include "csv.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "market_model.hpp"
#include "metrics.hpp"
#include "pool_engine.hpp"
#include "random.hpp"
#include "regression.hpp"
#include "risk_planner.hpp"
#include "riskmath.hpp"
#include "simulation.hpp"
#include "experiments.hpp"
