#pragma once

#include "herdlab/belief_engine.hpp"
#include "herdlab/errors.hpp"
#include "herdlab/exact_oracle.hpp"
#include "herdlab/experiment.hpp"
#include "herdlab/herd_path.hpp"
#include "herdlab/monte_carlo.hpp"
#include "herdlab/numeric.hpp"
#include "herdlab/random.hpp"
#include "herdlab/signal_model.hpp"
#include "herdlab/statistics.hpp"
