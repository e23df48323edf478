#pragma once

// Umbrella header for the automated negotiation platform.

#include "autoneg/baselines.hpp"
#include "autoneg/benchmark.hpp"
#include "autoneg/classifier.hpp"
#include "autoneg/domain.hpp"
#include "autoneg/errors.hpp"
#include "autoneg/neural.hpp"
#include "autoneg/pool.hpp"
#include "autoneg/protocol.hpp"
#include "autoneg/reviewer.hpp"
#include "autoneg/rl_env.hpp"
#include "autoneg/rng.hpp"
#include "autoneg/sac.hpp"
#include "autoneg/scenario_io.hpp"
#include "autoneg/stats.hpp"
#include "autoneg/strategy.hpp"
#include "autoneg/switching.hpp"
#include "autoneg/tensor.hpp"
#include "autoneg/text.hpp"
