#pragma once

// Umbrella header for the whole library.

#include "mfg/aggregation.hpp"
#include "mfg/config.hpp"
#include "mfg/game.hpp"
#include "mfg/iteration.hpp"
#include "mfg/linalg.hpp"
#include "mfg/nash.hpp"
#include "mfg/qp.hpp"
#include "mfg/regularity.hpp"
#include "mfg/response.hpp"
#include "mfg/rng.hpp"
#include "mfg/scenarios.hpp"
#include "mfg/serialize.hpp"
#include "mfg/sets.hpp"
