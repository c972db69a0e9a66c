#pragma once

#include "cca.hpp"
#include "config.hpp"
#include "core.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "forecaster.hpp"
#include "harness.hpp"
#include "knockoffs.hpp"
#include "random.hpp"
#include "regimes.hpp"
#include "scm.hpp"
#include "stats.hpp"
