#pragma once

// Umbrella header for the decision-bias audit harness.

#include "biasaudit/errors.hpp"
#include "biasaudit/condition.hpp"
#include "biasaudit/corpus.hpp"
#include "biasaudit/promptgen.hpp"
#include "biasaudit/trial.hpp"
#include "biasaudit/stats.hpp"
#include "biasaudit/provider.hpp"
#include "biasaudit/runner.hpp"
#include "biasaudit/replay.hpp"
#include "biasaudit/report.hpp"
