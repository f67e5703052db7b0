#pragma once

// Umbrella header for the asymlift library: cost-asymmetry-driven forecast
// adjustments with noise-cleaned cost estimation, feedback self-regulation
// and walk-forward backtesting.

#include "asymlift/errors.hpp"
#include "asymlift/week.hpp"
#include "asymlift/csv.hpp"
#include "asymlift/rng.hpp"
#include "asymlift/normal.hpp"
#include "asymlift/quadrature.hpp"
#include "asymlift/ingest.hpp"
#include "asymlift/preprocess.hpp"
#include "asymlift/cost_model.hpp"
#include "asymlift/optimizer.hpp"
#include "asymlift/feedback.hpp"
#include "asymlift/synth.hpp"
#include "asymlift/backtest.hpp"
#include "asymlift/io.hpp"
