#pragma once

// Run summaries and the log-log slope fit used by the scaling experiments.

#include <string>
#include <vector>

#include "bidsim/orchestrator.hpp"

namespace bidsim {

struct MetricsReport {
    double cum_objective = 0;
    double opt_per_round = 0;
    double regret = 0;  // T * OPT - cumulative objective; negative on lucky runs
    double min_roi_slack = 0;
    double budget_spent = 0;
    double budget_cap = 0;
    long wins = 0;
    long guarded_rounds = 0;
};

MetricsReport summarize(const RunResult& run, double opt_per_round);

struct SlopeFit {
    double slope = 0;
    double intercept = 0;     // of log(mean) vs log(T)
    int points_used = 0;
    std::vector<std::string> notes;  // excluded horizons etc.
};

// Least squares on (log T, log mean). Horizons with mean <= 0 are excluded
// with a note; at least two usable points required.
SlopeFit fit_loglog(const std::vector<double>& horizons, const std::vector<double>& means);

struct SweepPoint {
    long horizon = 0;
    double mean_regret = 0;
    double std_regret = 0;
    int seeds = 0;
};

}  // namespace bidsim
