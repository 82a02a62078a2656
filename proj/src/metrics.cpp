#include "bidsim/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace bidsim {

MetricsReport summarize(const RunResult& run, double opt_per_round) {
    MetricsReport r;
    r.cum_objective = run.cum_objective;
    r.opt_per_round = opt_per_round;
    r.regret = opt_per_round * static_cast<double>(run.horizon) - run.cum_objective;
    r.min_roi_slack = run.min_roi_slack;
    r.budget_spent = run.total_payment;
    r.budget_cap = run.rho * static_cast<double>(run.horizon);
    r.wins = run.wins;
    r.guarded_rounds = run.guarded_rounds;
    return r;
}

SlopeFit fit_loglog(const std::vector<double>& horizons, const std::vector<double>& means) {
    if (horizons.size() != means.size())
        throw std::invalid_argument("fit_loglog: size mismatch");
    SlopeFit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (!(horizons[i] > 0)) throw std::invalid_argument("fit_loglog: horizons must be > 0");
        if (!(means[i] > 0)) {
            fit.notes.push_back("excluded T=" + std::to_string(static_cast<long>(horizons[i])) +
                                ": nonpositive mean");
            continue;
        }
        const double x = std::log(horizons[i]);
        const double y = std::log(means[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++fit.points_used;
    }
    if (fit.points_used < 2) throw std::invalid_argument("fit_loglog: need at least two usable points");
    const double n = fit.points_used;
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("fit_loglog: degenerate horizons");
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

}  // namespace bidsim
