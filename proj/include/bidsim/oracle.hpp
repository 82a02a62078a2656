#pragma once

// Benchmark computations over finite-support environments: expected outcomes
// of candidate bid functions, the constrained-OPT linear program (solved two
// independent ways), a brute-force interval-regret scan, and the diagnostic
// linking a function's ROI margin to the constraint slack of its rho-mixture.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bidsim/core.hpp"
#include "bidsim/environments.hpp"

namespace bidsim {

struct CandidateOutcome {
    double value = 0;    // E[v * win]
    double payment = 0;  // E[price * win]
    double roi = 0;      // value - payment
};

CandidateOutcome expected_outcome(const Env& env, const std::function<double(double)>& f,
                                  const PaymentRule& rule);
inline CandidateOutcome expected_outcome_bid(const Env& env, double bid, const PaymentRule& rule) {
    return expected_outcome(env, [bid](double) { return bid; }, rule);
}

struct OptSolution {
    double value = 0;  // per-round OPT
    bool feasible = false;
    std::vector<int> support;      // candidate indices, at most 3
    std::vector<double> weights;   // same length, nonnegative, sums to 1
    bool budget_binding = false;
    bool roi_binding = false;
};

// max sum x_f V_f  s.t.  sum x_f P_f <= rho, sum x_f ROI_f >= 0, x in the
// simplex. With one equality and two inequalities every basic solution has
// at most 3 nonzero weights, so enumerating supports of size <= 3 (pairs via
// their constraint-boundary points, triples via the tight 3x3 system) visits
// every vertex and is exact.
OptSolution solve_opt(const std::vector<CandidateOutcome>& candidates, double rho);

// Independent check: singles plus pairwise mixtures on a fixed grid, with the
// exact constraint-boundary weights added so budget-binding vertices are hit
// despite the lattice. Matches solve_opt whenever the optimum needs at most
// two functions.
OptSolution grid_search_opt(const std::vector<CandidateOutcome>& candidates, double rho,
                            double step = 1e-3);

// Equality-form LP, max c.x s.t. A x = b, x >= 0, by exhaustive basis
// enumeration. Exact on the tiny instances it is meant for; cost is
// C(cols, rows) solves of a rows x rows system.
struct BasisLpResult {
    bool feasible = false;
    double value = 0;
    Eigen::VectorXd x;
};
BasisLpResult solve_basis_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                             const Eigen::VectorXd& c, std::uint64_t basis_cap = 2'000'000);

// The OPT LP over per-value bid distributions (exact for any finite-support
// env; the candidate bid list is shared across values). Variables x_{v,b}
// with sum_b x_{v,b} = P(v), a budget row with slack and an ROI row with
// surplus, solved by solve_basis_lp. Returns per-round OPT.
double product_opt(const Env& env, const std::vector<double>& candidate_bids,
                   const PaymentRule& rule, double rho);

struct IntervalProbeResult {
    double value = 0;  // max over intervals of (best fixed action - algorithm)
    long t1 = 0, t2 = 0;
    int action = -1;
};

// Exact O(T^2 K) scan with prefix sums. rewards and play are T x K,
// play rows are the algorithm's distributions.
IntervalProbeResult interval_regret_probe(const Eigen::MatrixXd& rewards,
                                          const Eigen::MatrixXd& play,
                                          std::uint64_t cell_cap = 400'000'000);

struct BetaAlphaReport {
    double beta = 0;           // E[(v - price) * win] under f
    double alpha = 0;          // rho * beta
    double mix_payment = 0;    // of the rho-mixture {f w.p. rho, bid 0 otherwise}
    double mix_roi = 0;
    bool budget_slack_ok = false;  // mix_payment <= rho - alpha
    bool roi_slack_ok = false;     // mix_roi >= alpha
};

BetaAlphaReport beta_alpha_diagnostic(const Env& env, const std::function<double(double)>& f,
                                      const PaymentRule& rule, double rho);

}  // namespace bidsim
