#pragma once

// The repeated-auction game loops. run_primal_dual plays one policy against
// an environment with the Lagrangian dual tracking the budget and ROI
// constraints; run_exact_roi wraps two pipelines so that the ROI constraint
// holds on every prefix with probability 1, not just in expectation.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bidsim/core.hpp"
#include "bidsim/environments.hpp"
#include "bidsim/policies.hpp"

namespace bidsim {

struct DualConfig {
    double eta = 0.0;  // 0: use 1/sqrt(T)
    double cap = std::numeric_limits<double>::infinity();
    // Feed the dual the expected win/payment of the emitted distribution
    // instead of the sampled round outcome (full information only).
    bool expected_gradient = false;
};

// Projected gradient descent on the per-round Lagrangian
//   L(b, lambda, mu) = 1{b>=d} (v - lambda p + mu v - mu p) + lambda rho,
// so dL/dlambda = rho - x p and dL/dmu = x (v - p). The dual minimizes, the
// feasible set is [0, cap]^2.
class DualDescent {
  public:
    DualDescent(const DualConfig& cfg, long horizon);
    Multipliers current() const { return m_; }
    void update(double x, double p, double v, double rho);
    double eta() const { return eta_; }

  private:
    Multipliers m_;
    double eta_;
    double cap_;
};

struct TraceRow {
    long t = 0;
    double v = 0;
    bool has_d = false;  // false under bandit feedback: d never revealed
    double d = 0;
    double bid = 0;
    bool won = false;
    double payment = 0;
    double lambda = 0, mu = 0, chi = 1, psi = 0, u_cap = 1;
    double budget_remaining = 0;
    double roi_slack = 0;  // prefix sum of won * (v - payment)
    std::string tag;       // acting pipeline: pd / A1 / A2 / idle
    double cum_objective = 0;
};

struct RunResult {
    std::vector<TraceRow> rows;  // empty when record_trace is off
    long horizon = 0;
    std::uint64_t seed = 0;
    double rho = 1.0;
    double cum_objective = 0;
    double total_value_won = 0;
    double total_payment = 0;
    double min_roi_slack = 0;    // min over prefixes
    double final_budget_remaining = 0;
    long wins = 0;
    long guarded_rounds = 0;     // rounds the budget guard forced bid 0
    std::string policy_desc;
    std::string env_desc;
};

struct RunSpec {
    Objective obj = Objective::value_max();
    PaymentRule rule = PaymentRule::first();
    ConstraintSpec constraints;
    long horizon = 0;
    DualConfig dual;
    bool record_trace = true;
};

// One policy, one dual. Round order: observe v -> dual multipliers ->
// chi/psi and running U -> policy step -> sample bid -> budget guard
// (forced 0 when remaining budget < 1) -> resolve -> policy update ->
// dual update.
RunResult run_primal_dual(const Env& env, Policy& policy, const RunSpec& spec, std::uint64_t seed);

// Exact-ROI wrapper: idle when remaining budget < 1; a1 (its own dual and
// range) on rounds whose prefix ROI slack is >= 1; a2 with chi = psi = 1
// otherwise. a2's guarded bids make its rounds never decrease the slack,
// so the slack stays nonnegative on every prefix.
RunResult run_exact_roi(const Env& env, Policy& a1, Policy& a2, const RunSpec& spec,
                        std::uint64_t seed);

}  // namespace bidsim
