#pragma once

// Single-round auction math: payment rules, multiplier-scaled rewards, safe
// bids and the negativity guard. Everything here is a pure function of its
// arguments; all state (multipliers, budgets, learners) lives elsewhere.
//
// Conventions, used throughout the library:
//   - values v, bids b, competing bids d all live in [0,1]; ties (b == d) win
//   - a round's scaled reward is  win * (chi * v - psi * price)
//   - chi/psi come from the current dual multipliers via chi_psi()

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bidsim {

// Thrown when a probability-1 guarantee fails (budget overdraft, negative
// ROI slack under the exact-ROI wrapper, a cover node without a parent in
// range). Indicates a bug, never bad luck; the CLI maps it to its own
// exit code.
struct invariant_error : std::logic_error {
    using std::logic_error::logic_error;
};

struct PaymentRule {
    enum class Kind { First, Second, Mixed };
    Kind kind = Kind::First;
    double q = 0.0;  // Mixed only: price = q*b + (1-q)*d, q in (0,1)

    static PaymentRule first() { return {Kind::First, 0.0}; }
    static PaymentRule second() { return {Kind::Second, 0.0}; }
    static PaymentRule mixed(double q) {
        if (!(q > 0.0 && q < 1.0))
            throw std::invalid_argument("PaymentRule::mixed: q must be in (0,1)");
        return {Kind::Mixed, q};
    }
};

struct Objective {
    enum class Kind { ValueMax, QuasiLinear };
    Kind kind = Kind::ValueMax;
    double nu = 1.0;  // QuasiLinear payment weight

    static Objective value_max() { return {Kind::ValueMax, 0.0}; }
    static Objective quasi_linear(double nu = 1.0) {
        if (!(nu > 0.0)) throw std::invalid_argument("Objective::quasi_linear: nu must be > 0");
        return {Kind::QuasiLinear, nu};
    }
};

struct Multipliers {
    double lambda = 0.0;  // budget
    double mu = 0.0;      // ROI
};

// Reward scale for the current round. u_cap is the running max of
// max(chi, psi) and is what learners receive as their reward range.
struct ScaleParams {
    double chi = 1.0;
    double psi = 0.0;
    double u_cap = 1.0;
};

struct ConstraintSpec {
    double rho = 1.0;        // per-round budget rate; total budget = rho * T
    bool exact_roi = false;  // run through the exact-ROI wrapper
};

inline void check_unit(double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
    }
}

inline double payment(const PaymentRule& rule, double b, double d) {
    check_unit(b, "bid");
    check_unit(d, "competing bid");
    switch (rule.kind) {
        case PaymentRule::Kind::First: return b;
        case PaymentRule::Kind::Second: return d;
        case PaymentRule::Kind::Mixed: return rule.q * b + (1.0 - rule.q) * d;
    }
    throw std::logic_error("payment: bad rule kind");
}

inline bool wins(double b, double d) { return b >= d; }

// chi = value scale, psi = payment scale, given the current multipliers.
inline ScaleParams chi_psi(const Objective& obj, const Multipliers& m, double prev_u_cap = 1.0) {
    if (m.lambda < 0.0 || m.mu < 0.0)
        throw std::invalid_argument("chi_psi: multipliers must be nonnegative");
    ScaleParams s;
    s.chi = 1.0 + m.mu;
    s.psi = (obj.kind == Objective::Kind::ValueMax) ? m.lambda + m.mu
                                                    : obj.nu + m.lambda + m.mu;
    s.u_cap = std::max(prev_u_cap, std::max(s.chi, s.psi));
    return s;
}

inline double scaled_reward(const PaymentRule& rule, double chi, double psi,
                            double v, double b, double d) {
    check_unit(v, "value");
    if (!wins(b, d)) return 0.0;
    return chi * v - psi * payment(rule, b, d);
}

// Largest bid whose reward is nonnegative against every competing bid.
// First price: only b = 0 is unconditionally safe (any winning bid pays b).
// Second/mixed: the worst case is a tie, so chi*v/psi caps the safe range;
// psi == 0 makes every bid safe and we return the most aggressive one.
inline double safe_bid(const PaymentRule& rule, double v, double chi, double psi) {
    check_unit(v, "value");
    if (!std::isfinite(chi) || !std::isfinite(psi))
        throw std::invalid_argument("safe_bid: chi and psi must be finite");
    if (!(chi > 0.0)) throw std::invalid_argument("safe_bid: chi must be > 0");
    if (psi < 0.0) throw std::invalid_argument("safe_bid: psi must be >= 0");
    if (rule.kind == PaymentRule::Kind::First) return 0.0;
    if (psi <= 0.0) return 1.0;
    return std::min(chi * v / psi, 1.0);
}

// True iff some competing bid gives the candidate a strictly negative reward.
// For every rule the worst winning case is d = b (price = b), so the test
// reduces to psi*b > chi*v.
inline bool bid_can_go_negative(const PaymentRule& rule, double v, double chi, double psi,
                                double b) {
    (void)rule;
    return psi * b > chi * v;
}

inline double guarded_bid(const PaymentRule& rule, double v, double chi, double psi,
                          double candidate) {
    check_unit(candidate, "candidate bid");
    if (bid_can_go_negative(rule, v, chi, psi, candidate))
        return safe_bid(rule, v, chi, psi);
    return candidate;
}

// Per-round Lagrangian: scaled reward plus the budget-rate term.
inline double lagrangian(const PaymentRule& rule, const Objective& obj, const Multipliers& m,
                         double rho, double v, double b, double d) {
    ScaleParams s = chi_psi(obj, m);
    return scaled_reward(rule, s.chi, s.psi, v, b, d) + m.lambda * rho;
}

}  // namespace bidsim
