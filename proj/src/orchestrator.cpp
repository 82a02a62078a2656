#include "bidsim/orchestrator.hpp"

#include <cmath>
#include <stdexcept>

#include "bidsim/rng.hpp"

namespace bidsim {

DualDescent::DualDescent(const DualConfig& cfg, long horizon) : cap_(cfg.cap) {
    if (horizon < 1) throw std::invalid_argument("DualDescent: horizon must be >= 1");
    if (cfg.eta < 0.0) throw std::invalid_argument("DualDescent: eta must be >= 0");
    if (!(cfg.cap > 0.0)) throw std::invalid_argument("DualDescent: cap must be > 0");
    eta_ = cfg.eta > 0.0 ? cfg.eta : 1.0 / std::sqrt(static_cast<double>(horizon));
}

void DualDescent::update(double x, double p, double v, double rho) {
    auto proj = [this](double y) { return std::min(std::max(y, 0.0), cap_); };
    m_.lambda = proj(m_.lambda - eta_ * (rho - x * p));
    m_.mu = proj(m_.mu - eta_ * x * (v - p));
}

namespace {

double objective_gain(const Objective& obj, bool won, double v, double price) {
    if (!won) return 0.0;
    return obj.kind == Objective::Kind::ValueMax ? v : v - obj.nu * price;
}

// Expected (win, win*payment) of a bid distribution against a known d;
// feeds the dual's expected-gradient mode.
std::pair<double, double> expected_outcome_vs(const BidDistribution& bd, const PaymentRule& rule,
                                              double d) {
    double x = 0.0, xp = 0.0;
    for (Eigen::Index i = 0; i < bd.support.size(); ++i) {
        if (!wins(bd.support[i], d)) continue;
        x += bd.probs[i];
        xp += bd.probs[i] * payment(rule, bd.support[i], d);
    }
    return {x, xp};
}

struct Tally {
    double budget_remaining = 0;
    double roi = 0;
    double cum = 0;
    double value_won = 0;
    double paid = 0;
    double min_roi = std::numeric_limits<double>::infinity();
    long win_count = 0;
    long guarded = 0;
};

void apply_round(Tally& t, const Objective& obj, bool won, double v, double price) {
    t.budget_remaining -= price;
    if (t.budget_remaining < -1e-9)
        throw invariant_error("budget overdraft: the guard let a payment exceed the budget");
    if (won) {
        ++t.win_count;
        t.value_won += v;
        t.roi += v - price;
        t.paid += price;
    }
    t.cum += objective_gain(obj, won, v, price);
    t.min_roi = std::min(t.min_roi, t.roi);
}

void finish(RunResult& out, const Tally& t, const RunSpec& spec, const Env& env,
            std::uint64_t seed, const std::string& desc) {
    out.horizon = spec.horizon;
    out.seed = seed;
    out.rho = spec.constraints.rho;
    out.cum_objective = t.cum;
    out.total_value_won = t.value_won;
    out.total_payment = t.paid;
    out.min_roi_slack = t.min_roi;
    out.final_budget_remaining = t.budget_remaining;
    out.wins = t.win_count;
    out.guarded_rounds = t.guarded;
    out.policy_desc = desc;
    out.env_desc = env.describe();
}

}  // namespace

RunResult run_primal_dual(const Env& env, Policy& policy, const RunSpec& spec,
                          std::uint64_t seed) {
    if (spec.horizon < 1) throw std::invalid_argument("run_primal_dual: horizon must be >= 1");
    if (spec.dual.expected_gradient && policy.bandit())
        throw std::invalid_argument("expected-gradient dual needs full information");
    auto env_rng = make_stream(seed, 0);
    auto pol_rng = make_stream(seed, 1);
    DualDescent dual(spec.dual, spec.horizon);

    const double rho = spec.constraints.rho;
    Tally tally;
    tally.budget_remaining = rho * static_cast<double>(spec.horizon);

    RunResult out;
    if (spec.record_trace) out.rows.reserve(spec.horizon);
    double u_prev = 1.0;
    for (long t = 1; t <= spec.horizon; ++t) {
        const auto [v, d] = env.sample(env_rng);
        const Multipliers m = dual.current();
        const ScaleParams s = chi_psi(spec.obj, m, u_prev);
        u_prev = s.u_cap;

        const BidDistribution bd = policy.step(v, s);
        const Eigen::Index idx = sample_index(bd.probs, pol_rng);
        double bid = bd.support[idx];
        const bool forced = tally.budget_remaining < 1.0;
        if (forced) {
            bid = 0.0;
            ++tally.guarded;
        }
        const bool won = wins(bid, d);
        const double price = won ? payment(spec.rule, bid, d) : 0.0;
        apply_round(tally, spec.obj, won, v, price);

        if (policy.bandit()) {
            // a forced bid is not the sampled arm; there is nothing truthful
            // to tell the learner, so the arm's pending round stays unplayed
            if (!forced) policy.update_bandit(static_cast<int>(idx), won, price);
        } else {
            policy.update(d);
        }

        if (spec.dual.expected_gradient) {
            const auto [ex, exp_p] = expected_outcome_vs(bd, spec.rule, d);
            dual.update(ex, ex > 0.0 ? exp_p / ex : 0.0, v, rho);
        } else {
            dual.update(won ? 1.0 : 0.0, price, v, rho);
        }

        if (spec.record_trace) {
            out.rows.push_back({t, v, !policy.bandit(), d, bid, won, price, m.lambda, m.mu, s.chi,
                                s.psi, s.u_cap, tally.budget_remaining, tally.roi, "pd",
                                tally.cum});
        }
    }
    finish(out, tally, spec, env, seed, policy.describe());
    return out;
}

RunResult run_exact_roi(const Env& env, Policy& a1, Policy& a2, const RunSpec& spec,
                        std::uint64_t seed) {
    if (spec.horizon < 1) throw std::invalid_argument("run_exact_roi: horizon must be >= 1");
    if (a1.bandit() != a2.bandit())
        throw std::invalid_argument("run_exact_roi: pipelines disagree on feedback mode");
    if (spec.dual.expected_gradient && a1.bandit())
        throw std::invalid_argument("expected-gradient dual needs full information");
    auto env_rng = make_stream(seed, 0);
    auto a1_rng = make_stream(seed, 1);
    auto a2_rng = make_stream(seed, 2);
    DualDescent dual(spec.dual, spec.horizon);

    const double rho = spec.constraints.rho;
    Tally tally;
    tally.budget_remaining = rho * static_cast<double>(spec.horizon);

    RunResult out;
    if (spec.record_trace) out.rows.reserve(spec.horizon);
    double u_prev = 1.0;
    for (long t = 1; t <= spec.horizon; ++t) {
        const auto [v, d] = env.sample(env_rng);

        const char* tag;
        Multipliers m;
        ScaleParams s;
        double bid;
        Eigen::Index idx = -1;
        Policy* acting = nullptr;
        std::mt19937_64* rng = nullptr;
        BidDistribution bd;
        if (tally.budget_remaining < 1.0) {
            tag = "idle";
            ++tally.guarded;
            s = {1.0, 0.0, 1.0};
            bid = 0.0;
        } else if (tally.roi >= 1.0) {
            tag = "A1";
            m = dual.current();
            s = chi_psi(spec.obj, m, u_prev);
            u_prev = s.u_cap;
            acting = &a1;
            rng = &a1_rng;
        } else {
            tag = "A2";
            s = {1.0, 1.0, 1.0};
            acting = &a2;
            rng = &a2_rng;
        }
        if (acting) {
            bd = acting->step(v, s);
            idx = sample_index(bd.probs, *rng);
            bid = bd.support[idx];
        }

        const bool won = wins(bid, d);
        const double price = won ? payment(spec.rule, bid, d) : 0.0;
        apply_round(tally, spec.obj, won, v, price);
        if (tally.roi < -1e-12)
            throw invariant_error("exact-ROI wrapper let the ROI slack go negative");

        if (acting) {
            if (acting->bandit()) {
                acting->update_bandit(static_cast<int>(idx), won, price);
            } else {
                acting->update(d);
            }
            if (acting == &a1) {
                if (spec.dual.expected_gradient) {
                    const auto [ex, exp_p] = expected_outcome_vs(bd, spec.rule, d);
                    dual.update(ex, ex > 0.0 ? exp_p / ex : 0.0, v, rho);
                } else {
                    dual.update(won ? 1.0 : 0.0, price, v, rho);
                }
            }
        }

        if (spec.record_trace) {
            out.rows.push_back({t, v, !a1.bandit(), d, bid, won, price, m.lambda, m.mu, s.chi,
                                s.psi, s.u_cap, tally.budget_remaining, tally.roi, tag,
                                tally.cum});
        }
    }
    finish(out, tally, spec, env, seed, a1.describe() + " | " + a2.describe() + " | exact-roi");
    return out;
}

}  // namespace bidsim
