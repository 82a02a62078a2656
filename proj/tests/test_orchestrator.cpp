#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bidsim/csv.hpp"
#include "bidsim/environments.hpp"
#include "bidsim/orchestrator.hpp"
#include "bidsim/policies.hpp"

using namespace bidsim;

namespace {

Env point_env(double v, double d) { return Env::discrete({{v, d, 1.0}}); }

FixedFunctionPolicy constant_bid(double b, PaymentRule rule, std::string label = "fixed") {
    return FixedFunctionPolicy([b](double) { return b; }, rule, std::move(label));
}

RunSpec basic_spec(long horizon, double rho) {
    RunSpec spec;
    spec.horizon = horizon;
    spec.constraints.rho = rho;
    return spec;
}

}  // namespace

TEST_CASE("dual descent follows the projected gradient steps") {
    DualConfig cfg;
    cfg.eta = 0.1;
    DualDescent dual(cfg, 100);
    CHECK(dual.eta() == 0.1);
    CHECK(dual.current().lambda == 0.0);
    CHECK(dual.current().mu == 0.0);

    // win at price 0.6 with rho 0.25: lambda moves by eta * (0.6 - 0.25)
    dual.update(1.0, 0.6, 0.6, 0.25);
    CHECK(dual.current().lambda == doctest::Approx(0.035));
    // overpaying for a low value raises mu
    dual.update(1.0, 0.8, 0.2, 0.8);
    CHECK(dual.current().mu == doctest::Approx(0.06));
}

TEST_CASE("dual descent defaults eta to 1/sqrt(T)") {
    DualDescent dual(DualConfig{}, 400);
    CHECK(dual.eta() == doctest::Approx(0.05));
    CHECK_THROWS_AS(DualDescent(DualConfig{}, 0), std::invalid_argument);
    DualConfig bad;
    bad.eta = -0.1;
    CHECK_THROWS_AS(DualDescent(bad, 10), std::invalid_argument);
    DualConfig flat;
    flat.cap = 0.0;
    CHECK_THROWS_AS(DualDescent(flat, 10), std::invalid_argument);
}

TEST_CASE("budget guard forces zero bids once the remaining budget dips below one") {
    // bid 0.5 beats d = 0.3 and pays 0.5 first price; budget 2.5 funds four wins
    Env env = point_env(1.0, 0.3);
    auto policy = constant_bid(0.5, PaymentRule::first());
    RunResult run = run_primal_dual(env, policy, basic_spec(10, 0.25), 1);

    CHECK(run.wins == 4);
    CHECK(run.guarded_rounds == 6);
    CHECK(run.total_payment == 2.0);
    CHECK(run.total_value_won == 4.0);
    CHECK(run.cum_objective == 4.0);
    CHECK(run.final_budget_remaining == 0.5);
    CHECK(run.min_roi_slack == 0.5);
    REQUIRE(run.rows.size() == 10);
    for (const TraceRow& r : run.rows) {
        CHECK(r.tag == "pd");
        CHECK(r.has_d);
        CHECK(r.d == 0.3);
        CHECK(r.budget_remaining >= 0.0);
        if (r.t <= 4) {
            CHECK(r.bid == 0.5);
            CHECK(r.won);
            CHECK(r.payment == 0.5);
            CHECK(r.budget_remaining == 2.5 - 0.5 * static_cast<double>(r.t));
        } else {
            CHECK(r.bid == 0.0);
            CHECK_FALSE(r.won);
            CHECK(r.payment == 0.0);
            CHECK(r.budget_remaining == 0.5);
        }
    }
}

TEST_CASE("a free deterministic win every round accumulates the objective") {
    // d = 0 loses every tie to a zero bid, so each round wins value 1 for free
    Env env = point_env(1.0, 0.0);
    auto policy = constant_bid(0.0, PaymentRule::first());
    RunResult run = run_primal_dual(env, policy, basic_spec(10, 0.25), 7);

    CHECK(run.wins == 10);
    CHECK(run.total_payment == 0.0);
    CHECK(run.cum_objective == 10.0);
    CHECK(run.guarded_rounds == 0);
    REQUIRE(run.rows.size() == 10);
    std::string expected = std::string(kTraceHeader) + "\n";
    for (long t = 1; t <= 10; ++t) {
        const std::string ts = std::to_string(t);
        expected += ts + ",1,0,0,1,0,0,0,1,0,1,2.5," + ts + ",pd," + ts + "\n";
    }
    CHECK(trace_csv_string(run) == expected);
}

TEST_CASE("rows report the multipliers that priced the round, updated afterwards") {
    // tie at d = 0.5 wins and pays 0.5; rho 0.25 pushes lambda up by
    // eta/4 per win while mu's gradient stays negative
    Env env = point_env(1.0, 0.5);
    auto policy = constant_bid(0.5, PaymentRule::first());
    RunSpec spec = basic_spec(8, 0.25);
    spec.dual.eta = 0.1;
    RunResult run = run_primal_dual(env, policy, spec, 3);

    REQUIRE(run.rows.size() == 8);
    double lam = 0.0;
    for (const TraceRow& r : run.rows) {
        CHECK(r.lambda == lam);
        CHECK(r.mu == 0.0);
        CHECK(r.chi == 1.0);
        CHECK(r.psi == r.lambda);
        CHECK(r.u_cap == 1.0);
        const double x = r.won ? 1.0 : 0.0;
        lam = std::min(std::max(lam - 0.1 * (0.25 - x * r.payment), 0.0),
                       std::numeric_limits<double>::infinity());
    }
    CHECK(run.rows[0].lambda == 0.0);
    CHECK(run.rows[1].lambda == 0.025);
    CHECK(run.rows[2].lambda == 0.05);
}

TEST_CASE("scale columns mirror the multiplier columns row by row") {
    Env env = Env::tight_beta(0.2);
    RunSpec spec = basic_spec(200, 0.4);

    SUBCASE("value max") {
        PolyPolicy policy(PolyPolicyConfig{}, PaymentRule::first(), spec.horizon);
        RunResult run = run_primal_dual(env, policy, spec, 11);
        double prev_u = 1.0;
        for (const TraceRow& r : run.rows) {
            CHECK(r.chi == 1.0 + r.mu);
            CHECK(r.psi == r.lambda + r.mu);
            CHECK(r.u_cap >= prev_u);
            CHECK(r.u_cap >= std::max({1.0, r.chi, r.psi}));
            prev_u = r.u_cap;
        }
    }
    SUBCASE("quasi linear adds the payment weight to psi") {
        spec.obj = Objective::quasi_linear(0.5);
        spec.rule = PaymentRule::second();
        PolyPolicy policy(PolyPolicyConfig{}, PaymentRule::second(), spec.horizon);
        RunResult run = run_primal_dual(env, policy, spec, 11);
        for (const TraceRow& r : run.rows) {
            CHECK(r.chi == 1.0 + r.mu);
            CHECK(r.psi == 0.5 + r.lambda + r.mu);
        }
    }
}

TEST_CASE("run aggregates match a recomputation from the trace") {
    Env env = Env::tight_beta(0.1);
    PolyPolicy policy(PolyPolicyConfig{}, PaymentRule::first(), 400);
    RunResult run = run_primal_dual(env, policy, basic_spec(400, 0.3), 17);

    REQUIRE(run.rows.size() == 400);
    double paid = 0.0, value = 0.0, min_roi = std::numeric_limits<double>::infinity();
    long wins = 0;
    for (const TraceRow& r : run.rows) {
        CHECK(r.budget_remaining >= 0.0);
        if (r.won) {
            ++wins;
            paid += r.payment;
            value += r.v;
        }
        min_roi = std::min(min_roi, r.roi_slack);
    }
    CHECK(run.wins == wins);
    CHECK(run.total_payment == paid);
    CHECK(run.total_value_won == value);
    CHECK(run.min_roi_slack == min_roi);
    CHECK(run.cum_objective == run.rows.back().cum_objective);
    CHECK(run.final_budget_remaining == run.rows.back().budget_remaining);
    CHECK(run.horizon == 400);
    CHECK(run.seed == 17);
    CHECK(run.rho == 0.3);
    CHECK(run.env_desc == env.describe());
    CHECK(run.policy_desc == policy.describe());
}

TEST_CASE("turning the trace off changes nothing but the rows") {
    Env env = Env::tight_beta(0.25);
    RunSpec spec = basic_spec(300, 0.2);
    spec.rule = PaymentRule::mixed(0.5);
    PolyPolicy traced(PolyPolicyConfig{}, PaymentRule::mixed(0.5), spec.horizon);
    RunResult with = run_primal_dual(env, traced, spec, 5);

    spec.record_trace = false;
    PolyPolicy silent(PolyPolicyConfig{}, PaymentRule::mixed(0.5), spec.horizon);
    RunResult without = run_primal_dual(env, silent, spec, 5);

    CHECK(without.rows.empty());
    CHECK_FALSE(with.rows.empty());
    CHECK(without.cum_objective == with.cum_objective);
    CHECK(without.total_payment == with.total_payment);
    CHECK(without.total_value_won == with.total_value_won);
    CHECK(without.min_roi_slack == with.min_roi_slack);
    CHECK(without.final_budget_remaining == with.final_budget_remaining);
    CHECK(without.wins == with.wins);
    CHECK(without.guarded_rounds == with.guarded_rounds);
}

TEST_CASE("the same seed reproduces the trace byte for byte") {
    Env env = Env::tight_beta(0.25);
    RunSpec spec = basic_spec(60, 0.5);

    TreePolicy a(TreePolicyConfig{}, PaymentRule::first(), spec.horizon);
    RunResult first = run_primal_dual(env, a, spec, 42);
    TreePolicy b(TreePolicyConfig{}, PaymentRule::first(), spec.horizon);
    RunResult second = run_primal_dual(env, b, spec, 42);
    CHECK(trace_csv_string(first) == trace_csv_string(second));

    TreePolicy c(TreePolicyConfig{}, PaymentRule::first(), spec.horizon);
    RunResult other = run_primal_dual(env, c, spec, 43);
    CHECK(trace_csv_string(first) != trace_csv_string(other));
}

TEST_CASE("expected-gradient dual matches the realized one under point masses") {
    // a point-mass policy makes the emitted distribution's expectation equal
    // the sampled outcome, so both gradient modes walk the same dual path
    // (only while the budget guard stays out of the way: a forced round
    // feeds the realized dual a loss but the expected dual the distribution)
    auto compare = [](Env env, long horizon, double rho) {
        RunSpec spec = basic_spec(horizon, rho);
        spec.rule = PaymentRule::second();
        auto realized_pol = constant_bid(0.6, spec.rule);
        RunResult realized = run_primal_dual(env, realized_pol, spec, 9);

        spec.dual.expected_gradient = true;
        auto expected_pol = constant_bid(0.6, spec.rule);
        RunResult expected = run_primal_dual(env, expected_pol, spec, 9);
        CHECK(trace_csv_string(realized) == trace_csv_string(expected));
        return realized;
    };
    SUBCASE("payments above the budget rate move lambda") {
        // losses keep the average spend under rho, wins pay 0.4 above it
        Env env = Env::discrete({{0.8, 0.4, 0.5}, {0.8, 0.9, 0.5}});
        RunResult run = compare(env, 20, 0.3);
        CHECK(run.guarded_rounds == 0);
        double max_lambda = 0.0;
        for (const TraceRow& r : run.rows) max_lambda = std::max(max_lambda, r.lambda);
        CHECK(max_lambda > 0.0);
    }
    SUBCASE("payments above the value move mu") {
        RunResult run = compare(point_env(0.3, 0.4), 12, 0.5);
        CHECK(run.guarded_rounds == 0);
        CHECK(run.rows.back().mu > 0.0);
    }
}

TEST_CASE("bandit feedback masks the competing bid and skips forced rounds") {
    Env env = point_env(1.0, 0.2);
    BucketBanditConfig cfg;
    cfg.buckets = 2;
    cfg.bids = 3;
    BucketBanditPolicy policy(cfg, PaymentRule::first(), 40);
    RunResult run = run_primal_dual(env, policy, basic_spec(40, 0.1), 13);

    // bids of at least 1/3 against d = 0.2 burn the 4-unit budget early, so
    // the guard forces zero bids that are never fed back to the learner
    CHECK(run.guarded_rounds > 0);
    REQUIRE(run.rows.size() == 40);
    for (const TraceRow& r : run.rows) CHECK_FALSE(r.has_d);
    const std::string csv = trace_csv_string(run);
    const auto line_start = csv.find('\n') + 1;
    CHECK(csv.compare(line_start, 5, "1,1,,") == 0);  // empty d column
}

TEST_CASE("full-information traces print the competing bid") {
    Env env = point_env(1.0, 0.2);
    auto policy = constant_bid(0.5, PaymentRule::first());
    RunResult run = run_primal_dual(env, policy, basic_spec(3, 1.0), 13);
    const std::string csv = trace_csv_string(run);
    const auto line_start = csv.find('\n') + 1;
    CHECK(csv.compare(line_start, 8, "1,1,0.2,") == 0);
}

TEST_CASE("primal-dual run validation") {
    Env env = point_env(1.0, 0.2);
    auto policy = constant_bid(0.5, PaymentRule::first());
    CHECK_THROWS_AS(run_primal_dual(env, policy, basic_spec(0, 1.0), 1), std::invalid_argument);

    BucketBanditPolicy bandit(BucketBanditConfig{}, PaymentRule::first(), 10);
    RunSpec spec = basic_spec(10, 1.0);
    spec.dual.expected_gradient = true;
    CHECK_THROWS_AS(run_primal_dual(env, bandit, spec, 1), std::invalid_argument);
}

TEST_CASE("exact-ROI wrapper starts conservative and switches once slack builds") {
    // free wins: round one runs on the conservative pipeline, every later
    // round has slack >= 1 and runs on the dual-priced one
    Env env = point_env(1.0, 0.0);
    auto a1 = constant_bid(0.0, PaymentRule::first(), "a1");
    auto a2 = constant_bid(0.0, PaymentRule::first(), "a2");
    RunResult run = run_exact_roi(env, a1, a2, basic_spec(10, 0.5), 1);

    REQUIRE(run.rows.size() == 10);
    CHECK(run.rows[0].tag == "A2");
    CHECK(run.rows[0].chi == 1.0);
    CHECK(run.rows[0].psi == 1.0);
    for (std::size_t i = 1; i < run.rows.size(); ++i) {
        CHECK(run.rows[i].tag == "A1");
        CHECK(run.rows[i].psi == 0.0);  // multipliers never leave zero here
        CHECK(run.rows[i].lambda == 0.0);
        CHECK(run.rows[i].mu == 0.0);
    }
    for (const TraceRow& r : run.rows) {
        CHECK(r.won);
        CHECK(r.cum_objective == static_cast<double>(r.t));
        CHECK(r.roi_slack == static_cast<double>(r.t));
    }
    CHECK(run.min_roi_slack == 1.0);
    CHECK(run.policy_desc == "a1 | a2 | exact-roi");
}

TEST_CASE("exact-ROI wrapper goes idle when the budget guard trips") {
    // every played round wins at price 0.5; budget 3 funds five rounds
    Env env = point_env(1.0, 0.5);
    auto a1 = constant_bid(0.5, PaymentRule::first(), "a1");
    auto a2 = constant_bid(0.5, PaymentRule::first(), "a2");
    RunResult run = run_exact_roi(env, a1, a2, basic_spec(12, 0.25), 2);

    REQUIRE(run.rows.size() == 12);
    const std::vector<std::string> want = {"A2", "A2", "A1", "A1", "A1",   "idle",
                                           "idle", "idle", "idle", "idle", "idle", "idle"};
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(run.rows[i].tag == want[i]);
    CHECK(run.wins == 5);
    CHECK(run.guarded_rounds == 7);
    CHECK(run.total_payment == 2.5);
    CHECK(run.final_budget_remaining == 0.5);

    const double eta = 1.0 / std::sqrt(12.0);
    CHECK(run.rows[2].lambda == 0.0);  // first A1 round sees a fresh dual
    CHECK(run.rows[3].lambda == eta * 0.25);
    CHECK(run.rows[4].lambda == eta * 0.5);
    for (const TraceRow& r : run.rows) {
        if (r.tag != "A1") {
            // idle and conservative rows are priced without the dual
            CHECK(r.lambda == 0.0);
            CHECK(r.mu == 0.0);
            CHECK(r.chi == 1.0);
            CHECK(r.psi == (r.tag == "A2" ? 1.0 : 0.0));
            CHECK(r.u_cap == 1.0);
        }
        if (r.tag == "idle") {
            CHECK(r.bid == 0.0);
            CHECK_FALSE(r.won);
        }
    }
}

TEST_CASE("the wrapper picks each round's pipeline from the previous prefix state") {
    Env env = Env::tight_beta(0.1);
    RunSpec spec = basic_spec(300, 1.0);
    auto a1 = constant_bid(1.0, PaymentRule::first(), "greedy1");
    auto a2 = constant_bid(1.0, PaymentRule::first(), "greedy2");
    RunResult run = run_exact_roi(env, a1, a2, spec, 21);

    REQUIRE(run.rows.size() == 300);
    double prev_roi = 0.0;
    double prev_budget = spec.constraints.rho * static_cast<double>(spec.horizon);
    for (const TraceRow& r : run.rows) {
        CHECK(r.roi_slack >= 0.0);
        const char* want = prev_budget < 1.0 ? "idle" : (prev_roi >= 1.0 ? "A1" : "A2");
        CHECK(r.tag == want);
        if (r.tag == "A2") CHECK(r.roi_slack >= prev_roi);  // A2 never lowers the slack
        prev_roi = r.roi_slack;
        prev_budget = r.budget_remaining;
    }
    CHECK(run.min_roi_slack >= 0.0);
    CHECK(run.total_payment <=
          spec.constraints.rho * static_cast<double>(spec.horizon) + 1e-9);
}

TEST_CASE("exact-ROI wrapper accepts a bandit pair") {
    Env env = point_env(1.0, 0.2);
    BucketBanditConfig cfg;
    cfg.buckets = 2;
    cfg.bids = 3;
    BucketBanditPolicy a1(cfg, PaymentRule::first(), 50);
    BucketBanditPolicy a2(cfg, PaymentRule::first(), 50);
    RunResult run = run_exact_roi(env, a1, a2, basic_spec(50, 1.0), 3);
    REQUIRE(run.rows.size() == 50);
    for (const TraceRow& r : run.rows) {
        CHECK_FALSE(r.has_d);
        CHECK((r.tag == "A1" || r.tag == "A2" || r.tag == "idle"));
        CHECK(r.roi_slack >= 0.0);
    }
}

TEST_CASE("exact-ROI run validation") {
    Env env = point_env(1.0, 0.2);
    auto full = constant_bid(0.5, PaymentRule::first());
    BucketBanditPolicy bandit(BucketBanditConfig{}, PaymentRule::first(), 10);
    CHECK_THROWS_AS(run_exact_roi(env, full, bandit, basic_spec(10, 1.0), 1),
                    std::invalid_argument);

    auto other = constant_bid(0.5, PaymentRule::first());
    CHECK_THROWS_AS(run_exact_roi(env, full, other, basic_spec(0, 1.0), 1),
                    std::invalid_argument);

    BucketBanditPolicy b1(BucketBanditConfig{}, PaymentRule::first(), 10);
    BucketBanditPolicy b2(BucketBanditConfig{}, PaymentRule::first(), 10);
    RunSpec spec = basic_spec(10, 1.0);
    spec.dual.expected_gradient = true;
    CHECK_THROWS_AS(run_exact_roi(env, b1, b2, spec, 1), std::invalid_argument);
}

TEST_CASE("number rendering is stable at 12 significant digits") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(2.5) == "2.5");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(1e-9) == "1e-09");
    CHECK(format_number(123456789.123) == "123456789.123");
}
