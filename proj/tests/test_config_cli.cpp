#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bidsim/config.hpp"
#include "bidsim/csv.hpp"
#include "bidsim/metrics.hpp"

using namespace bidsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE_MESSAGE(bool(f), "cannot open " << p.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    REQUIRE(bool(f));
    f << text;
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("bidsim_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

// Runs the CLI binary, returns its exit code, captures stdout+stderr.
int cli(const std::string& args, std::string* output = nullptr) {
    TempDir cap;
    const fs::path log = cap.path / "out.txt";
    const std::string cmd =
        std::string(BIDSIM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = slurp(log);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::vector<std::string> expect_problems(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.problems;
    }
    FAIL("expected ConfigError");
    return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& needle) {
    for (const std::string& p : problems)
        if (p.find(needle) != std::string::npos) return true;
    return false;
}

// A config touching every section with non-default values.
ExperimentConfig full_config() {
    ExperimentConfig cfg;
    cfg.horizon = 500;
    cfg.seeds = {3, 9, 123456789012345ULL};
    cfg.out = "golden_runs";
    cfg.objective = Objective::quasi_linear(0.5);
    cfg.payment = PaymentRule::mixed(0.25);
    cfg.constraints.rho = 0.4;
    cfg.constraints.exact_roi = true;
    cfg.dual.eta = 0.05;
    cfg.dual.cap = 2.5;
    cfg.dual.expected_gradient = false;
    cfg.env.kind = Env::Kind::DiscreteJoint;
    cfg.env.atoms = {{1.0, 0.0, 0.25}, {0.5, 0.75, 0.75}};
    cfg.policy.kind = PolicyConfig::Kind::Tree;
    cfg.policy.tree.lipschitz = 2;
    cfg.policy.tree.depth_cap = 2;
    cfg.policy.tree.size_cap = 50000;
    cfg.policy.tree.restart = TreePolicyConfig::Restart::Full;
    cfg.sweep_horizons = {100, 200, 400};
    return cfg;
}

const std::string kMinimalConfig =
    R"({"env": {"kind": "tight_beta", "beta": 0.25}, "policy": {"kind": "tree"}})";

}  // namespace

TEST_CASE("a config round-trips through its canonical rendering") {
    std::vector<ExperimentConfig> variants;
    variants.push_back(full_config());

    ExperimentConfig product;
    product.env.kind = Env::Kind::Product;
    product.env.values = {0.2, 0.9};
    product.env.value_probs = {0.5, 0.5};
    product.env.ds = {0.1, 0.5};
    product.env.d_probs = {0.4, 0.6};
    product.policy.kind = PolicyConfig::Kind::Poly;
    product.policy.poly.lipschitz = 2.0;
    product.policy.poly.buckets = 4;
    product.policy.poly.bids = 20;
    product.policy.poly.restart = TreePolicyConfig::Restart::None;
    variants.push_back(product);

    ExperimentConfig bandit;
    bandit.env.kind = Env::Kind::BanditLB;
    bandit.env.perturb = 3;
    bandit.policy.kind = PolicyConfig::Kind::BucketBandit;
    bandit.policy.bucket.lipschitz = 1.5;
    variants.push_back(bandit);

    ExperimentConfig fixed;
    fixed.env.kind = Env::Kind::TightBeta;
    fixed.env.beta = 0.1;
    fixed.policy.kind = PolicyConfig::Kind::Fixed;
    fixed.policy.fixed_bid = 0.3;
    variants.push_back(fixed);

    for (const ExperimentConfig& cfg : variants) {
        const std::string once = render_config(cfg);
        const std::string twice = render_config(parse_config(once));
        CHECK(once == twice);
    }
}

TEST_CASE("parsing recovers every field of the full config") {
    const ExperimentConfig cfg = parse_config(render_config(full_config()));
    CHECK(cfg.horizon == 500);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 9, 123456789012345ULL});
    CHECK(cfg.out == "golden_runs");
    CHECK(cfg.objective.kind == Objective::Kind::QuasiLinear);
    CHECK(cfg.objective.nu == 0.5);
    CHECK(cfg.payment.kind == PaymentRule::Kind::Mixed);
    CHECK(cfg.payment.q == 0.25);
    CHECK(cfg.constraints.rho == 0.4);
    CHECK(cfg.constraints.exact_roi);
    CHECK(cfg.dual.eta == 0.05);
    CHECK(cfg.dual.cap == 2.5);
    CHECK_FALSE(cfg.dual.expected_gradient);
    REQUIRE(cfg.env.atoms.size() == 2);
    CHECK(cfg.env.atoms[1].v == 0.5);
    CHECK(cfg.env.atoms[1].d == 0.75);
    CHECK(cfg.env.atoms[1].p == 0.75);
    CHECK(cfg.policy.tree.lipschitz == 2);
    CHECK(cfg.policy.tree.depth_cap == 2);
    CHECK(cfg.policy.tree.size_cap == 50000);
    CHECK(cfg.policy.tree.restart == TreePolicyConfig::Restart::Full);
    CHECK(cfg.sweep_horizons == std::vector<long>{100, 200, 400});
}

TEST_CASE("the canonical rendering is frozen by a golden file") {
    const std::string golden = slurp(fs::path(BIDSIM_GOLDEN_DIR) / "config_full.json");
    CHECK(render_config(full_config()) == golden);
    CHECK(render_config(parse_config(golden)) == golden);
}

TEST_CASE("a minimal config fills in the documented defaults") {
    const ExperimentConfig cfg = parse_config(kMinimalConfig);
    CHECK(cfg.horizon == 1000);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
    CHECK(cfg.out == "runs");
    CHECK(cfg.objective.kind == Objective::Kind::ValueMax);
    CHECK(cfg.payment.kind == PaymentRule::Kind::First);
    CHECK(cfg.constraints.rho == 1.0);
    CHECK_FALSE(cfg.constraints.exact_roi);
    CHECK(cfg.dual.eta == 0.0);
    CHECK(std::isinf(cfg.dual.cap));
    CHECK_FALSE(cfg.dual.expected_gradient);
    CHECK(cfg.env.kind == Env::Kind::TightBeta);
    CHECK(cfg.policy.kind == PolicyConfig::Kind::Tree);
    CHECK(cfg.policy.tree.restart == TreePolicyConfig::Restart::Sparsified);
    CHECK(cfg.sweep_horizons.empty());
}

TEST_CASE("every problem in a bad config is reported in one pass") {
    const auto problems = expect_problems(R"({
        "horizon": 0,
        "seeds": [],
        "objective": {"kind": "maximize_vibes"},
        "payment": {"kind": "mixed", "q": 1.5},
        "constraints": {"rho": -1},
        "policy": {"kind": "spend_it_all"}
    })");
    CHECK(problems.size() >= 6);
    CHECK(mentions(problems, "horizon"));
    CHECK(mentions(problems, "seeds"));
    CHECK(mentions(problems, "objective.kind"));
    CHECK(mentions(problems, "payment.q"));
    CHECK(mentions(problems, "constraints.rho"));
    CHECK(mentions(problems, "policy.kind"));
    CHECK(mentions(problems, "env"));  // missing section

    try {
        parse_config("{\"env\": 5}");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("problems):") != std::string::npos);
    }
}

TEST_CASE("unknown keys are rejected everywhere") {
    auto problems = expect_problems(
        R"({"env": {"kind": "tight_beta"}, "policy": {"kind": "tree"}, "extra": 1})");
    CHECK(mentions(problems, "unknown key \"extra\""));

    problems = expect_problems(
        R"({"env": {"kind": "tight_beta", "alpha": 2}, "policy": {"kind": "tree"}})");
    CHECK(mentions(problems, "unknown key \"alpha\""));

    problems = expect_problems(
        R"({"env": {"kind": "tight_beta"}, "policy": {"kind": "tree"}, "dual": {"rate": 1}})");
    CHECK(mentions(problems, "unknown key \"rate\""));
}

TEST_CASE("seed lists expand from count and base") {
    const std::string base =
        R"({"env": {"kind": "tight_beta"}, "policy": {"kind": "tree"}, "seeds": )";
    CHECK(parse_config(base + "[5, 6]}").seeds == std::vector<std::uint64_t>{5, 6});
    CHECK(parse_config(base + R"({"count": 3, "base": 10}})").seeds ==
          std::vector<std::uint64_t>{10, 11, 12});
    CHECK(mentions(expect_problems(base + "[-1]}"), "seeds"));
    CHECK(mentions(expect_problems(base + R"({"count": 0}})"), "seeds"));
    CHECK(mentions(expect_problems(base + "\"many\"}"), "seeds"));
}

TEST_CASE("the dual cap is null for unbounded multipliers") {
    ExperimentConfig cfg = parse_config(kMinimalConfig);
    CHECK(render_config(cfg).find("\"cap\": null") != std::string::npos);

    const std::string base =
        R"({"env": {"kind": "tight_beta"}, "policy": {"kind": "tree"}, "dual": )";
    CHECK(std::isinf(parse_config(base + R"({"cap": null}})").dual.cap));
    CHECK(parse_config(base + R"({"cap": 3.5}})").dual.cap == 3.5);
    CHECK(mentions(expect_problems(base + R"({"cap": 0}})"), "dual.cap"));
    CHECK(mentions(expect_problems(base + R"({"eta": -0.5}})"), "dual.eta"));
}

TEST_CASE("environment sections are validated") {
    const std::string tail = R"(, "policy": {"kind": "tree"}})";
    CHECK(mentions(expect_problems(R"({"env": {"kind": "discrete", "atoms": [
        {"v": 0.5, "d": 0.5, "p": 0.5}]})" + tail),
                   "sum to 1"));
    CHECK(mentions(expect_problems(R"({"env": {"kind": "discrete", "atoms": [
        {"v": 1.5, "d": 0.5, "p": 1.0}]})" + tail),
                   "[0,1]"));
    CHECK(mentions(expect_problems(R"({"env": {"kind": "product", "values": [0.5],
        "value_probs": [0.4, 0.6], "ds": [0.1], "d_probs": [1.0]})" + tail),
                   "same length"));
    CHECK(mentions(expect_problems(R"({"env": {"kind": "tight_beta", "beta": 0.6})" + tail),
                   "env.beta"));
    CHECK(mentions(expect_problems(R"({"env": {"kind": "bandit_lb", "perturb": -2})" + tail),
                   "env.perturb"));
}

TEST_CASE("policy sections are validated") {
    const std::string head = R"({"env": {"kind": "tight_beta"}, "policy": )";
    CHECK(mentions(expect_problems(head + R"({"kind": "tree", "lipschitz": 0}})"),
                   "policy.lipschitz"));
    CHECK(mentions(expect_problems(head + R"({"kind": "poly", "bucket_cap": 0}})"),
                   "policy.bucket_cap"));
    CHECK(mentions(expect_problems(head + R"({"kind": "bucket_bandit", "lipschitz": 0}})"),
                   "policy.lipschitz"));
    CHECK(mentions(expect_problems(head + R"({"kind": "fixed", "bid": 1.5}})"), "policy.bid"));
}

TEST_CASE("malformed JSON and wrong top-level shapes are single errors") {
    CHECK(mentions(expect_problems("{nope"), "not valid JSON"));
    CHECK(mentions(expect_problems("[1, 2]"), "top level must be an object"));
}

TEST_CASE("load_config distinguishes I/O failures from validation") {
    TempDir dir;
    CHECK_THROWS_AS(load_config((dir.path / "missing.json").string()), IoError);

    const fs::path good = dir.path / "good.json";
    spit(good, kMinimalConfig);
    CHECK(load_config(good.string()).horizon == 1000);

    const fs::path bad = dir.path / "bad.json";
    spit(bad, "{");
    CHECK_THROWS_AS(load_config(bad.string()), ConfigError);
}

TEST_CASE("make_env builds the environment the section describes") {
    EnvConfig e;
    e.kind = Env::Kind::TightBeta;
    e.beta = 0.1;
    CHECK(make_env(e, 100).describe() == Env::tight_beta(0.1).describe());

    e.kind = Env::Kind::DiscreteJoint;
    e.atoms = {{1.0, 0.5, 1.0}};
    CHECK(make_env(e, 100).describe() == Env::discrete({{1.0, 0.5, 1.0}}).describe());

    e = EnvConfig{};
    e.kind = Env::Kind::Product;
    e.values = {0.2, 0.9};
    e.value_probs = {0.5, 0.5};
    e.ds = {0.1, 0.5};
    e.d_probs = {0.5, 0.5};
    CHECK(make_env(e, 100).describe() ==
          Env::product({0.2, 0.9}, {0.5, 0.5}, {0.1, 0.5}, {0.5, 0.5}).describe());

    e = EnvConfig{};
    e.kind = Env::Kind::BanditLB;
    e.perturb = 2;
    // the horizon parameter reaches the environment: bucket counts differ
    CHECK(make_env(e, 64).describe() == Env::bandit_lb(64, 2).describe());
    CHECK(make_env(e, 64).describe() != make_env(e, 1000).describe());
}

TEST_CASE("make_policy builds the policy the section describes") {
    PolicyConfig p;
    p.kind = PolicyConfig::Kind::Tree;
    auto tree = make_policy(p, PaymentRule::first(), 256);
    CHECK(tree->describe() == TreePolicy(p.tree, PaymentRule::first(), 256).describe());
    CHECK_FALSE(tree->bandit());

    p.kind = PolicyConfig::Kind::Poly;
    auto poly = make_policy(p, PaymentRule::first(), 256);
    CHECK(poly->describe() == PolyPolicy(p.poly, PaymentRule::first(), 256).describe());

    p.kind = PolicyConfig::Kind::BucketBandit;
    auto bucket = make_policy(p, PaymentRule::first(), 256);
    CHECK(bucket->describe() ==
          BucketBanditPolicy(p.bucket, PaymentRule::first(), 256).describe());
    CHECK(bucket->bandit());

    p.kind = PolicyConfig::Kind::Fixed;
    p.fixed_bid = 0.3;
    auto fixed = make_policy(p, PaymentRule::first(), 256);
    CHECK(fixed->describe() == "fixed bid 0.3");
}

TEST_CASE("the benchmark uses the per-value LP and falls back on huge instances") {
    // two-point environment: the LP benchmark is exact
    auto [opt, note] = benchmark_opt(Env::tight_beta(0.25), PaymentRule::second(), 1.0);
    CHECK(opt == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(note == "per-value bid LP over competing-bid atoms");

    // 8 values x 8 competing bids blows past the basis cap; the fallback is
    // the best constant-bid mixture, which free wins at bid 0 still lower-bound
    std::vector<double> grid;
    for (int i = 1; i <= 8; ++i) grid.push_back(i / 10.0);
    std::vector<double> probs(8, 0.125);
    Env big = Env::product(grid, probs, grid, probs);
    auto [fopt, fnote] = benchmark_opt(big, PaymentRule::first(), 0.5);
    CHECK(fnote == "constant-bid mixture LP (per-value LP over the capacity cap)");
    CHECK(fopt > 0.0);
}

TEST_CASE("run summaries copy the run and price regret against the benchmark") {
    RunResult run;
    run.horizon = 100;
    run.rho = 0.3;
    run.cum_objective = 42.0;
    run.total_payment = 12.5;
    run.min_roi_slack = 0.75;
    run.wins = 60;
    run.guarded_rounds = 5;
    MetricsReport m = summarize(run, 0.5);
    CHECK(m.cum_objective == 42.0);
    CHECK(m.opt_per_round == 0.5);
    CHECK(m.regret == 8.0);
    CHECK(m.min_roi_slack == 0.75);
    CHECK(m.budget_spent == 12.5);
    CHECK(m.budget_cap == doctest::Approx(30.0));
    CHECK(m.wins == 60);
    CHECK(m.guarded_rounds == 5);
}

TEST_CASE("the log-log fit recovers exact power laws") {
    const std::vector<double> horizons = {100, 400, 1600, 6400};
    std::vector<double> sqrt_means, linear_means;
    for (double h : horizons) {
        sqrt_means.push_back(3.0 * std::sqrt(h));
        linear_means.push_back(0.25 * h);
    }
    SlopeFit s = fit_loglog(horizons, sqrt_means);
    CHECK(s.slope == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(s.points_used == 4);
    CHECK(s.notes.empty());
    CHECK(std::exp(s.intercept) == doctest::Approx(3.0).epsilon(1e-9));

    SlopeFit l = fit_loglog(horizons, linear_means);
    CHECK(l.slope == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("the log-log fit excludes nonpositive means with a note") {
    SlopeFit s = fit_loglog({100, 400, 1600}, {10.0, -2.0, 40.0});
    CHECK(s.points_used == 2);
    REQUIRE(s.notes.size() == 1);
    CHECK(s.notes[0].find("T=400") != std::string::npos);
    CHECK(s.slope == doctest::Approx(0.5).epsilon(1e-9));

    CHECK_THROWS_AS(fit_loglog({100, 400}, {-1.0, 5.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_loglog({100}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_loglog({100, 100}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_loglog({-5, 100}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("cli: run writes one trace per seed plus a summary") {
    TempDir dir;
    const fs::path cfg = dir.path / "cfg.json";
    spit(cfg, R"({
        "horizon": 10, "seeds": [7],
        "constraints": {"rho": 0.25},
        "env": {"kind": "discrete", "atoms": [{"v": 1.0, "d": 0.0, "p": 1.0}]},
        "policy": {"kind": "fixed", "bid": 0.0}
    })");
    const fs::path out = dir.path / "out";
    std::string text;
    const int code = cli("run --config " + cfg.string() + " --out " + out.string(), &text);
    CHECK(code == 0);
    CHECK(fs::exists(out / "summary.txt"));
    CHECK(text.find("run summary") != std::string::npos);
    CHECK(text.find("benchmark: per-round OPT 1") != std::string::npos);

    // the free-win trace is fully hand-computable and frozen as a golden file
    const std::string golden = slurp(fs::path(BIDSIM_GOLDEN_DIR) / "trace_free_wins.csv");
    CHECK(slurp(out / "run_seed7.csv") == golden);
}

TEST_CASE("cli: --seed narrows the run to one seed") {
    TempDir dir;
    const fs::path cfg = dir.path / "cfg.json";
    spit(cfg, R"({
        "horizon": 10, "seeds": [1, 2, 3],
        "env": {"kind": "tight_beta", "beta": 0.25},
        "policy": {"kind": "fixed", "bid": 0.5}
    })");
    const fs::path out = dir.path / "out";
    const int code = cli("run --config " + cfg.string() + " --out " + out.string() + " --seed 5");
    CHECK(code == 0);
    CHECK(fs::exists(out / "run_seed5.csv"));
    CHECK_FALSE(fs::exists(out / "run_seed1.csv"));
}

TEST_CASE("cli: traces are byte-identical across thread counts") {
    TempDir dir;
    const fs::path cfg = dir.path / "cfg.json";
    spit(cfg, R"({
        "horizon": 80, "seeds": [1, 2, 3],
        "constraints": {"rho": 0.5},
        "env": {"kind": "tight_beta", "beta": 0.25},
        "policy": {"kind": "poly"}
    })");
    const fs::path out1 = dir.path / "one";
    const fs::path out4 = dir.path / "four";
    REQUIRE(cli("run --config " + cfg.string() + " --out " + out1.string() + " --threads 1") == 0);
    REQUIRE(cli("run --config " + cfg.string() + " --out " + out4.string() + " --threads 4") == 0);
    for (int seed : {1, 2, 3}) {
        const std::string name = "run_seed" + std::to_string(seed) + ".csv";
        CHECK(slurp(out1 / name) == slurp(out4 / name));
    }
}

TEST_CASE("cli: sweep fits the regret scaling over horizons") {
    TempDir dir;
    const fs::path cfg = dir.path / "cfg.json";
    // bidding 0 against d = 0.5 never wins, so regret is exactly T and the
    // fitted slope is exactly 1
    spit(cfg, R"({
        "seeds": {"count": 3, "base": 1},
        "sweep_horizons": [50, 100],
        "env": {"kind": "discrete", "atoms": [{"v": 1.0, "d": 0.5, "p": 1.0}]},
        "policy": {"kind": "fixed", "bid": 0.0}
    })");
    const fs::path out = dir.path / "out";
    std::string text;
    const int code = cli("sweep --config " + cfg.string() + " --out " + out.string(), &text);
    CHECK(code == 0);
    CHECK(text.find("fitted log-log slope: 1") != std::string::npos);
    const std::string csv = slurp(out / "sweep.csv");
    CHECK(csv.find("horizon,seeds,mean_regret,std_regret") == 0);
    CHECK(csv.find("50,3,50,0") != std::string::npos);
    CHECK(csv.find("100,3,100,0") != std::string::npos);
    CHECK(fs::exists(out / "sweep.txt"));
}

TEST_CASE("cli: oracle prints the benchmark report") {
    TempDir dir;
    const fs::path cfg = dir.path / "cfg.json";
    spit(cfg, R"({
        "payment": {"kind": "second"},
        "env": {"kind": "tight_beta", "beta": 0.25},
        "policy": {"kind": "tree"}
    })");
    std::string text;
    const int code = cli("oracle --config " + cfg.string(), &text);
    CHECK(code == 0);
    CHECK(text.find("best constant-bid mixture: OPT 0.75") != std::string::npos);
    CHECK(text.find("value-measurable benchmark: OPT 0.75") != std::string::npos);
}

TEST_CASE("cli: exit codes separate validation from I/O failures") {
    TempDir dir;
    const fs::path bad = dir.path / "bad.json";
    spit(bad, R"({"horizon": 0})");
    std::string text;
    CHECK(cli("run --config " + bad.string() + " --out " + (dir.path / "x").string(), &text) == 2);
    CHECK(text.find("config invalid") != std::string::npos);

    CHECK(cli("run --config " + (dir.path / "missing.json").string(), &text) == 4);
    CHECK(text.find("cannot open config file") != std::string::npos);

    // a missing required flag is a usage error, reported as validation
    CHECK(cli("run", &text) == 2);
    CHECK(cli("explode", &text) == 2);

    const fs::path good = dir.path / "good.json";
    spit(good, kMinimalConfig);
    CHECK(cli("sweep --config " + good.string() + " --out " + (dir.path / "y").string(), &text) ==
          2);
    CHECK(text.find("sweep_horizons") != std::string::npos);
}
