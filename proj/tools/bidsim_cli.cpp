// Command-line harness: run | sweep | oracle | probe over a JSON experiment
// config. Exit codes: 0 success, 2 validation, 3 invariant failure, 4 I/O.

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "bidsim/config.hpp"
#include "bidsim/csv.hpp"
#include "bidsim/metrics.hpp"
#include "bidsim/oracle.hpp"
#include "bidsim/probes.hpp"

namespace fs = std::filesystem;
using namespace bidsim;

namespace {

struct CliOptions {
    std::string config_path;
    long long seed = -1;  // >= 0 overrides the config's seed list
    std::string out;      // nonempty overrides the config's output directory
    int threads = 1;
};

// Index-addressed job pool: results land in slots keyed by job index, so
// nothing observable depends on the thread count. The first (by index)
// exception wins, also independent of scheduling.
template <class Fn>
void parallel_for(std::size_t jobs, int threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    int n = static_cast<int>(std::min<std::size_t>(std::max(threads, 1), jobs));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n);
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

ExperimentConfig load_with_overrides(const CliOptions& opt) {
    ExperimentConfig cfg = load_config(opt.config_path);
    if (opt.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(opt.seed)};
    if (!opt.out.empty()) cfg.out = opt.out;
    return cfg;
}

RunResult run_one(const ExperimentConfig& cfg, const Env& env, long horizon, std::uint64_t seed,
                  bool record_trace) {
    RunSpec spec;
    spec.obj = cfg.objective;
    spec.rule = cfg.payment;
    spec.constraints = cfg.constraints;
    spec.horizon = horizon;
    spec.dual = cfg.dual;
    spec.record_trace = record_trace;
    if (cfg.constraints.exact_roi) {
        auto a1 = make_policy(cfg.policy, cfg.payment, horizon);
        auto a2 = make_policy(cfg.policy, cfg.payment, horizon);
        return run_exact_roi(env, *a1, *a2, spec, seed);
    }
    auto p = make_policy(cfg.policy, cfg.payment, horizon);
    return run_primal_dual(env, *p, spec, seed);
}

std::string objective_text(const Objective& obj) {
    if (obj.kind == Objective::Kind::ValueMax) return "value_max";
    return "quasi_linear nu=" + format_number(obj.nu);
}

std::string payment_text(const PaymentRule& rule) {
    switch (rule.kind) {
        case PaymentRule::Kind::First: return "first";
        case PaymentRule::Kind::Second: return "second";
        case PaymentRule::Kind::Mixed: return "mixed q=" + format_number(rule.q);
    }
    return "?";
}

std::string policy_knobs_text(const PolicyConfig& policy, long horizon) {
    std::ostringstream s;
    switch (policy.kind) {
        case PolicyConfig::Kind::Tree:
            s << "tree: lipschitz=" << policy.tree.lipschitz
              << " depth_cap=" << policy.tree.depth_cap
              << " effective_depth=" << effective_tree_depth(policy.tree, horizon)
              << " size_cap=" << policy.tree.size_cap
              << " restart=" << (policy.tree.restart == TreePolicyConfig::Restart::None
                                     ? "none"
                                     : policy.tree.restart == TreePolicyConfig::Restart::Full
                                           ? "full"
                                           : "sparsified");
            break;
        case PolicyConfig::Kind::Poly:
            s << "poly: lipschitz=" << format_number(policy.poly.lipschitz)
              << " buckets=" << policy.poly.buckets << " bids=" << policy.poly.bids
              << " (0 = auto, caps " << policy.poly.bucket_cap << "/" << policy.poly.bid_cap
              << ") restart=" << (policy.poly.restart == TreePolicyConfig::Restart::None
                                      ? "none"
                                      : policy.poly.restart == TreePolicyConfig::Restart::Full
                                            ? "full"
                                            : "sparsified");
            break;
        case PolicyConfig::Kind::BucketBandit:
            s << "bucket_bandit: lipschitz=" << format_number(policy.bucket.lipschitz)
              << " buckets=" << policy.bucket.buckets << " bids=" << policy.bucket.bids
              << " (0 = auto)";
            break;
        case PolicyConfig::Kind::Fixed:
            s << "fixed: bid=" << format_number(policy.fixed_bid);
            break;
    }
    return s.str();
}

void metadata_block(std::ostream& s, const ExperimentConfig& cfg, const Env& env, long horizon,
                    double opt_per_round, const std::string& opt_note) {
    double eta = cfg.dual.eta > 0 ? cfg.dual.eta : 1.0 / std::sqrt(static_cast<double>(horizon));
    s << "horizon: " << horizon << "\n";
    s << "env: " << env.describe() << "\n";
    s << "objective: " << objective_text(cfg.objective) << "\n";
    s << "payment: " << payment_text(cfg.payment) << "\n";
    s << "rho: " << format_number(cfg.constraints.rho)
      << "  budget: " << format_number(cfg.constraints.rho * horizon)
      << "  exact_roi: " << (cfg.constraints.exact_roi ? "on" : "off") << "\n";
    s << "dual: eta=" << format_number(eta) << (cfg.dual.eta > 0 ? "" : " (1/sqrt(T))")
      << " cap=" << (std::isfinite(cfg.dual.cap) ? format_number(cfg.dual.cap) : "none")
      << " gradient=" << (cfg.dual.expected_gradient ? "expected" : "realized") << "\n";
    s << "policy: " << policy_knobs_text(cfg.policy, horizon) << "\n";
    s << "benchmark: per-round OPT " << format_number(opt_per_round) << " (" << opt_note << ")\n";
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    f.flush();
    if (!f) throw IoError("failed writing " + path);
}

int cmd_run(const CliOptions& opt) {
    auto started = std::chrono::steady_clock::now();
    ExperimentConfig cfg = load_with_overrides(opt);
    Env env = make_env(cfg.env, cfg.horizon);
    auto [opt_per_round, opt_note] = benchmark_opt(env, cfg.payment, cfg.constraints.rho);

    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out + ": " + ec.message());

    std::vector<RunResult> results(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), opt.threads,
                 [&](std::size_t i) { results[i] = run_one(cfg, env, cfg.horizon, cfg.seeds[i], true); });

    for (std::size_t i = 0; i < results.size(); ++i) {
        std::string path = cfg.out + "/run_seed" + std::to_string(cfg.seeds[i]) + ".csv";
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path);
        write_trace_csv(f, results[i]);
        f.flush();
        if (!f) throw IoError("failed writing " + path);
    }

    std::ostringstream s;
    s << "run summary\n";
    metadata_block(s, cfg, env, cfg.horizon, opt_per_round, opt_note);
    s << "resolved policy: " << results.front().policy_desc << "\n\n";
    s << "seed  cum_objective  regret  min_roi_slack  budget_left  wins  guarded\n";
    double worst_slack = std::numeric_limits<double>::infinity();
    std::vector<double> regrets;
    for (std::size_t i = 0; i < results.size(); ++i) {
        MetricsReport m = summarize(results[i], opt_per_round);
        regrets.push_back(m.regret);
        worst_slack = std::min(worst_slack, m.min_roi_slack);
        s << cfg.seeds[i] << "  " << format_number(m.cum_objective) << "  "
          << format_number(m.regret) << "  " << format_number(m.min_roi_slack) << "  "
          << format_number(results[i].final_budget_remaining) << "  " << m.wins << "  "
          << m.guarded_rounds << "\n";
    }
    double mean = 0;
    for (double r : regrets) mean += r;
    mean /= static_cast<double>(regrets.size());
    double var = 0;
    for (double r : regrets) var += (r - mean) * (r - mean);
    double stdev = regrets.size() > 1 ? std::sqrt(var / static_cast<double>(regrets.size() - 1)) : 0.0;
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
    s << "\nmean regret: " << format_number(mean) << "  std: " << format_number(stdev)
      << "  min roi slack over runs: " << format_number(worst_slack) << "\n";
    s << "runtime: " << format_number(elapsed.count()) << " s\n";

    write_text_file(cfg.out + "/summary.txt", s.str());
    std::cout << s.str();
    std::cout << "wrote " << results.size() << " trace file(s) to " << cfg.out << "\n";
    return 0;
}

int cmd_sweep(const CliOptions& opt) {
    auto started = std::chrono::steady_clock::now();
    ExperimentConfig cfg = load_with_overrides(opt);
    if (cfg.sweep_horizons.size() < 2)
        throw ConfigError({"sweep_horizons: sweep needs at least 2 horizons"});
    if (cfg.seeds.size() < 2) throw ConfigError({"seeds: sweep needs at least 2 seeds"});

    const std::size_t nh = cfg.sweep_horizons.size();
    const std::size_t ns = cfg.seeds.size();
    std::vector<Env> envs;
    std::vector<double> opts(nh);
    std::vector<std::string> notes(nh);
    for (std::size_t h = 0; h < nh; ++h) {
        envs.push_back(make_env(cfg.env, cfg.sweep_horizons[h]));
        auto bench = benchmark_opt(envs[h], cfg.payment, cfg.constraints.rho);
        opts[h] = bench.first;
        notes[h] = bench.second;
    }

    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out + ": " + ec.message());

    std::vector<double> regret(nh * ns);
    std::vector<double> slack(nh * ns);
    parallel_for(nh * ns, opt.threads, [&](std::size_t i) {
        std::size_t h = i / ns, sd = i % ns;
        long horizon = cfg.sweep_horizons[h];
        RunResult r = run_one(cfg, envs[h], horizon, cfg.seeds[sd], false);
        regret[i] = horizon * opts[h] - r.cum_objective;
        slack[i] = r.min_roi_slack;
    });

    std::vector<SweepPoint> points(nh);
    std::vector<double> hs(nh), means(nh);
    for (std::size_t h = 0; h < nh; ++h) {
        double mean = 0;
        for (std::size_t sd = 0; sd < ns; ++sd) mean += regret[h * ns + sd];
        mean /= static_cast<double>(ns);
        double var = 0;
        for (std::size_t sd = 0; sd < ns; ++sd) {
            double d = regret[h * ns + sd] - mean;
            var += d * d;
        }
        points[h] = {cfg.sweep_horizons[h], mean,
                     ns > 1 ? std::sqrt(var / static_cast<double>(ns - 1)) : 0.0,
                     static_cast<int>(ns)};
        hs[h] = static_cast<double>(cfg.sweep_horizons[h]);
        means[h] = mean;
    }
    SlopeFit fit = fit_loglog(hs, means);

    std::ostringstream csv;
    csv << "horizon,seeds,mean_regret,std_regret\n";
    for (const SweepPoint& p : points)
        csv << p.horizon << "," << p.seeds << "," << format_number(p.mean_regret) << ","
            << format_number(p.std_regret) << "\n";
    write_text_file(cfg.out + "/sweep.csv", csv.str());

    std::ostringstream s;
    s << "sweep summary\n";
    metadata_block(s, cfg, envs.front(), cfg.sweep_horizons.front(), opts.front(), notes.front());
    s << "\nhorizon  mean_regret  std_regret  per_round_opt\n";
    for (std::size_t h = 0; h < nh; ++h)
        s << points[h].horizon << "  " << format_number(points[h].mean_regret) << "  "
          << format_number(points[h].std_regret) << "  " << format_number(opts[h]) << "\n";
    s << "\nfitted log-log slope: " << format_number(fit.slope)
      << "  intercept: " << format_number(fit.intercept) << "  points: " << fit.points_used
      << "\n";
    for (const std::string& n : fit.notes) s << "note: " << n << "\n";
    double worst = std::numeric_limits<double>::infinity();
    for (double x : slack) worst = std::min(worst, x);
    s << "min roi slack over all runs: " << format_number(worst) << "\n";
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
    s << "runtime: " << format_number(elapsed.count()) << " s\n";
    write_text_file(cfg.out + "/sweep.txt", s.str());
    std::cout << s.str();
    return 0;
}

int cmd_oracle(const CliOptions& opt) {
    ExperimentConfig cfg = load_with_overrides(opt);
    Env env = make_env(cfg.env, cfg.horizon);
    double rho = cfg.constraints.rho;

    std::vector<double> bids = {0.0, 1.0};
    for (const Atom& a : env.atoms()) bids.push_back(a.d);
    std::sort(bids.begin(), bids.end());
    bids.erase(std::unique(bids.begin(), bids.end()), bids.end());
    std::vector<CandidateOutcome> cand;
    for (double b : bids) cand.push_back(expected_outcome_bid(env, b, cfg.payment));

    std::cout << "env: " << env.describe() << "\n";
    std::cout << "payment: " << payment_text(cfg.payment) << "  rho: " << format_number(rho)
              << "\n\nconstant-bid candidates:\n";
    for (std::size_t i = 0; i < bids.size(); ++i)
        std::cout << "  bid " << format_number(bids[i]) << ": value "
                  << format_number(cand[i].value) << "  payment " << format_number(cand[i].payment)
                  << "  roi " << format_number(cand[i].roi) << "\n";

    OptSolution sol = solve_opt(cand, rho);
    if (!sol.feasible) {
        std::cout << "\nno feasible constant-bid mixture\n";
    } else {
        std::cout << "\nbest constant-bid mixture: OPT " << format_number(sol.value)
                  << " per round\n";
        for (std::size_t i = 0; i < sol.support.size(); ++i)
            std::cout << "  bid " << format_number(bids[sol.support[i]]) << " w.p. "
                      << format_number(sol.weights[i]) << "\n";
        std::cout << "  budget " << (sol.budget_binding ? "binding" : "slack") << ", roi "
                  << (sol.roi_binding ? "binding" : "slack") << "\n";
    }

    auto [lp, note] = benchmark_opt(env, cfg.payment, rho);
    std::cout << "\nvalue-measurable benchmark: OPT " << format_number(lp) << " per round ("
              << note << ")\n";
    return 0;
}

int cmd_probe(const CliOptions& opt) {
    (void)opt;  // the default suite has no tunables; config is accepted for symmetry
    bool all = true;
    for (const ProbeResult& r : default_probe_suite()) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        all = all && r.passed;
    }
    if (!all) {
        std::cout << "probe failures above\n";
        return 3;
    }
    std::cout << "all probes passed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"repeated-auction bidding simulator"};
    app.require_subcommand(1);
    CliOptions opt;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", opt.config_path, "experiment config file (JSON)");
        if (config_required) c->required();
        sub->add_option("--seed", opt.seed, "override: run only this seed");
        sub->add_option("--out", opt.out, "override: output directory");
        sub->add_option("--threads", opt.threads, "worker threads")
            ->check(CLI::PositiveNumber);
    };

    CLI::App* run = app.add_subcommand("run", "trace CSV per seed plus a summary report");
    add_common(run, true);
    CLI::App* sweep =
        app.add_subcommand("sweep", "regret scaling over sweep_horizons x seeds");
    add_common(sweep, true);
    CLI::App* oracle = app.add_subcommand("oracle", "print the benchmark OPT report");
    add_common(oracle, true);
    CLI::App* probe = app.add_subcommand("probe", "run the invariant probe suites");
    add_common(probe, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(opt);
        if (sweep->parsed()) return cmd_sweep(opt);
        if (oracle->parsed()) return cmd_oracle(opt);
        return cmd_probe(opt);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    } catch (const invariant_error& e) {
        std::cerr << "invariant violated: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const std::length_error& e) {
        std::cerr << "capacity exceeded: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
