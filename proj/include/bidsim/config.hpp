#pragma once

// Experiment configuration: JSON in, validated structs out, canonical JSON
// back (parse(render(c)) == c, pinned by golden files). All validation
// problems are collected into one ConfigError so a bad file is reported in
// a single pass.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bidsim/environments.hpp"
#include "bidsim/orchestrator.hpp"
#include "bidsim/policies.hpp"

namespace bidsim {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::vector<std::string>& problems);
    std::vector<std::string> problems;
};

// File-system problems (missing config, unwritable output); the CLI maps
// this to a different exit code than validation errors.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EnvConfig {
    Env::Kind kind = Env::Kind::TightBeta;
    std::vector<Atom> atoms;  // DiscreteJoint
    std::vector<double> values, value_probs, ds, d_probs;  // Product
    double beta = 0.25;       // TightBeta
    int perturb = -1;         // BanditLB; horizon comes from the run
};

struct PolicyConfig {
    enum class Kind { Tree, Poly, BucketBandit, Fixed };
    Kind kind = Kind::Tree;
    TreePolicyConfig tree;
    PolyPolicyConfig poly;
    BucketBanditConfig bucket;
    double fixed_bid = 0.0;
};

struct ExperimentConfig {
    EnvConfig env;
    PolicyConfig policy;
    Objective objective = Objective::value_max();
    PaymentRule payment = PaymentRule::first();
    ConstraintSpec constraints;
    DualConfig dual;
    long horizon = 1000;
    std::vector<std::uint64_t> seeds = {1};
    std::vector<long> sweep_horizons;
    std::string out = "runs";
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);  // throws ConfigError / runtime_error (I/O)
std::string render_config(const ExperimentConfig& cfg);

Env make_env(const EnvConfig& env, long horizon);
std::unique_ptr<Policy> make_policy(const PolicyConfig& policy, const PaymentRule& rule,
                                    long horizon);

// The benchmark the harness reports regret against: the per-value bid LP
// over the competing-bid atoms (exact for finite-support environments),
// falling back to the best constant-bid mixture when the LP basis count
// exceeds its cap. Second element names which one was used (run metadata).
std::pair<double, std::string> benchmark_opt(const Env& env, const PaymentRule& rule, double rho);

}  // namespace bidsim
