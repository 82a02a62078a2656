#include "bidsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "bidsim/oracle.hpp"

namespace bidsim {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::ostringstream out;
    out << "config invalid (" << problems.size()
        << (problems.size() == 1 ? " problem):" : " problems):");
    for (const std::string& p : problems) out << "\n  - " << p;
    return out.str();
}

const char* restart_name(TreePolicyConfig::Restart r) {
    switch (r) {
        case TreePolicyConfig::Restart::None: return "none";
        case TreePolicyConfig::Restart::Sparsified: return "sparsified";
        case TreePolicyConfig::Restart::Full: return "full";
    }
    return "sparsified";
}

// Collects every problem instead of stopping at the first, so a bad config
// is reported in one pass.
struct Parser {
    std::vector<std::string> problems;

    void bad(const std::string& where, const std::string& what) {
        problems.push_back(where + ": " + what);
    }

    void check_keys(const ordered_json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
        for (const auto& item : j.items()) {
            bool known = false;
            for (const char* k : allowed) known = known || item.key() == k;
            if (!known) bad(where, "unknown key \"" + item.key() + "\"");
        }
    }

    double num(const ordered_json& j, const std::string& where, const char* key, double def) {
        if (!j.contains(key)) return def;
        if (!j.at(key).is_number()) {
            bad(where + "." + key, "must be a number");
            return def;
        }
        return j.at(key).get<double>();
    }

    long integer(const ordered_json& j, const std::string& where, const char* key, long def) {
        if (!j.contains(key)) return def;
        if (!j.at(key).is_number_integer()) {
            bad(where + "." + key, "must be an integer");
            return def;
        }
        return j.at(key).get<long>();
    }

    bool boolean(const ordered_json& j, const std::string& where, const char* key, bool def) {
        if (!j.contains(key)) return def;
        if (!j.at(key).is_boolean()) {
            bad(where + "." + key, "must be a boolean");
            return def;
        }
        return j.at(key).get<bool>();
    }

    std::string str(const ordered_json& j, const std::string& where, const char* key,
                    const std::string& def) {
        if (!j.contains(key)) return def;
        if (!j.at(key).is_string()) {
            bad(where + "." + key, "must be a string");
            return def;
        }
        return j.at(key).get<std::string>();
    }

    std::vector<double> num_list(const ordered_json& j, const std::string& where,
                                 const char* key) {
        std::vector<double> out;
        if (!j.contains(key)) {
            bad(where, std::string("missing required list \"") + key + "\"");
            return out;
        }
        if (!j.at(key).is_array()) {
            bad(where + "." + key, "must be an array of numbers");
            return out;
        }
        for (const auto& x : j.at(key)) {
            if (!x.is_number()) {
                bad(where + "." + key, "must contain only numbers");
                return {};
            }
            out.push_back(x.get<double>());
        }
        return out;
    }
};

void parse_objective(Parser& p, const ordered_json& j, ExperimentConfig& cfg) {
    std::string kind = p.str(j, "objective", "kind", "value_max");
    if (kind == "value_max") {
        p.check_keys(j, "objective", {"kind"});
        cfg.objective = Objective::value_max();
    } else if (kind == "quasi_linear") {
        p.check_keys(j, "objective", {"kind", "nu"});
        double nu = p.num(j, "objective", "nu", 1.0);
        if (!(nu > 0.0)) {
            p.bad("objective.nu", "must be > 0");
        } else {
            cfg.objective = Objective::quasi_linear(nu);
        }
    } else {
        p.bad("objective.kind", "must be \"value_max\" or \"quasi_linear\"");
    }
}

void parse_payment(Parser& p, const ordered_json& j, ExperimentConfig& cfg) {
    std::string kind = p.str(j, "payment", "kind", "first");
    if (kind == "first") {
        p.check_keys(j, "payment", {"kind"});
        cfg.payment = PaymentRule::first();
    } else if (kind == "second") {
        p.check_keys(j, "payment", {"kind"});
        cfg.payment = PaymentRule::second();
    } else if (kind == "mixed") {
        p.check_keys(j, "payment", {"kind", "q"});
        double q = p.num(j, "payment", "q", -1.0);
        if (!(q > 0.0 && q < 1.0)) {
            p.bad("payment.q", "must be in (0,1)");
        } else {
            cfg.payment = PaymentRule::mixed(q);
        }
    } else {
        p.bad("payment.kind", "must be \"first\", \"second\" or \"mixed\"");
    }
}

void parse_env(Parser& p, const ordered_json& j, ExperimentConfig& cfg) {
    std::string kind = p.str(j, "env", "kind", "");
    if (kind == "discrete") {
        p.check_keys(j, "env", {"kind", "atoms"});
        cfg.env.kind = Env::Kind::DiscreteJoint;
        if (!j.contains("atoms") || !j.at("atoms").is_array() || j.at("atoms").empty()) {
            p.bad("env.atoms", "must be a nonempty array");
            return;
        }
        double sum = 0.0;
        for (const auto& a : j.at("atoms")) {
            if (!a.is_object()) {
                p.bad("env.atoms", "entries must be {v, d, p} objects");
                return;
            }
            p.check_keys(a, "env.atoms[]", {"v", "d", "p"});
            Atom atom;
            atom.v = p.num(a, "env.atoms[]", "v", -1.0);
            atom.d = p.num(a, "env.atoms[]", "d", -1.0);
            atom.p = p.num(a, "env.atoms[]", "p", -1.0);
            if (atom.v < 0.0 || atom.v > 1.0 || atom.d < 0.0 || atom.d > 1.0)
                p.bad("env.atoms[]", "v and d must lie in [0,1]");
            if (atom.p < 0.0) p.bad("env.atoms[].p", "must be >= 0");
            sum += atom.p;
            cfg.env.atoms.push_back(atom);
        }
        if (std::abs(sum - 1.0) > 1e-9) p.bad("env.atoms", "probabilities must sum to 1");
    } else if (kind == "product") {
        p.check_keys(j, "env", {"kind", "values", "value_probs", "ds", "d_probs"});
        cfg.env.kind = Env::Kind::Product;
        cfg.env.values = p.num_list(j, "env", "values");
        cfg.env.value_probs = p.num_list(j, "env", "value_probs");
        cfg.env.ds = p.num_list(j, "env", "ds");
        cfg.env.d_probs = p.num_list(j, "env", "d_probs");
        if (cfg.env.values.size() != cfg.env.value_probs.size())
            p.bad("env", "values and value_probs must have the same length");
        if (cfg.env.ds.size() != cfg.env.d_probs.size())
            p.bad("env", "ds and d_probs must have the same length");
        if (cfg.env.values.empty()) p.bad("env.values", "must be nonempty");
        if (cfg.env.ds.empty()) p.bad("env.ds", "must be nonempty");
    } else if (kind == "tight_beta") {
        p.check_keys(j, "env", {"kind", "beta"});
        cfg.env.kind = Env::Kind::TightBeta;
        cfg.env.beta = p.num(j, "env", "beta", 0.25);
        if (!(cfg.env.beta > 0.0 && cfg.env.beta <= 0.5))
            p.bad("env.beta", "must be in (0, 0.5]");
    } else if (kind == "bandit_lb") {
        p.check_keys(j, "env", {"kind", "perturb"});
        cfg.env.kind = Env::Kind::BanditLB;
        cfg.env.perturb = static_cast<int>(p.integer(j, "env", "perturb", -1));
        if (cfg.env.perturb < -1) p.bad("env.perturb", "must be -1 (base) or a bucket index");
    } else {
        p.bad("env.kind",
              "must be \"discrete\", \"product\", \"tight_beta\" or \"bandit_lb\"");
    }
}

void parse_restart(Parser& p, const ordered_json& j, const std::string& where,
                   TreePolicyConfig::Restart& out) {
    std::string s = p.str(j, where, "restart", "sparsified");
    if (s == "none") {
        out = TreePolicyConfig::Restart::None;
    } else if (s == "sparsified") {
        out = TreePolicyConfig::Restart::Sparsified;
    } else if (s == "full") {
        out = TreePolicyConfig::Restart::Full;
    } else {
        p.bad(where + ".restart", "must be \"none\", \"sparsified\" or \"full\"");
    }
}

void parse_policy(Parser& p, const ordered_json& j, ExperimentConfig& cfg) {
    std::string kind = p.str(j, "policy", "kind", "");
    if (kind == "tree") {
        p.check_keys(j, "policy", {"kind", "lipschitz", "depth_cap", "size_cap", "restart"});
        cfg.policy.kind = PolicyConfig::Kind::Tree;
        cfg.policy.tree.lipschitz = static_cast<int>(p.integer(j, "policy", "lipschitz", 1));
        cfg.policy.tree.depth_cap = static_cast<int>(p.integer(j, "policy", "depth_cap", 3));
        long cap = p.integer(j, "policy", "size_cap", 1'000'000);
        if (cfg.policy.tree.lipschitz < 1) p.bad("policy.lipschitz", "must be an integer >= 1");
        if (cfg.policy.tree.depth_cap < 0) p.bad("policy.depth_cap", "must be >= 0");
        if (cap < 1) p.bad("policy.size_cap", "must be >= 1");
        cfg.policy.tree.size_cap = static_cast<std::uint64_t>(std::max(cap, 1L));
        parse_restart(p, j, "policy", cfg.policy.tree.restart);
    } else if (kind == "poly") {
        p.check_keys(j, "policy",
                     {"kind", "lipschitz", "buckets", "bids", "bucket_cap", "bid_cap", "restart"});
        cfg.policy.kind = PolicyConfig::Kind::Poly;
        cfg.policy.poly.lipschitz = p.num(j, "policy", "lipschitz", 1.0);
        cfg.policy.poly.buckets = static_cast<int>(p.integer(j, "policy", "buckets", 0));
        cfg.policy.poly.bids = static_cast<int>(p.integer(j, "policy", "bids", 0));
        cfg.policy.poly.bucket_cap = static_cast<int>(p.integer(j, "policy", "bucket_cap", 64));
        cfg.policy.poly.bid_cap = static_cast<int>(p.integer(j, "policy", "bid_cap", 64));
        if (!(cfg.policy.poly.lipschitz > 0.0)) p.bad("policy.lipschitz", "must be > 0");
        if (cfg.policy.poly.buckets < 0) p.bad("policy.buckets", "must be >= 0 (0 = auto)");
        if (cfg.policy.poly.bids < 0) p.bad("policy.bids", "must be >= 0 (0 = auto)");
        if (cfg.policy.poly.bucket_cap < 1) p.bad("policy.bucket_cap", "must be >= 1");
        if (cfg.policy.poly.bid_cap < 1) p.bad("policy.bid_cap", "must be >= 1");
        parse_restart(p, j, "policy", cfg.policy.poly.restart);
    } else if (kind == "bucket_bandit") {
        p.check_keys(j, "policy", {"kind", "lipschitz", "buckets", "bids"});
        cfg.policy.kind = PolicyConfig::Kind::BucketBandit;
        cfg.policy.bucket.lipschitz = p.num(j, "policy", "lipschitz", 1.0);
        cfg.policy.bucket.buckets = static_cast<int>(p.integer(j, "policy", "buckets", 0));
        cfg.policy.bucket.bids = static_cast<int>(p.integer(j, "policy", "bids", 0));
        if (!(cfg.policy.bucket.lipschitz > 0.0)) p.bad("policy.lipschitz", "must be > 0");
        if (cfg.policy.bucket.buckets < 0) p.bad("policy.buckets", "must be >= 0 (0 = auto)");
        if (cfg.policy.bucket.bids < 0) p.bad("policy.bids", "must be >= 0 (0 = auto)");
    } else if (kind == "fixed") {
        p.check_keys(j, "policy", {"kind", "bid"});
        cfg.policy.kind = PolicyConfig::Kind::Fixed;
        cfg.policy.fixed_bid = p.num(j, "policy", "bid", -1.0);
        if (!(cfg.policy.fixed_bid >= 0.0 && cfg.policy.fixed_bid <= 1.0))
            p.bad("policy.bid", "must lie in [0,1]");
    } else {
        p.bad("policy.kind", "must be \"tree\", \"poly\", \"bucket_bandit\" or \"fixed\"");
    }
}

}  // namespace

ConfigError::ConfigError(const std::vector<std::string>& problems)
    : std::runtime_error(join_problems(problems)), problems(problems) {}

ExperimentConfig parse_config(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError({std::string("not valid JSON: ") + e.what()});
    }
    if (!j.is_object()) throw ConfigError({"top level must be an object"});

    Parser p;
    ExperimentConfig cfg;
    p.check_keys(j, "config",
                 {"horizon", "seeds", "out", "objective", "payment", "constraints", "dual", "env",
                  "policy", "sweep_horizons"});

    cfg.horizon = p.integer(j, "config", "horizon", 1000);
    if (cfg.horizon < 1) p.bad("horizon", "must be >= 1");

    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        cfg.seeds.clear();
        if (s.is_array()) {
            for (const auto& x : s) {
                if (!x.is_number_integer() || x.get<long long>() < 0) {
                    p.bad("seeds", "must contain only nonnegative integers");
                    break;
                }
                cfg.seeds.push_back(x.get<std::uint64_t>());
            }
            if (cfg.seeds.empty()) p.bad("seeds", "must be nonempty");
        } else if (s.is_object()) {
            p.check_keys(s, "seeds", {"count", "base"});
            long count = p.integer(s, "seeds", "count", 0);
            long base = p.integer(s, "seeds", "base", 1);
            if (count < 1 || base < 0) {
                p.bad("seeds", "count must be >= 1 and base >= 0");
            } else {
                for (long i = 0; i < count; ++i)
                    cfg.seeds.push_back(static_cast<std::uint64_t>(base + i));
            }
        } else {
            p.bad("seeds", "must be an array or {count, base}");
        }
    }

    cfg.out = p.str(j, "config", "out", cfg.out);

    if (j.contains("objective")) {
        if (j.at("objective").is_object()) {
            parse_objective(p, j.at("objective"), cfg);
        } else {
            p.bad("objective", "must be an object");
        }
    }
    if (j.contains("payment")) {
        if (j.at("payment").is_object()) {
            parse_payment(p, j.at("payment"), cfg);
        } else {
            p.bad("payment", "must be an object");
        }
    }
    if (j.contains("constraints")) {
        const auto& c = j.at("constraints");
        if (c.is_object()) {
            p.check_keys(c, "constraints", {"rho", "exact_roi"});
            cfg.constraints.rho = p.num(c, "constraints", "rho", 1.0);
            cfg.constraints.exact_roi = p.boolean(c, "constraints", "exact_roi", false);
            if (!(cfg.constraints.rho > 0.0)) p.bad("constraints.rho", "must be > 0");
        } else {
            p.bad("constraints", "must be an object");
        }
    }
    if (j.contains("dual")) {
        const auto& d = j.at("dual");
        if (d.is_object()) {
            p.check_keys(d, "dual", {"eta", "cap", "expected_gradient"});
            cfg.dual.eta = p.num(d, "dual", "eta", 0.0);
            if (cfg.dual.eta < 0.0) p.bad("dual.eta", "must be >= 0 (0 = 1/sqrt(T))");
            if (d.contains("cap") && !d.at("cap").is_null()) {
                double cap = p.num(d, "dual", "cap", 0.0);
                if (!(cap > 0.0)) {
                    p.bad("dual.cap", "must be > 0 or null (no cap)");
                } else {
                    cfg.dual.cap = cap;
                }
            }
            cfg.dual.expected_gradient = p.boolean(d, "dual", "expected_gradient", false);
        } else {
            p.bad("dual", "must be an object");
        }
    }

    if (!j.contains("env")) {
        p.bad("env", "missing");
    } else if (j.at("env").is_object()) {
        parse_env(p, j.at("env"), cfg);
    } else {
        p.bad("env", "must be an object");
    }
    if (!j.contains("policy")) {
        p.bad("policy", "missing");
    } else if (j.at("policy").is_object()) {
        parse_policy(p, j.at("policy"), cfg);
    } else {
        p.bad("policy", "must be an object");
    }

    if (j.contains("sweep_horizons")) {
        const auto& s = j.at("sweep_horizons");
        if (!s.is_array()) {
            p.bad("sweep_horizons", "must be an array of integers");
        } else {
            for (const auto& x : s) {
                if (!x.is_number_integer() || x.get<long>() < 1) {
                    p.bad("sweep_horizons", "must contain integers >= 1");
                    break;
                }
                cfg.sweep_horizons.push_back(x.get<long>());
            }
        }
    }

    if (!p.problems.empty()) throw ConfigError(p.problems);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed reading config file: " + path);
    return parse_config(buf.str());
}

std::string render_config(const ExperimentConfig& cfg) {
    ordered_json j;
    j["horizon"] = cfg.horizon;
    j["seeds"] = cfg.seeds;
    j["out"] = cfg.out;

    ordered_json obj;
    if (cfg.objective.kind == Objective::Kind::ValueMax) {
        obj["kind"] = "value_max";
    } else {
        obj["kind"] = "quasi_linear";
        obj["nu"] = cfg.objective.nu;
    }
    j["objective"] = obj;

    ordered_json pay;
    switch (cfg.payment.kind) {
        case PaymentRule::Kind::First: pay["kind"] = "first"; break;
        case PaymentRule::Kind::Second: pay["kind"] = "second"; break;
        case PaymentRule::Kind::Mixed:
            pay["kind"] = "mixed";
            pay["q"] = cfg.payment.q;
            break;
    }
    j["payment"] = pay;

    ordered_json cons;
    cons["rho"] = cfg.constraints.rho;
    cons["exact_roi"] = cfg.constraints.exact_roi;
    j["constraints"] = cons;

    ordered_json dual;
    dual["eta"] = cfg.dual.eta;
    if (std::isfinite(cfg.dual.cap)) {
        dual["cap"] = cfg.dual.cap;
    } else {
        dual["cap"] = nullptr;
    }
    dual["expected_gradient"] = cfg.dual.expected_gradient;
    j["dual"] = dual;

    ordered_json env;
    switch (cfg.env.kind) {
        case Env::Kind::DiscreteJoint: {
            env["kind"] = "discrete";
            ordered_json atoms = ordered_json::array();
            for (const Atom& a : cfg.env.atoms) {
                ordered_json atom;
                atom["v"] = a.v;
                atom["d"] = a.d;
                atom["p"] = a.p;
                atoms.push_back(atom);
            }
            env["atoms"] = atoms;
            break;
        }
        case Env::Kind::Product:
            env["kind"] = "product";
            env["values"] = cfg.env.values;
            env["value_probs"] = cfg.env.value_probs;
            env["ds"] = cfg.env.ds;
            env["d_probs"] = cfg.env.d_probs;
            break;
        case Env::Kind::TightBeta:
            env["kind"] = "tight_beta";
            env["beta"] = cfg.env.beta;
            break;
        case Env::Kind::BanditLB:
            env["kind"] = "bandit_lb";
            env["perturb"] = cfg.env.perturb;
            break;
    }
    j["env"] = env;

    ordered_json pol;
    switch (cfg.policy.kind) {
        case PolicyConfig::Kind::Tree:
            pol["kind"] = "tree";
            pol["lipschitz"] = cfg.policy.tree.lipschitz;
            pol["depth_cap"] = cfg.policy.tree.depth_cap;
            pol["size_cap"] = cfg.policy.tree.size_cap;
            pol["restart"] = restart_name(cfg.policy.tree.restart);
            break;
        case PolicyConfig::Kind::Poly:
            pol["kind"] = "poly";
            pol["lipschitz"] = cfg.policy.poly.lipschitz;
            pol["buckets"] = cfg.policy.poly.buckets;
            pol["bids"] = cfg.policy.poly.bids;
            pol["bucket_cap"] = cfg.policy.poly.bucket_cap;
            pol["bid_cap"] = cfg.policy.poly.bid_cap;
            pol["restart"] = restart_name(cfg.policy.poly.restart);
            break;
        case PolicyConfig::Kind::BucketBandit:
            pol["kind"] = "bucket_bandit";
            pol["lipschitz"] = cfg.policy.bucket.lipschitz;
            pol["buckets"] = cfg.policy.bucket.buckets;
            pol["bids"] = cfg.policy.bucket.bids;
            break;
        case PolicyConfig::Kind::Fixed:
            pol["kind"] = "fixed";
            pol["bid"] = cfg.policy.fixed_bid;
            break;
    }
    j["policy"] = pol;

    j["sweep_horizons"] = cfg.sweep_horizons;
    return j.dump(2) + "\n";
}

Env make_env(const EnvConfig& env, long horizon) {
    switch (env.kind) {
        case Env::Kind::DiscreteJoint: return Env::discrete(env.atoms);
        case Env::Kind::Product:
            return Env::product(env.values, env.value_probs, env.ds, env.d_probs);
        case Env::Kind::TightBeta: return Env::tight_beta(env.beta);
        case Env::Kind::BanditLB: return Env::bandit_lb(horizon, env.perturb);
    }
    throw std::logic_error("make_env: bad kind");
}

std::unique_ptr<Policy> make_policy(const PolicyConfig& policy, const PaymentRule& rule,
                                    long horizon) {
    switch (policy.kind) {
        case PolicyConfig::Kind::Tree:
            return std::make_unique<TreePolicy>(policy.tree, rule, horizon);
        case PolicyConfig::Kind::Poly:
            return std::make_unique<PolyPolicy>(policy.poly, rule, horizon);
        case PolicyConfig::Kind::BucketBandit:
            return std::make_unique<BucketBanditPolicy>(policy.bucket, rule, horizon);
        case PolicyConfig::Kind::Fixed: {
            double b = policy.fixed_bid;
            char label[48];
            std::snprintf(label, sizeof(label), "fixed bid %.12g", b);
            return std::make_unique<FixedFunctionPolicy>([b](double) { return b; }, rule, label);
        }
    }
    throw std::logic_error("make_policy: bad kind");
}

std::pair<double, std::string> benchmark_opt(const Env& env, const PaymentRule& rule, double rho) {
    std::vector<double> bids = {0.0};
    for (const Atom& a : env.atoms()) bids.push_back(a.d);
    std::sort(bids.begin(), bids.end());
    bids.erase(std::unique(bids.begin(), bids.end()), bids.end());
    // Bids between competing-bid atoms win the same auctions at no lower
    // price, so this grid spans every deterministic value-measurable choice
    // and the LP over it is the exact benchmark.
    try {
        return {product_opt(env, bids, rule, rho), "per-value bid LP over competing-bid atoms"};
    } catch (const std::length_error&) {
        if (std::find(bids.begin(), bids.end(), 1.0) == bids.end()) bids.push_back(1.0);
        std::vector<CandidateOutcome> cand;
        cand.reserve(bids.size());
        for (double b : bids) cand.push_back(expected_outcome_bid(env, b, rule));
        OptSolution s = solve_opt(cand, rho);
        return {s.value, "constant-bid mixture LP (per-value LP over the capacity cap)"};
    }
}

}  // namespace bidsim
