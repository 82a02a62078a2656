#include "bidsim/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <memory>

#include <Eigen/Dense>

#include "bidsim/core.hpp"
#include "bidsim/covers.hpp"
#include "bidsim/environments.hpp"
#include "bidsim/learners.hpp"
#include "bidsim/policies.hpp"
#include "bidsim/rng.hpp"

namespace bidsim {
namespace {

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

PaymentRule random_rule(std::mt19937_64& g) {
    switch (g() % 3) {
        case 0: return PaymentRule::first();
        case 1: return PaymentRule::second();
        default: return PaymentRule::mixed(0.05 + 0.9 * u01(g));
    }
}

}  // namespace

ProbeResult probe_safe_bids(int tuples, int d_grid, std::uint64_t seed) {
    auto g = make_stream(seed, 100);
    long violations = 0;
    std::string first;
    auto note = [&](const std::string& s) {
        ++violations;
        if (first.empty()) first = s;
    };
    for (int i = 0; i < tuples; ++i) {
        PaymentRule rule = random_rule(g);
        double v = u01(g);
        double b = u01(g);
        double chi = 0.05 + 2.95 * u01(g);
        double psi = 3.0 * u01(g);
        if (g() % 8 == 0 && psi > 0.0) b = std::min(1.0, chi * v / psi);  // guard boundary
        double sb = safe_bid(rule, v, chi, psi);
        double gb = guarded_bid(rule, v, chi, psi, b);
        bool fired = psi * b > chi * v;
        if (fired ? gb != sb : gb != b)
            note(fmt("guard mismatch: v=%g chi=%g psi=%g b=%g gb=%g", v, chi, psi, b, gb));
        for (int j = 0; j <= d_grid + 2; ++j) {
            double d = j <= d_grid ? static_cast<double>(j) / d_grid : (j == d_grid + 1 ? b : gb);
            double r_gb = scaled_reward(rule, chi, psi, v, gb, d);
            double r_sb = scaled_reward(rule, chi, psi, v, sb, d);
            if (r_gb < -1e-12)
                note(fmt("guarded bid went negative: v=%g chi=%g psi=%g gb=%g d=%g r=%g", v, chi,
                         psi, gb, d, r_gb));
            if (r_sb < -1e-12)
                note(fmt("safe bid went negative: v=%g chi=%g psi=%g sb=%g d=%g r=%g", v, chi, psi,
                         sb, d, r_sb));
            if (fired && r_sb < scaled_reward(rule, chi, psi, v, b, d) - 1e-12)
                note(fmt("safe bid fails to dominate risky bid: v=%g chi=%g psi=%g b=%g d=%g", v,
                         chi, psi, b, d));
        }
    }
    ProbeResult res;
    res.name = "safe-bids";
    res.passed = violations == 0;
    res.detail = violations == 0 ? fmt("%d tuples x %d competing bids, no violations", tuples,
                                       d_grid + 3)
                                 : fmt("%ld violations; first: %s", violations, first.c_str());
    return res;
}

ProbeResult probe_hedge_prefix_bound(int instances, long horizon, int actions, double delta,
                                     std::uint64_t seed) {
    const long T = horizon;
    const int K = actions;
    const double bound_coef = 4.0 * std::sqrt(static_cast<double>(T) * delta * std::log(K));
    double worst_slack = std::numeric_limits<double>::infinity();
    long violations = 0;
    std::string first;
    for (int inst = 0; inst < instances; ++inst) {
        auto g = make_stream(seed, 200 + static_cast<std::uint64_t>(inst));
        HedgeLearner h(K, T, delta);
        const int good = inst % K;
        const int reward_mode = inst % 4;
        const int u_mode = (inst / 4) % 4;
        double u = 1.0;
        Eigen::ArrayXd cum = Eigen::ArrayXd::Zero(K);
        double alg = 0.0;
        for (long t = 1; t <= T; ++t) {
            switch (u_mode) {
                case 0: break;  // constant 1
                case 1: u = std::max(u, 1.0 + 4.0 * u01(g)); break;
                case 2: u = std::min(5.0, u + 12.0 * u01(g) / T); break;
                default:
                    if (t == T / 3) u = 5.0;
                    break;
            }
            const Eigen::VectorXd& p = h.step(u);
            Eigen::VectorXd r(K);
            switch (reward_mode) {
                case 0:
                    for (int a = 0; a < K; ++a) r[a] = u * u01(g);
                    break;
                case 1: {  // punish the learner's current favorite
                    Eigen::Index top;
                    p.maxCoeff(&top);
                    for (int a = 0; a < K; ++a) r[a] = a == top ? 0.0 : u;
                    break;
                }
                case 2: {  // slowly rotating favorite
                    int fav = static_cast<int>((7 * t / T) % K);
                    for (int a = 0; a < K; ++a) r[a] = a == fav ? u : 0.1 * u * u01(g);
                    break;
                }
                default: {  // sparse spikes
                    r.setZero();
                    r[static_cast<int>(g() % K)] = u;
                    break;
                }
            }
            r[good] = std::max(r[good], r.maxCoeff() - delta * u);
            alg += p.dot(r);
            h.update(r);
            cum += r.array();
            double regret = cum.maxCoeff() - alg;
            double bound = bound_coef * u + 1e-9;
            worst_slack = std::min(worst_slack, bound - regret);
            if (regret > bound && violations++ == 0)
                first = fmt("instance %d round %ld: regret %.6f > bound %.6f (u=%.3f)", inst, t,
                            regret, bound, u);
        }
    }
    ProbeResult res;
    res.name = "hedge-prefix-bound";
    res.passed = violations == 0;
    res.detail = violations == 0
                     ? fmt("%d instances, T=%ld K=%d delta=%g, min slack %.4f", instances, T, K,
                           delta, worst_slack)
                     : fmt("%ld prefix violations; first: %s", violations, first.c_str());
    return res;
}

ProbeResult probe_interval_meta_bound(int instances, long horizon, int actions,
                                      std::uint64_t seed) {
    const long T = horizon;
    const int K = actions;
    const double coef = 4.0 * (std::sqrt(static_cast<double>(T) * std::log(static_cast<double>(T))) +
                               std::sqrt(static_cast<double>(T) * std::log(K)));
    double worst_slack = std::numeric_limits<double>::infinity();
    long violations = 0;
    std::string first;
    for (int inst = 0; inst < instances; ++inst) {
        auto g = make_stream(seed, 300 + static_cast<std::uint64_t>(inst));
        IntervalMeta<HedgeSub> meta(full_starts(T), T,
                                    [&](long) { return HedgeSub{HedgeLearner(K, T, 1.0)}; });
        Eigen::MatrixXd rewards(T, K), play(T, K);
        Eigen::VectorXd us(T);
        double u = 1.0;
        int fav = static_cast<int>(g() % K);
        for (long t = 1; t <= T; ++t) {
            if (u01(g) < 8.0 / T) fav = static_cast<int>(g() % K);  // ~8 regime switches
            if (u01(g) < 0.3) u = std::max(u, 1.0 + 4.0 * u01(g));
            const Eigen::VectorXd& q = meta.step(u);
            Eigen::VectorXd r(K);
            switch (inst % 3) {
                case 0:
                    for (int a = 0; a < K; ++a)
                        r[a] = a == fav ? u * (0.7 + 0.3 * u01(g)) : 0.2 * u * u01(g);
                    break;
                case 1: {  // punish the meta's favorite
                    Eigen::Index top;
                    q.maxCoeff(&top);
                    for (int a = 0; a < K; ++a) r[a] = a == top ? 0.0 : u;
                    break;
                }
                default:
                    for (int a = 0; a < K; ++a) r[a] = u * u01(g);
                    break;
            }
            rewards.row(t - 1) = r.transpose();
            play.row(t - 1) = q.transpose();
            us[t - 1] = u;
            meta.update(r);
        }
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(T + 1, K);
        Eigen::VectorXd a = Eigen::VectorXd::Zero(T + 1);
        for (long t = 1; t <= T; ++t) {
            s.row(t) = s.row(t - 1) + rewards.row(t - 1);
            a[t] = a[t - 1] + play.row(t - 1).dot(rewards.row(t - 1));
        }
        for (long t2 = 1; t2 <= T; ++t2) {
            double bound = coef * us[t2 - 1] + 1e-9;
            for (long t1 = 1; t1 <= t2; ++t1) {
                double reg = (s.row(t2) - s.row(t1 - 1)).maxCoeff() - (a[t2] - a[t1 - 1]);
                worst_slack = std::min(worst_slack, bound - reg);
                if (reg > bound && violations++ == 0)
                    first = fmt("instance %d interval [%ld,%ld]: regret %.6f > bound %.6f", inst,
                                t1, t2, reg, bound);
            }
        }
    }
    ProbeResult res;
    res.name = "interval-meta-bound";
    res.passed = violations == 0;
    res.detail = violations == 0 ? fmt("%d instances, T=%ld K=%d, all intervals, min slack %.4f",
                                       instances, T, K, worst_slack)
                                 : fmt("%ld interval violations; first: %s", violations,
                                       first.c_str());
    return res;
}

ProbeResult probe_cover_domination(int functions, int max_level, const std::vector<int>& ls,
                                   std::uint64_t seed) {
    auto g = make_stream(seed, 400);
    constexpr int kKnots = 128;  // knot spacing divides every cell sample grid
    long violations = 0, checked = 0;
    std::string first;
    auto note = [&](const std::string& s) {
        ++violations;
        if (first.empty()) first = s;
    };
    for (int lip : ls) {
        for (int level = 1; level <= max_level; ++level) {
            CoverGrid grid = make_grid(lip, level);
            for (int i = 0; i < functions; ++i) {
                std::vector<double> y(kKnots + 1);
                y[0] = u01(g);
                for (int j = 1; j <= kKnots; ++j) {
                    double slope = lip * (2.0 * u01(g) - 1.0);
                    y[j] = std::clamp(y[j - 1] + slope / kKnots, 0.0, 1.0);
                }
                auto f = [&y](double v) {
                    double x = v * kKnots;
                    int j = std::min(static_cast<int>(x), kKnots - 1);
                    return y[j] + (x - j) * (y[j + 1] - y[j]);
                };
                CoverFunction w = dominate(f, grid);
                if (!is_member(w, grid))
                    note(fmt("witness not a member: L=%d level=%d fn=%d", lip, level, i));
                for (int j = 0; j <= 2 * kKnots; ++j) {
                    double v = j / (2.0 * kKnots);
                    double fv = f(v), wv = w(v, grid);
                    ++checked;
                    if (wv < fv - 1e-12)
                        note(fmt("witness below f: L=%d level=%d v=%g f=%g w=%g", lip, level, v,
                                 fv, wv));
                    if (wv > fv + grid.accuracy + 1e-12)
                        note(fmt("witness too far above f: L=%d level=%d v=%g f=%g w=%g acc=%g",
                                 lip, level, v, fv, wv, grid.accuracy));
                }
            }
        }
    }
    ProbeResult res;
    res.name = "cover-domination";
    res.passed = violations == 0;
    res.detail = violations == 0
                     ? fmt("%d functions per (L, level), %ld point checks, no violations",
                           functions, checked)
                     : fmt("%ld violations; first: %s", violations, first.c_str());
    return res;
}

ProbeResult probe_tree_structure(int lipschitz, int depth, int deep_levels) {
    CoverTree tree = build_tree(lipschitz, depth);
    long violations = 0;
    std::string first;
    auto note = [&](const std::string& s) {
        ++violations;
        if (first.empty()) first = s;
    };
    for (int id = 0; id < tree.node_count(); ++id) {
        const TreeNode& n = tree.nodes[id];
        const CoverSet& lvl = tree.levels[n.level];
        if (!is_member(lvl.fns[n.fn], lvl.grid)) note(fmt("node %d not a cover member", id));
        if (id == 0) {
            if (n.level != 0 || n.parent != -1) note("root must be the level-0 node");
            continue;
        }
        const TreeNode& par = tree.nodes[n.parent];
        if (par.level != n.level - 1) note(fmt("node %d parent level mismatch", id));
        const CoverGrid& fine = lvl.grid;
        const CoverGrid& coarse = tree.levels[par.level].grid;
        const CoverFunction& cf = lvl.fns[n.fn];
        const CoverFunction& pf = tree.levels[par.level].fns[par.fn];
        double dist = 0.0;
        bool dominates = true;
        for (int c = 0; c < fine.cells; ++c) {
            double v = std::min((c + 0.5) * fine.dv, 1.0);
            double pv = pf.value_at_cell(coarse.cell_of(v), coarse);
            double cv = cf.value_at_cell(c, fine);
            dist = std::max(dist, std::abs(cv - pv));
            dominates = dominates && pv >= cv - 1e-12;
        }
        if (!dominates) note(fmt("parent of node %d does not dominate it", id));
        if (dist > std::pow(2.0, 1 - n.level) + 1e-12)
            note(fmt("node %d parent distance %.6f > %.6f", id, dist,
                     std::pow(2.0, 1 - n.level)));
    }
    const CoverGrid& lg = tree.leaf_grid();
    for (int id = 0; id < tree.node_count(); ++id) {
        const TreeNode& n = tree.nodes[id];
        double span = 0.0;
        for (int c = 0; c < lg.cells; ++c) {
            std::uint64_t mask = n.leaf_levels[c];
            if (mask == 0) {
                note(fmt("node %d has no leaf bid at cell %d", id, c));
                continue;
            }
            int hi = 63 - __builtin_clzll(mask);
            int lo = __builtin_ctzll(mask);
            span = std::max(span, (hi - lo) * lg.db);
        }
        if (span > std::pow(2.0, 3 - n.level) + 1e-12)
            note(fmt("node %d leaf span %.6f > %.6f", id, span, std::pow(2.0, 3 - n.level)));
    }
    // The parent rule is local: a coarse cell's value depends only on the two
    // fine values inside it, so enumerating every (value, step) window checks
    // the rule for every member of every cover, including levels far too
    // large to materialize.
    for (int i = 2; i <= deep_levels; ++i) {
        CoverGrid fine = make_grid(lipschitz, i);
        CoverGrid coarse = make_grid(lipschitz, i - 1);
        for (int a = 0; a < fine.bid_levels; ++a) {
            for (int s1 = -1; s1 <= 1; ++s1) {
                for (int s2 = -1; s2 <= 1; ++s2) {
                    for (int s3 = -1; s3 <= 1; ++s3) {
                        int b = a + s1, c = a + s1 + s2, d = a + s1 + s2 + s3;
                        if (std::min({b, c, d}) < 0 ||
                            std::max({b, c, d}) >= fine.bid_levels)
                            continue;
                        CoverFunction f;
                        f.idx.assign(fine.cells, static_cast<std::uint16_t>(d));
                        f.idx[0] = static_cast<std::uint16_t>(a);
                        f.idx[1] = static_cast<std::uint16_t>(b);
                        f.idx[2] = static_cast<std::uint16_t>(c);
                        CoverFunction p = coarsen(f, fine, coarse);
                        if (!is_member(p, coarse))
                            note(fmt("coarsening not a member at level %d", i));
                        double worst = 0.0;
                        for (int cc = 0; cc < fine.cells; ++cc) {
                            double pv = p.value_at_cell(cc / 2, coarse);
                            double cv = f.value_at_cell(cc, fine);
                            if (pv < cv - 1e-12)
                                note(fmt("coarsening fails to dominate at level %d", i));
                            worst = std::max(worst, pv - cv);
                        }
                        if (worst > std::pow(2.0, 1 - i) + 1e-12)
                            note(fmt("coarsening distance %.6f > %.6f at level %d", worst,
                                     std::pow(2.0, 1 - i), i));
                    }
                }
            }
        }
    }
    ProbeResult res;
    res.name = fmt("tree-structure-L%d-M%d", lipschitz, depth);
    res.passed = violations == 0;
    res.detail = violations == 0
                     ? fmt("%d nodes checked; parent rule exhaustive to level %d",
                           tree.node_count(), deep_levels)
                     : fmt("%ld violations; first: %s", violations, first.c_str());
    return res;
}

ProbeResult probe_tree_goodness(int rounds, std::uint64_t seed) {
    auto g = make_stream(seed, 500);
    CoverTree tree = build_tree(1, 2);
    long violations = 0, checks = 0;
    std::string first;
    auto note = [&](const std::string& s) {
        ++violations;
        if (first.empty()) first = s;
    };
    for (int it = 0; it < rounds; ++it) {
        PaymentRule rule = random_rule(g);
        double v = u01(g);
        ScaleParams s;
        s.chi = 1.0 + 2.0 * u01(g);
        s.psi = 3.0 * u01(g);
        s.u_cap = std::max({1.0, s.chi, s.psi});
        TreeRoundContext ctx = make_round_context(tree, v, s, rule);
        std::vector<double> dgrid;
        for (int j = 0; j <= 40; ++j) dgrid.push_back(j / 40.0);
        for (double b : ctx.guarded_by_level) dgrid.push_back(b);
        for (double b : ctx.guarded_by_level) {
            for (double d : dgrid) {
                double r = scaled_reward(rule, s.chi, s.psi, v, b, d);
                if (r < -1e-12 || r > s.u_cap + 1e-9)
                    note(fmt("guarded reward %.6g outside [0, %.6g]", r, s.u_cap));
            }
        }
        for (int id = 0; id < tree.node_count(); ++id) {
            if (tree.is_leaf(id)) continue;
            const TreeNode& n = tree.nodes[id];
            double good = ctx.good_value[id];
            double slack = tree.delta[n.level] * s.u_cap + 1e-9;
            std::uint64_t mask = n.leaf_levels[ctx.cell];
            for (int k = 0; k < tree.leaf_grid().bid_levels; ++k) {
                if (!(mask >> k & 1)) continue;
                double fb = ctx.guarded_by_level[static_cast<std::size_t>(k)];
                for (double d : dgrid) {
                    ++checks;
                    double rg = scaled_reward(rule, s.chi, s.psi, v, good, d);
                    double rf = scaled_reward(rule, s.chi, s.psi, v, fb, d);
                    if (rg < rf - slack)
                        note(fmt("node %d: good bid %.4f earns %.6f < leaf %.4f earns %.6f - "
                                 "delta %.3f (v=%.4f chi=%.3f psi=%.3f d=%.4f)",
                                 id, good, rg, fb, rf, tree.delta[n.level], v, s.chi, s.psi, d));
                }
            }
        }
    }
    ProbeResult res;
    res.name = "tree-goodness";
    res.passed = violations == 0;
    res.detail = violations == 0
                     ? fmt("%d rounds, %ld (node, leaf, d) checks, no violations", rounds, checks)
                     : fmt("%ld violations; first: %s", violations, first.c_str());
    return res;
}

ProbeResult probe_lb_masses(const std::vector<long>& horizons) {
    long violations = 0;
    std::string first;
    auto note = [&](const std::string& s) {
        ++violations;
        if (first.empty()) first = s;
    };
    auto tilted = [](double x) { return 3.0 / (4.0 - x); };
    for (long T : horizons) {
        int k = bandit_lb_bucket_count(T);
        auto base = bandit_lb_masses(T);
        if (static_cast<int>(base.size()) != k + 2) {
            note(fmt("T=%ld: expected %d atoms, got %zu", T, k + 2, base.size()));
            continue;
        }
        if (base[0].first != 0.0 || base[0].second != 0.75)
            note(fmt("T=%ld: P(d=0) = %.17g, want exactly 0.75", T, base[0].second));
        if (std::abs(base[1].second - (tilted(base[1].first) - 0.75)) > 1e-12)
            note(fmt("T=%ld: P(d=d_0) off the tilted CDF", T));
        double sum = 0.0, cdf = 0.0;
        for (std::size_t i = 0; i < base.size(); ++i) {
            sum += base[i].second;
            if (base[i].second <= 0.0) note(fmt("T=%ld: nonpositive mass at atom %zu", T, i));
            if (i > 0 && base[i].first <= base[i - 1].first)
                note(fmt("T=%ld: atoms not ascending at %zu", T, i));
            if (i + 1 < base.size()) {
                cdf += base[i].second;
                if (std::abs(cdf - tilted(base[i].first)) > 1e-12)
                    note(fmt("T=%ld: CDF at atom %zu is %.17g, want %.17g", T, i, cdf,
                             tilted(base[i].first)));
            }
        }
        if (std::abs(sum - 1.0) > 1e-12) note(fmt("T=%ld: masses sum to %.17g", T, sum));
        for (int j : {0, k / 2, k - 1}) {
            auto pert = bandit_lb_masses(T, j);
            if (pert.size() != base.size()) {
                note(fmt("T=%ld perturb %d: atom count changed", T, j));
                continue;
            }
            std::size_t gain = static_cast<std::size_t>(1 + j);
            std::size_t donor = j + 1 < k ? gain + 1 : base.size() - 1;
            double step = tilted(base[1 + j].first + (1.0 / (3.0 * k))) - tilted(base[1 + j].first);
            for (std::size_t i = 0; i < base.size(); ++i) {
                if (pert[i].first != base[i].first)
                    note(fmt("T=%ld perturb %d: atom %zu moved", T, j, i));
                double diff = pert[i].second - base[i].second;
                double want = i == gain ? step : (i == donor ? -step : 0.0);
                if (std::abs(diff - want) > 1e-12)
                    note(fmt("T=%ld perturb %d: mass delta at atom %zu is %.17g, want %.17g", T,
                             j, i, diff, want));
            }
        }
    }
    ProbeResult res;
    res.name = "lower-bound-masses";
    res.passed = violations == 0;
    res.detail = violations == 0
                     ? fmt("%zu horizons, base + 3 perturbations each, no violations",
                           horizons.size())
                     : fmt("%ld violations; first: %s", violations, first.c_str());
    return res;
}

std::vector<ProbeResult> default_probe_suite() {
    std::vector<ProbeResult> out;
    out.push_back(probe_safe_bids(2000, 201, 17));
    out.push_back(probe_hedge_prefix_bound(40, 200, 6, 0.1, 23));
    out.push_back(probe_interval_meta_bound(8, 120, 4, 29));
    out.push_back(probe_cover_domination(60, 3, {1, 2}, 31));
    out.push_back(probe_tree_structure(1, 2));
    out.push_back(probe_tree_structure(2, 1));
    out.push_back(probe_tree_goodness(150, 37));
    out.push_back(probe_lb_masses({64, 256, 1000}));
    return out;
}

}  // namespace bidsim
