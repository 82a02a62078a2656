#include "bidsim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace bidsim {

CandidateOutcome expected_outcome(const Env& env, const std::function<double(double)>& f,
                                  const PaymentRule& rule) {
    CandidateOutcome out;
    for (const Atom& a : env.atoms()) {
        const double b = f(a.v);
        check_unit(b, "candidate bid");
        if (!wins(b, a.d)) continue;
        out.value += a.p * a.v;
        out.payment += a.p * payment(rule, b, a.d);
    }
    out.roi = out.value - out.payment;
    return out;
}

namespace {

constexpr double kFeasTol = 1e-9;

struct Mix {
    double value = 0, pay = 0, roi = 0;
};

Mix mix_of(const std::vector<CandidateOutcome>& c, const std::vector<int>& idx,
           const std::vector<double>& w) {
    Mix m;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        m.value += w[i] * c[idx[i]].value;
        m.pay += w[i] * c[idx[i]].payment;
        m.roi += w[i] * c[idx[i]].roi;
    }
    return m;
}

void consider(OptSolution& best, const std::vector<CandidateOutcome>& c, std::vector<int> idx,
              std::vector<double> w, double rho) {
    for (double wi : w)
        if (wi < -kFeasTol) return;
    for (double& wi : w) wi = std::max(wi, 0.0);
    const Mix m = mix_of(c, idx, w);
    if (m.pay > rho + kFeasTol || m.roi < -kFeasTol) return;
    if (best.feasible && m.value <= best.value) return;
    best.feasible = true;
    best.value = m.value;
    best.support = std::move(idx);
    best.weights = std::move(w);
    best.budget_binding = std::abs(m.pay - rho) <= kFeasTol;
    best.roi_binding = std::abs(m.roi) <= kFeasTol;
}

}  // namespace

OptSolution solve_opt(const std::vector<CandidateOutcome>& c, double rho) {
    if (c.empty()) throw std::invalid_argument("solve_opt: empty candidate set");
    const int n = static_cast<int>(c.size());
    OptSolution best;

    for (int i = 0; i < n; ++i) consider(best, c, {i}, {1.0}, rho);

    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            // mixture x*c_i + (1-x)*c_j; a constrained vertex has either
            // constraint tight, so only those x (plus endpoints) matter
            std::vector<double> xs;
            const double dp = c[i].payment - c[j].payment;
            if (dp != 0.0) xs.push_back((rho - c[j].payment) / dp);
            const double dr = c[i].roi - c[j].roi;
            if (dr != 0.0) xs.push_back(-c[j].roi / dr);
            for (double x : xs)
                if (x > 0.0 && x < 1.0) consider(best, c, {i, j}, {x, 1.0 - x}, rho);
        }
    }

    Eigen::Matrix3d a;
    Eigen::Vector3d rhs(rho, 0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (int k = j + 1; k < n; ++k) {
                a << c[i].payment, c[j].payment, c[k].payment,
                     c[i].roi, c[j].roi, c[k].roi,
                     1.0, 1.0, 1.0;
                Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
                if (!lu.isInvertible()) continue;
                const Eigen::Vector3d x = lu.solve(rhs);
                consider(best, c, {i, j, k}, {x[0], x[1], x[2]}, rho);
            }
        }
    }
    return best;
}

OptSolution grid_search_opt(const std::vector<CandidateOutcome>& c, double rho, double step) {
    if (c.empty()) throw std::invalid_argument("grid_search_opt: empty candidate set");
    if (!(step > 0.0 && step < 1.0)) throw std::invalid_argument("grid_search_opt: bad step");
    const int n = static_cast<int>(c.size());
    OptSolution best;
    for (int i = 0; i < n; ++i) consider(best, c, {i}, {1.0}, rho);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (double x = step; x < 1.0; x += step) consider(best, c, {i, j}, {x, 1.0 - x}, rho);
            const double dp = c[i].payment - c[j].payment;
            if (dp != 0.0) {
                const double x = (rho - c[j].payment) / dp;
                if (x > 0.0 && x < 1.0) consider(best, c, {i, j}, {x, 1.0 - x}, rho);
            }
            const double dr = c[i].roi - c[j].roi;
            if (dr != 0.0) {
                const double x = -c[j].roi / dr;
                if (x > 0.0 && x < 1.0) consider(best, c, {i, j}, {x, 1.0 - x}, rho);
            }
        }
    }
    return best;
}

BasisLpResult solve_basis_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                             const Eigen::VectorXd& c, std::uint64_t basis_cap) {
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    if (b.size() != m || c.size() != n) throw std::invalid_argument("solve_basis_lp: shape mismatch");
    if (m < 1 || n < m) throw std::invalid_argument("solve_basis_lp: need cols >= rows >= 1");

    std::uint64_t bases = 1;
    for (int i = 0; i < m; ++i) {
        bases = bases * static_cast<std::uint64_t>(n - i) / (i + 1);
        if (bases > basis_cap) throw std::length_error("solve_basis_lp: too many bases");
    }

    BasisLpResult best;
    std::vector<int> pick(m);
    for (int i = 0; i < m; ++i) pick[i] = i;
    Eigen::MatrixXd ab(m, m);
    while (true) {
        for (int i = 0; i < m; ++i) ab.col(i) = a.col(pick[i]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(ab);
        if (lu.isInvertible()) {
            const Eigen::VectorXd xb = lu.solve(b);
            if ((xb.array() >= -kFeasTol).all()) {
                double val = 0.0;
                for (int i = 0; i < m; ++i) val += c[pick[i]] * std::max(xb[i], 0.0);
                if (!best.feasible || val > best.value) {
                    best.feasible = true;
                    best.value = val;
                    best.x = Eigen::VectorXd::Zero(n);
                    for (int i = 0; i < m; ++i) best.x[pick[i]] = std::max(xb[i], 0.0);
                }
            }
        }
        // next combination in lexicographic order
        int i = m - 1;
        while (i >= 0 && pick[i] == n - m + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < m; ++j) pick[j] = pick[j - 1] + 1;
    }
    return best;
}

double product_opt(const Env& env, const std::vector<double>& candidate_bids,
                   const PaymentRule& rule, double rho) {
    if (candidate_bids.empty()) throw std::invalid_argument("product_opt: empty candidate bids");
    // group atoms by value: P(v) and the conditional d-atoms
    std::map<double, std::vector<std::pair<double, double>>> by_value;  // v -> [(d, p)]
    for (const Atom& a : env.atoms()) by_value[a.v].emplace_back(a.d, a.p);

    const int nv = static_cast<int>(by_value.size());
    const int nb = static_cast<int>(candidate_bids.size());
    const int rows = nv + 2;
    const int cols = nv * nb + 2;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(cols);

    int vi = 0;
    for (const auto& [v, datoms] : by_value) {
        double pv = 0.0;
        for (const auto& [d, p] : datoms) pv += p;
        b[vi] = pv;
        for (int j = 0; j < nb; ++j) {
            const int col = vi * nb + j;
            a(vi, col) = 1.0;
            double val = 0.0, pay = 0.0;
            for (const auto& [d, p] : datoms) {
                if (!wins(candidate_bids[j], d)) continue;
                const double w = pv > 0.0 ? p / pv : 0.0;
                val += w * v;
                pay += w * payment(rule, candidate_bids[j], d);
            }
            c[col] = val;
            a(nv, col) = pay;        // budget row
            a(nv + 1, col) = val - pay;  // roi row
        }
        ++vi;
    }
    a(nv, cols - 2) = 1.0;   // budget slack: sum pay + s = rho
    b[nv] = rho;
    a(nv + 1, cols - 1) = -1.0;  // roi surplus: sum roi - s = 0
    b[nv + 1] = 0.0;

    const BasisLpResult r = solve_basis_lp(a, b, c);
    if (!r.feasible) throw std::runtime_error("product_opt: LP infeasible");
    return r.value;
}

IntervalProbeResult interval_regret_probe(const Eigen::MatrixXd& rewards,
                                          const Eigen::MatrixXd& play, std::uint64_t cell_cap) {
    const long t = rewards.rows();
    const int k = static_cast<int>(rewards.cols());
    if (play.rows() != t || play.cols() != k)
        throw std::invalid_argument("interval_regret_probe: shape mismatch");
    if (t < 1) throw std::invalid_argument("interval_regret_probe: empty matrix");
    if (static_cast<std::uint64_t>(t) * t * k > cell_cap)
        throw std::length_error("interval_regret_probe: instance too large");

    // prefix[i] = cumulative sums over rounds 1..i
    Eigen::MatrixXd pref_r = Eigen::MatrixXd::Zero(t + 1, k);
    Eigen::VectorXd pref_alg = Eigen::VectorXd::Zero(t + 1);
    for (long i = 0; i < t; ++i) {
        pref_r.row(i + 1) = pref_r.row(i) + rewards.row(i);
        pref_alg[i + 1] = pref_alg[i] + play.row(i).dot(rewards.row(i));
    }

    IntervalProbeResult best;
    best.value = -std::numeric_limits<double>::infinity();
    for (long t1 = 1; t1 <= t; ++t1) {
        for (long t2 = t1; t2 <= t; ++t2) {
            const double alg = pref_alg[t2] - pref_alg[t1 - 1];
            for (int a = 0; a < k; ++a) {
                const double gap = pref_r(t2, a) - pref_r(t1 - 1, a) - alg;
                if (gap > best.value) best = {gap, t1, t2, a};
            }
        }
    }
    return best;
}

BetaAlphaReport beta_alpha_diagnostic(const Env& env, const std::function<double(double)>& f,
                                      const PaymentRule& rule, double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("beta_alpha_diagnostic: rho in [0,1]");
    const CandidateOutcome cf = expected_outcome(env, f, rule);
    const CandidateOutcome c0 = expected_outcome_bid(env, 0.0, rule);
    BetaAlphaReport r;
    r.beta = cf.roi;
    r.alpha = rho * r.beta;
    r.mix_payment = rho * cf.payment + (1.0 - rho) * c0.payment;
    r.mix_roi = rho * cf.roi + (1.0 - rho) * c0.roi;
    r.budget_slack_ok = r.mix_payment <= rho - r.alpha + 1e-12;
    r.roi_slack_ok = r.mix_roi >= r.alpha - 1e-12;
    return r;
}

}  // namespace bidsim
