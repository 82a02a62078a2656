#include "bidsim/environments.hpp"

#include <cmath>
#include <stdexcept>

#include "bidsim/core.hpp"
#include "bidsim/rng.hpp"

namespace bidsim {

namespace {

std::vector<Atom> validated(std::vector<Atom> atoms) {
    if (atoms.empty()) throw std::invalid_argument("Env: need at least one atom");
    double total = 0.0;
    for (const Atom& a : atoms) {
        check_unit(a.v, "atom value");
        check_unit(a.d, "atom competing bid");
        if (a.p < 0.0) throw std::invalid_argument("Env: atom probability must be >= 0");
        total += a.p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("Env: atom probabilities must sum to 1");
    return atoms;
}

std::vector<double> cdf_of(const std::vector<Atom>& atoms) {
    std::vector<double> cdf(atoms.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        acc += atoms[i].p;
        cdf[i] = acc;
    }
    cdf.back() = 1.0;  // absorb fp residue so sampling never falls off the end
    return cdf;
}

double tilted_cdf(double x) { return 3.0 / (4.0 - x); }

}  // namespace

Env Env::discrete(std::vector<Atom> atoms) {
    Env e;
    e.kind_ = Kind::DiscreteJoint;
    e.atoms_ = validated(std::move(atoms));
    e.cdf_ = cdf_of(e.atoms_);
    return e;
}

Env Env::product(const std::vector<double>& values, const std::vector<double>& value_probs,
                 const std::vector<double>& ds, const std::vector<double>& d_probs) {
    if (values.size() != value_probs.size() || ds.size() != d_probs.size())
        throw std::invalid_argument("Env::product: marginal and probability sizes differ");
    std::vector<Atom> atoms;
    atoms.reserve(values.size() * ds.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = 0; j < ds.size(); ++j)
            atoms.push_back({values[i], ds[j], value_probs[i] * d_probs[j]});
    Env e;
    e.kind_ = Kind::Product;
    e.atoms_ = validated(std::move(atoms));
    e.cdf_ = cdf_of(e.atoms_);
    return e;
}

Env Env::tight_beta(double beta) {
    if (!(beta > 0.0 && beta <= 0.5))
        throw std::invalid_argument("Env::tight_beta: beta must be in (0, 1/2]");
    Env e;
    e.kind_ = Kind::TightBeta;
    e.beta_ = beta;
    e.atoms_ = validated({{1.0, 0.0, beta}, {(1.0 - 2.0 * beta) / (1.0 - beta), 1.0, 1.0 - beta}});
    e.cdf_ = cdf_of(e.atoms_);
    return e;
}

int bandit_lb_bucket_count(long horizon) {
    if (horizon < 8) throw std::invalid_argument("bandit_lb: horizon must be >= 8");
    const long k = 2 * std::llround(std::cbrt(static_cast<double>(horizon)));
    return static_cast<int>(std::max<long>(2, k));
}

std::vector<std::pair<double, double>> bandit_lb_masses(long horizon, int perturb) {
    const int k = bandit_lb_bucket_count(horizon);
    if (perturb < -1 || perturb >= k)
        throw std::invalid_argument("bandit_lb: perturbed index outside 0..K-1");
    const double eps = 1.0 / (3.0 * k);
    auto atom_d = [&](int i) { return 1.0 / 3.0 + i * eps; };  // atom_d(k) = 2/3

    std::vector<std::pair<double, double>> m;
    m.reserve(k + 2);
    m.emplace_back(0.0, tilted_cdf(0.0));  // 3/4
    double prev = tilted_cdf(0.0);
    for (int i = 0; i < k; ++i) {
        const double f = tilted_cdf(atom_d(i));
        m.emplace_back(atom_d(i), f - prev);
        prev = f;
    }
    m.emplace_back(1.0, 1.0 - prev);

    if (perturb >= 0) {
        // lift the CDF on [d_j, d_{j+1}) to F(d_{j+1}): atom d_j absorbs the
        // next atom's mass (the top atom donates to d_{K-1} when j = K-1)
        const double delta = tilted_cdf(atom_d(perturb + 1)) - tilted_cdf(atom_d(perturb));
        m[1 + perturb].second += delta;
        if (perturb + 1 < k)
            m[1 + perturb + 1].second -= delta;
        else
            m[k + 1].second -= delta;
    }
    return m;
}

Env Env::bandit_lb(long horizon, int perturb) {
    const auto masses = bandit_lb_masses(horizon, perturb);
    std::vector<Atom> atoms;
    atoms.reserve(masses.size());
    for (const auto& [d, p] : masses) atoms.push_back({1.0, d, p});
    Env e;
    e.kind_ = Kind::BanditLB;
    e.atoms_ = validated(std::move(atoms));
    e.cdf_ = cdf_of(e.atoms_);
    e.lb_k_ = bandit_lb_bucket_count(horizon);
    e.lb_eps_ = 1.0 / (3.0 * e.lb_k_);
    e.lb_perturb_ = perturb;
    return e;
}

std::pair<double, double> Env::sample(std::mt19937_64& g) const {
    const double u = u01(g);
    std::size_t i = 0;
    while (i + 1 < cdf_.size() && u >= cdf_[i]) ++i;
    return {atoms_[i].v, atoms_[i].d};
}

std::string Env::describe() const {
    switch (kind_) {
        case Kind::DiscreteJoint: return "discrete atoms=" + std::to_string(atoms_.size());
        case Kind::Product: return "product atoms=" + std::to_string(atoms_.size());
        case Kind::TightBeta: return "tight_beta beta=" + std::to_string(beta_);
        case Kind::BanditLB:
            return "bandit_lb K=" + std::to_string(lb_k_) + " perturb=" + std::to_string(lb_perturb_);
    }
    return "env";
}

}  // namespace bidsim
