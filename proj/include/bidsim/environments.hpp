#pragma once

// Finite-support (value, competing bid) generators: explicit joint atoms,
// independent marginals, and the two adversarial constructions used by the
// lower-bound experiments. Environments are immutable; sampling walks the
// cached CDF with a caller-owned generator, so identical seeds reproduce
// identical streams no matter which policy consumes them.

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace bidsim {

struct Atom {
    double v = 0, d = 0, p = 0;
};

class Env {
  public:
    enum class Kind { DiscreteJoint, Product, TightBeta, BanditLB };

    // Joint distribution given directly; probabilities must sum to 1
    // within 1e-12 and all atoms lie in [0,1]^2.
    static Env discrete(std::vector<Atom> atoms);
    // Independent marginals, expanded to the product atom set.
    static Env product(const std::vector<double>& values, const std::vector<double>& value_probs,
                       const std::vector<double>& ds, const std::vector<double>& d_probs);
    // Two atoms: (1, 0) w.p. beta and ((1-2*beta)/(1-beta), 1) w.p. 1-beta.
    // Any budget-and-ROI-feasible benchmark concentrates near "always bid 1",
    // yet matching it forces sqrt(T) constraint risk; beta in (0, 1/2].
    static Env tight_beta(double beta);
    // v = 1 always, d from the tilted CDF F(x) = 3/(4-x) on atoms
    // {0, 1/3 + i*eps, 1}; perturb in [0, K-1] lifts P(d <= d_j) to F(d_{j+1})
    // (the family a bandit learner provably cannot separate). perturb = -1
    // is the base distribution.
    static Env bandit_lb(long horizon, int perturb = -1);

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::pair<double, double> sample(std::mt19937_64& g) const;

    Kind kind() const { return kind_; }
    double beta() const { return beta_; }       // TightBeta only
    int lb_bucket_count() const { return lb_k_; }  // BanditLB only: K
    double lb_eps() const { return lb_eps_; }
    int lb_perturb() const { return lb_perturb_; }
    std::string describe() const;

  private:
    Env() = default;
    Kind kind_ = Kind::DiscreteJoint;
    std::vector<Atom> atoms_;
    std::vector<double> cdf_;
    double beta_ = 0;
    int lb_k_ = 0;
    double lb_eps_ = 0;
    int lb_perturb_ = -1;
};

// K for the bandit lower-bound family: 2*T^(1/3) rounded to the nearest
// even integer, at least 2. Needs T >= 8.
int bandit_lb_bucket_count(long horizon);

// Exact (d atom, probability) list for the bandit lower-bound family.
// perturb = -1 gives the base masses.
std::vector<std::pair<double, double>> bandit_lb_masses(long horizon, int perturb = -1);

}  // namespace bidsim
