#pragma once

// Deterministic randomness plumbing. One seed per run, split into named
// streams so that e.g. environment draws do not shift when the policy
// changes how often it samples.

#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace bidsim {

// splitmix64: tiny, well-mixed; used only to derive stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream_id) {
    return std::mt19937_64(mix64(seed ^ mix64(stream_id)));
}

// Uniform in [0,1) with the standard 53-bit construction. We avoid
// std::uniform_real_distribution because its exact output sequence is
// implementation-defined and the traces must be byte-reproducible.
inline double u01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Draw an index from an unnormalized nonnegative weight vector.
inline Eigen::Index sample_index(const Eigen::VectorXd& w, std::mt19937_64& g) {
    if (w.size() == 0) throw std::invalid_argument("sample_index: empty weights");
    const double total = w.sum();
    if (!(total > 0.0)) throw std::invalid_argument("sample_index: weights sum to zero");
    double u = u01(g) * total;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        u -= w[i];
        if (u < 0.0) return i;
    }
    return w.size() - 1;  // fp slack lands on the last positive entry
}

}  // namespace bidsim
