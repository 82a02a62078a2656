#pragma once

// Randomized and exhaustive invariant suites, shared by the `probe` CLI
// subcommand, the unit tests and the acceptance gate. Each probe returns
// pass/fail plus a one-line detail; failures embed enough numbers to
// reproduce (seed, worst margin, offending parameters).

#include <cstdint>
#include <string>
#include <vector>

namespace bidsim {

struct ProbeResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Payment-assumption conditions on random (rule, v, chi, psi, b) tuples
// against a d-grid: guarded and safe bids never earn negative reward, the
// guard fires exactly when the worst winning case is negative, and the safe
// bid dominates every bid the guard would reject.
ProbeResult probe_safe_bids(int tuples, int d_grid, std::uint64_t seed);

// HedgeLearner prefix regret vs the best action on adversarial sequences
// with an enforced delta-good action and random nondecreasing ranges in
// [1,5]: at every prefix tau,
//   max_a sum_{t<=tau} r_t(a) - sum_{t<=tau} <p_t, r_t>
//     <= 4 U_tau sqrt(T delta log K).
ProbeResult probe_hedge_prefix_bound(int instances, long horizon, int actions, double delta,
                                     std::uint64_t seed);

// IntervalMeta over Hedge subs (delta = 1, one sub per start round) against
// a brute-force scan of all intervals [tau1, tau2]:
//   regret(tau1, tau2) <= 4 U_{tau2} (sqrt(T log T) + sqrt(T log K)).
ProbeResult probe_interval_meta_bound(int instances, long horizon, int actions,
                                      std::uint64_t seed);

// Random L-Lipschitz functions are dominated within the level accuracy by
// their rounded-up cover witness, which is itself a valid cover member.
ProbeResult probe_cover_domination(int functions, int max_level, const std::vector<int>& ls,
                                   std::uint64_t seed);

// Tree geometry on a fully built tree: child-parent sup distance at level i
// is at most 2^(1-i), the leaves under a level-i node span at most 2^(3-i),
// and every stored function is a valid member of its level. Additionally
// checks the parent rule on every local value configuration at levels up to
// deep_levels, which covers trees too large to materialize.
ProbeResult probe_tree_structure(int lipschitz, int depth, int deep_levels = 6);

// Per-round goodness on simulated rounds: at every node, the good bid's
// reward is within delta_level * U of every guarded leaf bid under it, for
// every competing bid on a grid, and all guarded rewards lie in [0, U].
ProbeResult probe_tree_goodness(int rounds, std::uint64_t seed);

// Lower-bound family arithmetic: masses sum to 1, the base CDF matches
// 3/(4-x) at every atom, P(d=0) = 3/4 holds exactly, P(d=d_0) matches
// 3/(4-d_0) - 3/4, and each perturbation moves exactly one CDF step.
ProbeResult probe_lb_masses(const std::vector<long>& horizons);

// The suite `bidsim probe` runs by default: every probe above at sizes that
// finish in a few seconds.
std::vector<ProbeResult> default_probe_suite();

}  // namespace bidsim
