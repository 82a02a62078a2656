#pragma once

// Discretized one-sided covers of Lipschitz bid functions, and the rooted
// tree over cover levels that the tree policy learns on.
//
// Level geometry: level i >= 1 splits [0,1] into value cells of width
// dv = 2^-i / (2L) (rounded up to an integer cell count for non-integer L)
// and quantizes bids to multiples of db = 2^-(i+1). A piecewise-constant
// function on that grid can then track any L-Lipschitz f from above with
// error at most L*dv + db <= 2^-i, which is the level's accuracy.
// Level 0 is the single constant-1 function.
//
// Cover sets are enumerated with adjacent cells at most one bid step apart;
// that family contains every ceil-of-cell-max witness, so the one-sided
// cover property holds, while keeping enumeration as small as possible.
// Sizes still grow like 3^(2L*2^i), so enumeration is guarded by a cap.

#include <cstdint>
#include <functional>
#include <vector>

namespace bidsim {

struct CoverGrid {
    double lipschitz = 1.0;
    int level = 0;
    int cells = 1;        // value cells; cell c covers [c*dv, (c+1)*dv), last cell right-closed
    int bid_levels = 1;   // bids are k*db for k in [0, bid_levels)
    double dv = 1.0;
    double db = 1.0;
    double accuracy = 1.0;  // 2^-level

    int cell_of(double v) const;
};

struct CoverFunction {
    std::vector<std::uint16_t> idx;  // per-cell bid level

    double value_at_cell(int c, const CoverGrid& g) const { return idx[c] * g.db; }
    double operator()(double v, const CoverGrid& g) const { return idx[g.cell_of(v)] * g.db; }
};

struct CoverSet {
    CoverGrid grid;
    std::vector<CoverFunction> fns;
};

CoverGrid make_grid(double lipschitz, int level);

// Number of functions build_cover(L, level) would enumerate. Cheap (DP).
std::uint64_t cover_count(double lipschitz, int level);

// Enumerates the level's cover. Throws std::length_error when the count
// exceeds size_cap and std::invalid_argument on bad parameters.
CoverSet build_cover(double lipschitz, int level, std::uint64_t size_cap = 1'000'000);

// True iff f obeys the grid's range and jump constraints (|jump| <= L*dv + db).
bool is_member(const CoverFunction& f, const CoverGrid& g);

// Smallest grid function dominating f: per-cell max (sampled on a grid that
// includes cell endpoints) rounded up to the bid grid. For L-Lipschitz f the
// result satisfies f <= f' <= f + accuracy on the sample points.
CoverFunction dominate(const std::function<double(double)>& f, const CoverGrid& g,
                       int samples_per_cell = 33);

// Dominating coarsening of a level-(i) function onto level i-1 (integer L
// only; exact integer arithmetic). Used to assign tree parents.
CoverFunction coarsen(const CoverFunction& f, const CoverGrid& fine, const CoverGrid& coarse);

struct TreeNode {
    int level = 0;
    int fn = 0;       // index into levels[level].fns
    int parent = -1;  // node id
    std::vector<int> children;  // node ids at level+1
    // per level-M cell: bitmask of leaf bid levels present under this node
    std::vector<std::uint64_t> leaf_levels;
};

struct CoverTree {
    double lipschitz = 1.0;
    int depth = 0;  // M
    std::vector<CoverSet> levels;     // 0..M
    std::vector<TreeNode> nodes;      // level-major; node 0 is the root
    std::vector<int> level_begin;     // size depth+2; nodes of level i are [begin[i], begin[i+1])
    std::vector<int> leaf_ids;
    std::vector<double> delta;        // per-level goodness parameter, 2^(3-i)

    const CoverGrid& leaf_grid() const { return levels[depth].grid; }
    int node_count() const { return static_cast<int>(nodes.size()); }
    bool is_leaf(int id) const { return nodes[id].level == depth; }
};

// Builds levels 0..depth, assigns each level-i function (i >= 2) its
// dominating coarsening as parent (level-1 functions hang off the root),
// prunes childless interior nodes, and computes per-node leaf bid masks.
// Every parent is asserted to sit within sup-distance 2^(1-level) of its
// child at build time. Throws std::length_error if any level exceeds
// size_cap.
CoverTree build_tree(int lipschitz, int depth, std::uint64_t size_cap = 1'000'000);

double sup_distance(const CoverFunction& a, const CoverFunction& b, const CoverGrid& g);

}  // namespace bidsim
