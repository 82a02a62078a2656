#include "bidsim/covers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "bidsim/core.hpp"

namespace bidsim {

namespace {

// sup distance between step functions on adjacent nested grids, taken at
// the finer cell resolution (coarse cell boundaries align with fine pairs)
double cross_level_distance(const CoverFunction& f, const CoverGrid& fg,
                            const CoverFunction& p, const CoverGrid& pg) {
    double m = 0.0;
    for (int c = 0; c < fg.cells; ++c) {
        int pc = pg.cells == 1 ? 0 : c / 2;
        m = std::max(m, std::abs(f.idx[c] * fg.db - p.idx[pc] * pg.db));
    }
    return m;
}

}  // namespace

int CoverGrid::cell_of(double v) const {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("cell_of: value outside [0,1]");
    int c = static_cast<int>(v / dv);
    return std::min(c, cells - 1);
}

CoverGrid make_grid(double lipschitz, int level) {
    if (!(lipschitz >= 1.0)) throw std::invalid_argument("make_grid: Lipschitz constant must be >= 1");
    if (level < 0) throw std::invalid_argument("make_grid: level must be >= 0");
    CoverGrid g;
    g.lipschitz = lipschitz;
    g.level = level;
    g.accuracy = std::ldexp(1.0, -level);
    if (level == 0) {
        g.cells = 1;
        g.dv = 1.0;
        g.db = 0.5;
        g.bid_levels = 3;
        return g;
    }
    // cells >= 2L*2^level so that per-cell variation L*dv <= db
    double raw = 2.0 * lipschitz * std::ldexp(1.0, level);
    g.cells = static_cast<int>(std::ceil(raw - 1e-9));
    g.dv = 1.0 / g.cells;
    g.db = std::ldexp(1.0, -(level + 1));
    g.bid_levels = (1 << (level + 1)) + 1;
    return g;
}

std::uint64_t cover_count(double lipschitz, int level) {
    if (level == 0) return 1;
    CoverGrid g = make_grid(lipschitz, level);
    // paths of length cells over [0, bid_levels) with steps in {-1,0,+1}
    std::vector<double> ways(g.bid_levels, 1.0);
    for (int c = 1; c < g.cells; ++c) {
        std::vector<double> next(g.bid_levels, 0.0);
        for (int k = 0; k < g.bid_levels; ++k) {
            for (int dk = -1; dk <= 1; ++dk) {
                int j = k + dk;
                if (j >= 0 && j < g.bid_levels) next[j] += ways[k];
            }
        }
        ways.swap(next);
        double partial = 0.0;
        for (double w : ways) partial += w;
        if (partial > 1e18) return UINT64_MAX;  // saturate, caller only caps
    }
    double total = 0.0;
    for (double w : ways) total += w;
    return total > 1e18 ? UINT64_MAX : static_cast<std::uint64_t>(std::llround(total));
}

CoverSet build_cover(double lipschitz, int level, std::uint64_t size_cap) {
    CoverSet out;
    out.grid = make_grid(lipschitz, level);
    if (level == 0) {
        out.fns.push_back(CoverFunction{{2}});  // constant 1 = 2 * db with db = 1/2
        return out;
    }
    const std::uint64_t n = cover_count(lipschitz, level);
    if (n > size_cap) {
        throw std::length_error("build_cover: level " + std::to_string(level) + " has " +
                                std::to_string(n) + " elements, above the cap of " +
                                std::to_string(size_cap));
    }
    const CoverGrid& g = out.grid;
    out.fns.reserve(n);
    CoverFunction cur;
    cur.idx.resize(g.cells);
    // iterative DFS over +-1 step sequences
    std::vector<int> choice(g.cells, 0);
    int c = 0;
    auto level_at = [&](int cell, int pick) {
        if (cell == 0) return pick;  // first cell ranges over all levels
        return static_cast<int>(cur.idx[cell - 1]) + (pick - 1);
    };
    int first_range = g.bid_levels;
    while (c >= 0) {
        if (c == g.cells) {
            out.fns.push_back(cur);
            --c;
            continue;
        }
        bool advanced = false;
        int limit = (c == 0) ? first_range : 3;
        while (choice[c] < limit) {
            int k = level_at(c, choice[c]);
            ++choice[c];
            if (k >= 0 && k < g.bid_levels) {
                cur.idx[c] = static_cast<std::uint16_t>(k);
                ++c;
                if (c < g.cells) choice[c] = 0;
                advanced = true;
                break;
            }
        }
        if (!advanced) {
            choice[c] = 0;
            --c;
        }
    }
    return out;
}

bool is_member(const CoverFunction& f, const CoverGrid& g) {
    if (static_cast<int>(f.idx.size()) != g.cells) return false;
    const double jump_cap = g.lipschitz * g.dv + g.db + 1e-12;
    for (int c = 0; c < g.cells; ++c) {
        if (f.idx[c] >= g.bid_levels) return false;
        if (c > 0) {
            double jump = std::abs(static_cast<double>(f.idx[c]) - f.idx[c - 1]) * g.db;
            if (jump > jump_cap) return false;
        }
    }
    return true;
}

CoverFunction dominate(const std::function<double(double)>& f, const CoverGrid& g,
                       int samples_per_cell) {
    if (samples_per_cell < 2) throw std::invalid_argument("dominate: need >= 2 samples per cell");
    CoverFunction out;
    out.idx.resize(g.cells);
    for (int c = 0; c < g.cells; ++c) {
        const double lo = c * g.dv;
        const double hi = std::min(1.0, (c + 1) * g.dv);
        double m = 0.0;
        for (int s = 0; s < samples_per_cell; ++s) {
            double v = lo + (hi - lo) * s / (samples_per_cell - 1);
            double fv = f(v);
            if (!(fv >= 0.0 && fv <= 1.0))
                throw std::invalid_argument("dominate: function value outside [0,1]");
            m = std::max(m, fv);
        }
        int k = static_cast<int>(std::ceil(m / g.db - 1e-12));
        out.idx[c] = static_cast<std::uint16_t>(std::min(k, g.bid_levels - 1));
    }
    return out;
}

CoverFunction coarsen(const CoverFunction& f, const CoverGrid& fine, const CoverGrid& coarse) {
    if (coarse.level + 1 != fine.level)
        throw std::invalid_argument("coarsen: grids must be adjacent levels");
    if (fine.cells != 2 * coarse.cells && coarse.level > 0)
        throw std::invalid_argument("coarsen: cell grids do not nest (non-integer L?)");
    CoverFunction out;
    out.idx.resize(coarse.cells);
    for (int p = 0; p < coarse.cells; ++p) {
        int m = 0;
        if (coarse.level == 0) {
            for (std::uint16_t k : f.idx) m = std::max(m, static_cast<int>(k));
        } else {
            m = std::max<int>(f.idx[2 * p], f.idx[2 * p + 1]);
        }
        // db doubles between levels, so rounding up is integer ceil-div by 2
        out.idx[p] = static_cast<std::uint16_t>((m + 1) / 2);
    }
    return out;
}

double sup_distance(const CoverFunction& a, const CoverFunction& b, const CoverGrid& g) {
    double m = 0.0;
    for (int c = 0; c < g.cells; ++c)
        m = std::max(m, std::abs(static_cast<double>(a.idx[c]) - b.idx[c])) ;
    return m * g.db;
}

CoverTree build_tree(int lipschitz, int depth, std::uint64_t size_cap) {
    if (lipschitz < 1) throw std::invalid_argument("build_tree: Lipschitz constant must be >= 1");
    if (depth < 0) throw std::invalid_argument("build_tree: depth must be >= 0");
    CoverTree tr;
    tr.lipschitz = lipschitz;
    tr.depth = depth;
    for (int i = 0; i <= depth; ++i) {
        tr.levels.push_back(build_cover(lipschitz, i, size_cap));
        tr.delta.push_back(std::ldexp(1.0, 3 - i));
    }
    const CoverGrid& leaf_g = tr.levels[depth].grid;
    if (leaf_g.bid_levels > 64)
        throw std::length_error("build_tree: leaf bid grid too fine for level masks");

    // Assign parents level by level; keep only functions that are the root,
    // a leaf, or an ancestor of a leaf. Work top-down to create node ids,
    // but parent links are decided bottom-up from the leaves.
    // First compute, per level i >= 1, the parent function index at level i-1.
    std::vector<std::vector<int>> parent_fn(depth + 1);
    for (int i = 2; i <= depth; ++i) {
        const CoverSet& fine = tr.levels[i];
        const CoverSet& coarse = tr.levels[i - 1];
        std::map<std::vector<std::uint16_t>, int> lookup;
        for (int k = 0; k < static_cast<int>(coarse.fns.size()); ++k)
            lookup.emplace(coarse.fns[k].idx, k);
        parent_fn[i].resize(fine.fns.size());
        for (int k = 0; k < static_cast<int>(fine.fns.size()); ++k) {
            CoverFunction p = coarsen(fine.fns[k], fine.grid, coarse.grid);
            auto it = lookup.find(p.idx);
            if (it != lookup.end()) {
                parent_fn[i][k] = it->second;
            } else {
                // Never expected: coarsenings of enumerated functions are
                // themselves enumerated. Fall back to the nearest element.
                int best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (int j = 0; j < static_cast<int>(coarse.fns.size()); ++j) {
                    double d = cross_level_distance(fine.fns[k], fine.grid, coarse.fns[j],
                                                    coarse.grid);
                    if (d < best_d) {
                        best_d = d;
                        best = j;
                    }
                }
                parent_fn[i][k] = best;
            }
        }
    }
    if (depth >= 1) {
        parent_fn[1].assign(tr.levels[1].fns.size(), 0);  // all level-1 functions hang off the root
    }
    // the learner leans on parent distances, so check them at build time
    for (int i = 1; i <= depth; ++i) {
        const double bound = std::ldexp(1.0, 1 - i) + 1e-12;
        for (int k = 0; k < static_cast<int>(tr.levels[i].fns.size()); ++k) {
            double d = cross_level_distance(tr.levels[i].fns[k], tr.levels[i].grid,
                                            tr.levels[i - 1].fns[parent_fn[i][k]],
                                            tr.levels[i - 1].grid);
            if (d > bound)
                throw invariant_error("build_tree: level " + std::to_string(i) +
                                      " node has no parent within 2^(1-level)");
        }
    }

    // mark ancestors of leaves
    std::vector<std::vector<char>> keep(depth + 1);
    for (int i = 0; i <= depth; ++i) keep[i].assign(tr.levels[i].fns.size(), 0);
    keep[depth].assign(tr.levels[depth].fns.size(), 1);
    keep[0][0] = 1;
    for (int i = depth; i >= 1; --i)
        for (int k = 0; k < static_cast<int>(tr.levels[i].fns.size()); ++k)
            if (keep[i][k]) keep[i - 1][parent_fn[i][k]] = 1;

    // materialize nodes level-major
    std::vector<std::vector<int>> node_id(depth + 1);
    tr.level_begin.assign(depth + 2, 0);
    for (int i = 0; i <= depth; ++i) {
        node_id[i].assign(tr.levels[i].fns.size(), -1);
        tr.level_begin[i] = tr.node_count();
        for (int k = 0; k < static_cast<int>(tr.levels[i].fns.size()); ++k) {
            if (!keep[i][k]) continue;
            TreeNode n;
            n.level = i;
            n.fn = k;
            node_id[i][k] = tr.node_count();
            tr.nodes.push_back(std::move(n));
        }
    }
    tr.level_begin[depth + 1] = tr.node_count();
    for (int i = 1; i <= depth; ++i) {
        for (int k = 0; k < static_cast<int>(tr.levels[i].fns.size()); ++k) {
            int id = node_id[i][k];
            if (id < 0) continue;
            int pid = node_id[i - 1][parent_fn[i][k]];
            tr.nodes[id].parent = pid;
            tr.nodes[pid].children.push_back(id);
        }
    }
    for (int id = tr.level_begin[depth]; id < tr.level_begin[depth + 1]; ++id)
        tr.leaf_ids.push_back(id);

    // leaf bid-level masks, bottom-up
    for (int id = tr.node_count() - 1; id >= 0; --id) {
        TreeNode& n = tr.nodes[id];
        n.leaf_levels.assign(leaf_g.cells, 0);
        if (n.level == depth) {
            const CoverFunction& f = tr.levels[depth].fns[n.fn];
            for (int c = 0; c < leaf_g.cells; ++c)
                n.leaf_levels[c] = 1ULL << f.idx[c];
        } else {
            for (int ch : n.children)
                for (int c = 0; c < leaf_g.cells; ++c)
                    n.leaf_levels[c] |= tr.nodes[ch].leaf_levels[c];
        }
    }
    return tr;
}

}  // namespace bidsim
