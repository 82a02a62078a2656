#include "bidsim/policies.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace bidsim {

void Policy::update(double) { throw std::logic_error("policy does not take full-info feedback"); }
void Policy::update_bandit(int, bool, double) {
    throw std::logic_error("policy does not take bandit feedback");
}

void fill_round_context(const CoverTree& tree, double v, const ScaleParams& s,
                        const PaymentRule& rule, TreeRoundContext& ctx) {
    ctx.v = v;
    ctx.chi = s.chi;
    ctx.psi = s.psi;
    ctx.u = s.u_cap;
    const CoverGrid& g = tree.leaf_grid();
    ctx.cell = g.cell_of(v);

    ctx.guarded_by_level.resize(g.bid_levels);
    for (int k = 0; k < g.bid_levels; ++k)
        ctx.guarded_by_level[k] = guarded_bid(rule, v, s.chi, s.psi, k * g.db);

    // distinct guarded values, ascending (guard collapses many levels onto
    // the safe bid, so the support is usually much smaller than the grid)
    std::map<double, int> order;
    for (double b : ctx.guarded_by_level) order.emplace(b, 0);
    ctx.support.resize(static_cast<Eigen::Index>(order.size()));
    Eigen::Index si = 0;
    for (auto& [b, idx] : order) {
        idx = static_cast<int>(si);
        ctx.support[si++] = b;
    }
    ctx.support_of_level.resize(g.bid_levels);
    for (int k = 0; k < g.bid_levels; ++k)
        ctx.support_of_level[k] = order[ctx.guarded_by_level[k]];

    // good bids bottom-up: a leaf's good bid is its own guarded bid, an
    // interior node's is the max over its children (the leaf-level masks are
    // exact unions down the tree, so this matches a scan of the node's mask)
    ctx.good_support.resize(tree.node_count());
    ctx.good_value.resize(tree.node_count());
    const CoverSet& leaves = tree.levels[tree.depth];
    for (int id = tree.node_count() - 1; id >= 0; --id) {
        if (tree.is_leaf(id)) {
            const int k = leaves.fns[tree.nodes[id].fn].idx[ctx.cell];
            ctx.good_value[id] = ctx.guarded_by_level[k];
            ctx.good_support[id] = ctx.support_of_level[k];
            continue;
        }
        double best = -1.0;
        int bs = 0;
        for (int c : tree.nodes[id].children) {
            if (ctx.good_value[c] > best) {
                best = ctx.good_value[c];
                bs = ctx.good_support[c];
            }
        }
        ctx.good_value[id] = best;
        ctx.good_support[id] = bs;
    }

    ctx.group_begin.assign(tree.node_count(), -1);
    ctx.group_idx.clear();
    if (tree.depth > 0) {
        for (int id = 0; id < tree.node_count(); ++id) {
            if (tree.nodes[id].level != tree.depth - 1 || tree.is_leaf(id)) continue;
            ctx.group_begin[id] = static_cast<int>(ctx.group_idx.size());
            for (int c : tree.nodes[id].children)
                ctx.group_idx.push_back(
                    static_cast<std::uint16_t>(leaves.fns[tree.nodes[c].fn].idx[ctx.cell]));
            ctx.group_idx.push_back(static_cast<std::uint16_t>(g.bid_levels));
        }
    }
}

TreeRoundContext make_round_context(const CoverTree& tree, double v, const ScaleParams& s,
                                    const PaymentRule& rule) {
    TreeRoundContext ctx;
    fill_round_context(tree, v, s, rule, ctx);
    return ctx;
}

TreeInstance::TreeInstance(std::shared_ptr<const CoverTree> tree, long horizon)
    : tree_(std::move(tree)) {
    hedge_of_node_.assign(tree_->node_count(), -1);
    for (int id = 0; id < tree_->node_count(); ++id) {
        const TreeNode& n = tree_->nodes[id];
        if (tree_->is_leaf(id)) continue;
        hedge_of_node_[id] = static_cast<int>(hedges_.size());
        hedges_.emplace_back(static_cast<int>(n.children.size()) + 1, horizon,
                             tree_->delta[n.level]);
    }
    last_p_.resize(hedges_.size());
}

const HedgeLearner& TreeInstance::node_learner(int node_id) const {
    if (hedge_of_node_.at(node_id) < 0) throw std::invalid_argument("leaf nodes have no learner");
    return hedges_[hedge_of_node_[node_id]];
}

Eigen::VectorXd TreeInstance::step(double u, const TreeRoundContext& ctx) {
    for (std::size_t h = 0; h < hedges_.size(); ++h) last_p_[h] = hedges_[h].step(u);

    // push mass down: each interior node splits its weight between its good
    // bid (last slot) and its children; leaves are point masses on their bid
    Eigen::VectorXd q = Eigen::VectorXd::Zero(ctx.support.size());
    w_.setZero(tree_->node_count());
    w_[0] = 1.0;
    for (int id = 0; id < tree_->node_count(); ++id) {
        if (w_[id] == 0.0) continue;
        if (tree_->is_leaf(id)) {
            const CoverFunction& f = tree_->levels[tree_->depth].fns[tree_->nodes[id].fn];
            q[ctx.support_of_level[f.idx[ctx.cell]]] += w_[id];
            continue;
        }
        const Eigen::VectorXd& p = last_p_[hedge_of_node_[id]];
        const auto& ch = tree_->nodes[id].children;
        q[ctx.good_support[id]] += w_[id] * p[p.size() - 1];
        for (std::size_t c = 0; c < ch.size(); ++c)
            w_[ch[c]] += w_[id] * p[static_cast<Eigen::Index>(c)];
    }
    return q;
}

void TreeInstance::update(const Eigen::VectorXd& support_rewards, const TreeRoundContext& ctx) {
    if (support_rewards.size() != ctx.support.size())
        throw std::invalid_argument("TreeInstance: reward vector does not match round support");
    const CoverGrid& g = tree_->leaf_grid();
    by_level_.resize(g.bid_levels + 1);  // reward per leaf bid level; last slot = good
    for (int k = 0; k < g.bid_levels; ++k) by_level_[k] = support_rewards[ctx.support_of_level[k]];

    // expected reward of each node's emitted mixture, bottom-up
    rtilde_.resize(tree_->node_count());
    for (int id = tree_->node_count() - 1; id >= 0; --id) {
        if (tree_->is_leaf(id)) {
            const CoverFunction& f = tree_->levels[tree_->depth].fns[tree_->nodes[id].fn];
            rtilde_[id] = support_rewards[ctx.support_of_level[f.idx[ctx.cell]]];
            continue;
        }
        const int h = hedge_of_node_[id];
        const int gb = ctx.group_begin[id];
        if (gb >= 0) {
            const Eigen::VectorXd& p = last_p_[h];
            const std::uint16_t* grp = ctx.group_idx.data() + gb;
            by_level_[g.bid_levels] = support_rewards[ctx.good_support[id]];
            hedges_[h].update_grouped(by_level_, grp, static_cast<std::size_t>(p.size()));
            double dot = 0.0;
            for (Eigen::Index c = 0; c < p.size(); ++c) dot += p[c] * by_level_[grp[c]];
            rtilde_[id] = dot;
            continue;
        }
        const auto& ch = tree_->nodes[id].children;
        act_.resize(static_cast<Eigen::Index>(ch.size()) + 1);
        for (std::size_t c = 0; c < ch.size(); ++c)
            act_[static_cast<Eigen::Index>(c)] = rtilde_[ch[c]];
        act_[act_.size() - 1] = support_rewards[ctx.good_support[id]];
        hedges_[h].update(act_);
        rtilde_[id] = last_p_[h].dot(act_);
    }
}

int effective_tree_depth(const TreePolicyConfig& cfg, long horizon) {
    int m = static_cast<int>(std::floor(std::log2(std::sqrt(static_cast<double>(horizon)))));
    m = std::max(0, std::min(m, cfg.depth_cap));
    while (m > 0 && cover_count(cfg.lipschitz, m) > cfg.size_cap) --m;
    return m;
}

TreePolicy::TreePolicy(TreePolicyConfig cfg, PaymentRule rule, long horizon)
    : cfg_(cfg), rule_(rule), horizon_(horizon) {
    if (horizon < 1) throw std::invalid_argument("TreePolicy: horizon must be >= 1");
    const int depth = effective_tree_depth(cfg, horizon);
    tree_ = std::make_shared<const CoverTree>(build_tree(cfg.lipschitz, depth, cfg.size_cap));
    auto factory = [tree = tree_, horizon](long) { return TreeInstance(tree, horizon); };
    switch (cfg.restart) {
        case TreePolicyConfig::Restart::None:
            single_.emplace(tree_, horizon);
            break;
        case TreePolicyConfig::Restart::Sparsified:
            meta_.emplace(sparsified_starts(horizon), horizon, factory);
            break;
        case TreePolicyConfig::Restart::Full:
            meta_.emplace(full_starts(horizon), horizon, factory);
            break;
    }
}

BidDistribution TreePolicy::step(double v, const ScaleParams& s) {
    fill_round_context(*tree_, v, s, rule_, ctx_);
    Eigen::VectorXd q = meta_ ? meta_->step(s.u_cap, ctx_) : single_->step(s.u_cap, ctx_);
    return {ctx_.support, std::move(q)};
}

void TreePolicy::update(double d) {
    Eigen::VectorXd rewards(ctx_.support.size());
    for (Eigen::Index i = 0; i < rewards.size(); ++i)
        rewards[i] = scaled_reward(rule_, ctx_.chi, ctx_.psi, ctx_.v, ctx_.support[i], d);
    if (meta_) meta_->update(rewards, ctx_);
    else single_->update(rewards, ctx_);
}

std::string TreePolicy::describe() const {
    const char* restart = cfg_.restart == TreePolicyConfig::Restart::None        ? "none"
                          : cfg_.restart == TreePolicyConfig::Restart::Sparsified ? "sparsified"
                                                                                  : "full";
    return "tree L=" + std::to_string(cfg_.lipschitz) + " depth=" + std::to_string(tree_->depth) +
           " leaves=" + std::to_string(tree_->leaf_ids.size()) + " restarts=" + restart;
}

PolyPolicy::PolyPolicy(PolyPolicyConfig cfg, PaymentRule rule, long horizon)
    : cfg_(cfg), rule_(rule), horizon_(horizon) {
    if (!(cfg.lipschitz >= 1.0)) throw std::invalid_argument("PolyPolicy: Lipschitz constant must be >= 1");
    if (horizon < 1) throw std::invalid_argument("PolyPolicy: horizon must be >= 1");
    n_ = cfg.buckets > 0
             ? cfg.buckets
             : static_cast<int>(std::min<long>(static_cast<long>(cfg.lipschitz * horizon),
                                               cfg.bucket_cap));
    k_ = cfg.bids > 0 ? cfg.bids : static_cast<int>(std::min<long>(horizon, cfg.bid_cap));
    if (n_ < 1 || k_ < 1) throw std::invalid_argument("PolyPolicy: buckets and bids must be >= 1");
    std::vector<long> starts = cfg.restart == TreePolicyConfig::Restart::Full
                                   ? full_starts(horizon)
                                   : sparsified_starts(horizon);
    if (cfg.restart == TreePolicyConfig::Restart::None) starts = {1};
    for (int i = 0; i < n_; ++i) {
        metas_.emplace_back(starts, horizon, std::function<HedgeSub(long)>([k = k_, horizon](long) {
                                return HedgeSub{HedgeLearner(k, horizon, 1.0)};
                            }));
    }
    q_.resize(n_);
    guarded_.assign(n_, std::vector<double>(k_, 0.0));
}

BidDistribution PolyPolicy::step(double v, const ScaleParams& s) {
    check_unit(v, "value");
    if (stepped_) throw std::logic_error("PolyPolicy: step called twice without update");
    s_ = s;
    for (int i = 0; i < n_; ++i) {
        const double vb = bucket_value(i + 1);
        for (int j = 0; j < k_; ++j)
            guarded_[i][j] = guarded_bid(rule_, vb, s.chi, s.psi, static_cast<double>(j + 1) / k_);
        q_[i] = metas_[i].step(s.u_cap);
    }
    stepped_ = true;
    if (v == 0.0) {
        return {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
    }
    const int i = std::min(n_, static_cast<int>(std::ceil(v * n_)));
    Eigen::VectorXd support(k_);
    for (int j = 0; j < k_; ++j) support[j] = guarded_[i - 1][j];
    return {std::move(support), q_[i - 1]};
}

void PolyPolicy::update(double d) {
    if (!stepped_) throw std::logic_error("PolyPolicy: update without step");
    for (int i = 0; i < n_; ++i) {
        const double vb = bucket_value(i + 1);
        Eigen::VectorXd rewards(k_);
        for (int j = 0; j < k_; ++j)
            rewards[j] = scaled_reward(rule_, s_.chi, s_.psi, vb, guarded_[i][j], d);
        metas_[i].update(rewards);
    }
    stepped_ = false;
}

std::string PolyPolicy::describe() const {
    return "poly L=" + std::to_string(cfg_.lipschitz) + " buckets=" + std::to_string(n_) +
           " bids=" + std::to_string(k_);
}

BucketBanditPolicy::BucketBanditPolicy(BucketBanditConfig cfg, PaymentRule rule, long horizon)
    : cfg_(cfg), rule_(rule), horizon_(horizon) {
    if (!(cfg.lipschitz >= 1.0))
        throw std::invalid_argument("BucketBanditPolicy: Lipschitz constant must be >= 1");
    if (horizon < 1) throw std::invalid_argument("BucketBanditPolicy: horizon must be >= 1");
    const double t14 = std::pow(static_cast<double>(horizon), 0.25);
    const double l = cfg.lipschitz;
    n_ = cfg.buckets > 0 ? cfg.buckets
                         : static_cast<int>(std::ceil(std::pow(l, 0.75) * t14 - 1e-9));
    k_ = cfg.bids > 0 ? cfg.bids
                      : static_cast<int>(std::ceil(t14 / std::pow(l, 0.25) - 1e-9));
    n_ = std::max(n_, 1);
    k_ = std::max(k_, 1);
    arms_.resize(n_);
}

long BucketBanditPolicy::bucket_rounds(int i) const {
    if (i < 1 || i > n_) throw std::invalid_argument("bucket_rounds: bucket out of range");
    return arms_[i - 1] ? arms_[i - 1]->round() : 0;
}

BidDistribution BucketBanditPolicy::step(double v, const ScaleParams& s) {
    check_unit(v, "value");
    s_ = s;
    stepped_ = true;
    if (v == 0.0) {
        bucket_ = -1;
        return {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
    }
    bucket_ = std::min(n_, static_cast<int>(std::ceil(v * n_)));
    auto& arm = arms_[bucket_ - 1];
    if (!arm) arm = std::make_unique<ExpSix>(k_, horizon_, s.u_cap);
    arm->announce_range(s.u_cap);
    const double vb = static_cast<double>(bucket_) / n_;
    Eigen::VectorXd support(k_);
    for (int j = 0; j < k_; ++j)
        support[j] = guarded_bid(rule_, vb, s.chi, s.psi, static_cast<double>(j + 1) / k_);
    return {std::move(support), arm->distribution()};
}

void BucketBanditPolicy::update_bandit(int support_idx, bool won, double price) {
    if (!stepped_) throw std::logic_error("BucketBanditPolicy: update without step");
    stepped_ = false;
    if (bucket_ < 0) return;  // zero-value round, no learner played
    const double vb = static_cast<double>(bucket_) / n_;
    const double r = won ? s_.chi * vb - s_.psi * price : 0.0;
    arms_[bucket_ - 1]->record_loss(support_idx, s_.u_cap - r);
}

std::string BucketBanditPolicy::describe() const {
    return "bucket_bandit L=" + std::to_string(cfg_.lipschitz) + " buckets=" + std::to_string(n_) +
           " bids=" + std::to_string(k_);
}

FixedFunctionPolicy::FixedFunctionPolicy(std::function<double(double)> f, PaymentRule rule,
                                         std::string label)
    : f_(std::move(f)), rule_(rule), label_(std::move(label)) {}

BidDistribution FixedFunctionPolicy::step(double v, const ScaleParams& s) {
    const double raw = f_(v);
    check_unit(raw, "fixed policy bid");
    Eigen::VectorXd support(1), probs(1);
    support[0] = guarded_bid(rule_, v, s.chi, s.psi, raw);
    probs[0] = 1.0;
    return {support, probs};
}

std::string FixedFunctionPolicy::describe() const { return label_; }

}  // namespace bidsim
