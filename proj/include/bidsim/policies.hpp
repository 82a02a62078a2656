#pragma once

// Bidding policies. A policy turns (value, current reward scales) into a
// distribution over bids once per round, then consumes feedback: the
// competing bid under full information, or (won, price) under bandit
// feedback. The orchestrator samples from the emitted distribution so that
// all randomness flows through one seeded stream.
//
// Every learned bid goes through guarded_bid, so per-round scaled rewards
// are nonnegative no matter what the competition does.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bidsim/core.hpp"
#include "bidsim/covers.hpp"
#include "bidsim/learners.hpp"

namespace bidsim {

struct BidDistribution {
    Eigen::VectorXd support;  // bid values; may contain repeats (index = learner action)
    Eigen::VectorXd probs;
};

class Policy {
  public:
    virtual ~Policy() = default;
    virtual BidDistribution step(double v, const ScaleParams& s) = 0;
    virtual void update(double d);                                  // full info
    virtual void update_bandit(int support_idx, bool won, double price);  // bandit
    virtual bool bandit() const { return false; }
    virtual std::string describe() const = 0;
};

// Round-level geometry shared by every learner instance that bids on the
// same cover tree: which leaf cell the value falls in, the guarded bid of
// each leaf bid level, and each node's good bid (max guarded bid among its
// leaves). Instances differ only in learner state, so this is computed once
// per round and reused across restart copies.
struct TreeRoundContext {
    double v = 0, chi = 1, psi = 0, u = 1;
    int cell = 0;
    std::vector<double> guarded_by_level;
    std::vector<int> support_of_level;   // leaf bid level -> support index
    Eigen::VectorXd support;             // distinct guarded bids, ascending
    std::vector<int> good_support;       // node id -> support index of good bid
    std::vector<double> good_value;      // node id -> good bid
    // For nodes whose children are all leaves: per action slot, the bid level
    // its reward comes from this round (good slot last, group = bid_levels).
    // Lets those wide nodes use HedgeLearner::update_grouped. Stored flat:
    // node id -> offset into group_idx (-1 when not applicable); the run
    // length is the node's child count + 1.
    std::vector<int> group_begin;
    std::vector<std::uint16_t> group_idx;
};

// Fills ctx in place, reusing its buffers; the by-value form is a wrapper.
void fill_round_context(const CoverTree& tree, double v, const ScaleParams& s,
                        const PaymentRule& rule, TreeRoundContext& ctx);
TreeRoundContext make_round_context(const CoverTree& tree, double v, const ScaleParams& s,
                                    const PaymentRule& rule);

// One run of the tree algorithm: a Hedge per interior node choosing among
// "descend into child" and "play this node's good bid".
class TreeInstance {
  public:
    TreeInstance(std::shared_ptr<const CoverTree> tree, long horizon);
    Eigen::VectorXd step(double u, const TreeRoundContext& ctx);
    void update(const Eigen::VectorXd& support_rewards, const TreeRoundContext& ctx);
    const HedgeLearner& node_learner(int node_id) const;

  private:
    std::shared_ptr<const CoverTree> tree_;
    std::vector<int> hedge_of_node_;      // node id -> index into hedges_, -1 for leaves
    std::vector<HedgeLearner> hedges_;
    std::vector<Eigen::VectorXd> last_p_;
    Eigen::VectorXd w_;                   // step scratch: mass pushed onto each node
    Eigen::VectorXd rtilde_;              // update scratch: per-node expected reward
    Eigen::VectorXd by_level_;            // update scratch: reward per leaf bid level
    Eigen::VectorXd act_;                 // update scratch: non-grouped action rewards
};

struct TreePolicyConfig {
    int lipschitz = 1;
    int depth_cap = 3;
    std::uint64_t size_cap = 1'000'000;
    enum class Restart { None, Sparsified, Full };
    Restart restart = Restart::Sparsified;
};

// Effective depth: the deepest level, at most min(floor(log2 sqrt(T)),
// depth_cap), whose cover fits under size_cap.
int effective_tree_depth(const TreePolicyConfig& cfg, long horizon);

class TreePolicy final : public Policy {
  public:
    TreePolicy(TreePolicyConfig cfg, PaymentRule rule, long horizon);
    BidDistribution step(double v, const ScaleParams& s) override;
    void update(double d) override;
    std::string describe() const override;
    const CoverTree& tree() const { return *tree_; }
    const TreeRoundContext& last_context() const { return ctx_; }

  private:
    TreePolicyConfig cfg_;
    PaymentRule rule_;
    long horizon_;
    std::shared_ptr<const CoverTree> tree_;
    std::optional<IntervalMeta<TreeInstance, TreeRoundContext>> meta_;
    std::optional<TreeInstance> single_;
    TreeRoundContext ctx_;
};

struct PolyPolicyConfig {
    double lipschitz = 1.0;
    int buckets = 0;    // 0: floor(L*T) capped at bucket_cap
    int bids = 0;       // 0: T capped at bid_cap
    int bucket_cap = 64;
    int bid_cap = 64;
    TreePolicyConfig::Restart restart = TreePolicyConfig::Restart::Sparsified;
};

// Full-information value bucketing: every bucket's interval-wrapped Hedge is
// stepped and updated every round from the observed competing bid; only the
// bucket containing v_t bids. Bucket i prices its rewards at the bucket
// ceiling i/N, which upper-bounds every value it covers.
class PolyPolicy final : public Policy {
  public:
    PolyPolicy(PolyPolicyConfig cfg, PaymentRule rule, long horizon);
    BidDistribution step(double v, const ScaleParams& s) override;
    void update(double d) override;
    std::string describe() const override;
    int buckets() const { return n_; }
    int bids() const { return k_; }

  private:
    double bucket_value(int i) const { return static_cast<double>(i) / n_; }
    PolyPolicyConfig cfg_;
    PaymentRule rule_;
    long horizon_;
    int n_, k_;
    std::vector<IntervalMeta<HedgeSub>> metas_;
    // round cache
    ScaleParams s_;
    std::vector<Eigen::VectorXd> q_;
    std::vector<std::vector<double>> guarded_;  // per bucket, per bid index
    bool stepped_ = false;
};

struct BucketBanditConfig {
    double lipschitz = 1.0;
    int buckets = 0;  // 0: ceil(L^(3/4) * T^(1/4))
    int bids = 0;     // 0: ceil(T^(1/4) / L^(1/4))
};

// Bandit counterpart: one ExpSix per bucket, advanced only on rounds its
// bucket is selected, fed the realized loss of the sampled bid.
class BucketBanditPolicy final : public Policy {
  public:
    BucketBanditPolicy(BucketBanditConfig cfg, PaymentRule rule, long horizon);
    BidDistribution step(double v, const ScaleParams& s) override;
    void update_bandit(int support_idx, bool won, double price) override;
    bool bandit() const override { return true; }
    std::string describe() const override;
    int buckets() const { return n_; }
    int bids() const { return k_; }
    long bucket_rounds(int i) const;

  private:
    BucketBanditConfig cfg_;
    PaymentRule rule_;
    long horizon_;
    int n_, k_;
    std::vector<std::unique_ptr<ExpSix>> arms_;
    // round cache
    int bucket_ = -1;
    ScaleParams s_;
    bool stepped_ = false;
};

// Bids a fixed value->bid map (guarded). Benchmark and plumbing-test policy.
class FixedFunctionPolicy final : public Policy {
  public:
    FixedFunctionPolicy(std::function<double(double)> f, PaymentRule rule,
                        std::string label = "fixed");
    BidDistribution step(double v, const ScaleParams& s) override;
    void update(double) override {}
    std::string describe() const override;

  private:
    std::function<double(double)> f_;
    PaymentRule rule_;
    std::string label_;
};

}  // namespace bidsim
