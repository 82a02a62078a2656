#pragma once

// Online learners over finite action sets with time-varying reward ranges.
// All of them consume a nondecreasing range sequence U_t (the running max of
// the round reward scales) and keep their guarantees scale-free by working
// with step sizes proportional to 1/U_t.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "bidsim/rng.hpp"

namespace bidsim {

// Multiplicative weights with step size eta_t = sqrt(log K / (T*delta)) / U_t.
// delta is the slack of the "good action" assumption the regret bound leans
// on; it is clamped below at 4*log(K)/T (query clamped() to see if that bit).
class HedgeLearner {
  public:
    HedgeLearner(int k, long horizon, double delta, double u_init = 1.0);

    // Folds u into the running range, emits this round's distribution.
    const Eigen::VectorXd& step(double u);
    // Per-action rewards for the round just stepped. Rewards must lie in
    // [-1e-12, U_t + 1e-6]; small overshoot is clamped, larger is an error.
    void update(const Eigen::VectorXd& rewards);
    // Same update when many actions share a reward: group_of[a] indexes into
    // group_rewards. One exp() per group instead of per action, which is what
    // makes wide tree nodes affordable.
    void update_grouped(const Eigen::VectorXd& group_rewards,
                        const std::vector<std::uint16_t>& group_of);
    void update_grouped(const Eigen::VectorXd& group_rewards, const std::uint16_t* group_of,
                        std::size_t n);

    int actions() const { return static_cast<int>(cum_.size()); }
    long round() const { return t_; }
    double range() const { return u_; }
    double delta() const { return delta_; }
    bool clamped() const { return clamped_; }
    const Eigen::ArrayXd& cumulative() const { return cum_; }

  private:
    void rebase();          // w_ = exp(eta * cum_), shifted; called when eta changes
    double clamp_reward(double r) const;

    Eigen::ArrayXd cum_;    // cumulative clamped rewards R_{t-1}
    Eigen::ArrayXd w_;      // exp(eta_ * cum_) up to a common positive factor
    Eigen::VectorXd p_;
    Eigen::ArrayXd gr_, gf_;  // update_grouped scratch, reused across rounds
    double theta_;          // sqrt(log K / (T*delta))
    double eta_;            // theta_ / u_
    double delta_;
    double u_;
    long horizon_;
    long t_ = 0;
    bool clamped_ = false;
    bool awaiting_update_ = false;
};

inline std::vector<long> full_starts(long horizon) {
    std::vector<long> s(horizon);
    for (long t = 0; t < horizon; ++t) s[t] = t + 1;
    return s;
}

inline std::vector<long> sparsified_starts(long horizon) {
    std::vector<long> s{1};
    for (long t = 2; t <= horizon; t *= 2) s.push_back(t);
    return s;
}

struct NoContext {};

// Interval-regret wrapper: one sub-learner per restart point, mixed by a
// delta=1 Hedge over start indices. Sub-learners created at their start
// round; before that the meta credits a start with the wrapper's own
// expected reward, which telescopes the comparison onto [start, now].
//
// Sub must provide:
//   Eigen::VectorXd step(double u, const Ctx&)     distribution over actions
//   void update(const Eigen::VectorXd& r, const Ctx&)
// The per-round action count may vary (all subs must agree on it each round).
template <class Sub, class Ctx = NoContext>
class IntervalMeta {
  public:
    IntervalMeta(std::vector<long> starts, long horizon,
                 std::function<Sub(long)> factory)
        : meta_(static_cast<int>(starts.size()), horizon, 1.0),
          starts_(std::move(starts)),
          factory_(std::move(factory)),
          horizon_(horizon) {
        if (starts_.empty() || starts_.front() != 1)
            throw std::invalid_argument("IntervalMeta: starts must begin at round 1");
        for (std::size_t i = 1; i < starts_.size(); ++i)
            if (starts_[i] <= starts_[i - 1])
                throw std::invalid_argument("IntervalMeta: starts must be strictly increasing");
        subs_.reserve(starts_.size());
    }

    const Eigen::VectorXd& step(double u, const Ctx& ctx = {}) {
        ++t_;
        while (subs_.size() < starts_.size() && starts_[subs_.size()] == t_)
            subs_.push_back(factory_(t_));
        const Eigen::VectorXd& w = meta_.step(u);
        if (sub_q_.size() < subs_.size()) sub_q_.resize(subs_.size());
        double active_mass = 0.0;
        Eigen::Index arity = -1;
        for (std::size_t i = 0; i < subs_.size(); ++i) {
            sub_q_[i] = subs_[i].step(u, ctx);
            if (arity < 0) arity = sub_q_[i].size();
            if (sub_q_[i].size() != arity)
                throw std::logic_error("IntervalMeta: sub-learners disagree on action count");
            active_mass += w[static_cast<Eigen::Index>(i)];
        }
        q_.setZero(arity);
        for (std::size_t i = 0; i < subs_.size(); ++i)
            q_ += (w[static_cast<Eigen::Index>(i)] / active_mass) * sub_q_[i];
        awaiting_update_ = true;
        return q_;
    }

    void update(const Eigen::VectorXd& rewards, const Ctx& ctx = {}) {
        if (!awaiting_update_) throw std::logic_error("IntervalMeta: update without step");
        credit_.resize(static_cast<Eigen::Index>(starts_.size()));
        const double idle = q_.dot(rewards);
        for (std::size_t i = 0; i < starts_.size(); ++i) {
            credit_[static_cast<Eigen::Index>(i)] =
                i < subs_.size() ? sub_q_[i].dot(rewards) : idle;
        }
        for (std::size_t i = 0; i < subs_.size(); ++i) subs_[i].update(rewards, ctx);
        meta_.update(credit_);
        awaiting_update_ = false;
    }

    long round() const { return t_; }
    std::size_t active_subs() const { return subs_.size(); }
    const std::vector<long>& starts() const { return starts_; }

  private:
    HedgeLearner meta_;
    std::vector<long> starts_;
    std::function<Sub(long)> factory_;
    std::vector<Sub> subs_;
    std::vector<Eigen::VectorXd> sub_q_;  // per-sub distributions, reused
    Eigen::VectorXd q_;
    Eigen::VectorXd credit_;
    long horizon_;
    long t_ = 0;
    bool awaiting_update_ = false;
};

// Plain Hedge dressed up as an IntervalMeta sub-learner.
struct HedgeSub {
    HedgeLearner h;
    Eigen::VectorXd step(double u, const NoContext&) { return h.step(u); }
    void update(const Eigen::VectorXd& r, const NoContext&) { h.update(r); }
};

// Bandit weights with implicit exploration and uniform mixing, tuned for
// nondecreasing loss ranges: sigma = 1/T, xi = 1/(2*sqrt(TK)),
// eta_{t+1} = 1/(U_{t+1}*sqrt(TK)). Weights are kept normalized, which
// both avoids overflow and makes the sigma/K probability floor explicit.
//
// Round protocol: announce_range(U_t) -> distribution()/sample -> play ->
// record_loss(action, loss). The weight update for a recorded loss is
// applied lazily at the next announce_range call, because its step size
// depends on the next observed range.
class ExpSix {
  public:
    ExpSix(int k, long horizon, double u_init = 1.0);

    void announce_range(double u);
    const Eigen::VectorXd& distribution() const { return p_; }
    int sample(std::mt19937_64& g) const { return static_cast<int>(sample_index(p_, g)); }
    void record_loss(int action, double loss);

    int actions() const { return k_; }
    double range() const { return u_; }
    long round() const { return t_; }

  private:
    Eigen::VectorXd p_;
    double sigma_, xi_, theta_;
    double u_;
    long horizon_;
    long t_ = 0;  // rounds announced so far
    int k_;
    int pending_action_ = -1;
    double pending_estimate_ = 0.0;
};

}  // namespace bidsim
