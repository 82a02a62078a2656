#include "bidsim/learners.hpp"

#include <cmath>

namespace bidsim {

HedgeLearner::HedgeLearner(int k, long horizon, double delta, double u_init)
    : cum_(Eigen::ArrayXd::Zero(k)), w_(Eigen::ArrayXd::Ones(k)), u_(u_init), horizon_(horizon) {
    if (k < 1) throw std::invalid_argument("HedgeLearner: need at least one action");
    if (horizon < 1) throw std::invalid_argument("HedgeLearner: horizon must be >= 1");
    if (!(delta > 0.0)) throw std::invalid_argument("HedgeLearner: delta must be > 0");
    if (!(u_init > 0.0)) throw std::invalid_argument("HedgeLearner: range must be > 0");
    const double floor = 4.0 * std::log(static_cast<double>(k)) / static_cast<double>(horizon);
    delta_ = delta;
    if (delta_ < floor) {
        delta_ = floor;
        clamped_ = true;
    }
    const double logk = std::log(static_cast<double>(k));
    theta_ = k == 1 ? 0.0 : std::sqrt(logk / (static_cast<double>(horizon) * delta_));
    eta_ = theta_ / u_;
}

void HedgeLearner::rebase() {
    eta_ = theta_ / u_;
    Eigen::ArrayXd z = eta_ * cum_;
    z -= z.maxCoeff();  // shift-invariant; keeps exp() in range
    w_ = z.exp();
}

double HedgeLearner::clamp_reward(double r) const {
    if (r < -1e-12 || r > u_ + 1e-6)
        throw std::out_of_range("HedgeLearner: reward outside [0, U_t]");
    return std::min(std::max(r, 0.0), u_);
}

const Eigen::VectorXd& HedgeLearner::step(double u) {
    if (awaiting_update_) throw std::logic_error("HedgeLearner: step called twice without update");
    if (u > u_) {
        u_ = u;
        rebase();
    }
    p_ = (w_ / w_.sum()).matrix();
    ++t_;
    awaiting_update_ = true;
    return p_;
}

void HedgeLearner::update(const Eigen::VectorXd& rewards) {
    if (!awaiting_update_) throw std::logic_error("HedgeLearner: update without a matching step");
    if (rewards.size() != cum_.size())
        throw std::invalid_argument("HedgeLearner: reward vector size mismatch");
    for (Eigen::Index a = 0; a < rewards.size(); ++a) {
        const double r = clamp_reward(rewards[a]);
        cum_[a] += r;
        w_[a] *= std::exp(eta_ * r);
    }
    if (w_.maxCoeff() > 1e250) w_ /= w_.maxCoeff();  // rewards >= 0, so w_ only grows
    awaiting_update_ = false;
}

void HedgeLearner::update_grouped(const Eigen::VectorXd& group_rewards,
                                  const std::vector<std::uint16_t>& group_of) {
    update_grouped(group_rewards, group_of.data(), group_of.size());
}

void HedgeLearner::update_grouped(const Eigen::VectorXd& group_rewards,
                                  const std::uint16_t* group_of, std::size_t n) {
    if (!awaiting_update_) throw std::logic_error("HedgeLearner: update without a matching step");
    if (n != static_cast<std::size_t>(cum_.size()))
        throw std::invalid_argument("HedgeLearner: group map size mismatch");
    const Eigen::Index g = group_rewards.size();
    gr_.resize(g);
    gf_.resize(g);
    for (Eigen::Index i = 0; i < g; ++i) {
        gr_[i] = clamp_reward(group_rewards[i]);
        gf_[i] = std::exp(eta_ * gr_[i]);
    }
    for (Eigen::Index a = 0; a < cum_.size(); ++a) {
        const std::uint16_t gi = group_of[a];
        if (gi >= g) throw std::invalid_argument("HedgeLearner: group index out of range");
        cum_[a] += gr_[gi];
        w_[a] *= gf_[gi];
    }
    if (w_.maxCoeff() > 1e250) w_ /= w_.maxCoeff();
    awaiting_update_ = false;
}

ExpSix::ExpSix(int k, long horizon, double u_init)
    : p_(Eigen::VectorXd::Constant(k, 1.0 / k)), u_(u_init), horizon_(horizon), k_(k) {
    if (k < 1) throw std::invalid_argument("ExpSix: need at least one action");
    if (horizon < 1) throw std::invalid_argument("ExpSix: horizon must be >= 1");
    if (!(u_init > 0.0)) throw std::invalid_argument("ExpSix: range must be > 0");
    const double tk = static_cast<double>(horizon) * k;
    sigma_ = 1.0 / static_cast<double>(horizon);
    xi_ = 0.5 / std::sqrt(tk);
    theta_ = 1.0 / std::sqrt(tk);
}

void ExpSix::announce_range(double u) {
    u_ = std::max(u_, u);
    ++t_;
    if (pending_action_ < 0) return;
    const double eta = theta_ / u_;
    // exp(-eta * estimate) on the played action, 1 elsewhere
    const double shrink = std::exp(-eta * pending_estimate_);
    const double pa = p_[pending_action_];
    const double total = 1.0 - pa * (1.0 - shrink);  // sum of w * exp(...)
    p_ *= (1.0 - sigma_) / total;
    p_[pending_action_] *= shrink;
    p_.array() += sigma_ / k_;
    p_ /= p_.sum();  // total is exact in expectation; renormalize fp residue
    pending_action_ = -1;
    pending_estimate_ = 0.0;
}

void ExpSix::record_loss(int action, double loss) {
    if (action < 0 || action >= k_) throw std::invalid_argument("ExpSix: bad action index");
    if (pending_action_ >= 0)
        throw std::logic_error("ExpSix: loss recorded twice without a range announcement");
    if (loss < -1e-12 || loss > u_ + 1e-6)
        throw std::out_of_range("ExpSix: loss outside [0, U_t]");
    const double clamped = std::min(std::max(loss, 0.0), u_);
    pending_action_ = action;
    pending_estimate_ = clamped / (p_[action] + xi_);
}

}  // namespace bidsim
