#include "uolens/pea_core.hpp"

#include <cmath>
#include <limits>

namespace uolens {

LearningRateGrid LearningRateGrid::build(long long horizon, double base_scale) {
    if (horizon < 1) throw ConfigError("LearningRateGrid: horizon must be >= 1");
    if (!(base_scale > 0.0) || !std::isfinite(base_scale))
        throw ConfigError("LearningRateGrid: base scale must be positive");
    const int range = ceil_log2(horizon);
    LearningRateGrid g;
    g.base_scale = base_scale;
    g.exponent_range = range;
    g.rates.resize(2 * range + 1);
    const double denom = 32.0 * base_scale;
    for (int k = -range; k <= range; ++k) g.rates[k + range] = std::ldexp(1.0, k) / denom;
    return g;
}

Eigen::VectorXd MetaWeightTable::expert_marginal() const {
    Eigen::VectorXd p(experts);
    for (int i = 0; i < experts; ++i) p[i] = values.segment(i * rates, rates).sum();
    return p;
}

MsmwcSession::MsmwcSession(const Eigen::VectorXd& prior, long long horizon, double initial_range,
                           MsmwcOptions options, double grid_scale)
    : experts_(static_cast<int>(prior.size())),
      horizon_(horizon),
      initial_range_(initial_range),
      options_(options),
      grid_(LearningRateGrid::build(horizon, grid_scale > 0.0 ? grid_scale : initial_range)),
      prior_(prior) {
    if (horizon < 1) throw ConfigError("MsmwcSession: horizon must be >= 1");
    if (!(initial_range > 0.0)) throw ConfigError("MsmwcSession: initial range must be positive");
    if (experts_ < 1) throw ConfigError("MsmwcSession: need at least one expert");
    double sum = 0.0;
    for (int i = 0; i < experts_; ++i) {
        if (prior[i] < 0.0) throw ConfigError("MsmwcSession: prior must be nonnegative");
        sum += prior[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("MsmwcSession: prior must sum to one");

    const int nrates = grid_.size();
    const Eigen::Index pairs = static_cast<Eigen::Index>(experts_) * nrates;
    Eigen::ArrayXd pair_rates(pairs);
    for (int i = 0; i < experts_; ++i)
        for (int r = 0; r < nrates; ++r) pair_rates[i * nrates + r] = grid_.rates[r];
    pair_geometry_ = WeightedEntropyGeometry(pair_rates);

    w_init_.resize(pairs);
    for (int i = 0; i < experts_; ++i)
        for (int r = 0; r < nrates; ++r) w_init_[i * nrates + r] = prior[i] / nrates;

    // Auxiliary initial round over the unrestricted simplex: the cost is the
    // correction 2 eta B1^2 generated by loss 0 against optimism B1/4.
    const Eigen::ArrayXd aux_cost = 2.0 * pair_geometry_.rate * initial_range_ * initial_range_;
    mask_ = full_mask(pairs);
    w_state_ = entropic_omd_solve(aux_cost, w_init_, pair_geometry_, mask_);

    if (options_.record_tables) {
        // Constant optimism leaves w_0 = w'_0.
        tables_.push_back({w_init_, w_init_, w_state_, mask_});
    }
}

Eigen::ArrayXd MsmwcSession::solve(const Eigen::ArrayXd& cost, const Eigen::ArrayXd& prior,
                                   const Mask& mask, double& hint) {
    EntropicSolveStats stats;
    Eigen::ArrayXd out = entropic_omd_solve(cost, prior, pair_geometry_, mask, hint, &stats);
    hint = stats.multiplier;
    return out;
}

Eigen::ArrayXd MsmwcSession::tile_expert_vector(const Eigen::VectorXd& v) const {
    const int nrates = grid_.size();
    Eigen::ArrayXd out(static_cast<Eigen::Index>(experts_) * nrates);
    for (int i = 0; i < experts_; ++i) out.segment(i * nrates, nrates) = v[i];
    return out;
}

Mask MsmwcSession::mask_for_range(double range) const {
    const int nrates = grid_.size();
    Mask mask(static_cast<std::size_t>(experts_) * nrates, 0);
    int active_rates = 0;
    for (int r = 0; r < nrates; ++r) {
        if (32.0 * grid_.rates[r] * range <= 1.0) {
            ++active_rates;
            for (int i = 0; i < experts_; ++i) mask[i * nrates + r] = 1;
        }
    }
    if (active_rates == 0)
        throw RangeError("MsmwcSession: observed range prunes every learning rate");
    return mask;
}

Eigen::VectorXd MsmwcSession::preview(const Eigen::VectorXd& optimism, double range) const {
    if (optimism.size() != experts_) throw ConfigError("MsmwcSession: optimism size mismatch");
    const Mask mask = mask_for_range(range);
    const Eigen::ArrayXd cost = tile_expert_vector(optimism);
    const Eigen::ArrayXd w =
        entropic_omd_solve(cost, w_state_, pair_geometry_, mask, mu_predict_);
    const int nrates = grid_.size();
    Eigen::VectorXd p(experts_);
    for (int i = 0; i < experts_; ++i) p[i] = w.segment(i * nrates, nrates).sum();
    return p;
}

Eigen::VectorXd MsmwcSession::predict(const Eigen::VectorXd& optimism, double range) {
    if (awaiting_update_) throw ProtocolError("MsmwcSession: predict called twice without update");
    if (optimism.size() != experts_) throw ConfigError("MsmwcSession: optimism size mismatch");
    if (!(range > 0.0) || !std::isfinite(range)) throw ConfigError("MsmwcSession: invalid range");
    if (any_range_seen_ && range < max_range_seen_)
        throw ConfigError("MsmwcSession: range must be non-decreasing");

    const int nrates = grid_.size();
    Mask mask = mask_for_range(range);

    const Eigen::ArrayXd cost = tile_expert_vector(optimism);
    w_round_ = solve(cost, w_state_, mask, mu_predict_);
    mask_ = std::move(mask);
    pending_optimism_ = optimism;
    max_range_seen_ = std::max(max_range_seen_, range);
    any_range_seen_ = true;
    awaiting_update_ = true;

    Eigen::VectorXd p(experts_);
    for (int i = 0; i < experts_; ++i) p[i] = w_round_.segment(i * nrates, nrates).sum();
    if (options_.record_history) {
        history_optimism_.push_back(optimism);
        history_decision_.push_back(p);
        history_range_.push_back(range);
    }
    return p;
}

void MsmwcSession::update(const Eigen::VectorXd& loss) {
    if (!awaiting_update_) throw ProtocolError("MsmwcSession: update called before predict");
    if (loss.size() != experts_) throw ConfigError("MsmwcSession: loss size mismatch");

    const int nrates = grid_.size();
    Eigen::ArrayXd cost(static_cast<Eigen::Index>(experts_) * nrates);
    for (int i = 0; i < experts_; ++i) {
        const double err = loss[i] - pending_optimism_[i];
        for (int r = 0; r < nrates; ++r)
            cost[i * nrates + r] = loss[i] + 32.0 * grid_.rates[r] * err * err;
    }

    Eigen::ArrayXd w_next = solve(cost, w_state_, mask_, mu_update_);
    if (options_.record_tables) tables_.push_back({w_state_, w_round_, w_next, mask_});
    w_state_ = std::move(w_next);
    if (options_.record_history) history_loss_.push_back(loss);
    awaiting_update_ = false;
}

int MsmwcSession::active_pairs() const {
    int n = 0;
    for (auto b : mask_) n += b ? 1 : 0;
    return n;
}

double MsmwcSession::aux_negative_term() const {
    const double err = initial_range_ / 4.0;
    return -16.0 * (pair_geometry_.rate * w_init_ * err * err).sum();
}

double MsmwcSession::aux_prior_over_rate() const {
    return (w_init_ / pair_geometry_.rate).sum();
}

Eigen::VectorXd MsmwcSession::round_loss(int t) const {
    if (t == 0) return Eigen::VectorXd::Zero(experts_);
    return history_loss_.at(static_cast<std::size_t>(t - 1));
}

Eigen::VectorXd MsmwcSession::round_optimism(int t) const {
    if (t == 0) return Eigen::VectorXd::Constant(experts_, initial_range_ / 4.0);
    return history_optimism_.at(static_cast<std::size_t>(t - 1));
}

double comparator_variance(const MsmwcSession& session, const Eigen::VectorXd& u) {
    double v = 0.0;
    const auto& losses = session.losses();
    const auto& optimisms = session.optimisms();
    for (std::size_t t = 0; t < losses.size(); ++t) {
        const Eigen::ArrayXd err = (losses[t] - optimisms[t]).array();
        v += (u.array() * err * err).sum();
    }
    return v;
}

namespace {

const PeaRoundTables& round_tables(const MsmwcSession& session, int t) {
    const auto& tables = session.tables();
    if (tables.empty()) throw ConfigError("per-round checks require table recording");
    return tables.at(static_cast<std::size_t>(t));
}

void require_in_support(const Eigen::ArrayXd& comparator, const Mask& mask) {
    for (Eigen::Index j = 0; j < comparator.size(); ++j)
        if (comparator[j] > 0.0 && !mask[static_cast<std::size_t>(j)])
            throw DomainError("comparator outside the round's active support");
}

}  // namespace

double check_round_bound(const MsmwcSession& session, int t, const Eigen::ArrayXd& comparator) {
    const auto& tab = round_tables(session, t);
    require_in_support(comparator, tab.mask);
    const auto& geom = session.pair_geometry();
    const Eigen::ArrayXd loss = session.tile_expert_vector(session.round_loss(t));
    const Eigen::ArrayXd err = loss - session.tile_expert_vector(session.round_optimism(t));

    const double lhs = (loss * (tab.w_t - comparator)).sum();
    double rhs = weighted_entropy_bregman(comparator, tab.w_prev, geom)
                 - weighted_entropy_bregman(comparator, tab.w_next, geom)
                 + 32.0 * (geom.rate * comparator * err * err).sum();
    // Pairs in the overflow regime contribute their indicator term; the
    // second-order negative term is only available where the rate-error
    // product stays below the threshold. Under the range contract every
    // active pair is in the second branch, so the split only matters at the
    // auxiliary round.
    for (Eigen::Index j = 0; j < loss.size(); ++j) {
        if (32.0 * geom.rate[j] * std::abs(err[j]) > 1.0)
            rhs += tab.w_t[j] * err[j];
        else
            rhs -= 16.0 * geom.rate[j] * tab.w_t[j] * err[j] * err[j];
    }
    return rhs - lhs;
}

double round_indicator_term(const MsmwcSession& session, int t) {
    const auto& tab = round_tables(session, t);
    const auto& geom = session.pair_geometry();
    const Eigen::ArrayXd err = session.tile_expert_vector(session.round_loss(t))
                               - session.tile_expert_vector(session.round_optimism(t));
    double s = 0.0;
    for (Eigen::Index j = 0; j < err.size(); ++j)
        if (32.0 * geom.rate[j] * std::abs(err[j]) > 1.0) s += tab.w_t[j] * err[j];
    return s;
}

InequalityCheck check_one_step(const MsmwcSession& session, int t, const Eigen::ArrayXd& comparator) {
    const auto& tab = round_tables(session, t);
    require_in_support(comparator, tab.mask);
    const auto& geom = session.pair_geometry();
    const Eigen::ArrayXd optimism = session.tile_expert_vector(session.round_optimism(t));
    const Eigen::ArrayXd raw_loss = session.tile_expert_vector(session.round_loss(t));
    const Eigen::ArrayXd err = raw_loss - optimism;
    const Eigen::ArrayXd loss = raw_loss + 32.0 * geom.rate * err * err;
    return omd_one_step_inequality(loss, optimism, tab.w_t, tab.w_next, tab.w_prev, comparator,
                                   geom);
}

Eigen::ArrayXd concentrated_comparator(const MsmwcSession& session, const Eigen::VectorXd& u,
                                       int rate_index) {
    const int nrates = session.grid().size();
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(session.experts()) * nrates);
    for (int i = 0; i < session.experts(); ++i) out[i * nrates + rate_index] = u[i];
    return out;
}

RegretBoundReport check_regret_bound(const MsmwcSession& session, const Eigen::VectorXd& u,
                                     double tol) {
    RegretBoundReport report;
    const auto& losses = session.losses();
    const auto& decisions = session.decisions();
    double regret = 0.0;
    for (std::size_t t = 0; t < losses.size(); ++t)
        regret += losses[t].dot(decisions[t]) - losses[t].dot(u);
    report.realized_regret = regret;

    const double kl = kl_divergence(u.array(), session.prior().array());
    const double log_grid = std::log(static_cast<double>(session.grid().size()));
    const double variance = comparator_variance(session, u);
    const double b1 = session.initial_range();
    const double range_cap = session.max_range_seen();

    for (int r = 0; r < session.grid().size(); ++r) {
        const double eta = session.grid().rates[r];
        if (32.0 * eta * range_cap > 1.0) continue;
        const double rhs = (kl + log_grid) / eta + 32.0 * eta * variance + 2.0 * eta * b1 * b1;
        const double slack = rhs + tol - regret;
        ++report.rates_checked;
        report.min_slack = std::min(report.min_slack, slack);
        if (slack < 0.0) report.holds = false;
    }
    return report;
}

}  // namespace uolens
