#include "uolens/pea_adaptive.hpp"

#include <cmath>

namespace uolens {

RestartWrapper::RestartWrapper(Eigen::VectorXd prior, long long horizon, double b0,
                               MsmwcOptions inner_options)
    : prior_(std::move(prior)),
      horizon_(horizon),
      inner_options_(inner_options),
      segment_scale_(b0) {
    if (!(b0 > 0.0)) throw ConfigError("RestartWrapper: b0 must be positive");
    tracker_.b0 = b0;
    tracker_.current = b0;
    inner_ = std::make_unique<MsmwcSession>(prior_, horizon_, b0, inner_options_);
}

Eigen::VectorXd RestartWrapper::predict(const Eigen::VectorXd& optimism) {
    if (awaiting_update_) throw ProtocolError("RestartWrapper: predict called twice");
    // Feed the range known before this round's loss.
    Eigen::VectorXd p = inner_->predict(optimism, tracker_.current);
    pending_optimism_ = optimism;
    awaiting_update_ = true;
    optimisms_.push_back(optimism);
    decisions_.push_back(p);
    ranges_.push_back(tracker_.current);
    return p;
}

void RestartWrapper::update(const Eigen::VectorXd& loss) {
    if (!awaiting_update_) throw ProtocolError("RestartWrapper: update called before predict");
    ++rounds_;
    const double prev_range = tracker_.current;
    const double err = (loss - pending_optimism_).cwiseAbs().maxCoeff();
    const double new_range = std::max(prev_range, err);

    Eigen::VectorXd surrogate = loss;
    if (new_range > prev_range)
        surrogate = pending_optimism_ + (prev_range / new_range) * (loss - pending_optimism_);
    surrogate_drift_ += (loss - surrogate).cwiseAbs().maxCoeff();

    inner_->update(surrogate);
    tracker_.current = new_range;
    losses_.push_back(loss);
    awaiting_update_ = false;

    if (new_range > segment_scale_ * static_cast<double>(horizon_)) {
        finished_segments_.push_back(std::move(inner_));
        segment_scale_ = new_range;
        inner_ = std::make_unique<MsmwcSession>(prior_, horizon_, new_range, inner_options_);
        ++tracker_.restart_count;
        tracker_.restart_rounds.push_back(rounds_);
    }
}

DoublingReport doubling_run(const Eigen::VectorXd& prior, double b0, const PeaRoundSource& source,
                            int total_rounds, int initial_guess, MsmwcOptions inner_options) {
    if (initial_guess < 1) throw ConfigError("doubling_run: initial guess must be >= 1");
    DoublingReport report;
    report.guesses.push_back(initial_guess);

    int guess = initial_guess;
    double scale = b0;
    auto wrapper = std::make_unique<RestartWrapper>(prior, 1LL << guess, scale, inner_options);

    for (int t = 1; t <= total_rounds; ++t) {
        if (t > (1LL << guess)) {
            guess *= 2;
            report.guesses.push_back(guess);
            report.restart_after_round.push_back(t - 1);
            ++report.restarts;
            scale = wrapper->tracker().current;  // carry the learned range forward
            wrapper = std::make_unique<RestartWrapper>(prior, 1LL << guess, scale, inner_options);
        }
        auto [optimism, loss] = source(t);
        report.decisions.push_back(wrapper->predict(optimism));
        wrapper->update(loss);
        report.optimisms.push_back(optimism);
        report.losses.push_back(loss);
    }
    report.final_scale = wrapper->tracker().current;

    if (!report.losses.empty()) {
        const int experts = static_cast<int>(report.losses.front().size());
        Eigen::VectorXd totals = Eigen::VectorXd::Zero(experts);
        double played = 0.0;
        for (std::size_t t = 0; t < report.losses.size(); ++t) {
            totals += report.losses[t];
            played += report.losses[t].dot(report.decisions[t]);
        }
        report.total_regret_best_expert = played - totals.minCoeff();
    }
    return report;
}

ShapeReport check_theorem4_shape(const std::vector<ShapePoint>& points, double growth_cap) {
    ShapeReport report;
    for (const auto& pt : points) {
        const double denom =
            std::sqrt(pt.kl_plus_log * pt.variance) + pt.final_range * pt.kl_plus_log;
        if (!(denom > 0.0)) {
            ++report.skipped;
            continue;
        }
        report.rho.push_back(pt.regret / denom);
        report.horizons.push_back(pt.horizon);
    }
    if (report.rho.empty()) return report;
    report.max_rho = *std::max_element(report.rho.begin(), report.rho.end());
    const double ref = std::max(report.rho.front(), 1e-3);
    report.growth = report.max_rho / ref;
    report.ok = report.growth <= growth_cap;
    return report;
}

}  // namespace uolens
