#include "uolens/base_learners.hpp"

#include <cmath>

#include "uolens/pea_core.hpp"

namespace uolens {

OomdLearner::OomdLearner(ConvexDomain domain, BaseLearnerConfig config)
    : domain_(std::move(domain)), config_(config) {
    switch (config_.kind) {
        case Curvature::convex:
            if (config_.gamma < 0.0) throw ConfigError("OomdLearner: gamma must be >= 0");
            break;
        case Curvature::exp_concave:
            if (!(config_.alpha > 0.0) || !(config_.gamma > 0.0))
                throw ConfigError("OomdLearner: exp-concave learner needs alpha, gamma > 0");
            break;
        case Curvature::strongly_convex:
            if (!(config_.mu > 0.0) || config_.gamma < 0.0)
                throw ConfigError("OomdLearner: strongly convex learner needs mu > 0");
            break;
    }
    iterate_ = domain_.center();
    reference_ = domain_.center();
    last_gradient_ = Eigen::VectorXd::Zero(domain_.dimension());
    if (config_.kind == Curvature::exp_concave)
        metric_ = config_.gamma
                  * Eigen::MatrixXd::Identity(domain_.dimension(), domain_.dimension());
}

double OomdLearner::step_size_for_round(int t) const {
    switch (config_.kind) {
        case Curvature::convex: {
            const double adaptive = domain_.diameter() / std::sqrt(1.0 + vbar_);
            return config_.gamma > 0.0 ? std::min(adaptive, 1.0 / config_.gamma) : adaptive;
        }
        case Curvature::strongly_convex:
            return 2.0 / (config_.gamma + config_.mu * t);
        case Curvature::exp_concave:
            return 0.0;  // metric-driven
    }
    return 0.0;
}

const Eigen::VectorXd& OomdLearner::step() {
    if (stepped_) return iterate_;
    const int t = round_ + 1;
    step_size_ = step_size_for_round(t);
    if (config_.kind == Curvature::exp_concave)
        iterate_ = matrix_omd_step(last_gradient_, reference_, metric_, domain_);
    else
        iterate_ = euclidean_omd_step(last_gradient_, reference_, step_size_, domain_);
    stepped_ = true;
    return iterate_;
}

void OomdLearner::observe(const Eigen::VectorXd& gradient) {
    if (!stepped_) step();
    if (gradient.size() != domain_.dimension()) throw ConfigError("OomdLearner: gradient size");
    if (!gradient.allFinite()) throw ConfigError("OomdLearner: non-finite gradient");

    if (config_.kind == Curvature::exp_concave)
        reference_ = matrix_omd_step(gradient, reference_, metric_, domain_);
    else
        reference_ = euclidean_omd_step(gradient, reference_, step_size_, domain_);

    const Eigen::VectorXd diff = gradient - last_gradient_;
    vbar_ += diff.squaredNorm();
    if (config_.kind == Curvature::exp_concave)
        metric_ += 0.5 * config_.alpha * diff * diff.transpose();
    last_gradient_ = gradient;
    ++round_;
    stepped_ = false;
}

double SurrogateLoss::value(const Eigen::VectorXd& x) const {
    const double lin = base_gradient.dot(x);
    switch (kind) {
        case Kind::linear:
            return lin;
        case Kind::exp_concave: {
            const double r = base_gradient.dot(x - anchor);
            return lin + 0.5 * param * r * r;
        }
        case Kind::strongly_convex:
            return lin + 0.5 * param * (x - anchor).squaredNorm();
    }
    return lin;
}

Eigen::VectorXd SurrogateLoss::gradient(const Eigen::VectorXd& x) const {
    switch (kind) {
        case Kind::linear:
            return base_gradient;
        case Kind::exp_concave:
            return base_gradient + param * base_gradient.dot(x - anchor) * base_gradient;
        case Kind::strongly_convex:
            return base_gradient + param * (x - anchor);
    }
    return base_gradient;
}

Roster roster_build(RosterMode mode, long long horizon, double smoothness,
                    std::optional<double> lipschitz, const ConvexDomain& domain,
                    const SingleGradConstants* sg) {
    if (horizon < 2) throw ConfigError("roster_build: horizon must be >= 2");
    if (smoothness < 0.0 || !std::isfinite(smoothness))
        throw ConfigError("roster_build: smoothness bound required");
    const int m = ceil_log2(horizon);
    const double L = smoothness;

    Roster roster;
    roster.mode = mode;
    roster.convex_index = 0;

    if (mode == RosterMode::single_gradient) {
        if (!lipschitz) throw ConfigError("roster_build: single-gradient mode needs the Lipschitz constant");
        if (!sg) throw ConfigError("roster_build: single-gradient mode needs its constants");
        const double G = *lipschitz;
        roster.learners.emplace_back(domain,
                                     BaseLearnerConfig{Curvature::convex, sg->gamma_convex, 0, 0});
        for (int k = 1; k <= m; ++k) {
            const double alpha = std::ldexp(1.0, -k);
            const double gamma = std::max(sg->gamma_base, 1.0 + 4.0 * alpha * G * G);
            roster.learners.emplace_back(domain,
                                         BaseLearnerConfig{Curvature::exp_concave, gamma, alpha, 0});
        }
        for (int k = 1; k <= m; ++k) {
            const double mu = std::ldexp(1.0, -k);
            roster.learners.emplace_back(
                domain, BaseLearnerConfig{Curvature::strongly_convex, sg->gamma_base, 0, mu});
        }
        return roster;
    }

    roster.learners.emplace_back(domain, BaseLearnerConfig{Curvature::convex, L, 0, 0});
    const double floor = mode == RosterMode::sea ? 16.0 * L * L : 2.0 * L * L;
    for (int ka = 1; ka <= m; ++ka) {
        const double alpha = std::ldexp(1.0, -ka);
        for (int kg = 1; kg <= m; ++kg) {
            const double gamma = std::max(floor, 1.0 + alpha * std::ldexp(1.0, 2 * kg));
            roster.learners.emplace_back(domain,
                                         BaseLearnerConfig{Curvature::exp_concave, gamma, alpha, 0});
        }
    }
    for (int k = 1; k <= m; ++k) {
        const double mu = std::ldexp(1.0, -k);
        roster.learners.emplace_back(domain,
                                     BaseLearnerConfig{Curvature::strongly_convex, 0.0, 0, mu});
    }
    return roster;
}

}  // namespace uolens
