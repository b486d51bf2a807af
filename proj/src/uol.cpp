#include "uolens/uol.hpp"

#include <cmath>
#include <sstream>

namespace uolens {

double meta_lower_bound_slack(const Eigen::VectorXd& loss, const Eigen::VectorXd& p) {
    const double played = loss.dot(p);
    double min_slack = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < loss.size(); ++i) {
        // <loss, p - e_i> + loss_i
        min_slack = std::min(min_slack, played - loss[i] + loss[i]);
    }
    return min_slack;
}

InequalityCheck mixture_stability_check(const Eigen::VectorXd& x_new, const Eigen::VectorXd& x_old,
                                        const Eigen::VectorXd& p_new, const Eigen::VectorXd& p_old,
                                        const std::vector<Eigen::VectorXd>& xi_new,
                                        const std::vector<Eigen::VectorXd>& xi_old,
                                        double diameter) {
    double carried = 0.0;
    for (std::size_t i = 0; i < xi_new.size(); ++i)
        carried += p_new[static_cast<Eigen::Index>(i)] * (xi_new[i] - xi_old[i]).squaredNorm();
    const double l1 = (p_new - p_old).cwiseAbs().sum();
    const double rhs = 2.0 * carried + 2.0 * diameter * diameter * l1 * l1;
    const double lhs = (x_new - x_old).squaredNorm();
    InequalityCheck c;
    c.slack = rhs - lhs;
    c.holds = c.slack >= -1e-9;
    return c;
}

StabilityReport stability_sums(const std::vector<Eigen::VectorXd>& decisions,
                               const std::vector<Eigen::VectorXd>& meta_weights,
                               const std::vector<std::vector<Eigen::VectorXd>>& base_points,
                               double diameter) {
    StabilityReport r;
    if (!base_points.empty()) r.sxi.assign(base_points.front().size(), 0.0);
    for (std::size_t t = 0; t + 1 < decisions.size(); ++t) {
        r.sx += (decisions[t + 1] - decisions[t]).squaredNorm();
        const double l1 = (meta_weights[t + 1] - meta_weights[t]).cwiseAbs().sum();
        r.sp += l1 * l1;
        for (std::size_t i = 0; i < r.sxi.size(); ++i)
            r.sxi[i] += (base_points[t + 1][i] - base_points[t][i]).squaredNorm();
        const auto c = mixture_stability_check(decisions[t + 1], decisions[t], meta_weights[t + 1],
                                               meta_weights[t], base_points[t + 1],
                                               base_points[t], diameter);
        r.min_mixture_slack = std::min(r.min_mixture_slack, c.slack);
    }
    return r;
}

FixedPointResult solve_optimism_fixed_point(const std::function<double(double)>& h, double alpha1,
                                            double diameter, double tolerance,
                                            const double* warm_start) {
    FixedPointResult out;
    const auto phi = [&](double a) {
        ++out.evaluations;
        return h(a) - a;
    };

    if (warm_start) {
        const double p = phi(*warm_start);
        if (std::abs(p) <= tolerance) {
            out.alpha = *warm_start;
            out.residual = std::abs(p);
            return out;
        }
    }

    double hi = alpha1;
    double phi_hi = phi(hi);
    if (std::abs(phi_hi) <= tolerance) {
        out.alpha = hi;
        out.residual = std::abs(phi_hi);
        return out;
    }
    if (phi_hi > 0.0)
        throw NumericalError("fixed point: upper bracket invalid (oracle not convex?)");

    // Doubling search for a lower bracket alpha1 - 2^k D.
    double lo = hi;
    double phi_lo = phi_hi;
    bool found = false;
    for (int k = 0; k <= 64; ++k) {
        lo = alpha1 - std::ldexp(diameter, k);
        phi_lo = phi(lo);
        if (phi_lo >= 0.0) {
            found = true;
            break;
        }
    }
    if (!found) throw NumericalError("fixed point: no lower bracket after 64 doublings");
    if (phi_lo <= tolerance) {
        out.alpha = lo;
        out.residual = std::abs(phi_lo);
        return out;
    }

    double mid = lo, phi_mid = phi_lo;
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        phi_mid = phi(mid);
        if (std::abs(phi_mid) <= tolerance) {
            out.alpha = mid;
            out.residual = std::abs(phi_mid);
            return out;
        }
        if (phi_mid >= 0.0)
            lo = mid;
        else
            hi = mid;
        if (!(lo < hi) || hi - lo < 1e-300) break;
    }
    std::ostringstream msg;
    msg << "fixed point: bisection stalled, residual " << std::abs(phi_mid);
    throw NumericalError(msg.str());
}

// ---------------------------------------------------------------------------
// FullInfoEnsemble
// ---------------------------------------------------------------------------

FullInfoEnsemble::FullInfoEnsemble(const ConvexDomain& domain, long long horizon,
                                   FullInfoConfig config)
    : domain_(domain),
      horizon_(horizon),
      config_(config),
      roster_(roster_build(config.mode, horizon, config.smoothness, std::nullopt, domain)) {
    if (config_.mode == RosterMode::single_gradient)
        throw ConfigError("FullInfoEnsemble: use SingleGradEnsemble for single-gradient mode");
    const int k = static_cast<int>(roster_.learners.size());
    meta_ = std::make_unique<RestartWrapper>(Eigen::VectorXd::Constant(k, 1.0 / k), horizon,
                                             config_.b0, config_.meta_options);
    base_points_.resize(k);
    prev_base_points_.assign(k, domain_.center());
    prev_decision_ = domain_.center();
    diag_.stability.sxi.assign(k, 0.0);
}

const Eigen::VectorXd& FullInfoEnsemble::decide(const CountingOracle& oracle) {
    if (decided_) return decision_;
    const int t = round_ + 1;
    const int k = learners();
    const int j = roster_.convex_index;

    for (int i = 0; i < k; ++i) base_points_[i] = roster_.learners[i].step();

    // Optimism: zero for the linearized entries; the convex entry needs
    // f_{t-1}(x_{t,j}) - f_{t-1}(x_t), resolved as a fixed point since x_t
    // depends on the optimism itself.
    Eigen::VectorXd optimism = Eigen::VectorXd::Zero(k);
    double alpha1 = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i)
        alpha1 = std::max(alpha1, oracle.value(t - 1, base_points_[i]));
    const double f_at_j = oracle.value(t - 1, base_points_[j]);

    const auto h = [&](double a) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(k);
        m[j] = f_at_j - a;
        const Eigen::VectorXd p = meta_->preview(m);
        Eigen::VectorXd mix = Eigen::VectorXd::Zero(domain_.dimension());
        for (int i = 0; i < k; ++i) mix += p[i] * base_points_[i];
        return oracle.value(t - 1, mix);
    };

    const FixedPointResult fp = solve_optimism_fixed_point(
        h, alpha1, domain_.diameter(), config_.search_tolerance,
        have_search_hint_ ? &search_hint_ : nullptr);
    search_hint_ = fp.alpha;
    have_search_hint_ = true;
    diag_.max_search_residual = std::max(diag_.max_search_residual, fp.residual);
    diag_.max_search_evals = std::max(diag_.max_search_evals, fp.evaluations);

    optimism[j] = f_at_j - fp.alpha;
    meta_weights_ = meta_->predict(optimism);
    pending_optimism_ = optimism;

    decision_ = Eigen::VectorXd::Zero(domain_.dimension());
    for (int i = 0; i < k; ++i) decision_ += meta_weights_[i] * base_points_[i];
    decided_ = true;
    return decision_;
}

void FullInfoEnsemble::observe(const CountingOracle& oracle) {
    if (!decided_) throw ProtocolError("FullInfoEnsemble: observe before decide");
    const int t = round_ + 1;
    const int k = learners();
    const int j = roster_.convex_index;

    const Eigen::VectorXd g = oracle.gradient(t, decision_);
    const double f_x = oracle.value(t, decision_);

    Eigen::VectorXd loss(k);
    for (int i = 0; i < k; ++i) {
        if (i == j)
            loss[i] = oracle.value(t, base_points_[i]) - f_x;
        else
            loss[i] = g.dot(base_points_[i] - decision_);
    }

    if (config_.diagnostics) {
        diag_.min_lower_bound_slack =
            std::min(diag_.min_lower_bound_slack, meta_lower_bound_slack(loss, meta_weights_));
        diag_.max_meta_error = std::max(
            diag_.max_meta_error, (loss - pending_optimism_).cwiseAbs().maxCoeff());
    }
    gradient_guard_ = std::max(gradient_guard_, g.norm() * std::max(2.0, domain_.diameter()));

    meta_->update(loss);
    // Base learners update on the original losses at their own points.
    for (int i = 0; i < k; ++i)
        roster_.learners[i].observe(oracle.gradient(t, base_points_[i]));

    if (config_.diagnostics && t >= 2) {
        diag_.stability.sx += (decision_ - prev_decision_).squaredNorm();
        const double l1 = (meta_weights_ - prev_meta_weights_).cwiseAbs().sum();
        diag_.stability.sp += l1 * l1;
        for (int i = 0; i < k; ++i)
            diag_.stability.sxi[i] += (base_points_[i] - prev_base_points_[i]).squaredNorm();
        const auto c = mixture_stability_check(decision_, prev_decision_, meta_weights_,
                                               prev_meta_weights_, base_points_,
                                               prev_base_points_, domain_.diameter());
        diag_.stability.min_mixture_slack = std::min(diag_.stability.min_mixture_slack, c.slack);
        diag_.min_mixture_slack = diag_.stability.min_mixture_slack;
    }

    prev_decision_ = decision_;
    prev_meta_weights_ = meta_weights_;
    prev_base_points_ = base_points_;
    decisions_.push_back(decision_);
    if (config_.record_base_points) base_history_.push_back(base_points_);
    ++round_;
    decided_ = false;
}

// ---------------------------------------------------------------------------
// SingleGradEnsemble
// ---------------------------------------------------------------------------

SingleGradConstants resolve_single_grad_constants(const SingleGradConfig& config,
                                                  const ConvexDomain& domain) {
    const double G = config.lipschitz, L = config.smoothness, D = domain.diameter();
    if (!(G > 0.0)) throw ConfigError("single-gradient mode: Lipschitz constant must be positive");
    if (L < 0.0) throw ConfigError("single-gradient mode: smoothness must be nonnegative");

    const double c2 = 4.0 * L * L + 32.0 * G * G * D * D * L * L + 8.0 * std::pow(G, 4);
    const double lambda_floor = std::max(4.0 * D * D * L * L, 2.0 * c2);
    const double c0_floor = std::max({1.0, 4.0 * std::pow(D, 4) * L * L, 0.5 * c2 * D * D});

    SingleGradConstants sg;
    const auto pick = [](double user, double floor, const char* name, const char* rule) {
        if (user <= 0.0) return floor;
        if (user < floor) {
            std::ostringstream msg;
            msg << "single-gradient constants: " << name << " = " << user << " violates " << rule
                << " (floor " << floor << ")";
            throw ConfigError(msg.str());
        }
        return user;
    };
    sg.lambda = pick(config.lambda, lambda_floor, "lambda", "lambda >= max(4 D^2 L^2, 2 C2)");
    sg.c0 = pick(config.c0, c0_floor, "c0", "c0 >= max(1, 4 D^4 L^2, C2 D^2 / 2)");
    sg.gamma_convex = pick(config.gamma_convex, 4.0 * sg.lambda, "gamma_convex",
                           "gamma >= 4 lambda");
    sg.gamma_base = pick(config.gamma_base, 4.0 * sg.lambda + 32.0 * std::pow(G, 4), "gamma_base",
                         "gamma >= 4 lambda + 32 G^4");
    return sg;
}

SingleGradEnsemble::SingleGradEnsemble(const ConvexDomain& domain, long long horizon,
                                       SingleGradConfig config)
    : domain_(domain),
      config_(config),
      constants_(resolve_single_grad_constants(config, domain)),
      fixed_range_(std::max(1.0, 2.0 * config.lipschitz * domain.diameter())),
      meta_horizon_(std::max<long long>(
          horizon, static_cast<long long>(std::ceil(std::max(
                       2.0 * config.lipschitz, config.lipschitz * domain.diameter()))))),
      roster_(roster_build(RosterMode::single_gradient, meta_horizon_, config.smoothness,
                           config.lipschitz, domain, &constants_)) {
    const int k = static_cast<int>(roster_.learners.size());
    meta_ = std::make_unique<MsmwcSession>(Eigen::VectorXd::Constant(k, 1.0 / k), meta_horizon_,
                                           fixed_range_, config_.meta_options,
                                           constants_.c0 * fixed_range_);
    base_points_.resize(k);
    prev_base_points_.assign(k, domain_.center());
    prev_decision_ = domain_.center();
    prev_gradient_ = Eigen::VectorXd::Zero(domain_.dimension());
    diag_.stability.sxi.assign(k, 0.0);
}

const Eigen::VectorXd& SingleGradEnsemble::decide() {
    if (decided_) return decision_;
    const int k = learners();
    for (int i = 0; i < k; ++i) base_points_[i] = roster_.learners[i].step();

    Eigen::VectorXd optimism(k);
    for (int i = 0; i < k; ++i) {
        optimism[i] = prev_gradient_.dot(prev_base_points_[i] - prev_decision_)
                      + constants_.lambda * (base_points_[i] - prev_base_points_[i]).squaredNorm();
    }
    meta_weights_ = meta_->predict(optimism, fixed_range_);
    pending_optimism_ = optimism;

    decision_ = Eigen::VectorXd::Zero(domain_.dimension());
    for (int i = 0; i < k; ++i) decision_ += meta_weights_[i] * base_points_[i];
    decided_ = true;
    return decision_;
}

void SingleGradEnsemble::observe(const CountingOracle& oracle) {
    if (!decided_) throw ProtocolError("SingleGradEnsemble: observe before decide");
    const int t = round_ + 1;
    const int k = learners();

    // The single gradient query of the round.
    const Eigen::VectorXd g = oracle.gradient(t, decision_);

    Eigen::VectorXd loss(k);
    for (int i = 0; i < k; ++i) {
        loss[i] = g.dot(base_points_[i] - decision_)
                  + constants_.lambda * (base_points_[i] - prev_base_points_[i]).squaredNorm();
    }

    if (config_.diagnostics) {
        diag_.min_lower_bound_slack =
            std::min(diag_.min_lower_bound_slack, meta_lower_bound_slack(loss, meta_weights_));
        diag_.max_meta_error = std::max(
            diag_.max_meta_error, (loss - pending_optimism_).cwiseAbs().maxCoeff());
        // -8 sum eta w_t err^2 accumulator for the reported second-order bound.
        const Eigen::ArrayXd err = meta_->tile_expert_vector(loss - pending_optimism_);
        meta_negative_term_ +=
            8.0 * (meta_->pair_geometry().rate * meta_->last_weights() * err * err).sum();
    }

    meta_->update(loss);

    // Base learners step on their surrogate losses anchored at the decision.
    for (int i = 0; i < k; ++i) {
        const auto& cfg = roster_.learners[i].config();
        SurrogateLoss s;
        s.anchor = decision_;
        s.base_gradient = g;
        switch (cfg.kind) {
            case Curvature::convex:
                s.kind = SurrogateLoss::Kind::linear;
                break;
            case Curvature::exp_concave:
                s.kind = SurrogateLoss::Kind::exp_concave;
                s.param = cfg.alpha;
                break;
            case Curvature::strongly_convex:
                s.kind = SurrogateLoss::Kind::strongly_convex;
                s.param = cfg.mu;
                break;
        }
        roster_.learners[i].observe(s.gradient(base_points_[i]));
    }

    if (config_.diagnostics && t >= 2) {
        diag_.stability.sx += (decision_ - prev_decision_).squaredNorm();
        const double l1 = (meta_weights_ - prev_meta_weights_).cwiseAbs().sum();
        diag_.stability.sp += l1 * l1;
        for (int i = 0; i < k; ++i)
            diag_.stability.sxi[i] += (base_points_[i] - prev_base_points_[i]).squaredNorm();
        const auto c = mixture_stability_check(decision_, prev_decision_, meta_weights_,
                                               prev_meta_weights_, base_points_,
                                               prev_base_points_, domain_.diameter());
        diag_.stability.min_mixture_slack = std::min(diag_.stability.min_mixture_slack, c.slack);
        diag_.min_mixture_slack = diag_.stability.min_mixture_slack;
    }

    prev_decision_ = decision_;
    prev_meta_weights_ = meta_weights_;
    prev_base_points_ = base_points_;
    prev_gradient_ = g;
    decisions_.push_back(decision_);
    if (config_.record_base_points) base_history_.push_back(base_points_);
    ++round_;
    decided_ = false;
}

SingleGradEnsemble::SecondOrderReport SingleGradEnsemble::second_order_report(int learner) const {
    SecondOrderReport rep;
    const auto& losses = meta_->losses();
    const auto& optimisms = meta_->optimisms();
    const auto& decisions = meta_->decisions();
    double err2 = 0.0;
    for (std::size_t t = 0; t < losses.size(); ++t) {
        rep.regret += losses[t].dot(decisions[t]) - losses[t][learner];
        const double e = losses[t][learner] - optimisms[t][learner];
        err2 += e * e;
    }
    // Largest rate admissible against 32 c0 B: the central grid exponent.
    const double eta = meta_->grid().rates[meta_->grid().exponent_range];
    const double k = static_cast<double>(learners());
    rep.bound = (std::log(k) + std::log(static_cast<double>(meta_->grid().size()))) / eta
                + 16.0 * eta * err2 - meta_negative_term_
                - 4.0 * constants_.c0 * fixed_range_ * diag_.stability.sp;
    rep.ratio = rep.bound != 0.0 ? rep.regret / rep.bound : 0.0;
    return rep;
}

UolDoublingReport fullinfo_doubling_run(const ConvexDomain& domain, const OcoStream& stream,
                                        int total_rounds, int initial_guess,
                                        FullInfoConfig config) {
    if (initial_guess < 1) throw ConfigError("fullinfo_doubling_run: initial guess must be >= 1");
    UolDoublingReport report;
    report.guesses.push_back(initial_guess);

    int guess = initial_guess;
    auto ensemble = std::make_unique<FullInfoEnsemble>(domain, 1LL << guess, config);
    CountingOracle oracle(stream);

    for (int t = 1; t <= total_rounds; ++t) {
        const bool too_long = t > (1LL << guess);
        const bool too_steep = ensemble->gradient_guard() > static_cast<double>(1LL << guess);
        if (too_long || too_steep) {
            guess *= 2;
            report.guesses.push_back(guess);
            report.restart_after_round.push_back(t - 1);
            ++report.restarts;
            ensemble = std::make_unique<FullInfoEnsemble>(domain, 1LL << guess, config);
        }
        report.decisions.push_back(ensemble->decide(oracle));
        ensemble->observe(oracle);
    }
    return report;
}

}  // namespace uolens
