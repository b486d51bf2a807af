#include "uolens/environments.hpp"

#include <cmath>
#include <ostream>

#include "uolens/format.hpp"
#include "uolens/rng.hpp"

namespace uolens {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

}  // namespace

// ---------------------------------------------------------------------------
// PeaStream
// ---------------------------------------------------------------------------

PeaStream::PeaStream(PeaStreamConfig config) : config_(std::move(config)) {
    if (config_.experts < 1) throw ConfigError("PeaStream: need at least one expert");
    if (config_.kind == PeaStreamKind::drifting_leader && config_.drift_period < 1)
        throw ConfigError("PeaStream: drift period must be >= 1");
    if (config_.kind == PeaStreamKind::scale_shock && config_.shock_round < 1)
        throw ConfigError("PeaStream: shock round must be >= 1");
    if (config_.kind == PeaStreamKind::optimism_quality &&
        (!(config_.noise_min > 0.0) || config_.noise_max < config_.noise_min))
        throw ConfigError("PeaStream: need 0 < noise_min <= noise_max");
}

Eigen::VectorXd PeaStream::noise_levels() const {
    if (config_.kind != PeaStreamKind::optimism_quality)
        throw CapabilityError("noise_levels: only defined for optimism_quality streams");
    const int k = config_.experts;
    Eigen::VectorXd sigma(k);
    for (int i = 0; i < k; ++i) {
        const double frac = k > 1 ? static_cast<double>(i) / (k - 1) : 0.0;
        sigma[i] = config_.noise_min * std::pow(config_.noise_max / config_.noise_min, frac);
    }
    return sigma;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> PeaStream::round(int t) const {
    if (t < 1) throw ConfigError("PeaStream: rounds are 1-based");
    const int k = config_.experts;
    Eigen::VectorXd m(k), l(k);
    SplitMix64 rng = SplitMix64::keyed(config_.seed, static_cast<std::uint64_t>(t));

    switch (config_.kind) {
        case PeaStreamKind::iid_gap: {
            for (int i = 0; i < k; ++i) {
                const double mean = config_.base_mean + (i == 0 ? 0.0 : config_.gap);
                l[i] = mean + rng.uniform(-config_.noise_half, config_.noise_half);
                m[i] = mean;
            }
            break;
        }
        case PeaStreamKind::drifting_leader: {
            const auto losses_at = [&](int s, Eigen::VectorXd& out) {
                SplitMix64 r = SplitMix64::keyed(config_.seed, static_cast<std::uint64_t>(s));
                const int leader = ((s - 1) / config_.drift_period) % k;
                for (int i = 0; i < k; ++i)
                    out[i] = (i == leader ? 0.1 : 0.9) + r.uniform(-0.05, 0.05);
            };
            losses_at(t, l);
            if (t == 1)
                m.setConstant(0.5);
            else
                losses_at(t - 1, m);
            break;
        }
        case PeaStreamKind::scale_shock: {
            const double factor = t >= config_.shock_round ? config_.shock_factor : 1.0;
            for (int i = 0; i < k; ++i) l[i] = factor * rng.next_double();
            m.setZero();
            break;
        }
        case PeaStreamKind::optimism_quality: {
            const Eigen::VectorXd sigma = noise_levels();
            for (int i = 0; i < k; ++i) {
                const double mean = config_.base_mean + config_.mean_spread * i;
                l[i] = mean + rng.uniform(-config_.noise_half, config_.noise_half);
                m[i] = l[i] + sigma[i] * rng.uniform(-1.0, 1.0);
            }
            break;
        }
    }
    return {m, l};
}

double PeaStream::comparator_variance(const Eigen::VectorXd& u, int horizon) const {
    double v = 0.0;
    for (int t = 1; t <= horizon; ++t) {
        const auto [m, l] = round(t);
        const Eigen::ArrayXd err = (l - m).array();
        v += (u.array() * err * err).sum();
    }
    return v;
}

int PeaStream::first_round_exceeding(double threshold, int horizon) const {
    for (int t = 1; t <= horizon; ++t) {
        const auto [m, l] = round(t);
        if ((l - m).cwiseAbs().maxCoeff() > threshold) return t;
    }
    return -1;
}

void PeaStream::export_csv(std::ostream& out, int horizon) const {
    out << "t,expert,loss,optimism\n";
    for (int t = 1; t <= horizon; ++t) {
        const auto [m, l] = round(t);
        for (int i = 0; i < config_.experts; ++i)
            out << t << ',' << i << ',' << format_double(l[i]) << ',' << format_double(m[i])
                << '\n';
    }
}

std::uint64_t PeaStream::stream_hash(int horizon) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int t = 1; t <= horizon; ++t) {
        const auto [m, l] = round(t);
        h = fnv1a(m.data(), sizeof(double) * m.size(), h);
        h = fnv1a(l.data(), sizeof(double) * l.size(), h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// OcoStream
// ---------------------------------------------------------------------------

OcoStream::OcoStream(OcoStreamConfig config)
    : config_(std::move(config)),
      domain_(ConvexDomain::ball(Eigen::VectorXd::Zero(config_.dimension), config_.domain_radius)) {
    const int d = config_.dimension;
    if (d < 1) throw ConfigError("OcoStream: dimension must be >= 1");
    if (config_.horizon < 1) throw ConfigError("OcoStream: horizon must be >= 1");
    if (!(config_.domain_radius > 0.0)) throw ConfigError("OcoStream: radius must be positive");
    if (config_.kind != OcoStreamKind::logistic_drift && d < 2)
        throw ConfigError("OcoStream: this kind needs dimension >= 2");
    if (config_.kind == OcoStreamKind::quadratic_drift || config_.kind == OcoStreamKind::sea_sampler) {
        if (std::abs(config_.orbit_center) + config_.orbit >= config_.domain_radius)
            throw ConfigError("OcoStream: drift centers must stay inside the domain");
    }

    if (!(config_.variation_budget > 0.0)) {
        phase_prefix_.resize(static_cast<std::size_t>(config_.horizon) + 1, 0.0);
        for (long long s = 2; s <= config_.horizon; ++s)
            phase_prefix_[static_cast<std::size_t>(s)] =
                phase_prefix_[static_cast<std::size_t>(s - 1)]
                + config_.step_angle * std::pow(s, 0.5 * (config_.drift_exponent - 1.0));
    }

    const double R = config_.domain_radius;
    const double D = 2.0 * R;
    switch (config_.kind) {
        case OcoStreamKind::linear_drift:
            truth_.cls = CurvatureTruth::Class::convex;
            truth_.lipschitz = config_.scale;
            truth_.smoothness = 0.0;
            break;
        case OcoStreamKind::quadratic_drift: {
            truth_.cls = CurvatureTruth::Class::strongly_convex;
            truth_.strong_convexity = 2.0;
            truth_.smoothness = 2.0;
            truth_.lipschitz = 2.0 * (R + std::abs(config_.orbit_center) + config_.orbit);
            break;
        }
        case OcoStreamKind::logistic_drift: {
            // Fixed direction a with |a| = scale, drawn once from the seed.
            SplitMix64 rng = SplitMix64::keyed(config_.seed, 0);
            lin_direction_.resize(d);
            double norm = 0.0;
            while (norm < 1e-12) {
                for (int i = 0; i < d; ++i) lin_direction_[i] = rng.normal();
                norm = lin_direction_.norm();
            }
            lin_direction_ *= config_.scale / norm;
            const double zmax = config_.scale * R + config_.amplitude;
            truth_.cls = CurvatureTruth::Class::exp_concave;
            truth_.lipschitz = config_.scale * sigmoid(zmax);
            truth_.smoothness = 0.25 * config_.scale * config_.scale;
            truth_.beta = std::exp(-zmax);
            truth_.exp_concavity =
                0.5 * std::min(1.0 / (4.0 * truth_.lipschitz * D), truth_.beta);
            break;
        }
        case OcoStreamKind::sea_sampler:
            truth_.cls = CurvatureTruth::Class::strongly_convex;
            truth_.strong_convexity = 2.0;
            truth_.smoothness = 2.0;
            truth_.lipschitz = 2.0 * (R + std::abs(config_.orbit_center) + config_.orbit)
                               + config_.noise_sigma;
            break;
    }
}

double OcoStream::phase(int t) const {
    // Per-step angle: fixed when a variation budget is given, otherwise the
    // polynomial schedule step_angle * s^{(drift_exponent - 1)/2}.
    const double horizon_steps = std::max(1.0, static_cast<double>(config_.horizon - 1));
    double theta = 0.0;
    if (config_.variation_budget > 0.0) {
        double per_step = 0.0;
        const double b = std::sqrt(config_.variation_budget / horizon_steps);
        switch (config_.kind) {
            case OcoStreamKind::linear_drift:
                per_step = 2.0 * std::asin(std::min(1.0, b / (2.0 * config_.scale)));
                break;
            case OcoStreamKind::quadratic_drift:
            case OcoStreamKind::sea_sampler:
                per_step = 2.0 * std::asin(std::min(1.0, b / (4.0 * config_.orbit)));
                break;
            case OcoStreamKind::logistic_drift:
                // Approximate: the sigmoid slope is at most 1/4.
                per_step = 4.0 * b / (config_.scale * config_.amplitude);
                break;
        }
        theta = per_step * (t - 1);
    } else {
        theta = phase_prefix_.at(static_cast<std::size_t>(std::min<long long>(t, config_.horizon)));
    }
    return theta;
}

Eigen::VectorXd OcoStream::drift_center(int t) const {
    const int d = config_.dimension;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    const double th = (config_.kind == OcoStreamKind::sea_sampler && config_.static_mean)
                          ? phase(1)
                          : phase(t);
    c[0] = config_.orbit_center + config_.orbit * std::cos(th);
    c[1] = config_.orbit * std::sin(th);
    return c;
}

double OcoStream::logistic_offset(int t) const {
    return config_.amplitude * std::sin(phase(t));
}

Eigen::VectorXd OcoStream::noise(int t) const {
    const int d = config_.dimension;
    Eigen::VectorXd xi(d);
    SplitMix64 rng = SplitMix64::keyed(config_.seed, static_cast<std::uint64_t>(t));
    double norm = 0.0;
    while (norm < 1e-12) {
        for (int i = 0; i < d; ++i) xi[i] = rng.normal();
        norm = xi.norm();
    }
    return (config_.noise_sigma / norm) * xi;
}

double OcoStream::value(int t, const Eigen::VectorXd& x) const {
    if (t < 1) return 0.0;  // f_0 == 0
    switch (config_.kind) {
        case OcoStreamKind::linear_drift:
            return gradient(t, x).dot(x);
        case OcoStreamKind::quadratic_drift:
            return (x - drift_center(t)).squaredNorm();
        case OcoStreamKind::logistic_drift:
            return softplus(lin_direction_.dot(x) + logistic_offset(t));
        case OcoStreamKind::sea_sampler:
            return (x - drift_center(t)).squaredNorm() + noise(t).dot(x);
    }
    return 0.0;
}

Eigen::VectorXd OcoStream::gradient(int t, const Eigen::VectorXd& x) const {
    const int d = config_.dimension;
    if (t < 1) return Eigen::VectorXd::Zero(d);
    switch (config_.kind) {
        case OcoStreamKind::linear_drift: {
            Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
            const double th = phase(t);
            g[0] = config_.scale * std::cos(th);
            g[1] = config_.scale * std::sin(th);
            return g;
        }
        case OcoStreamKind::quadratic_drift:
            return 2.0 * (x - drift_center(t));
        case OcoStreamKind::logistic_drift:
            return sigmoid(lin_direction_.dot(x) + logistic_offset(t)) * lin_direction_;
        case OcoStreamKind::sea_sampler:
            return 2.0 * (x - drift_center(t)) + noise(t);
    }
    return Eigen::VectorXd::Zero(d);
}

double OcoStream::exact_gradient_variation(int horizon) const {
    double v = 0.0;
    switch (config_.kind) {
        case OcoStreamKind::linear_drift: {
            const Eigen::VectorXd zero = Eigen::VectorXd::Zero(config_.dimension);
            for (int t = 2; t <= horizon; ++t)
                v += (gradient(t, zero) - gradient(t - 1, zero)).squaredNorm();
            break;
        }
        case OcoStreamKind::quadratic_drift:
            for (int t = 2; t <= horizon; ++t)
                v += 4.0 * (drift_center(t) - drift_center(t - 1)).squaredNorm();
            break;
        case OcoStreamKind::logistic_drift: {
            // sup_x |sigmoid(z + b_t) - sigmoid(z + b_{t-1})| over the slab of
            // reachable z; the difference peaks at the midpoint offset.
            const double zr = config_.scale * config_.domain_radius;
            for (int t = 2; t <= horizon; ++t) {
                const double b0 = logistic_offset(t - 1), b1 = logistic_offset(t);
                const double delta = b1 - b0;
                const double vlo = b0 - zr, vhi = b0 + zr;
                const double vc = std::clamp(-0.5 * delta, vlo, vhi);
                const double sup = std::abs(sigmoid(vc + delta) - sigmoid(vc));
                v += lin_direction_.squaredNorm() * sup * sup;
            }
            break;
        }
        case OcoStreamKind::sea_sampler:
            for (int t = 2; t <= horizon; ++t) {
                const Eigen::VectorXd diff =
                    2.0 * (drift_center(t - 1) - drift_center(t)) + noise(t) - noise(t - 1);
                v += diff.squaredNorm();
            }
            break;
    }
    return v;
}

double OcoStream::exact_min_total(int horizon) const {
    switch (config_.kind) {
        case OcoStreamKind::linear_drift: {
            Eigen::VectorXd s = Eigen::VectorXd::Zero(config_.dimension);
            const Eigen::VectorXd zero = Eigen::VectorXd::Zero(config_.dimension);
            for (int t = 1; t <= horizon; ++t) s += gradient(t, zero);
            return -config_.domain_radius * s.norm();
        }
        case OcoStreamKind::quadratic_drift: {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(config_.dimension);
            for (int t = 1; t <= horizon; ++t) mean += drift_center(t);
            mean /= horizon;
            double f = 0.0;
            for (int t = 1; t <= horizon; ++t) f += (mean - drift_center(t)).squaredNorm();
            return f;
        }
        case OcoStreamKind::logistic_drift: {
            const double zmin = -config_.scale * config_.domain_radius;
            double f = 0.0;
            for (int t = 1; t <= horizon; ++t) f += softplus(zmin + logistic_offset(t));
            return f;
        }
        case OcoStreamKind::sea_sampler: {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(config_.dimension);
            Eigen::VectorXd xs = Eigen::VectorXd::Zero(config_.dimension);
            for (int t = 1; t <= horizon; ++t) {
                mean += drift_center(t);
                xs += noise(t);
            }
            mean /= horizon;
            const Eigen::VectorXd p = domain_.project(mean - xs / (2.0 * horizon));
            double f = 0.0;
            for (int t = 1; t <= horizon; ++t)
                f += (p - drift_center(t)).squaredNorm() + noise(t).dot(p);
            return f;
        }
    }
    return 0.0;
}

double OcoStream::sigma2_cumulative(int horizon) const {
    if (config_.kind != OcoStreamKind::sea_sampler)
        throw CapabilityError("sigma2_cumulative: only defined for sea_sampler streams");
    return horizon * config_.noise_sigma * config_.noise_sigma;
}

double OcoStream::mean_drift_cumulative(int horizon) const {
    if (config_.kind != OcoStreamKind::sea_sampler)
        throw CapabilityError("mean_drift_cumulative: only defined for sea_sampler streams");
    if (config_.static_mean) return 0.0;
    double s = 0.0;
    for (int t = 2; t <= horizon; ++t)
        s += 4.0 * (drift_center(t) - drift_center(t - 1)).squaredNorm();
    return s;
}

std::uint64_t OcoStream::stream_hash(int horizon) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    Eigen::VectorXd probe = Eigen::VectorXd::Zero(config_.dimension);
    probe[0] = 0.5 * config_.domain_radius;
    for (int t = 1; t <= horizon; ++t) {
        const double v = value(t, probe);
        const Eigen::VectorXd g = gradient(t, probe);
        h = fnv1a(&v, sizeof(v), h);
        h = fnv1a(g.data(), sizeof(double) * g.size(), h);
    }
    return h;
}

StreamStatistics exact_statistics(const OcoStream& stream, int horizon) {
    StreamStatistics s;
    s.gradient_variation = stream.exact_gradient_variation(horizon);
    s.min_total = stream.exact_min_total(horizon);
    if (stream.config().kind == OcoStreamKind::sea_sampler) {
        s.sigma2 = stream.sigma2_cumulative(horizon);
        s.mean_drift2 = stream.mean_drift_cumulative(horizon);
    }
    return s;
}

}  // namespace uolens
