#include "uolens/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uolens/rng.hpp"

namespace uolens {

namespace {

void require_same_size(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, const char* what) {
    if (a.size() != b.size()) throw ConfigError(std::string(what) + ": size mismatch");
}

}  // namespace

WeightedEntropyGeometry::WeightedEntropyGeometry(Eigen::ArrayXd r) : rate(std::move(r)) {
    for (Eigen::Index i = 0; i < rate.size(); ++i) {
        if (!(rate[i] > 0.0) || !std::isfinite(rate[i]))
            throw ConfigError("WeightedEntropyGeometry: rates must be positive and finite");
    }
}

double kl_divergence(const Eigen::ArrayXd& w, const Eigen::ArrayXd& wp) {
    require_same_size(w, wp, "kl_divergence");
    double out = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i]) || !std::isfinite(wp[i]))
            throw DomainError("kl_divergence: non-finite entry");
        if (w[i] > 0.0) {
            if (wp[i] <= 0.0) throw DomainError("kl_divergence: mass outside reference support");
            out += w[i] * std::log(w[i] / wp[i]) - w[i] + wp[i];
        } else {
            out += wp[i];  // 0*log(0) = 0
        }
    }
    return out;
}

double weighted_entropy_bregman(const Eigen::ArrayXd& w, const Eigen::ArrayXd& wp,
                                const WeightedEntropyGeometry& geometry) {
    require_same_size(w, wp, "weighted_entropy_bregman");
    if (geometry.size() != w.size()) throw ConfigError("weighted_entropy_bregman: geometry size mismatch");
    double out = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            if (wp[i] <= 0.0)
                throw DomainError("weighted_entropy_bregman: mass outside reference support");
            out += (w[i] * std::log(w[i] / wp[i]) - w[i] + wp[i]) / geometry.rate[i];
        } else {
            out += wp[i] / geometry.rate[i];
        }
    }
    return out;
}

Eigen::ArrayXd entropic_omd_solve(const Eigen::ArrayXd& cost, const Eigen::ArrayXd& prior,
                                  const WeightedEntropyGeometry& geometry, const Mask& active,
                                  std::optional<double> mu_hint, EntropicSolveStats* stats) {
    const Eigen::Index n = cost.size();
    require_same_size(cost, prior, "entropic_omd_solve");
    if (geometry.size() != n || static_cast<Eigen::Index>(active.size()) != n)
        throw ConfigError("entropic_omd_solve: size mismatch");

    // Coordinates with prior exactly zero stay at zero for this solve.
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(cost[i]) || !std::isfinite(prior[i]) || prior[i] < 0.0)
            throw ConfigError("entropic_omd_solve: invalid cost/prior entry");
        if (active[static_cast<std::size_t>(i)] && prior[i] > 0.0) idx.push_back(i);
    }
    if (idx.empty()) throw ConfigError("entropic_omd_solve: empty active set");

    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(n);
    if (idx.size() == 1) {
        out[idx[0]] = 1.0;
        if (stats) *stats = {0.0, 0};
        return out;
    }

    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    Eigen::ArrayXd r(m), mu0(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index i = idx[static_cast<std::size_t>(k)];
        r[k] = geometry.rate[i];
        mu0[k] = std::log(prior[i]) / r[k] - cost[i];  // mu where this exponent hits zero
    }

    // Solve g(mu) = log sum_j exp(base_j - r_j mu) = 0 (strictly decreasing,
    // convex). Translate by the largest per-coordinate zero crossing so the
    // root sits near the origin; otherwise the achievable residual degrades
    // with |mu| * max rate.
    const double shift = mu0.maxCoeff();
    const Eigen::ArrayXd base = r * (mu0 - shift);  // max entry exactly 0

    Eigen::ArrayXd expo(m), scaled(m);
    int evals = 0;
    const auto eval = [&](double nu, double& g, double& gp) {
        expo = base - r * nu;
        const double peak = expo.maxCoeff();
        scaled = (expo - peak).exp();
        const double s = scaled.sum();
        g = peak + std::log(s);
        gp = -(r * scaled).sum() / s;
        ++evals;
    };

    const double rmin = r.minCoeff();
    double lo = 0.0;                                              // g(0) >= 0
    double hi = (std::log(static_cast<double>(m)) + 1.0) / rmin;  // g(hi) <= -1

    double glo, ghi, gp;
    eval(lo, glo, gp);
    eval(hi, ghi, gp);
    // The analytic bracket can only fail through rounding; widen geometrically.
    double width = hi - lo;
    int expand = 0;
    while (glo < 0.0 && expand < 64) {
        lo -= width;
        width *= 2.0;
        eval(lo, glo, gp);
        ++expand;
    }
    while (ghi > 0.0 && expand < 64) {
        hi += width;
        width *= 2.0;
        eval(hi, ghi, gp);
        ++expand;
    }
    if (glo < 0.0 || ghi > 0.0)
        throw NumericalError("entropic_omd_solve: failed to bracket the simplex multiplier");

    double nu = lo;
    if (mu_hint && *mu_hint - shift > lo && *mu_hint - shift < hi) nu = *mu_hint - shift;

    double g;
    eval(nu, g, gp);
    for (int it = 0; it < 200 && std::abs(g) > 1e-14; ++it) {
        if (g > 0.0)
            lo = nu;
        else
            hi = nu;
        double next = nu - g / gp;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == nu) break;  // interval exhausted at double precision
        nu = next;
        eval(nu, g, gp);
    }

    expo = base - r * nu;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
        // Flush exponents below the normal range to exact zero; sub-normal
        // weights carry too few bits for downstream log-space checks.
        const double w = expo[k] > -708.0 ? std::exp(expo[k]) : 0.0;
        out[idx[static_cast<std::size_t>(k)]] = w;
        sum += w;
    }
    if (!(std::abs(sum - 1.0) <= 1e-12))
        throw NumericalError("entropic_omd_solve: multiplier root find did not converge");
    if (stats) *stats = {shift + nu, evals};
    return out;
}

ConvexDomain ConvexDomain::ball(Eigen::VectorXd center, double radius) {
    if (!(radius > 0.0)) throw ConfigError("ConvexDomain::ball: radius must be positive");
    ConvexDomain d;
    d.kind_ = Kind::ball;
    d.center_ = std::move(center);
    d.radius_ = radius;
    return d;
}

ConvexDomain ConvexDomain::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    if (lo.size() != hi.size()) throw ConfigError("ConvexDomain::box: bound size mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
        if (!(lo[i] < hi[i])) throw ConfigError("ConvexDomain::box: lower bound must be below upper");
    ConvexDomain d;
    d.kind_ = Kind::box;
    d.lo_ = std::move(lo);
    d.hi_ = std::move(hi);
    d.center_ = 0.5 * (d.lo_ + d.hi_);
    return d;
}

double ConvexDomain::diameter() const {
    if (kind_ == Kind::ball) return 2.0 * radius_;
    return (hi_ - lo_).norm();
}

bool ConvexDomain::contains(const Eigen::VectorXd& x, double tol) const {
    if (x.size() != dimension()) return false;
    if (kind_ == Kind::ball) return (x - center_).norm() <= radius_ + tol;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
    return true;
}

Eigen::VectorXd ConvexDomain::project(const Eigen::VectorXd& x) const {
    if (x.size() != dimension()) throw ConfigError("ConvexDomain::project: dimension mismatch");
    if (kind_ == Kind::ball) {
        const Eigen::VectorXd d = x - center_;
        const double nrm = d.norm();
        if (nrm <= radius_) return x;
        return center_ + (radius_ / nrm) * d;
    }
    return x.cwiseMax(lo_).cwiseMin(hi_);
}

Eigen::VectorXd euclidean_omd_step(const Eigen::VectorXd& gradient, const Eigen::VectorXd& center,
                                   double step, const ConvexDomain& domain) {
    if (!(step > 0.0)) throw ConfigError("euclidean_omd_step: step must be positive");
    if (!gradient.allFinite() || !center.allFinite())
        throw ConfigError("euclidean_omd_step: non-finite input");
    return domain.project(center - 0.5 * step * gradient);
}

Eigen::VectorXd matrix_omd_step(const Eigen::VectorXd& gradient, const Eigen::VectorXd& center,
                                const Eigen::MatrixXd& metric, const ConvexDomain& domain) {
    const Eigen::Index d = gradient.size();
    if (metric.rows() != d || metric.cols() != d || center.size() != d)
        throw ConfigError("matrix_omd_step: size mismatch");
    if (!gradient.allFinite() || !center.allFinite())
        throw ConfigError("matrix_omd_step: non-finite input");

    if (domain.kind() == ConvexDomain::Kind::box) {
        // Only a diagonal metric keeps the box projection separable.
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                if (i != j && metric(i, j) != 0.0)
                    throw CapabilityError("matrix_omd_step: box domain requires a diagonal metric");
        Eigen::VectorXd x(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            const double u = metric(i, i);
            if (!(u > 0.0)) throw NumericalError("matrix_omd_step: singular metric");
            x[i] = center[i] - gradient[i] / u;
        }
        return domain.project(x);
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(metric);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericalError("matrix_omd_step: singular metric");
    const Eigen::VectorXd unconstrained = center - ldlt.solve(gradient);
    if (!unconstrained.allFinite()) throw NumericalError("matrix_omd_step: singular metric");

    const Eigen::VectorXd rel = unconstrained - domain.center();
    if (rel.norm() <= domain.radius()) return unconstrained;

    // Constrained ball case: x = (U + 2 nu I)^{-1} (U (c - b) - g) + b in the
    // eigenbasis of U, with nu >= 0 chosen so the constraint is tight.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(metric);
    if (eig.info() != Eigen::Success) throw NumericalError("matrix_omd_step: eigendecomposition failed");
    const Eigen::VectorXd lam = eig.eigenvalues();
    if (lam.minCoeff() <= 0.0) throw NumericalError("matrix_omd_step: singular metric");
    const Eigen::VectorXd z =
        eig.eigenvectors().transpose() * (metric * (center - domain.center()) - gradient);
    const double r = domain.radius();

    const auto norm_at = [&](double nu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double y = z[i] / (lam[i] + 2.0 * nu);
            s += y * y;
        }
        return std::sqrt(s);
    };
    const auto dnorm2_at = [&](double nu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double li = lam[i] + 2.0 * nu;
            s += -4.0 * z[i] * z[i] / (li * li * li);
        }
        return s;
    };

    double lo = 0.0;
    double hi = std::max(0.5 * (z.norm() / r - lam.minCoeff()), 1e-30);
    while (norm_at(hi) > r) hi *= 2.0;

    double nu = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double nrm = norm_at(nu);
        if (std::abs(nrm - r) <= 1e-10 * std::max(1.0, r)) break;
        if (nrm > r)
            lo = nu;
        else
            hi = nu;
        const double f = nrm * nrm - r * r;
        double next = nu - f / dnorm2_at(nu);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == nu) break;
        nu = next;
    }

    Eigen::VectorXd y(d);
    for (Eigen::Index i = 0; i < d; ++i) y[i] = z[i] / (lam[i] + 2.0 * nu);
    return eig.eigenvectors() * y + domain.center();
}

bool psd_probe(const Eigen::MatrixXd& m, std::uint64_t seed, int probes) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (((m - m.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale) return false;
    SplitMix64 rng(seed);
    for (int p = 0; p < probes; ++p) {
        Eigen::VectorXd v(m.rows());
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
        v.normalize();
        if (v.dot(m * v) < -1e-10) return false;
    }
    return true;
}

InequalityCheck omd_one_step_inequality(const Eigen::ArrayXd& loss, const Eigen::ArrayXd& optimism,
                                        const Eigen::ArrayXd& w_t, const Eigen::ArrayXd& w_next,
                                        const Eigen::ArrayXd& w_prev, const Eigen::ArrayXd& comparator,
                                        const WeightedEntropyGeometry& geometry) {
    const double lhs = (loss * (w_t - comparator)).sum();
    const double rhs = ((w_t - w_next) * (loss - optimism)).sum()
                       + weighted_entropy_bregman(comparator, w_prev, geometry)
                       - weighted_entropy_bregman(comparator, w_next, geometry)
                       - weighted_entropy_bregman(w_next, w_t, geometry)
                       - weighted_entropy_bregman(w_t, w_prev, geometry);
    InequalityCheck c;
    c.slack = rhs - lhs;
    c.holds = c.slack >= -1e-9;
    return c;
}

}  // namespace uolens
