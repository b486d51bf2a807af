#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <utility>

#include "uolens/numerics.hpp"

namespace uolens {

// ---------------------------------------------------------------------------
// Expert-advice streams. All draws are keyed on (seed, round), so streams are
// immutable random-access generators: regenerating any round is bit-for-bit
// identical. Draw order per round is fixed and documented per kind below.
// ---------------------------------------------------------------------------

enum class PeaStreamKind { iid_gap, drifting_leader, scale_shock, optimism_quality };

struct PeaStreamConfig {
    PeaStreamKind kind = PeaStreamKind::iid_gap;
    int experts = 8;
    std::uint64_t seed = 1;

    // iid_gap: expert 0 has mean loss base_mean, the rest base_mean + gap;
    // losses add U[-noise_half, noise_half]; optimism is the exact mean.
    // Per round the generator draws one uniform per expert, in expert order.
    double gap = 0.1;
    double base_mean = 0.4;
    double noise_half = 0.25;

    // drifting_leader: the leading expert rotates every drift_period rounds;
    // leader loss 0.1, others 0.9, plus U[-0.05, 0.05] per expert (expert
    // order); optimism is the previous round's loss (0.5 at t = 1).
    int drift_period = 100;

    // scale_shock: losses U[0, 1] per expert (expert order), multiplied by
    // shock_factor from shock_round on; optimism is zero.
    double shock_factor = 2000.0;
    int shock_round = 500;

    // optimism_quality: means base_mean + mean_spread * i; loss noise as in
    // iid_gap; optimism = loss + sigma_i * U[-1, 1] with sigma_i log-spaced
    // from noise_min to noise_max. Per round and expert: loss uniform first,
    // then the optimism uniform.
    double mean_spread = 0.05;
    double noise_min = 1e-2;
    double noise_max = 1.0;
};

class PeaStream {
  public:
    explicit PeaStream(PeaStreamConfig config);

    const PeaStreamConfig& config() const { return config_; }
    int experts() const { return config_.experts; }

    // (optimism, loss) of round t >= 1. Deterministic in (seed, t).
    std::pair<Eigen::VectorXd, Eigen::VectorXd> round(int t) const;

    // optimism_quality noise magnitudes sigma_i (throws for other kinds).
    Eigen::VectorXd noise_levels() const;

    // Exact realized V(u) over the first `horizon` rounds.
    double comparator_variance(const Eigen::VectorXd& u, int horizon) const;

    // First round whose running max error exceeds `threshold`; -1 if none.
    int first_round_exceeding(double threshold, int horizon) const;

    void export_csv(std::ostream& out, int horizon) const;
    std::uint64_t stream_hash(int horizon) const;

  private:
    PeaStreamConfig config_;
};

// ---------------------------------------------------------------------------
// Convex-optimization streams over a centered ball domain, with exact
// difficulty statistics. t is 1-based; round 0 is the all-zero function.
// ---------------------------------------------------------------------------

enum class OcoStreamKind { linear_drift, quadratic_drift, logistic_drift, sea_sampler };

struct CurvatureTruth {
    enum class Class { convex, exp_concave, strongly_convex };
    Class cls = Class::convex;
    double strong_convexity = 0.0;  // mu
    double exp_concavity = 0.0;     // alpha in the two-point form
    double beta = 0.0;              // raw exp-concavity before the conversion
    double lipschitz = 0.0;         // G
    double smoothness = 0.0;        // L
};

struct OcoStreamConfig {
    OcoStreamKind kind = OcoStreamKind::quadratic_drift;
    int dimension = 2;
    std::uint64_t seed = 1;
    long long horizon = 1024;  // drift schedules are laid out for this length
    double domain_radius = 1.0;

    // linear_drift: g_t = scale * u(theta_t), u a unit vector rotating in the
    // first coordinate plane; quadratic_drift: f_t = ||x - c_t||^2 with c_t
    // on an orbit of radius orbit around orbit_center * e0.
    double scale = 1.0;
    double orbit = 0.4;
    double orbit_center = 0.3;

    // Per-step angle: either fixed from a total gradient-variation budget
    // (variation_budget > 0), or step_angle * t^{(drift_exponent - 1) / 2}.
    double variation_budget = -1.0;
    double step_angle = 0.05;
    double drift_exponent = 1.0;

    // logistic_drift: f_t(x) = log(1 + exp(<a, x> + b_t)) with |a| = scale
    // and b_t = amplitude * sin(theta_t).
    double amplitude = 1.0;

    // sea_sampler: quadratic mean-function plus a gradient noise of exact
    // magnitude noise_sigma (fixed-norm direction, d normals per round, drawn
    // before normalization); static_mean freezes the orbit (Sigma == 0).
    double noise_sigma = 0.5;
    bool static_mean = true;
};

class OcoStream {
  public:
    explicit OcoStream(OcoStreamConfig config);

    const OcoStreamConfig& config() const { return config_; }
    const ConvexDomain& domain() const { return domain_; }
    const CurvatureTruth& truth() const { return truth_; }

    double value(int t, const Eigen::VectorXd& x) const;
    Eigen::VectorXd gradient(int t, const Eigen::VectorXd& x) const;

    // V_T = sum_{t=2..T} sup_x ||grad f_t(x) - grad f_{t-1}(x)||^2, exact.
    double exact_gradient_variation(int horizon) const;

    // F_T = min_x sum_t f_t(x) over the domain.
    double exact_min_total(int horizon) const;

    // SEA statistics (sea_sampler only): sum of exact sigma_t^2, and the
    // drift part sum_{t=2..T} sup_x ||grad F_t - grad F_{t-1}||^2.
    double sigma2_cumulative(int horizon) const;
    double mean_drift_cumulative(int horizon) const;

    std::uint64_t stream_hash(int horizon) const;

  private:
    Eigen::VectorXd drift_center(int t) const;  // c_t of quadratic/sea kinds
    double phase(int t) const;                  // theta_t
    double logistic_offset(int t) const;        // b_t
    Eigen::VectorXd noise(int t) const;         // sea gradient noise xi_t

    OcoStreamConfig config_;
    ConvexDomain domain_;
    CurvatureTruth truth_;
    Eigen::VectorXd lin_direction_;      // logistic direction a
    std::vector<double> phase_prefix_;   // cumulative drift angles (schedule mode)
};

// Statistics bundle for reports. Fields are NaN when not applicable.
struct StreamStatistics {
    double gradient_variation = std::numeric_limits<double>::quiet_NaN();
    double min_total = std::numeric_limits<double>::quiet_NaN();
    double sigma2 = std::numeric_limits<double>::quiet_NaN();
    double mean_drift2 = std::numeric_limits<double>::quiet_NaN();
};

StreamStatistics exact_statistics(const OcoStream& stream, int horizon);

}  // namespace uolens
