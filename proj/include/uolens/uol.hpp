#pragma once

#include <memory>

#include "uolens/base_learners.hpp"
#include "uolens/environments.hpp"
#include "uolens/pea_adaptive.hpp"

namespace uolens {

// Oracle facade over a stream with per-run query counters. Algorithms only
// touch the stream through this; reporting code reads the stream directly so
// the counters measure algorithmic queries alone.
class CountingOracle {
  public:
    explicit CountingOracle(const OcoStream& stream) : stream_(&stream) {}

    double value(int t, const Eigen::VectorXd& x) const {
        ++value_calls_;
        return stream_->value(t, x);
    }
    Eigen::VectorXd gradient(int t, const Eigen::VectorXd& x) const {
        ++gradient_calls_;
        return stream_->gradient(t, x);
    }
    long long value_calls() const { return value_calls_; }
    long long gradient_calls() const { return gradient_calls_; }
    const OcoStream& stream() const { return *stream_; }

  private:
    const OcoStream* stream_;
    mutable long long value_calls_ = 0;
    mutable long long gradient_calls_ = 0;
};

// Lower-bound identity of the heterogeneous meta losses:
// min over comparators i of <loss, p - e_i> + loss_i.
double meta_lower_bound_slack(const Eigen::VectorXd& loss, const Eigen::VectorXd& p);

// Mixture stability inequality between consecutive rounds:
//   ||x - y||^2 <= 2 sum_i p(i) ||x_i - y_i||^2 + 2 D^2 ||p - q||_1^2.
InequalityCheck mixture_stability_check(const Eigen::VectorXd& x_new, const Eigen::VectorXd& x_old,
                                        const Eigen::VectorXd& p_new, const Eigen::VectorXd& p_old,
                                        const std::vector<Eigen::VectorXd>& xi_new,
                                        const std::vector<Eigen::VectorXd>& xi_old,
                                        double diameter);

struct StabilityReport {
    double sx = 0.0;                 // sum ||x_{t+1} - x_t||^2
    double sp = 0.0;                 // sum ||p_{t+1} - p_t||_1^2
    std::vector<double> sxi;         // per-learner sums
    double min_mixture_slack = std::numeric_limits<double>::infinity();
};

StabilityReport stability_sums(const std::vector<Eigen::VectorXd>& decisions,
                               const std::vector<Eigen::VectorXd>& meta_weights,
                               const std::vector<std::vector<Eigen::VectorXd>>& base_points,
                               double diameter);

// Running diagnostics shared by both ensembles.
struct EnsembleDiagnostics {
    double min_lower_bound_slack = std::numeric_limits<double>::infinity();
    double min_mixture_slack = std::numeric_limits<double>::infinity();
    double max_mixture_error = 0.0;      // | x_t - sum p x_i |
    double max_search_residual = 0.0;    // binary search |h(a) - a| (full-info)
    int max_search_evals = 0;
    double max_meta_error = 0.0;         // max_t ||loss - optimism||_inf at the meta
    StabilityReport stability;
};

struct FullInfoConfig {
    RosterMode mode = RosterMode::standard;  // standard or sea
    double smoothness = 1.0;                 // L
    double b0 = 1.0;                         // meta wrapper seed scale
    double search_tolerance = 1e-6;          // |h(alpha) - alpha| target
    bool diagnostics = true;
    bool record_base_points = false;         // per-round base decisions (heavy)
    MsmwcOptions meta_options{true, false};
};

// Full-information universal ensemble: restart-wrapped meta over the
// curvature roster, function-value inputs for the convex base learner (via
// the optimism fixed-point search) and linearized inputs for the rest.
class FullInfoEnsemble {
  public:
    FullInfoEnsemble(const ConvexDomain& domain, long long horizon, FullInfoConfig config);

    const Eigen::VectorXd& decide(const CountingOracle& oracle);
    void observe(const CountingOracle& oracle);

    int round() const { return round_; }
    int learners() const { return static_cast<int>(roster_.learners.size()); }
    int convex_index() const { return roster_.convex_index; }
    const RestartWrapper& meta() const { return *meta_; }
    const Roster& roster() const { return roster_; }
    const ConvexDomain& domain() const { return domain_; }
    const EnsembleDiagnostics& diagnostics() const { return diag_; }
    const std::vector<Eigen::VectorXd>& decisions() const { return decisions_; }
    const std::vector<Eigen::VectorXd>& base_points() const { return base_points_; }
    const std::vector<std::vector<Eigen::VectorXd>>& base_point_history() const {
        return base_history_;
    }
    // Gradient-norm guard of the doubling wrapper: largest observed
    // ||g_t|| * max(2, D); a restart is warranted once this exceeds the
    // horizon guess.
    double gradient_guard() const { return gradient_guard_; }

  private:
    ConvexDomain domain_;
    long long horizon_;
    FullInfoConfig config_;
    Roster roster_;
    std::unique_ptr<RestartWrapper> meta_;
    int round_ = 0;
    bool decided_ = false;
    Eigen::VectorXd decision_;
    Eigen::VectorXd meta_weights_;
    Eigen::VectorXd pending_optimism_;
    std::vector<Eigen::VectorXd> base_points_;
    Eigen::VectorXd prev_decision_, prev_meta_weights_;
    std::vector<Eigen::VectorXd> prev_base_points_;
    std::vector<Eigen::VectorXd> decisions_;
    std::vector<std::vector<Eigen::VectorXd>> base_history_;
    EnsembleDiagnostics diag_;
    double gradient_guard_ = 0.0;
    double search_hint_ = 0.0;
    bool have_search_hint_ = false;
};

struct SingleGradConfig {
    double lipschitz = 1.0;   // G (required, known in this setting)
    double smoothness = 1.0;  // L
    // Constants of the correction construction; non-positive entries are
    // filled with the smallest admissible values. Explicit values below the
    // admissible floor are configuration errors.
    double lambda = -1.0;
    double c0 = -1.0;
    double gamma_convex = -1.0;
    double gamma_base = -1.0;
    bool diagnostics = true;
    bool record_base_points = false;
    MsmwcOptions meta_options{true, false};
};

// Resolves and validates the constants; throws ConfigError naming the first
// violated inequality.
SingleGradConstants resolve_single_grad_constants(const SingleGradConfig& config,
                                                  const ConvexDomain& domain);

// Single-gradient-query universal ensemble: plain core meta session on the
// rescaled grid with cascaded corrections, surrogate losses for the base
// learners, and exactly one gradient query per round.
class SingleGradEnsemble {
  public:
    SingleGradEnsemble(const ConvexDomain& domain, long long horizon, SingleGradConfig config);

    const Eigen::VectorXd& decide();
    void observe(const CountingOracle& oracle);

    int round() const { return round_; }
    int learners() const { return static_cast<int>(roster_.learners.size()); }
    const MsmwcSession& meta() const { return *meta_; }
    const Roster& roster() const { return roster_; }
    const SingleGradConstants& constants() const { return constants_; }
    double fixed_range() const { return fixed_range_; }
    long long meta_horizon() const { return meta_horizon_; }
    const EnsembleDiagnostics& diagnostics() const { return diag_; }
    const std::vector<Eigen::VectorXd>& decisions() const { return decisions_; }
    const std::vector<Eigen::VectorXd>& base_points() const { return base_points_; }
    const std::vector<std::vector<Eigen::VectorXd>>& base_point_history() const {
        return base_history_;
    }

    // Accumulated -8 sum eta w_t err^2 and the meta-weight path length, for
    // the reported (not asserted) second-order regret diagnostic.
    double meta_negative_term() const { return meta_negative_term_; }
    struct SecondOrderReport {
        double regret = 0.0;
        double bound = 0.0;
        double ratio = 0.0;
    };
    // Reported bound for comparator learner i at the largest admissible rate.
    SecondOrderReport second_order_report(int learner) const;

  private:
    ConvexDomain domain_;
    SingleGradConfig config_;
    SingleGradConstants constants_;
    double fixed_range_;
    long long meta_horizon_;
    Roster roster_;
    std::unique_ptr<MsmwcSession> meta_;
    int round_ = 0;
    bool decided_ = false;
    Eigen::VectorXd decision_, meta_weights_, pending_optimism_;
    std::vector<Eigen::VectorXd> base_points_;
    Eigen::VectorXd prev_decision_, prev_meta_weights_, prev_gradient_;
    std::vector<Eigen::VectorXd> prev_base_points_;
    std::vector<Eigen::VectorXd> decisions_;
    std::vector<std::vector<Eigen::VectorXd>> base_history_;
    EnsembleDiagnostics diag_;
    double meta_negative_term_ = 0.0;
};

// Optimism fixed point of the full-information construction: solves
// h(alpha) = alpha where h re-evaluates the meta preview with the convex
// entry's optimism set to f(x_j) - alpha. alpha1 must satisfy
// h(alpha1) <= alpha1 (the max of f over the base points does).
struct FixedPointResult {
    double alpha = 0.0;
    double residual = 0.0;
    int evaluations = 0;
};
FixedPointResult solve_optimism_fixed_point(const std::function<double(double)>& h, double alpha1,
                                            double diameter, double tolerance,
                                            const double* warm_start = nullptr);

// Doubling driver for the full-information ensemble with the gradient-norm
// guard: restarts with a doubled log-horizon guess when the round count
// exceeds 2^M or the observed gradient scale outgrows the guess.
struct UolDoublingReport {
    int restarts = 0;
    std::vector<int> restart_after_round;
    std::vector<int> guesses;
    std::vector<Eigen::VectorXd> decisions;
};
UolDoublingReport fullinfo_doubling_run(const ConvexDomain& domain, const OcoStream& stream,
                                        int total_rounds, int initial_guess,
                                        FullInfoConfig config);

}  // namespace uolens
