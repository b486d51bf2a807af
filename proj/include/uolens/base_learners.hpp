#pragma once

#include <optional>
#include <vector>

#include "uolens/numerics.hpp"

namespace uolens {

enum class Curvature { convex, exp_concave, strongly_convex };

struct BaseLearnerConfig {
    Curvature kind = Curvature::convex;
    double gamma = 0.0;  // step-size cap (convex/sc) or metric floor (exp-concave)
    double alpha = 0.0;  // exp-concavity parameter
    double mu = 0.0;     // strong-convexity parameter
};

// One optimistic mirror-descent base learner. Per round t:
//   x_t      = argmin <g_{t-1}, x> + breg_t(x, x'_t)      (step)
//   x'_{t+1} = argmin <g_t, x>     + breg_t(x, x'_t)      (observe)
// with the regularizer chosen by the curvature class:
//   convex:           (1/eta_t) ||.||^2,  eta_t = min(D / sqrt(1 + Vbar_{t-1}), 1/gamma)
//   strongly convex:  (1/eta_t) ||.||^2,  eta_t = 2 / (gamma + mu t)
//   exp-concave:      (1/2) ||.||_{U_t}^2, U_t = gamma I + (alpha/2) sum (dg)(dg)^T
// Gradients start at g_0 = 0 (round-zero loss is identically zero).
class OomdLearner {
  public:
    OomdLearner(ConvexDomain domain, BaseLearnerConfig config);

    // x_t from the stored optimism gradient g_{t-1}; idempotent until observe.
    const Eigen::VectorXd& step();
    // Feed the round's true gradient; computes x'_{t+1} and advances schedules.
    void observe(const Eigen::VectorXd& gradient);

    const Eigen::VectorXd& iterate() const { return iterate_; }
    const Eigen::VectorXd& reference() const { return reference_; }
    const Eigen::VectorXd& last_gradient() const { return last_gradient_; }
    double grad_variation() const { return vbar_; }
    double current_step() const { return step_size_; }
    const Eigen::MatrixXd& metric() const { return metric_; }
    int round() const { return round_; }
    const BaseLearnerConfig& config() const { return config_; }
    const ConvexDomain& domain() const { return domain_; }

  private:
    double step_size_for_round(int t) const;

    ConvexDomain domain_;
    BaseLearnerConfig config_;
    Eigen::VectorXd iterate_, reference_, last_gradient_;
    Eigen::MatrixXd metric_;
    double vbar_ = 0.0;
    double step_size_ = 0.0;
    int round_ = 0;
    bool stepped_ = false;
};

// Surrogate losses fed to the base learners in the single-gradient setting.
struct SurrogateLoss {
    enum class Kind { linear, exp_concave, strongly_convex };
    Kind kind = Kind::linear;
    double param = 0.0;  // alpha_i or mu_i
    Eigen::VectorXd anchor;
    Eigen::VectorXd base_gradient;

    double value(const Eigen::VectorXd& x) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
};

enum class RosterMode { standard, sea, single_gradient };

// Constants of the single-gradient construction; validated by the ensemble.
struct SingleGradConstants {
    double lambda = 0.0;
    double c0 = 1.0;
    double gamma_convex = 0.0;
    double gamma_base = 0.0;  // exp-concave / strongly convex learners
};

struct Roster {
    std::vector<OomdLearner> learners;
    int convex_index = 0;
    RosterMode mode = RosterMode::standard;
};

// Builds the base-learner bank: one convex learner, a grid of exp-concave
// learners, and a grid of strongly convex learners, with parameter ranges
// depending on the mode. smoothness (L) is always required; lipschitz (G)
// only in single-gradient mode.
Roster roster_build(RosterMode mode, long long horizon, double smoothness,
                    std::optional<double> lipschitz, const ConvexDomain& domain,
                    const SingleGradConstants* sg = nullptr);

}  // namespace uolens
