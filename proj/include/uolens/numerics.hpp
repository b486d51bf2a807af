#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "uolens/errors.hpp"

namespace uolens {

using Mask = std::vector<std::uint8_t>;

inline Mask full_mask(Eigen::Index n) { return Mask(static_cast<std::size_t>(n), 1); }

// One positive learning rate per coordinate; defines the weighted negative
// entropy regularizer psi(w) = sum_j (1/rate_j) w_j log w_j.
struct WeightedEntropyGeometry {
    Eigen::ArrayXd rate;

    explicit WeightedEntropyGeometry(Eigen::ArrayXd r);
    Eigen::Index size() const { return rate.size(); }
};

// Unnormalized KL with the 0*log(0) = 0 convention:
//   sum_i ( w_i log(w_i / wp_i) - w_i + wp_i ).
// Throws DomainError if w has mass outside the support of wp.
double kl_divergence(const Eigen::ArrayXd& w, const Eigen::ArrayXd& wp);

// Bregman divergence of the weighted negative entropy:
//   sum_j (1/rate_j) ( w_j log(w_j / wp_j) - w_j + wp_j ).
double weighted_entropy_bregman(const Eigen::ArrayXd& w, const Eigen::ArrayXd& wp,
                                const WeightedEntropyGeometry& geometry);

struct EntropicSolveStats {
    double multiplier = 0.0;
    int evaluations = 0;
};

// Minimizes <cost, w> + D_psi(w, prior) over the simplex restricted to the
// active mask. The KKT solution has the form
//   w_j = prior_j * exp(-rate_j * (cost_j + mu)),
// with the scalar mu chosen so the active coordinates sum to one. Inactive
// coordinates (mask zero or prior exactly zero) come out exactly zero.
//
// mu_hint, when given, warm-starts the root find; stats.multiplier returns
// the solved mu so callers can feed it back on the next solve.
Eigen::ArrayXd entropic_omd_solve(const Eigen::ArrayXd& cost, const Eigen::ArrayXd& prior,
                                  const WeightedEntropyGeometry& geometry, const Mask& active,
                                  std::optional<double> mu_hint = std::nullopt,
                                  EntropicSolveStats* stats = nullptr);

// Euclidean balls and axis-aligned boxes; the only feasible sets the solvers
// support.
class ConvexDomain {
  public:
    enum class Kind { ball, box };

    static ConvexDomain ball(Eigen::VectorXd center, double radius);
    static ConvexDomain box(Eigen::VectorXd lo, Eigen::VectorXd hi);

    Kind kind() const { return kind_; }
    Eigen::Index dimension() const { return center_.size(); }
    const Eigen::VectorXd& center() const { return center_; }
    double radius() const { return radius_; }
    const Eigen::VectorXd& lower() const { return lo_; }
    const Eigen::VectorXd& upper() const { return hi_; }

    // sup ||x - y||_2 over the domain: 2r for balls, the diagonal for boxes.
    double diameter() const;

    bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
    Eigen::VectorXd project(const Eigen::VectorXd& x) const;

  private:
    ConvexDomain() = default;
    Kind kind_ = Kind::ball;
    Eigen::VectorXd center_, lo_, hi_;
    double radius_ = 0.0;
};

// One optimistic mirror-descent half-step in Euclidean geometry:
//   argmin_x <g, x> + (1/step) ||x - center||^2
// whose unconstrained solution is center - (step/2) g, then projected.
Eigen::VectorXd euclidean_omd_step(const Eigen::VectorXd& gradient, const Eigen::VectorXd& center,
                                   double step, const ConvexDomain& domain);

// Half-step under the metric ||.||_U^2/2:
//   argmin_x <g, x> + (1/2) ||x - center||_U^2.
// Unconstrained solution center - U^{-1} g. Ball constraints are solved
// exactly via a root find on the projection multiplier in the eigenbasis of
// U; boxes require a diagonal metric.
Eigen::VectorXd matrix_omd_step(const Eigen::VectorXd& gradient, const Eigen::VectorXd& center,
                                const Eigen::MatrixXd& metric, const ConvexDomain& domain);

// Probabilistic PSD probe: symmetric within tol and v'Mv >= -1e-10 for a
// handful of random directions.
bool psd_probe(const Eigen::MatrixXd& m, std::uint64_t seed = 7, int probes = 32);

struct InequalityCheck {
    bool holds = false;
    double slack = 0.0;  // rhs - lhs
};

// One-step OOMD inequality: with w_t the optimism solve, w_next the loss
// solve (both from w_prev), and any comparator u in the feasible set,
//   <loss, w_t - u> <= <w_t - w_next, loss - optimism>
//                      + D(u, w_prev) - D(u, w_next)
//                      - D(w_next, w_t) - D(w_t, w_prev).
// Returns whether it holds with slack >= -1e-9, plus the slack itself.
InequalityCheck omd_one_step_inequality(const Eigen::ArrayXd& loss, const Eigen::ArrayXd& optimism,
                                        const Eigen::ArrayXd& w_t, const Eigen::ArrayXd& w_next,
                                        const Eigen::ArrayXd& w_prev, const Eigen::ArrayXd& comparator,
                                        const WeightedEntropyGeometry& geometry);

}  // namespace uolens
