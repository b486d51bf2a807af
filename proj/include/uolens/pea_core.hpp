#pragma once

#include <Eigen/Dense>
#include <vector>

#include "uolens/numerics.hpp"

namespace uolens {

inline int ceil_log2(long long n) {
    int k = 0;
    long long p = 1;
    while (p < n) {
        p *= 2;
        ++k;
    }
    return k;
}

// Geometric grid of learning rates 2^k / (32 * base_scale) for
// k = -ceil(log2 T) .. ceil(log2 T).
struct LearningRateGrid {
    Eigen::ArrayXd rates;  // strictly increasing, consecutive ratio exactly 2
    double base_scale = 1.0;
    int exponent_range = 0;

    static LearningRateGrid build(long long horizon, double base_scale);
    int size() const { return static_cast<int>(rates.size()); }
};

// Weights over (expert, rate) pairs, expert-major layout.
struct MetaWeightTable {
    Eigen::ArrayXd values;  // size experts * rates, zero exactly off the active set
    Mask active;
    int experts = 0;
    int rates = 0;

    double at(int expert, int rate) const { return values[expert * rates + rate]; }
    Eigen::VectorXd expert_marginal() const;
};

// Per-round bookkeeping kept when table recording is on.
struct PeaRoundTables {
    Eigen::ArrayXd w_prev;  // state entering the round
    Eigen::ArrayXd w_t;     // optimism solve
    Eigen::ArrayXd w_next;  // loss-plus-correction solve
    Mask mask;
};

// Multi-scale multiplicative weights with correction terms over
// expert x learning-rate pairs, preceded by an auxiliary initial round run
// at the full grid. predict/update must alternate; one logical stream per
// session.
struct MsmwcOptions {
    bool record_history = true;  // per-round loss/optimism/decision vectors
    bool record_tables = false;  // full pair tables per round (heavier)
};

class MsmwcSession {
  public:
    // grid_scale overrides the grid's base scale (default: initial_range);
    // the single-gradient ensemble passes c0 * range there.
    MsmwcSession(const Eigen::VectorXd& prior, long long horizon, double initial_range,
                 MsmwcOptions options = {}, double grid_scale = 0.0);

    // Round t: supply the optimism vector and the current range bound. The
    // range must be non-decreasing across calls. Throws RangeError if the
    // range prunes every pair.
    Eigen::VectorXd predict(const Eigen::VectorXd& optimism, double range);
    void update(const Eigen::VectorXd& loss);

    // The decision predict() would commit for this optimism, without mutating
    // the session. Used by the optimism fixed-point search.
    Eigen::VectorXd preview(const Eigen::VectorXd& optimism, double range) const;

    int experts() const { return experts_; }
    long long horizon() const { return horizon_; }
    double initial_range() const { return initial_range_; }
    const LearningRateGrid& grid() const { return grid_; }
    const Eigen::VectorXd& prior() const { return prior_; }

    // Rounds completed (updates applied), excluding the auxiliary round.
    int rounds() const { return static_cast<int>(history_loss_.size()); }
    bool awaiting_update() const { return awaiting_update_; }

    const Eigen::ArrayXd& state() const { return w_state_; }        // w'_{t+1}
    const Eigen::ArrayXd& last_weights() const { return w_round_; }  // w_t of the open round
    const Mask& last_mask() const { return mask_; }
    int active_pairs() const;
    double max_range_seen() const { return max_range_seen_; }

    // Light history (needs record_history).
    const std::vector<Eigen::VectorXd>& losses() const { return history_loss_; }
    const std::vector<Eigen::VectorXd>& optimisms() const { return history_optimism_; }
    const std::vector<Eigen::VectorXd>& decisions() const { return history_decision_; }
    const std::vector<double>& ranges() const { return history_range_; }

    // Heavy tables (needs record_tables); index 0 is the auxiliary round,
    // index t >= 1 the main rounds.
    const std::vector<PeaRoundTables>& tables() const { return tables_; }

    // Auxiliary-round quantities. ell_0 = 0, m_0 = initial_range / 4, so the
    // pair-level prediction error is -B1/4 everywhere.
    double aux_negative_term() const;    // -16 sum eta w_0 (B1/4)^2
    double aux_prior_over_rate() const;  // sum w'_0 / eta
    const Eigen::ArrayXd& initial_table() const { return w_init_; }

    // Pair-level helpers shared with the diagnostics.
    Eigen::ArrayXd tile_expert_vector(const Eigen::VectorXd& v) const;
    const WeightedEntropyGeometry& pair_geometry() const { return pair_geometry_; }
    Eigen::VectorXd round_loss(int t) const;      // t = 0 gives the auxiliary pair
    Eigen::VectorXd round_optimism(int t) const;

  private:
    Eigen::ArrayXd solve(const Eigen::ArrayXd& cost, const Eigen::ArrayXd& prior, const Mask& mask,
                         double& hint);
    Mask mask_for_range(double range) const;

    int experts_ = 0;
    long long horizon_ = 0;
    double initial_range_ = 0.0;
    MsmwcOptions options_;
    LearningRateGrid grid_;
    Eigen::VectorXd prior_;
    WeightedEntropyGeometry pair_geometry_{Eigen::ArrayXd::Ones(1)};

    Eigen::ArrayXd w_init_;   // w'_0
    Eigen::ArrayXd w_state_;  // w'_t entering the next round
    Eigen::ArrayXd w_round_;  // w_t of the round in flight
    Mask mask_;
    bool awaiting_update_ = false;
    double max_range_seen_ = 0.0;
    bool any_range_seen_ = false;
    Eigen::VectorXd pending_optimism_;
    double mu_predict_ = 0.0, mu_update_ = 0.0;

    std::vector<Eigen::VectorXd> history_loss_, history_optimism_, history_decision_;
    std::vector<double> history_range_;
    std::vector<PeaRoundTables> tables_;
};

// V(u) = sum_t sum_i u(i) (loss_t(i) - optimism_t(i))^2 over the recorded
// history.
double comparator_variance(const MsmwcSession& session, const Eigen::VectorXd& u);

// Evaluates the per-round mirror-descent bound with the overflow indicator
// term at round t (0 = auxiliary round) for a pair-space comparator, and
// returns rhs - lhs. Requires table recording. Throws DomainError if the
// comparator leaves the round's active support.
double check_round_bound(const MsmwcSession& session, int t, const Eigen::ArrayXd& comparator);

// Sum of the overflow indicator terms of round t for the same bound;
// non-positive at the auxiliary round by construction.
double round_indicator_term(const MsmwcSession& session, int t);

// One-step OOMD inequality (correction included in the loss) at round t.
InequalityCheck check_one_step(const MsmwcSession& session, int t, const Eigen::ArrayXd& comparator);

struct RegretBoundReport {
    bool holds = true;
    int rates_checked = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    double realized_regret = 0.0;
};

// End-to-end bound check: for every grid rate eta* admissible against the
// largest range fed to the session, realized regret against u is at most
//   (KL(u, prior) + log |G|) / eta* + 32 eta* V(u) + 2 eta* B1^2 + tol.
RegretBoundReport check_regret_bound(const MsmwcSession& session, const Eigen::VectorXd& u,
                                     double tol = 1e-6);

// Comparator concentrated on a single learning rate.
Eigen::ArrayXd concentrated_comparator(const MsmwcSession& session, const Eigen::VectorXd& u,
                                       int rate_index);

}  // namespace uolens
