#pragma once

#include <functional>
#include <memory>

#include "uolens/pea_core.hpp"

namespace uolens {

struct RangeTracker {
    double b0 = 1.0;       // initial scale
    double current = 1.0;  // running max of ||loss - optimism||_inf, seeded with b0
    int restart_count = 0;
    std::vector<int> restart_rounds;  // wrapper round indices where a restart fired
};

// Clipped-loss restart wrapper for unknown loss ranges. Each round it feeds
// the previous range bound to the inner session, clips the realized loss to
// that bound through the surrogate
//   surrogate = optimism + (B_{t-1}/B_t) (loss - optimism),
// and re-initializes the inner session once the range outgrows the current
// segment scale by a factor of the horizon.
class RestartWrapper {
  public:
    RestartWrapper(Eigen::VectorXd prior, long long horizon, double b0 = 1.0,
                   MsmwcOptions inner_options = {});

    Eigen::VectorXd predict(const Eigen::VectorXd& optimism);
    void update(const Eigen::VectorXd& loss);

    Eigen::VectorXd preview(const Eigen::VectorXd& optimism) const {
        return inner_->preview(optimism, tracker_.current);
    }

    const MsmwcSession& inner() const { return *inner_; }
    const RangeTracker& tracker() const { return tracker_; }
    int rounds() const { return rounds_; }
    long long horizon() const { return horizon_; }

    // Scale the running inner segment was initialized with (b0 before any
    // restart). The restart trigger compares against scale * horizon.
    double segment_scale() const { return segment_scale_; }

    // Cumulative sum of ||loss - surrogate||_inf.
    double surrogate_drift() const { return surrogate_drift_; }

    // Inner sessions completed by restarts, oldest first.
    const std::vector<std::unique_ptr<MsmwcSession>>& finished_segments() const {
        return finished_segments_;
    }

    // Wrapper-level history with the real (unclipped) losses.
    const std::vector<Eigen::VectorXd>& losses() const { return losses_; }
    const std::vector<Eigen::VectorXd>& optimisms() const { return optimisms_; }
    const std::vector<Eigen::VectorXd>& decisions() const { return decisions_; }
    const std::vector<double>& range_history() const { return ranges_; }

  private:
    Eigen::VectorXd prior_;
    long long horizon_;
    MsmwcOptions inner_options_;
    RangeTracker tracker_;
    double segment_scale_;
    std::unique_ptr<MsmwcSession> inner_;
    std::vector<std::unique_ptr<MsmwcSession>> finished_segments_;
    int rounds_ = 0;
    bool awaiting_update_ = false;
    Eigen::VectorXd pending_optimism_;
    double surrogate_drift_ = 0.0;
    std::vector<Eigen::VectorXd> losses_, optimisms_, decisions_;
    std::vector<double> ranges_;
};

// Round generator: t (1-based) -> (optimism, loss).
using PeaRoundSource = std::function<std::pair<Eigen::VectorXd, Eigen::VectorXd>(int)>;

struct DoublingReport {
    int restarts = 0;
    std::vector<int> restart_after_round;  // cumulative rounds completed at each restart
    std::vector<int> guesses;              // successive guesses for log2(T), first entry = M0
    std::vector<Eigen::VectorXd> decisions, losses, optimisms;
    double final_scale = 0.0;
    double total_regret_best_expert = 0.0;
};

// Doubling trick on log2(T): run RestartWrapper instances with horizon 2^M;
// once the cumulative round count exceeds 2^M, discard the instance and
// restart with guess 2M. Each new instance seeds b0 with the last observed
// range.
DoublingReport doubling_run(const Eigen::VectorXd& prior, double b0, const PeaRoundSource& source,
                            int total_rounds, int initial_guess,
                            MsmwcOptions inner_options = {});

// One sweep point for the regret-shape diagnostic.
struct ShapePoint {
    long long horizon = 0;
    double regret = 0.0;         // worst over seeds/comparators at this horizon
    double kl_plus_log = 0.0;    // KL(u, prior) + log |G|
    double variance = 0.0;       // V(u)
    double final_range = 0.0;    // B_T
};

struct ShapeReport {
    std::vector<double> rho;  // regret / (sqrt(kl_plus_log * variance) + range * kl_plus_log)
    std::vector<long long> horizons;
    int skipped = 0;          // degenerate denominators
    double max_rho = 0.0;
    double growth = 0.0;      // max rho relative to the first horizon's rho
    bool ok = true;
};

// Growth proxy across a geometric horizon sweep: every rho must stay within
// growth_cap of the first horizon's rho.
ShapeReport check_theorem4_shape(const std::vector<ShapePoint>& points, double growth_cap = 2.0);

}  // namespace uolens
