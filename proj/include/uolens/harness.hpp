#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uolens/environments.hpp"
#include "uolens/trace.hpp"

namespace uolens {

// Parsed experiment configuration. See README for the schema; unknown keys
// are rejected so typos fail loudly.
struct ExperimentConfig {
    std::string algorithm;  // pea_core | pea_adaptive | hedge_fixed_eta |
                            // uol_fullinfo | uol_singlegrad
    nlohmann::json stream_block;
    long long horizon = 1024;
    std::vector<std::uint64_t> seeds{1};
    bool diagnostics = true;
    bool record_rounds = true;
    bool export_stream = false;
    std::string output_dir = "out";
    std::string label;

    // pea
    double b0 = 1.0;

    // uol
    std::string uol_mode = "standard";  // standard | sea
    double smoothness = -1.0;           // < 0: use the stream's declared truth
    double lipschitz = -1.0;            // single-gradient only; < 0: stream truth
    double search_constant = 10.0;      // binary-search tolerance = c * D * G / T
    nlohmann::json constant_overrides;  // lambda / c0 / gamma_convex / gamma_base

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);

    bool is_pea() const;
    PeaStreamConfig pea_stream(std::uint64_t seed) const;
    OcoStreamConfig oco_stream(std::uint64_t seed, long long horizon_override = -1) const;
};

struct RunResult {
    RegretTrace trace;
    bool diagnostics_passed = true;
    std::vector<std::string> failures;
    std::filesystem::path summary_path;  // empty when not written
};

// One replica, deterministic in (config, seed). Writes output files unless
// out_dir is empty.
RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                         long long horizon_override = -1, bool write_files = true);

// All configured seeds, parallel across replicas, results in seed order.
std::vector<RunResult> run_all(const ExperimentConfig& config);

struct SweepResult {
    nlohmann::ordered_json report;
    bool passed = true;
    std::filesystem::path report_path;
    std::filesystem::path plot_path;
};

// Geometric horizon sweep with growth-property checks appropriate to the
// configured algorithm and stream.
SweepResult run_sweep(const ExperimentConfig& config, std::vector<long long> horizons);

// Re-runs the diagnostics that a stored trace supports; returns the failures.
std::vector<std::string> check_trace(const std::filesystem::path& summary_path);

// Tidy plot data: one row per (metric, series, x, y), aggregated over seeds.
void emit_plotdata(const std::vector<std::filesystem::path>& summaries,
                   const std::filesystem::path& out_path);

}  // namespace uolens
