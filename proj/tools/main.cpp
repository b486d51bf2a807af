#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "uolens/harness.hpp"

using namespace uolens;

namespace {

int run_cmd(const std::string& config_path) {
    const auto config = ExperimentConfig::load(config_path);
    const auto results = run_all(config);
    bool ok = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        std::cout << "seed " << config.seeds[i] << ": "
                  << (r.diagnostics_passed ? "pass" : "FAIL");
        if (r.trace.summary.contains("regret_best_expert"))
            std::cout << "  regret=" << r.trace.summary["regret_best_expert"].get<double>();
        else if (r.trace.summary.contains("regret"))
            std::cout << "  regret=" << r.trace.summary["regret"].get<double>();
        if (!r.summary_path.empty()) std::cout << "  -> " << r.summary_path.string();
        std::cout << '\n';
        for (const auto& f : r.failures) std::cout << "    failure: " << f << '\n';
        ok = ok && r.diagnostics_passed;
    }
    return ok ? 0 : 1;
}

int sweep_cmd(const std::string& config_path, const std::vector<long long>& horizons) {
    const auto config = ExperimentConfig::load(config_path);
    const auto sweep = run_sweep(config, horizons);
    std::cout << sweep.report.dump(2) << '\n';
    std::cout << "report: " << sweep.report_path.string() << '\n';
    std::cout << "plot:   " << sweep.plot_path.string() << '\n';
    return sweep.passed ? 0 : 1;
}

int check_cmd(const std::vector<std::string>& traces) {
    bool ok = true;
    for (const auto& t : traces) {
        const auto failures = check_trace(t);
        std::cout << t << ": " << (failures.empty() ? "pass" : "FAIL") << '\n';
        for (const auto& f : failures) std::cout << "    " << f << '\n';
        ok = ok && failures.empty();
    }
    return ok ? 0 : 1;
}

int emit_plot_cmd(const std::vector<std::string>& traces, const std::string& out) {
    std::vector<std::filesystem::path> paths(traces.begin(), traces.end());
    emit_plotdata(paths, out);
    std::cout << "wrote " << out << '\n';
    return 0;
}

int export_stream_cmd(const std::string& config_path, const std::string& out) {
    const auto config = ExperimentConfig::load(config_path);
    if (!config.is_pea())
        throw ConfigError("export-stream: only expert-advice streams export to csv");
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + out);
    PeaStream(config.pea_stream(config.seeds.front()))
        .export_csv(f, static_cast<int>(config.horizon));
    std::cout << "wrote " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"online-learning experiment harness"};
    app.require_subcommand(1);

    std::string config_path, out_path = "plot.csv";
    std::vector<long long> horizons;
    std::vector<std::string> trace_paths;

    auto* run = app.add_subcommand("run", "run the configured experiment over its seeds");
    run->add_option("config", config_path, "config json")->required();

    auto* sweep = app.add_subcommand("sweep", "run a geometric horizon sweep");
    sweep->add_option("config", config_path, "config json")->required();
    sweep->add_option("--horizons", horizons, "geometric horizon list")->required()->expected(-3);

    auto* check = app.add_subcommand("check", "re-run diagnostics on stored traces");
    check->add_option("traces", trace_paths, "summary json files")->required();

    auto* plot = app.add_subcommand("emit-plot", "emit tidy plot data from stored traces");
    plot->add_option("traces", trace_paths, "summary json files")->required();
    plot->add_option("--out", out_path, "output csv path");

    auto* exps = app.add_subcommand("export-stream", "export a stream to csv");
    exps->add_option("config", config_path, "config json")->required();
    exps->add_option("--out", out_path, "output csv path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_cmd(config_path);
        if (sweep->parsed()) return sweep_cmd(config_path, horizons);
        if (check->parsed()) return check_cmd(trace_paths);
        if (plot->parsed()) return emit_plot_cmd(trace_paths, out_path);
        if (exps->parsed()) return export_stream_cmd(config_path, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
