#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace uolens {

// Per-round tabular trace plus a summary document. The CSV is round-major
// with a header row, locale-independent, 17 significant digits.
struct RegretTrace {
    nlohmann::ordered_json summary;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void write_rounds_csv(const std::filesystem::path& path) const;
    void write_summary_json(const std::filesystem::path& path) const;

    static RegretTrace load(const std::filesystem::path& summary_path);
};

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(
    const std::filesystem::path& path);

}  // namespace uolens
