#include "uolens/trace.hpp"

#include <fstream>
#include <sstream>

#include "uolens/errors.hpp"
#include "uolens/format.hpp"

namespace uolens {

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);  // binary: byte-identical across platforms
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (c) out << ',';
        out << columns[c];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            out << format_double(row[c]);
        }
        out << '\n';
    }
}

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty csv: " + path.string());
    std::vector<std::string> columns;
    {
        std::stringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) columns.push_back(cell);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(columns.size());
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return {columns, rows};
}

void RegretTrace::write_rounds_csv(const std::filesystem::path& path) const {
    write_csv(path, columns, rows);
}

void RegretTrace::write_summary_json(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << summary.dump(2) << '\n';
}

RegretTrace RegretTrace::load(const std::filesystem::path& summary_path) {
    std::ifstream in(summary_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open for reading: " + summary_path.string());
    RegretTrace trace;
    in >> trace.summary;
    if (trace.summary.contains("rounds_csv")) {
        const auto rel = trace.summary.at("rounds_csv").get<std::string>();
        const auto csv = summary_path.parent_path() / rel;
        if (std::filesystem::exists(csv)) {
            auto [cols, rows] = read_csv(csv);
            trace.columns = std::move(cols);
            trace.rows = std::move(rows);
        }
    }
    return trace;
}

}  // namespace uolens
