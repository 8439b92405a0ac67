#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "overlap_causal/errors.hpp"

namespace overlap_causal {

/// Named columns of real samples; one row per sample.
struct Dataset {
    std::vector<std::string> variables;
    Eigen::MatrixXd samples;

    int rows() const { return static_cast<int>(samples.rows()); }
    int column_index(const std::string& name) const {
        auto it = std::find(variables.begin(), variables.end(), name);
        if (it == variables.end()) throw LookupError("dataset has no variable '" + name + "'");
        return static_cast<int>(it - variables.begin());
    }
    bool has(const std::string& name) const {
        return std::find(variables.begin(), variables.end(), name) != variables.end();
    }
    Eigen::VectorXd column(const std::string& name) const { return samples.col(column_index(name)); }

    /// Same rows, selected columns.
    Dataset select(const std::vector<std::string>& names) const {
        Dataset out;
        out.variables = names;
        out.samples.resize(samples.rows(), static_cast<Eigen::Index>(names.size()));
        for (std::size_t j = 0; j < names.size(); ++j) {
            out.samples.col(static_cast<Eigen::Index>(j)) = column(names[j]);
        }
        return out;
    }

    void validate() const {
        if (samples.rows() < 2) throw FormatError("dataset needs at least 2 rows");
        if (samples.cols() != static_cast<Eigen::Index>(variables.size())) {
            throw FormatError("dataset column count does not match its variable list");
        }
        std::vector<std::string> sorted = variables;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw FormatError("duplicate variable name in dataset");
        }
        if (!samples.allFinite()) throw FormatError("dataset contains missing or non-finite values");
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t\r\"");
        const auto last = cell.find_last_not_of(" \t\r\"");
        out.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

/// Header row of variable names followed by numeric rows. The decimal point
/// is always '.', whatever the process locale.
inline Dataset read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("'" + path + "' is empty");
    Dataset d;
    d.variables = detail::split_csv_line(line);
    std::vector<double> values;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != d.variables.size()) {
            throw FormatError("'" + path + "' row " + std::to_string(rows + 2) + " has " +
                              std::to_string(cells.size()) + " cells");
        }
        for (const auto& c : cells) {
            double v = 0.0;
            const char* begin = c.data();
            const char* end = c.data() + c.size();
            if (begin != end && *begin == '+') ++begin;
            auto [ptr, ec] = std::from_chars(begin, end, v);
            if (ec != std::errc() || ptr != end) {
                throw FormatError("'" + path + "' row " + std::to_string(rows + 2) +
                                  ": not a number '" + c + "'");
            }
            values.push_back(v);
        }
        ++rows;
    }
    const auto cols = static_cast<Eigen::Index>(d.variables.size());
    d.samples.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) d.samples(r, c) = values[r * cols + c];
    }
    d.validate();
    return d;
}

inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out.imbue(std::locale::classic());
    out.precision(17);
    for (std::size_t j = 0; j < d.variables.size(); ++j) out << (j ? "," : "") << d.variables[j];
    out << '\n';
    for (Eigen::Index r = 0; r < d.samples.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.samples.cols(); ++c) out << (c ? "," : "") << d.samples(r, c);
        out << '\n';
    }
}

}  // namespace overlap_causal
