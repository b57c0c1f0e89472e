#pragma once

#include <array>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kcs/diagnostics.hpp"
#include "kcs/error.hpp"

namespace kcs {

inline constexpr std::array<std::string_view, 18> kCsvColumns{
    "t",           "mass",           "momentum_1",    "momentum_2",
    "momentum_3",  "energy",         "dissipation_rate", "cumulative_dissipation",
    "support_radius", "l1_norm",     "l1_v_weighted", "l2_omega",
    "l2_omega_v_weighted", "grad_x_l2_nu", "grad_v_l2", "x_norm",
    "w11_norm",    "v_gradient_dissipation"};

inline std::string csv_header() {
    std::string s;
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
        if (i) s += ',';
        s += kCsvColumns[i];
    }
    return s;
}

inline std::array<double, kCsvColumns.size()> csv_values(const DiagnosticsRecord& r) {
    return {r.t,
            r.mass,
            r.momentum[0],
            r.momentum[1],
            r.momentum[2],
            r.energy,
            r.dissipation_rate,
            r.cumulative_dissipation,
            r.support_radius,
            r.l1,
            r.l1_v_weighted,
            r.l2_omega,
            r.l2_omega_v_weighted,
            r.grad_x_l2_nu,
            r.grad_v_l2,
            r.x_norm,
            r.w11,
            r.v_gradient_dissipation};
}

/// 17 significant digits: every double survives the text round trip.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_row(const DiagnosticsRecord& r) {
    std::string s;
    const auto vals = csv_values(r);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) s += ',';
        s += format_double(vals[i]);
    }
    return s;
}

/// Appends the series to path; the header is written only when the file is new or empty.
inline void emit_csv(const DiagnosticsSeries& series, const std::string& path) {
    std::error_code ec;
    const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    if (fresh) out << csv_header() << '\n';
    for (const auto& r : series.records()) out << csv_row(r) << '\n';
    if (!out) throw Error("write to '" + path + "' failed");
}

/// Overwrites path with a plain numeric table; used for the per-study outputs.
inline void write_table(const std::string& path, const std::vector<std::string>& columns,
                        const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
        out << '\n';
    }
    if (!out) throw Error("write to '" + path + "' failed");
}

inline DiagnosticsRecord record_from_values(const std::array<double, kCsvColumns.size()>& v) {
    DiagnosticsRecord r;
    r.t = v[0];
    r.mass = v[1];
    r.momentum = {v[2], v[3], v[4]};
    r.energy = v[5];
    r.dissipation_rate = v[6];
    r.cumulative_dissipation = v[7];
    r.support_radius = v[8];
    r.l1 = v[9];
    r.l1_v_weighted = v[10];
    r.l2_omega = v[11];
    r.l2_omega_v_weighted = v[12];
    r.grad_x_l2_nu = v[13];
    r.grad_v_l2 = v[14];
    r.x_norm = v[15];
    r.w11 = v[16];
    r.v_gradient_dissipation = v[17];
    return r;
}

/// Parses a file written by emit_csv. Repeated header lines (from appends) are skipped.
inline DiagnosticsSeries read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    const std::string header = csv_header();
    DiagnosticsSeries s;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == header) continue;
        std::array<double, kCsvColumns.size()> vals{};
        std::size_t col = 0;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) comma = line.size();
            if (col >= vals.size()) throw Error(path + ":" + std::to_string(line_no) + ": too many columns");
            const std::string cell = line.substr(start, comma - start);
            char* end = nullptr;
            vals[col++] = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw Error(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            start = comma + 1;
        }
        if (col != vals.size())
            throw Error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(vals.size()) + " columns");
        s.append(record_from_values(vals));
    }
    return s;
}

}  // namespace kcs
