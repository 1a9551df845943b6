#ifndef GENDSE_IO_HPP
#define GENDSE_IO_HPP

// Delimiter-separated text tables: terminal-voltage traces and small helpers
// shared by the stream/log writers.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gendse/dynamics.hpp"

namespace gendse::io {

// Shortest text that parses back to the same double.
inline std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::optional<std::size_t> column(std::string_view name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline char detect_delimiter(const std::string& header_line) {
    for (char c : {',', '\t', ';'})
        if (header_line.find(c) != std::string::npos) return c;
    return ',';
}

inline std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

}  // namespace detail

// Reads a header row followed by numeric rows. Row numbers in errors are
// 1-based file lines.
inline Table read_table(std::istream& in, const std::string& source = "input") {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    char delim = ',';
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        if (t.header.empty()) {
            delim = detail::detect_delimiter(line);
            t.header = detail::split(line, delim);
            continue;
        }
        const auto cells = detail::split(line, delim);
        if (cells.size() != t.header.size()) {
            throw ValidationError(source + ": row " + std::to_string(lineno) + " has " +
                                  std::to_string(cells.size()) + " columns, expected " +
                                  std::to_string(t.header.size()));
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            double v = 0.0;
            const char* first = c.data();
            const char* last = c.data() + c.size();
            if (!c.empty() && *first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
                throw ValidationError(source + ": row " + std::to_string(lineno) + " has invalid value '" + c + "'");
            }
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw ValidationError(source + ": empty file");
    return t;
}

inline Table read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    return read_table(in, path);
}

inline void write_row(std::ostream& out, std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
        if (!first) out << ',';
        out << fmt(v);
        first = false;
    }
    out << '\n';
}

// ---------------------------------------------------------------------------
// Terminal-voltage trace: t, U, phi[, delta, omega, Eqp, Edp]

struct Trace {
    std::vector<double> t;
    std::vector<TerminalPhasor> terminal;
    std::optional<std::vector<GeneratorState>> states;

    std::size_t size() const { return t.size(); }
    double dt() const { return t.size() >= 2 ? t[1] - t[0] : 0.0; }
};

inline constexpr double kStepJitterTol = 1e-9;

inline Trace parse_trace(const Table& tab, const std::string& source = "trace") {
    const auto ct = tab.column("t");
    const auto cu = tab.column("U");
    const auto cp = tab.column("phi");
    if (!ct || !cu || !cp) throw ValidationError(source + ": missing required column (t, U, phi)");
    const auto cd = tab.column("delta");
    const auto cw = tab.column("omega");
    const auto cq = tab.column("Eqp");
    const auto ce = tab.column("Edp");
    const int n_state = int(cd.has_value()) + int(cw.has_value()) + int(cq.has_value()) + int(ce.has_value());
    if (n_state != 0 && n_state != 4)
        throw ValidationError(source + ": state columns must be all of delta, omega, Eqp, Edp or none");
    if (tab.rows.empty()) throw ValidationError(source + ": no data rows");

    Trace tr;
    if (n_state == 4) tr.states.emplace();
    for (std::size_t i = 0; i < tab.rows.size(); ++i) {
        const auto& r = tab.rows[i];
        const std::size_t row_no = i + 2;  // header is line 1
        if (r[*cu] < 0.0) throw ValidationError(source + ": row " + std::to_string(row_no) + " has U < 0");
        if (i >= 1) {
            const double step = r[*ct] - tr.t.back();
            if (!(step > 0.0))
                throw ValidationError(source + ": row " + std::to_string(row_no) + " timestamp not increasing");
            if (i >= 2 && std::abs(step - (tr.t[1] - tr.t[0])) > kStepJitterTol)
                throw ValidationError(source + ": row " + std::to_string(row_no) + " breaks the uniform step");
        }
        tr.t.push_back(r[*ct]);
        tr.terminal.push_back({r[*cu], r[*cp]});
        if (tr.states) tr.states->push_back({r[*cd], r[*cw], r[*cq], r[*ce]});
    }
    return tr;
}

inline Trace ingest_trace(const std::string& path) { return parse_trace(read_table_file(path), path); }

inline void write_trace(std::ostream& out, const Trace& tr) {
    out << "t,U,phi";
    if (tr.states) out << ",delta,omega,Eqp,Edp";
    out << '\n';
    for (std::size_t k = 0; k < tr.size(); ++k) {
        out << fmt(tr.t[k]) << ',' << fmt(tr.terminal[k].U) << ',' << fmt(tr.terminal[k].phi);
        if (tr.states) {
            const auto& s = (*tr.states)[k];
            out << ',' << fmt(s.delta) << ',' << fmt(s.omega) << ',' << fmt(s.Eqp) << ',' << fmt(s.Edp);
        }
        out << '\n';
    }
}

inline Trace to_trace(const TruthTrajectory& truth, bool with_states = true) {
    Trace tr;
    tr.t = truth.t;
    for (const auto& u : truth.inputs) tr.terminal.push_back(u.terminal());
    if (with_states) tr.states = truth.states;
    return tr;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out << content;
}

}  // namespace gendse::io

#endif  // GENDSE_IO_HPP
