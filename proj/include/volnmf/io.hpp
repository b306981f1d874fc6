#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "volnmf/matrix.hpp"
#include "volnmf/models.hpp"
#include "volnmf/solvers.hpp"
#include "volnmf/synth.hpp"

namespace volnmf {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline double parse_token(const std::string& tok, std::size_t line, std::size_t col,
                          const std::string& path) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || first == last)
        throw format_error(path + ": non-numeric token at line " + std::to_string(line) +
                           ", column " + std::to_string(col));
    return value;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix CSV: one row per line, comma separated, '.' decimal point,
// scientific notation allowed, optional single header line.
// ---------------------------------------------------------------------------

inline Matrix read_matrix(const std::string& path, bool has_header = false) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open for reading");

    std::vector<double> data;
    std::size_t rows = 0, cols = 0;
    std::string line;
    std::size_t line_no = 0;
    if (has_header) {
        std::getline(in, line);
        ++line_no;
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        std::size_t count = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string tok = line.substr(start, comma == std::string::npos
                                                           ? std::string::npos
                                                           : comma - start);
            data.push_back(detail::parse_token(tok, line_no, count + 1, path));
            ++count;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (rows == 0) {
            cols = count;
        } else if (count != cols) {
            throw format_error(path + ": ragged row at line " + std::to_string(line_no) +
                               " (expected " + std::to_string(cols) + " fields, got " +
                               std::to_string(count) + ")");
        }
        ++rows;
    }
    if (rows == 0 || cols == 0) throw format_error(path + ": empty matrix file");
    Matrix out(rows, cols, std::move(data));
    return out;
}

// 17 significant digits so parse(write(M)) reproduces M exactly.
inline void write_matrix(const Matrix& m, const std::string& path) {
    if (m.rows() == 0 || m.cols() == 0)
        throw std::invalid_argument("write_matrix: refusing to write an empty matrix");
    if (!m.is_finite())
        throw std::invalid_argument("write_matrix: refusing to write non-finite entries");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    std::string line;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        line.clear();
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) line += ',';
            line += detail::format_double(m(i, j));
        }
        line += '\n';
        out << line;
    }
    if (!out) throw io_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceHeader = "iter,seconds,rel_fidelity,penalty,objective,lagrangian";

// The seconds column is zeroed on write so identical runs produce identical
// bytes; wall-clock timings stay available on the in-memory trace.
inline void write_trace(const ConvergenceTrace& trace, const std::string& path,
                        bool deterministic_seconds = true) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out << kTraceHeader << '\n';
    for (const TraceRecord& rec : trace.records) {
        out << rec.iter << ',';
        out << detail::format_double(deterministic_seconds ? 0.0 : rec.seconds) << ',';
        out << detail::format_double(rec.rel_fidelity) << ',';
        out << detail::format_double(rec.penalty) << ',';
        out << detail::format_double(rec.objective) << ',';
        if (rec.lagrangian) out << detail::format_double(*rec.lagrangian);
        out << '\n';
    }
    if (!out) throw io_error(path + ": write failed");
}

inline ConvergenceTrace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open for reading");
    std::string line;
    if (!std::getline(in, line)) throw format_error(path + ": empty trace file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTraceHeader)
        throw format_error(path + ": bad trace header (expected \"" + std::string(kTraceHeader) +
                           "\")");
    ConvergenceTrace trace;
    std::size_t line_no = 1;
    std::size_t prev_iter = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                           : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 6)
            throw format_error(path + ": expected 6 fields at line " + std::to_string(line_no));
        TraceRecord rec;
        rec.iter = static_cast<std::size_t>(detail::parse_token(fields[0], line_no, 1, path));
        rec.seconds = detail::parse_token(fields[1], line_no, 2, path);
        rec.rel_fidelity = detail::parse_token(fields[2], line_no, 3, path);
        rec.penalty = detail::parse_token(fields[3], line_no, 4, path);
        rec.objective = detail::parse_token(fields[4], line_no, 5, path);
        if (!fields[5].empty())
            rec.lagrangian = detail::parse_token(fields[5], line_no, 6, path);
        if (rec.iter != prev_iter + 1)
            throw format_error(path + ": iter must increase by 1 at line " +
                               std::to_string(line_no));
        prev_iter = rec.iter;
        trace.records.push_back(rec);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// JSON run configs (field names mirror the structs; unknown keys rejected)
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& known,
                                const std::string& where) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const auto& k : known)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw format_error(where + ": unknown key \"" + item.key() + "\"");
    }
}

}  // namespace detail

inline SynthSpec parse_synth_spec(const nlohmann::json& j) {
    if (!j.is_object()) throw format_error("synth spec: expected a JSON object");
    detail::reject_unknown_keys(j,
                                {"m", "n", "r", "dirichlet_alpha", "clip_threshold",
                                 "well_conditioned", "stochastic_H", "snr_db", "seed"},
                                "synth spec");
    SynthSpec spec;
    if (j.contains("m")) spec.m = j.at("m").get<std::size_t>();
    if (j.contains("n")) spec.n = j.at("n").get<std::size_t>();
    if (j.contains("r")) spec.r = j.at("r").get<std::size_t>();
    if (j.contains("dirichlet_alpha")) spec.dirichlet_alpha = j.at("dirichlet_alpha").get<double>();
    if (j.contains("clip_threshold")) spec.clip_threshold = j.at("clip_threshold").get<double>();
    if (j.contains("well_conditioned")) spec.well_conditioned = j.at("well_conditioned").get<bool>();
    if (j.contains("stochastic_H")) spec.stochastic_H = j.at("stochastic_H").get<bool>();
    if (j.contains("snr_db") && !j.at("snr_db").is_null())
        spec.snr_db = j.at("snr_db").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
}

inline SynthSpec read_synth_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ": " + e.what());
    }
    return parse_synth_spec(j);
}

inline SolveConfig parse_solve_config(const nlohmann::json& j) {
    if (!j.is_object()) throw format_error("solve config: expected a JSON object");
    detail::reject_unknown_keys(j,
                                {"variant", "params", "rho", "outer_iters", "inner_iters",
                                 "fixed_point_eps", "fixed_point_max", "tol_rel_obj", "seed",
                                 "lambda_autotune", "lambda_max_step"},
                                "solve config");
    SolveConfig cfg;
    if (j.contains("variant")) cfg.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("params")) {
        const auto& p = j.at("params");
        detail::reject_unknown_keys(p, {"lambda", "delta", "rank"}, "solve config params");
        if (p.contains("lambda")) cfg.params.lambda = p.at("lambda").get<double>();
        if (p.contains("delta")) cfg.params.delta = p.at("delta").get<double>();
        if (p.contains("rank")) cfg.params.rank = p.at("rank").get<std::size_t>();
    }
    if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
    if (j.contains("outer_iters")) cfg.outer_iters = j.at("outer_iters").get<std::size_t>();
    if (j.contains("inner_iters")) cfg.inner_iters = j.at("inner_iters").get<std::size_t>();
    if (j.contains("fixed_point_eps")) cfg.fixed_point_eps = j.at("fixed_point_eps").get<double>();
    if (j.contains("fixed_point_max")) cfg.fixed_point_max = j.at("fixed_point_max").get<std::size_t>();
    if (j.contains("tol_rel_obj")) cfg.tol_rel_obj = j.at("tol_rel_obj").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("lambda_autotune")) cfg.lambda_autotune = j.at("lambda_autotune").get<bool>();
    if (j.contains("lambda_max_step")) cfg.lambda_max_step = j.at("lambda_max_step").get<double>();
    cfg.validate();
    return cfg;
}

}  // namespace volnmf
