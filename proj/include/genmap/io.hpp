#pragma once

// JSON and CSV serialization for the library types, plus atomic file output.
//
// Doubles are written in shortest round-trip form so every emitted file
// re-parses to bit-identical values.

#include "genmap/consistency.hpp"
#include "genmap/density.hpp"
#include "genmap/map_solver.hpp"
#include "genmap/mode_lab.hpp"
#include "genmap/posterior.hpp"
#include "genmap/prior.hpp"
#include "genmap/sequence.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace genmap {

using json = nlohmann::json;

/// A file that is missing, unreadable, or does not parse.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal string that parses back to exactly `v`; "inf", "-inf", "nan" otherwise.
[[nodiscard]] inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// ---- JSON -----------------------------------------------------------------

namespace detail {

template <class T>
[[nodiscard]] T get_field(const json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key)) {
        throw std::invalid_argument(std::string(what) + " is missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string(what) + " field '" + key + "' has the wrong type");
    }
}

[[nodiscard]] inline Eigen::VectorXd vector_from_json(const json& j, const char* what) {
    std::vector<double> v;
    try {
        v = j.get<std::vector<double>>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string(what) + " must be an array of numbers");
    }
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

[[nodiscard]] inline Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
    std::vector<std::vector<double>> rows;
    try {
        rows = j.get<std::vector<std::vector<double>>>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string(what) + " must be an array of rows");
    }
    if (rows.empty() || rows.front().empty()) throw std::invalid_argument(std::string(what) + " is empty");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) throw std::invalid_argument(std::string(what) + " is ragged");
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

[[nodiscard]] inline json to_json_vector(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

[[nodiscard]] inline json to_json_matrix(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

inline void to_json(json& j, const PowerLawTail& t) { j = json{{"c", t.c}, {"p", t.p}}; }

inline void to_json(json& j, const WeightSequence& g) {
    j = json{{"values", std::vector<double>(g.values().begin(), g.values().end())}, {"tail", nullptr}};
    if (g.tail()) j["tail"] = *g.tail();
}

inline void to_json(json& j, const SeqPoint& x) {
    j = json{{"coeffs", std::vector<double>(x.coeffs().begin(), x.coeffs().end())}};
}

[[nodiscard]] inline WeightSequence weight_sequence_from_json(const json& j) {
    auto values = detail::get_field<std::vector<double>>(j, "values", "weight sequence");
    std::optional<PowerLawTail> tail;
    if (j.contains("tail") && !j.at("tail").is_null()) {
        const json& t = j.at("tail");
        tail = PowerLawTail{detail::get_field<double>(t, "c", "tail"), detail::get_field<double>(t, "p", "tail")};
    }
    return WeightSequence(std::move(values), tail);
}

[[nodiscard]] inline SeqPoint seq_point_from_json(const json& j) {
    return SeqPoint(detail::get_field<std::vector<double>>(j, "coeffs", "point"));
}

inline void to_json(json& j, const BallEstimate& e) {
    j = json{{"value", e.value}, {"method", to_string(e.method)}, {"std_error", e.std_error}};
    if (e.method == BallMethod::monte_carlo) j["n_samples"] = e.n_samples;
}

[[nodiscard]] inline BallEstimate ball_estimate_from_json(const json& j) {
    BallEstimate e;
    e.value = detail::get_field<double>(j, "value", "ball estimate");
    const auto method = detail::get_field<std::string>(j, "method", "ball estimate");
    if (method == "exact_product") {
        e.method = BallMethod::exact_product;
    } else if (method == "monte_carlo") {
        e.method = BallMethod::monte_carlo;
    } else {
        throw std::invalid_argument("unknown ball estimate method '" + method + "'");
    }
    e.std_error = detail::get_field<double>(j, "std_error", "ball estimate");
    if (j.contains("n_samples")) e.n_samples = detail::get_field<std::uint64_t>(j, "n_samples", "ball estimate");
    return e;
}

inline void to_json(json& j, const PiecewiseDensity1D& d) {
    j = json{{"breakpoints", d.breakpoints()}, {"pieces", d.pieces()}};
}

[[nodiscard]] inline PiecewiseDensity1D density_from_json(const json& j) {
    return PiecewiseDensity1D(detail::get_field<std::vector<double>>(j, "breakpoints", "density"),
                              detail::get_field<std::vector<std::vector<double>>>(j, "pieces", "density"));
}

inline void to_json(json& j, const ForwardModel& f) {
    const auto& d = f.descriptor();
    switch (d.kind) {
        case ForwardDescriptor::Kind::linear: j = json{{"kind", "linear"}, {"matrix", detail::to_json_matrix(d.matrix)}}; break;
        case ForwardDescriptor::Kind::builtin: j = json{{"kind", "builtin"}, {"name", d.name}, {"dim", f.in_dim()}}; break;
        case ForwardDescriptor::Kind::custom: throw std::invalid_argument("custom forward models cannot be serialized");
    }
}

/// {kind: "linear", matrix} or {kind: "builtin", name, dim}; dim defaults to `default_dim`.
[[nodiscard]] inline ForwardModel forward_from_json(const json& j, std::size_t default_dim) {
    const auto kind = detail::get_field<std::string>(j, "kind", "forward model");
    if (kind == "linear") return ForwardModel::linear(detail::matrix_from_json(j.at("matrix"), "forward matrix"));
    if (kind == "builtin") {
        const auto name = detail::get_field<std::string>(j, "name", "forward model");
        const std::size_t dim = j.contains("dim") ? detail::get_field<std::size_t>(j, "dim", "forward model") : default_dim;
        return ForwardModel::builtin(name, dim);
    }
    throw std::invalid_argument("unknown forward model kind '" + kind + "'");
}

inline void to_json(json& j, const PosteriorSpec& s) {
    j = json{{"gamma", s.gamma},
             {"forward", s.forward},
             {"data", detail::to_json_vector(s.data)},
             {"noise_cov", detail::to_json_matrix(s.noise_cov)},
             {"noise_scale", s.noise_scale}};
}

[[nodiscard]] inline PosteriorSpec posterior_spec_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("posterior spec must be an object");
    for (const char* key : {"gamma", "forward", "data", "noise_cov"}) {
        if (!j.contains(key)) throw std::invalid_argument(std::string("posterior spec is missing field '") + key + "'");
    }
    WeightSequence gamma = weight_sequence_from_json(j.at("gamma"));
    Eigen::VectorXd data = detail::vector_from_json(j.at("data"), "data");
    ForwardModel forward = forward_from_json(j.at("forward"), static_cast<std::size_t>(data.size()));
    Eigen::MatrixXd cov = detail::matrix_from_json(j.at("noise_cov"), "noise_cov");
    const double scale = j.contains("noise_scale") ? detail::get_field<double>(j, "noise_scale", "posterior spec") : 1.0;
    return PosteriorSpec{std::move(gamma), std::move(forward), std::move(data), std::move(cov), scale};
}

[[nodiscard]] inline Termination termination_from_string(const std::string& s) {
    if (s == "converged") return Termination::converged;
    if (s == "max_iter") return Termination::max_iter;
    if (s == "line_search_failure") return Termination::line_search_failure;
    throw std::invalid_argument("unknown termination '" + s + "'");
}

inline void to_json(json& j, const SolveReport& r) {
    j = json{{"solution", r.solution},
             {"objective", r.objective},
             {"fp_residual", r.fp_residual},
             {"iterations", r.iterations},
             {"objective_trace", r.objective_trace},
             {"termination", to_string(r.termination)}};
}

[[nodiscard]] inline SolveReport solve_report_from_json(const json& j) {
    SolveReport r;
    r.solution = seq_point_from_json(j.at("solution"));
    r.objective = detail::get_field<double>(j, "objective", "solve report");
    r.fp_residual = detail::get_field<double>(j, "fp_residual", "solve report");
    r.iterations = detail::get_field<std::size_t>(j, "iterations", "solve report");
    r.objective_trace = detail::get_field<std::vector<double>>(j, "objective_trace", "solve report");
    r.termination = termination_from_string(detail::get_field<std::string>(j, "termination", "solve report"));
    return r;
}

/// {gamma, forward, noise_cov, truth, schedule, replicates, seed, stream?, tol?, max_iter?}.
[[nodiscard]] inline ExperimentPlan experiment_plan_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("experiment plan must be an object");
    for (const char* key : {"gamma", "forward", "noise_cov", "truth", "schedule", "replicates"}) {
        if (!j.contains(key)) throw std::invalid_argument(std::string("experiment plan is missing field '") + key + "'");
    }
    Eigen::MatrixXd cov = detail::matrix_from_json(j.at("noise_cov"), "noise_cov");
    ExperimentPlan plan{
        SpecTemplate{weight_sequence_from_json(j.at("gamma")),
                     forward_from_json(j.at("forward"), static_cast<std::size_t>(cov.rows())), cov},
        seq_point_from_json(j.at("truth")),
        detail::get_field<std::vector<double>>(j, "schedule", "experiment plan"),
        detail::get_field<std::size_t>(j, "replicates", "experiment plan"),
        RngSpec{},
    };
    if (j.contains("seed")) plan.seed.seed = detail::get_field<std::uint64_t>(j, "seed", "experiment plan");
    if (j.contains("stream")) plan.seed.stream = detail::get_field<std::uint64_t>(j, "stream", "experiment plan");
    if (j.contains("tol")) plan.solver.tol = detail::get_field<double>(j, "tol", "experiment plan");
    if (j.contains("max_iter")) plan.solver.max_iter = detail::get_field<std::size_t>(j, "max_iter", "experiment plan");
    return plan;
}

inline void to_json(json& j, const ExperimentPlan& p) {
    j = json{{"gamma", p.spec_template.gamma},
             {"forward", p.spec_template.forward},
             {"noise_cov", detail::to_json_matrix(p.spec_template.noise_cov)},
             {"truth", p.truth},
             {"schedule", p.schedule},
             {"replicates", p.replicates},
             {"seed", p.seed.seed},
             {"stream", p.seed.stream},
             {"tol", p.solver.tol},
             {"max_iter", p.solver.max_iter}};
}

inline void to_json(json& j, const ConvergenceVerdict& v) {
    j = json{{"pass", v.pass},
             {"eps", v.eps},
             {"exceedances", v.exceedances},
             {"inversions", v.inversions},
             {"largest_inversion", v.largest_inversion},
             {"reason", v.reason}};
}

// ---- CSV ------------------------------------------------------------------

/// Header line plus one line per row; each cell formatted with format_double.
class CsvWriter {
public:
    explicit CsvWriter(std::initializer_list<std::string_view> header) {
        bool first = true;
        for (auto h : header) {
            if (!first) out_ << ',';
            out_ << h;
            first = false;
        }
        out_ << '\n';
        columns_ = header.size();
    }

    template <class... Cells>
    void row(const Cells&... cells) {
        static_assert(sizeof...(Cells) > 0);
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

    [[nodiscard]] std::string str() const { return out_.str(); }
    [[nodiscard]] std::size_t columns() const noexcept { return columns_; }

private:
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(std::string_view v) { return std::string(v); }

    std::ostringstream out_;
    std::size_t columns_ = 0;
};

[[nodiscard]] inline std::string ratio_curve_csv(std::span<const RatioPoint> pts) {
    CsvWriter w{"delta", "ratio"};
    for (const auto& p : pts) w.row(p.delta, p.ratio);
    return w.str();
}

[[nodiscard]] inline std::string om_ratio_csv(std::span<const OmRatioPoint> pts) {
    CsvWriter w{"delta", "empirical_ratio", "predicted_ratio", "std_error"};
    for (const auto& p : pts) w.row(p.delta, p.empirical_ratio, p.predicted_ratio, p.std_error);
    return w.str();
}

[[nodiscard]] inline std::string objective_trace_csv(const SolveReport& r) {
    CsvWriter w{"iteration", "objective"};
    for (std::size_t i = 0; i < r.objective_trace.size(); ++i) w.row(i, r.objective_trace[i]);
    return w.str();
}

[[nodiscard]] inline std::string consistency_csv(const ConsistencyTable& t) {
    CsvWriter w{"schedule_value", "replicate", "error", "residual", "solver_status"};
    for (const auto& row : t.rows) {
        for (std::size_t r = 0; r < row.replicate_errors.size(); ++r) {
            w.row(row.schedule_value, r, row.replicate_errors[r], row.residuals[r], to_string(row.statuses[r]));
        }
    }
    return w.str();
}

// ---- Files ----------------------------------------------------------------

[[nodiscard]] inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("cannot parse '" + path.string() + "': " + e.what());
    }
}

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error("cannot rename onto '" + path.string() + "': " + ec.message());
    }
}

}  // namespace genmap
