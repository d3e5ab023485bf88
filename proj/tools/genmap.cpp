// genmap: command-line front end for the genmap library.
//
// Exit status: 0 success, 1 domain error (message from the library verbatim),
// 2 usage error or unreadable input file.

#include "genmap/genmap.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using genmap::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    unsigned threads = 0;
    std::string out;
};

void emit(const Common& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        std::cout.flush();
    } else {
        genmap::write_file_atomic(c.out, text);
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string format_or(const std::string& fmt, const std::string& allowed_default) {
    if (fmt.empty()) return allowed_default;
    if (fmt != "json" && fmt != "csv") throw UsageError("--format must be json or csv");
    return fmt;
}

void require_positive_radius(double r) {
    if (!(r > 0.0)) throw std::domain_error("radius must be positive");
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
    std::string gamma;
    std::size_t trunc = 0;
    std::uint64_t seed = 42;
    std::uint64_t stream = 0;
};

int run_sample(const Common& c, const SampleArgs& a) {
    const auto gamma = genmap::weight_sequence_from_json(genmap::read_json_file(a.gamma));
    const std::size_t trunc = a.trunc > 0 ? a.trunc : std::max<std::size_t>(gamma.size(), 1);
    const auto x = genmap::sample_prior(gamma, trunc, genmap::RngSpec{a.seed, a.stream});
    emit(c, dump(json(x)));
    return 0;
}

// ---- ballprob ---------------------------------------------------------------

struct BallArgs {
    std::string gamma, center;
    double radius = 0.0;
    bool mc = false;
    std::uint64_t samples = 1000000;
    std::uint64_t seed = 42;
    std::size_t trunc = 0;
};

int run_ballprob(const Common& c, const BallArgs& a) {
    const auto gamma = genmap::weight_sequence_from_json(genmap::read_json_file(a.gamma));
    const auto center = genmap::seq_point_from_json(genmap::read_json_file(a.center));
    require_positive_radius(a.radius);
    const genmap::BallEstimate e =
        a.mc ? genmap::ball_prob_mc(gamma, center, a.radius, a.samples, genmap::RngSpec{a.seed, 0},
                                    genmap::McOptions{a.trunc, c.threads})
             : genmap::ball_prob_exact(gamma, center, a.radius);
    emit(c, dump(json(e)));
    return 0;
}

// ---- classify ---------------------------------------------------------------

struct ClassifyArgs {
    std::string gamma, point;
};

int run_classify(const Common& c, const ClassifyArgs& a) {
    const auto gamma = genmap::weight_sequence_from_json(genmap::read_json_file(a.gamma));
    const auto point = genmap::seq_point_from_json(genmap::read_json_file(a.point));
    emit(c, json{{"generalized_mode", genmap::classify_generalized_mode(point, gamma)}}.dump() + "\n");
    return 0;
}

// ---- schedules ----------------------------------------------------------------

struct ScheduleArgs {
    double start = 0.1;
    double factor = 0.5;
    std::size_t steps = 12;
};

void add_schedule(CLI::App* sub, ScheduleArgs& s) {
    sub->add_option("--delta-start", s.start, "first radius")->capture_default_str();
    sub->add_option("--delta-factor", s.factor, "ratio between consecutive radii")->capture_default_str();
    sub->add_option("--steps", s.steps, "number of radii")->capture_default_str();
}

std::vector<double> schedule(const ScheduleArgs& s) { return genmap::geometric_schedule(s.start, s.factor, s.steps); }

// ---- mode-curve ---------------------------------------------------------------

struct CurveArgs {
    std::string gamma, point, format;
    ScheduleArgs sched;
};

int run_mode_curve(const Common& c, const CurveArgs& a) {
    const auto gamma = genmap::weight_sequence_from_json(genmap::read_json_file(a.gamma));
    const auto point = genmap::seq_point_from_json(genmap::read_json_file(a.point));
    const auto fmt = format_or(a.format, "csv");
    const auto deltas = schedule(a.sched);
    const auto curve = genmap::strong_mode_diagnostic(point, gamma, deltas);
    if (fmt == "csv") {
        emit(c, genmap::ratio_curve_csv(curve));
    } else {
        json rows = json::array();
        for (const auto& p : curve) rows.push_back({{"delta", p.delta}, {"ratio", p.ratio}});
        emit(c, dump(rows));
    }
    return 0;
}

// ---- modelab ------------------------------------------------------------------

struct ModelabArgs {
    std::string example, density, format;
    double point = 0.0;
    int levels = 40;
    std::size_t grid = genmap::kDefaultModeGrid;
    ScheduleArgs sched;
};

template <genmap::Density1D D>
std::string modelab_output(const D& d, const ModelabArgs& a, const std::string& fmt) {
    const auto deltas = schedule(a.sched);
    const auto strong = genmap::strong_mode_ratio_curve(d, a.point, deltas, a.grid);
    const auto prop = genmap::property_ratio_check(d, a.point, deltas, a.grid);
    if (fmt == "csv") {
        genmap::CsvWriter w{"delta", "argmax", "ratio", "ratio_to_w"};
        for (std::size_t i = 0; i < strong.size(); ++i) w.row(strong[i].delta, strong[i].argmax, strong[i].ratio, prop[i].ratio_to_w);
        return w.str();
    }
    json rows = json::array();
    for (std::size_t i = 0; i < strong.size(); ++i) {
        rows.push_back({{"delta", strong[i].delta},
                        {"argmax", strong[i].argmax},
                        {"ratio", strong[i].ratio},
                        {"w", prop[i].w},
                        {"ratio_to_w", prop[i].ratio_to_w}});
    }
    return dump(rows);
}

int run_modelab(const Common& c, const ModelabArgs& a) {
    const auto fmt = format_or(a.format, "csv");
    if (a.example.empty() == a.density.empty()) throw UsageError("give exactly one of --example and --density");
    if (!a.density.empty()) {
        emit(c, modelab_output(genmap::density_from_json(genmap::read_json_file(a.density)), a, fmt));
    } else if (a.example == "standard") {
        emit(c, modelab_output(genmap::standard_example_density(), a, fmt));
    } else if (a.example == "cluster") {
        emit(c, modelab_output(genmap::cluster_example_density(a.levels), a, fmt));
    } else if (a.example == "gaussian") {
        emit(c, modelab_output(genmap::GaussianDensity1D(0.0, 1.0), a, fmt));
    } else {
        throw UsageError("--example must be standard, cluster or gaussian");
    }
    return 0;
}

// ---- solve --------------------------------------------------------------------

struct SolveArgs {
    std::string spec, x0, trace_out;
    genmap::SolveOptions opts;
};

int run_solve(const Common& c, const SolveArgs& a) {
    const json spec_json = genmap::read_json_file(a.spec);
    std::optional<genmap::SeqPoint> x0;
    if (!a.x0.empty()) x0 = genmap::seq_point_from_json(genmap::read_json_file(a.x0));
    const genmap::Posterior post(genmap::posterior_spec_from_json(spec_json));
    const genmap::SeqPoint start = x0.value_or(genmap::SeqPoint{});
    if (x0 && !genmap::in_E_gamma(start, post.gamma())) {
        std::cerr << "warning: x0 lies outside E_gamma and is projected onto it\n";
    }
    const auto rep = genmap::solve_map_pg(post, start, a.opts);
    if (!a.trace_out.empty()) genmap::write_file_atomic(a.trace_out, genmap::objective_trace_csv(rep));
    emit(c, dump(json(rep)));
    return 0;
}

// ---- om-check -----------------------------------------------------------------

struct OmArgs {
    std::string spec, x1, x2, format;
    ScheduleArgs sched{0.05, 0.5, 4};
    std::uint64_t samples = 1000000;
    std::uint64_t seed = 42;
};

int run_om_check(const Common& c, const OmArgs& a) {
    const json spec_json = genmap::read_json_file(a.spec);
    const auto x1 = genmap::seq_point_from_json(genmap::read_json_file(a.x1));
    const auto x2 = genmap::seq_point_from_json(genmap::read_json_file(a.x2));
    const auto fmt = format_or(a.format, "csv");
    const genmap::Posterior post(genmap::posterior_spec_from_json(spec_json));
    const auto deltas = schedule(a.sched);
    const auto pts = genmap::om_ratio_check(post, x1, x2, deltas, a.samples, genmap::RngSpec{a.seed, 0},
                                            genmap::McOptions{0, c.threads});
    if (fmt == "csv") {
        emit(c, genmap::om_ratio_csv(pts));
    } else {
        json rows = json::array();
        for (const auto& p : pts) {
            rows.push_back({{"delta", p.delta},
                            {"empirical_ratio", p.empirical_ratio},
                            {"predicted_ratio", p.predicted_ratio},
                            {"std_error", p.std_error}});
        }
        emit(c, dump(rows));
    }
    return 0;
}

// ---- consistency ----------------------------------------------------------------

struct ConsistencyArgs {
    std::string plan, mode = "small-noise", eps = "0.05", verdict_out;
};

std::vector<double> parse_eps(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("--eps: cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError("--eps: empty list");
    return out;
}

int run_consistency(const Common& c, const ConsistencyArgs& a) {
    const json plan_json = genmap::read_json_file(a.plan);
    const auto eps = parse_eps(a.eps);
    if (a.mode != "small-noise" && a.mode != "large-sample") throw UsageError("--mode must be small-noise or large-sample");
    auto plan = genmap::experiment_plan_from_json(plan_json);
    plan.threads = c.threads;
    const auto table = a.mode == "small-noise" ? genmap::run_small_noise(plan, eps) : genmap::run_large_sample(plan, eps);
    emit(c, genmap::consistency_csv(table));

    json verdicts = json::array();
    for (const auto& row : table.rows) {
        if (row.flagged) std::cerr << "warning: row " << genmap::format_double(row.schedule_value) << " has more than 20% failed replicates\n";
    }
    for (double e : eps) {
        try {
            verdicts.push_back(genmap::convergence_in_probability_test(table, e));
        } catch (const std::invalid_argument& ex) {
            verdicts.push_back({{"eps", e}, {"pass", nullptr}, {"reason", ex.what()}});
        }
    }
    if (!a.verdict_out.empty()) {
        genmap::write_file_atomic(a.verdict_out, dump(verdicts));
    } else if (!c.out.empty()) {
        std::cout << dump(verdicts);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"genmap: generalized modes and MAP estimation for uniform series priors"};
    app.require_subcommand(1);
    app.set_version_flag("--version", genmap::kVersion);
    Common common;
    app.add_option("--threads", common.threads, "worker threads (default: GENMAP_THREADS or all cores)");

    auto out_opt = [&](CLI::App* sub) { sub->add_option("--out", common.out, "output file (default: stdout)"); };

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "draw one truncated prior sample");
    sample->add_option("--gamma", sa.gamma, "weight sequence JSON")->required();
    sample->add_option("--trunc", sa.trunc, "number of coefficients (default: explicit weight count)");
    sample->add_option("--seed", sa.seed)->capture_default_str();
    sample->add_option("--stream", sa.stream)->capture_default_str();
    out_opt(sample);

    BallArgs ba;
    auto* ball = app.add_subcommand("ballprob", "prior probability of a sup-norm ball");
    ball->add_option("--gamma", ba.gamma, "weight sequence JSON")->required();
    ball->add_option("--center", ba.center, "center point JSON")->required();
    ball->add_option("--radius", ba.radius, "ball radius")->required();
    ball->add_flag("--mc", ba.mc, "Monte Carlo estimate instead of the exact product");
    ball->add_option("--samples", ba.samples)->capture_default_str();
    ball->add_option("--seed", ba.seed)->capture_default_str();
    ball->add_option("--trunc", ba.trunc, "Monte Carlo truncation (default: automatic)");
    out_opt(ball);

    ClassifyArgs ca;
    auto* classify = app.add_subcommand("classify", "is the point a generalized mode of the prior");
    classify->add_option("--gamma", ca.gamma)->required();
    classify->add_option("--point", ca.point)->required();
    out_opt(classify);

    CurveArgs cu;
    auto* curve = app.add_subcommand("mode-curve", "prior ball ratio J(x)/J(0) along a radius schedule");
    curve->add_option("--gamma", cu.gamma)->required();
    curve->add_option("--point", cu.point)->required();
    curve->add_option("--format", cu.format, "csv (default) or json");
    add_schedule(curve, cu.sched);
    out_opt(curve);

    ModelabArgs ma;
    auto* modelab = app.add_subcommand("modelab", "strong and generalized mode curves of a 1D density");
    modelab->add_option("--example", ma.example, "standard, cluster or gaussian");
    modelab->add_option("--density", ma.density, "piecewise density JSON {breakpoints, pieces}");
    modelab->add_option("--point", ma.point, "candidate mode")->capture_default_str();
    modelab->add_option("--levels", ma.levels, "dyadic levels of the cluster example")->capture_default_str();
    modelab->add_option("--grid", ma.grid, "maximization grid size")->capture_default_str();
    modelab->add_option("--format", ma.format, "csv (default) or json");
    add_schedule(modelab, ma.sched);
    out_opt(modelab);

    SolveArgs so;
    auto* solve = app.add_subcommand("solve", "generalized MAP estimate by projected gradient");
    solve->add_option("--spec", so.spec, "posterior JSON")->required();
    solve->add_option("--x0", so.x0, "starting point JSON (default: 0)");
    solve->add_option("--tol", so.opts.tol)->capture_default_str();
    solve->add_option("--max-iter", so.opts.max_iter)->capture_default_str();
    solve->add_option("--step0", so.opts.step0)->capture_default_str();
    solve->add_option("--trace-out", so.trace_out, "CSV file for the objective trace");
    out_opt(solve);

    OmArgs om;
    auto* omc = app.add_subcommand("om-check", "posterior ball ratios against exp(I(x2) - I(x1))");
    omc->add_option("--spec", om.spec, "posterior JSON")->required();
    omc->add_option("--x1", om.x1)->required();
    omc->add_option("--x2", om.x2)->required();
    omc->add_option("--samples", om.samples)->capture_default_str();
    omc->add_option("--seed", om.seed)->capture_default_str();
    omc->add_option("--format", om.format, "csv (default) or json");
    add_schedule(omc, om.sched);
    out_opt(omc);

    ConsistencyArgs co;
    auto* cons = app.add_subcommand("consistency", "small-noise or large-sample consistency experiment");
    cons->add_option("--plan", co.plan, "experiment plan JSON")->required();
    cons->add_option("--mode", co.mode, "small-noise or large-sample")->capture_default_str();
    cons->add_option("--eps", co.eps, "comma-separated error thresholds")->capture_default_str();
    cons->add_option("--verdict-out", co.verdict_out, "JSON file for the convergence verdicts");
    out_opt(cons);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sample) return run_sample(common, sa);
        if (*ball) return run_ballprob(common, ba);
        if (*classify) return run_classify(common, ca);
        if (*curve) return run_mode_curve(common, cu);
        if (*modelab) return run_modelab(common, ma);
        if (*solve) return run_solve(common, so);
        if (*omc) return run_om_check(common, om);
        if (*cons) return run_consistency(common, co);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const genmap::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
