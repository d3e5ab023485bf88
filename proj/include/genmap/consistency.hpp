#pragma once

// Frequentist consistency experiments for generalized MAP estimates.
//
// Small-noise mode: y = F(x_true) + delta eta with eta ~ N(0, Sigma).
// Large-sample mode: n data vectors y_j = F(x_true) + eta_j, reduced to their
// mean; the objective is n times the single-datum misfit at the mean.
//
// The minimizer of I is invariant under positive scaling of Phi, so every
// solve uses noise_scale 1. That keeps the noiseless case delta = 0 well posed.
// Optimality gives |Sigma^{-1/2}(F(x_n) - y)| <= |Sigma^{-1/2}(F(x_true) - y)|
// and hence the residual bound checked for each replicate:
//   |Sigma^{-1/2}(F(x_n) - F(x_true))|^2 <= 4 |Sigma^{-1/2}(F(x_true) - y)|^2.

#include "genmap/map_solver.hpp"
#include "genmap/posterior.hpp"
#include "genmap/random.hpp"
#include "genmap/sequence.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace genmap {

enum class ExperimentMode { small_noise, large_sample };

[[nodiscard]] constexpr std::string_view to_string(ExperimentMode m) noexcept {
    return m == ExperimentMode::small_noise ? "small-noise" : "large-sample";
}

/// A posterior without data.
struct SpecTemplate {
    WeightSequence gamma;
    ForwardModel forward;
    Eigen::MatrixXd noise_cov;
};

struct ExperimentPlan {
    SpecTemplate spec_template;
    SeqPoint truth;
    /// Noise levels delta_n (small-noise) or sample counts n (large-sample).
    std::vector<double> schedule;
    std::size_t replicates = 50;
    RngSpec seed;
    SolveOptions solver{1.0, 1e-10, 10000, false};
    unsigned threads = 0;
};

enum class ReplicateStatus { converged, max_iter, line_search_failure, residual_violation, evaluation_failure };

[[nodiscard]] constexpr std::string_view to_string(ReplicateStatus s) noexcept {
    switch (s) {
        case ReplicateStatus::converged: return "converged";
        case ReplicateStatus::max_iter: return "max_iter";
        case ReplicateStatus::line_search_failure: return "line_search_failure";
        case ReplicateStatus::residual_violation: return "residual_violation";
        case ReplicateStatus::evaluation_failure: return "evaluation_failure";
    }
    return "unknown";
}

struct ConsistencyRow {
    double schedule_value = 0.0;
    std::vector<double> replicate_errors;  ///< |x_n - x_true|_inf
    std::vector<double> residuals;         ///< |Sigma^{-1/2}(F(x_n) - F(x_true))|
    std::vector<double> residual_bounds;   ///< right-hand side of the squared bound
    std::vector<ReplicateStatus> statuses;
    std::vector<double> empirical_exceedance;  ///< one entry per eps
    bool flagged = false;                      ///< more than 20% of replicates failed
};

struct ConsistencyTable {
    ExperimentMode mode = ExperimentMode::small_noise;
    std::vector<double> eps_list;
    std::vector<ConsistencyRow> rows;
};

/// Fraction of failed replicates above which a row is flagged.
inline constexpr double kRowFailureFraction = 0.2;

namespace detail {

inline void validate_plan(const ExperimentPlan& plan, std::span<const double> eps_list, ExperimentMode mode) {
    const auto& t = plan.spec_template;
    const auto k = static_cast<Eigen::Index>(t.forward.out_dim());
    if (t.noise_cov.rows() != k || t.noise_cov.cols() != k) throw std::invalid_argument("noise covariance must be K x K");
    if (!in_E_gamma(plan.truth, t.gamma)) throw std::invalid_argument("truth must lie in E_gamma");
    if (!t.forward.has_adjoint()) throw std::invalid_argument("consistency experiments need a forward adjoint");
    if (plan.replicates == 0) throw std::invalid_argument("replicates must be positive");
    if (plan.schedule.empty()) throw std::invalid_argument("schedule is empty");
    for (std::size_t i = 0; i < plan.schedule.size(); ++i) {
        const double v = plan.schedule[i];
        if (!std::isfinite(v)) throw std::invalid_argument("schedule entries must be finite");
        if (mode == ExperimentMode::small_noise) {
            if (v < 0.0) throw std::invalid_argument("noise levels must be non-negative");
            if (i > 0 && !(v < plan.schedule[i - 1])) {
                throw std::invalid_argument("small-noise schedule must be strictly decreasing");
            }
        } else {
            if (v < 1.0 || v != std::floor(v)) throw std::invalid_argument("sample counts must be positive integers");
            if (i > 0 && !(v > plan.schedule[i - 1])) {
                throw std::invalid_argument("large-sample schedule must be strictly increasing");
            }
        }
    }
    if (eps_list.empty()) throw std::invalid_argument("eps list is empty");
    for (double e : eps_list) {
        if (!(e > 0.0)) throw std::invalid_argument("eps values must be positive");
    }
}

struct ReplicateResult {
    double error = 0.0;
    double residual = 0.0;
    double bound = 0.0;
    ReplicateStatus status = ReplicateStatus::converged;
};

inline ConsistencyTable run_experiment(const ExperimentPlan& plan, std::span<const double> eps_list,
                                       ExperimentMode mode) {
    validate_plan(plan, eps_list, mode);
    const auto& t = plan.spec_template;
    const Eigen::LLT<Eigen::MatrixXd> llt(t.noise_cov);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("noise covariance is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();
    const Eigen::VectorXd f_true = t.forward.eval(plan.truth);
    const auto k = f_true.size();
    const std::size_t rows = plan.schedule.size();
    const std::size_t reps = plan.replicates;
    const std::size_t dim = std::max({t.gamma.size(), t.forward.in_dim(), plan.truth.size()});

    std::vector<ReplicateResult> results(rows * reps);
    parallel_chunks(rows * reps, plan.threads, [&](std::size_t task) {
        const std::size_t row = task / reps;
        const std::size_t r = task % reps;
        Engine eng = make_engine(derive(plan.seed, row, r));
        std::normal_distribution<double> normal(0.0, 1.0);

        // Whitened noise z with data misfit Sigma^{-1/2}(y - F(x_true)) = scale * z.
        Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
        double scale = 0.0;
        if (mode == ExperimentMode::small_noise) {
            for (Eigen::Index i = 0; i < k; ++i) z[i] = normal(eng);
            scale = plan.schedule[row];
        } else {
            const auto n = static_cast<std::uint64_t>(plan.schedule[row]);
            for (std::uint64_t j = 0; j < n; ++j) {
                for (Eigen::Index i = 0; i < k; ++i) z[i] += normal(eng);
            }
            z /= static_cast<double>(n);  // mean of whitened noise
            scale = 1.0;
        }
        const Eigen::VectorXd y = f_true + scale * (chol * z);

        ReplicateResult& out = results[task];
        out.bound = 4.0 * scale * scale * z.squaredNorm();
        try {
            Posterior post(PosteriorSpec{t.gamma, t.forward, y, t.noise_cov, 1.0});
            const SolveReport rep = solve_map_pg(post, SeqPoint::zeros(dim), plan.solver);
            const SeqPoint& x = rep.solution;
            double err = 0.0;
            for (std::size_t i = 0; i < std::max(x.size(), dim); ++i) err = std::max(err, std::abs(x[i] - plan.truth[i]));
            out.error = err;
            out.residual = post.whiten(t.forward.eval(x) - f_true).norm();
            switch (rep.termination) {
                case Termination::converged: out.status = ReplicateStatus::converged; break;
                case Termination::max_iter: out.status = ReplicateStatus::max_iter; break;
                case Termination::line_search_failure: out.status = ReplicateStatus::line_search_failure; break;
            }
            // Slack for round-off in the solve and in the norms themselves.
            const double slack = 1e-9 * out.bound + 1e-18;
            if (out.residual * out.residual > out.bound + slack) out.status = ReplicateStatus::residual_violation;
        } catch (const EvaluationFailure&) {
            out.error = std::numeric_limits<double>::infinity();
            out.residual = std::numeric_limits<double>::infinity();
            out.status = ReplicateStatus::evaluation_failure;
        }
    });

    ConsistencyTable table;
    table.mode = mode;
    table.eps_list.assign(eps_list.begin(), eps_list.end());
    table.rows.resize(rows);
    for (std::size_t row = 0; row < rows; ++row) {
        ConsistencyRow& cr = table.rows[row];
        cr.schedule_value = plan.schedule[row];
        std::size_t failures = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const ReplicateResult& res = results[row * reps + r];
            cr.replicate_errors.push_back(res.error);
            cr.residuals.push_back(res.residual);
            cr.residual_bounds.push_back(res.bound);
            cr.statuses.push_back(res.status);
            failures += res.status != ReplicateStatus::converged ? 1 : 0;
        }
        cr.flagged = static_cast<double>(failures) > kRowFailureFraction * static_cast<double>(reps);
        for (double e : eps_list) {
            const auto over = std::count_if(cr.replicate_errors.begin(), cr.replicate_errors.end(),
                                            [e](double v) { return v > e; });
            cr.empirical_exceedance.push_back(static_cast<double>(over) / static_cast<double>(reps));
        }
    }
    return table;
}

}  // namespace detail

[[nodiscard]] inline ConsistencyTable run_small_noise(const ExperimentPlan& plan, std::span<const double> eps_list) {
    return detail::run_experiment(plan, eps_list, ExperimentMode::small_noise);
}

[[nodiscard]] inline ConsistencyTable run_large_sample(const ExperimentPlan& plan, std::span<const double> eps_list) {
    return detail::run_experiment(plan, eps_list, ExperimentMode::large_sample);
}

struct ConvergenceVerdict {
    bool pass = false;
    double eps = 0.0;
    std::vector<double> exceedances;
    std::size_t inversions = 0;
    double largest_inversion = 0.0;
    std::string reason;
};

inline constexpr double kFinalExceedanceThreshold = 0.1;

/// Finite-sample trend check: PASS if the last exceedance is at most 0.1 and
/// the sequence never increases, except by one step of at most 1/R.
[[nodiscard]] inline ConvergenceVerdict convergence_in_probability_test(std::span<const double> exceedances,
                                                                        std::size_t replicates, double eps = 0.0) {
    if (exceedances.size() < 4) throw std::invalid_argument("convergence test needs at least 4 rows");
    if (replicates < 30) throw std::invalid_argument("convergence test needs at least 30 replicates");
    ConvergenceVerdict v;
    v.eps = eps;
    v.exceedances.assign(exceedances.begin(), exceedances.end());
    const double allowed = 1.0 / static_cast<double>(replicates) + 1e-12;
    for (std::size_t i = 1; i < exceedances.size(); ++i) {
        const double rise = exceedances[i] - exceedances[i - 1];
        if (rise > 0.0) {
            ++v.inversions;
            v.largest_inversion = std::max(v.largest_inversion, rise);
        }
    }
    const double last = exceedances.back();
    if (last > kFinalExceedanceThreshold) {
        v.reason = "final exceedance " + std::to_string(last) + " exceeds 0.1";
    } else if (v.inversions > 1) {
        v.reason = std::to_string(v.inversions) + " inversions in the exceedance sequence";
    } else if (v.largest_inversion > allowed) {
        v.reason = "inversion of " + std::to_string(v.largest_inversion) + " exceeds 1/R";
    } else {
        v.pass = true;
        v.reason = "exceedance decreases to below 0.1";
    }
    return v;
}

[[nodiscard]] inline ConvergenceVerdict convergence_in_probability_test(const ConsistencyTable& table, double eps) {
    const auto it = std::find(table.eps_list.begin(), table.eps_list.end(), eps);
    if (it == table.eps_list.end()) throw std::invalid_argument("eps " + std::to_string(eps) + " is not in the table");
    const auto j = static_cast<std::size_t>(it - table.eps_list.begin());
    if (table.rows.empty()) throw std::invalid_argument("convergence test needs at least 4 rows");
    std::vector<double> seq;
    for (const auto& row : table.rows) seq.push_back(row.empirical_exceedance[j]);
    return convergence_in_probability_test(seq, table.rows.front().replicate_errors.size(), eps);
}

}  // namespace genmap
