#pragma once

// The uniform series prior mu_gamma, the law of sum_k gamma_k xi_k e_k with
// xi_k iid U[-1, 1]: sampling, exact small-ball probabilities, and mode
// classification.
//
// Balls are open sup-norm balls B^delta(x). Each coordinate contributes an
// interval probability and the closed ball has the same mass as the open
// one, so no distinction is needed in the exact formulas. The Monte Carlo
// oracle tests the strict inequality |sample_k - x_k| < delta.

#include "genmap/random.hpp"
#include "genmap/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

namespace genmap {

enum class BallMethod { exact_product, monte_carlo };

[[nodiscard]] constexpr std::string_view to_string(BallMethod m) noexcept {
    return m == BallMethod::exact_product ? "exact_product" : "monte_carlo";
}

struct BallEstimate {
    double value = 0.0;
    BallMethod method = BallMethod::exact_product;
    double std_error = 0.0;
    std::uint64_t n_samples = 0;

    friend bool operator==(const BallEstimate&, const BallEstimate&) = default;
};

/// Draws sum_{k <= trunc} gamma_k xi_k e_k.
[[nodiscard]] inline SeqPoint sample_prior(const WeightSequence& gamma, std::size_t trunc, Engine& eng) {
    std::vector<double> c(trunc);
    for (std::size_t i = 0; i < trunc; ++i) {
        const double g = gamma[i];
        const double xi = uniform_pm1(eng);
        c[i] = g == 0.0 ? 0.0 : g * xi;
    }
    return SeqPoint(std::move(c));
}

[[nodiscard]] inline SeqPoint sample_prior(const WeightSequence& gamma, std::size_t trunc, const RngSpec& rng) {
    if (trunc == 0 || trunc < gamma.size()) {
        throw std::invalid_argument("truncation must cover the explicit weights");
    }
    Engine eng = make_engine(rng);
    return sample_prior(gamma, trunc, eng);
}

/// P(gamma_k xi_k in (x_k - delta, x_k + delta)).
///
/// The case split keeps the common values exact: delta / gamma_k whenever the
/// interval lies inside [-gamma_k, gamma_k] (membership tested exactly as in
/// in_E_gamma_delta), and 1 whenever it covers it.
[[nodiscard]] inline double component_ball_prob(double gamma_k, double x_k, double delta) {
    const double ax = std::abs(x_k);
    if (gamma_k == 0.0) return ax < delta ? 1.0 : 0.0;
    if (ax <= std::max(gamma_k - delta, 0.0) && delta <= gamma_k) return delta / gamma_k;
    if (delta >= gamma_k + ax) return 1.0;
    if (ax >= gamma_k + delta) return 0.0;
    return (delta + (gamma_k - ax)) / (2.0 * gamma_k);
}

/// Ratio of the coordinate-k ball probability at x_k to the one at the origin.
/// Requires |x_k| <= gamma_k.
[[nodiscard]] inline double component_ratio(double gamma_k, double x_k, double delta) {
    detail::require_positive_delta(delta);
    if (!(gamma_k >= 0.0)) throw std::invalid_argument("gamma_k must be non-negative");
    const double ax = std::abs(x_k);
    if (!(ax <= gamma_k)) throw std::invalid_argument("|x_k| must not exceed gamma_k");
    if (gamma_k == 0.0) return 1.0;
    if (delta <= gamma_k - ax) return 1.0;
    // gamma_k - ax first: it is exact near the boundary, where delta + gamma_k would round.
    const double gap = gamma_k - ax;
    if (delta <= gamma_k) return (delta + gap) / (2.0 * delta);
    if (delta < gamma_k + ax) return (delta + gap) / (2.0 * gamma_k);
    return 1.0;
}

namespace detail {

/// Number of leading coordinates whose factor can differ from 1 at radius delta.
[[nodiscard]] inline std::size_t active_coordinates(const WeightSequence& gamma, const SeqPoint& x, double delta) {
    return std::max(x.size(), gamma.active_count(delta));
}

}  // namespace detail

/// Exact mu_gamma(B^delta(x)) as a finite product over the active coordinates.
[[nodiscard]] inline BallEstimate ball_prob_exact(const WeightSequence& gamma, const SeqPoint& x, double delta) {
    detail::require_positive_delta(delta);
    const std::size_t n = detail::active_coordinates(gamma, x, delta);
    constexpr double kLogSwitch = 1e-8;

    std::vector<double> factors;
    bool tiny = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = component_ball_prob(gamma[i], x[i], delta);
        if (f == 1.0) continue;
        if (f == 0.0) return BallEstimate{0.0, BallMethod::exact_product, 0.0, 0};
        tiny = tiny || f < kLogSwitch;
        factors.push_back(f);
    }
    double value = 1.0;
    if (!tiny) {
        for (double f : factors) value *= f;
    }
    // Products near the subnormal range lose digits; redo them in logs.
    if (tiny || value < 1e-280) {
        double log_sum = 0.0;
        for (double f : factors) log_sum += std::log(f);
        value = std::exp(log_sum);
    }
    return BallEstimate{value, BallMethod::exact_product, 0.0, 0};
}

/// sup_x mu_gamma(B^delta(x)), attained at the origin.
[[nodiscard]] inline BallEstimate max_ball_prob(const WeightSequence& gamma, double delta) {
    return ball_prob_exact(gamma, SeqPoint{}, delta);
}

/// Default truncation for Monte Carlo membership at radius delta: covers the
/// explicit weights, the center, and every k whose weight is at least delta/4.
[[nodiscard]] inline std::size_t default_mc_truncation(const WeightSequence& gamma, const SeqPoint& center,
                                                       double delta) {
    return std::max({gamma.size(), center.size(), gamma.active_count(delta / 4.0 * (1.0 - 1e-12)), std::size_t{1}});
}

struct McOptions {
    std::size_t trunc = 0;  ///< 0 selects default_mc_truncation
    unsigned threads = 0;   ///< 0 selects resolve_threads()
};

/// Fraction of n prior draws inside the open ball B^delta(x), with binomial error.
[[nodiscard]] inline BallEstimate ball_prob_mc(const WeightSequence& gamma, const SeqPoint& x, double delta,
                                               std::uint64_t n, const RngSpec& rng, McOptions opts = {}) {
    detail::require_positive_delta(delta);
    if (n == 0) throw std::invalid_argument("sample count must be positive");
    const std::size_t trunc = opts.trunc > 0 ? std::max(opts.trunc, x.size()) : default_mc_truncation(gamma, x, delta);

    std::vector<double> g(trunc), c(trunc);
    for (std::size_t i = 0; i < trunc; ++i) {
        g[i] = gamma[i];
        c[i] = x[i];
    }
    std::vector<std::uint64_t> hits(kMonteCarloChunks, 0);
    parallel_chunks(kMonteCarloChunks, opts.threads, [&](std::size_t chunk) {
        Engine eng = make_engine(rng, chunk);
        const std::size_t m = chunk_size(n, kMonteCarloChunks, chunk);
        std::uint64_t h = 0;
        for (std::size_t s = 0; s < m; ++s) {
            bool inside = true;
            for (std::size_t i = 0; i < trunc && inside; ++i) {
                const double xi = uniform_pm1(eng);
                inside = std::abs(g[i] * xi - c[i]) < delta;
            }
            h += inside ? 1 : 0;
        }
        hits[chunk] = h;
    });
    std::uint64_t total = 0;
    for (auto h : hits) total += h;
    const double p = static_cast<double>(total) / static_cast<double>(n);
    return BallEstimate{p, BallMethod::monte_carlo, std::sqrt(p * (1.0 - p) / static_cast<double>(n)), n};
}

/// Generalized modes of mu_gamma are exactly the points of E_gamma.
[[nodiscard]] inline bool classify_generalized_mode(const SeqPoint& x, const WeightSequence& gamma) {
    return in_E_gamma(x, gamma);
}

struct RatioPoint {
    double delta = 0.0;
    double ratio = 0.0;
};

namespace detail {

inline void require_decreasing_schedule(std::span<const double> deltas) {
    if (deltas.empty()) throw std::invalid_argument("radius schedule is empty");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        require_positive_delta(deltas[i]);
        if (i > 0 && !(deltas[i] < deltas[i - 1])) {
            throw std::invalid_argument("radius schedule must be strictly decreasing");
        }
    }
}

}  // namespace detail

/// delta -> J(x)/J(0) along a decreasing schedule. Reports the curve only;
/// whether it tends to 1 is left to the caller.
///
/// The ratio is evaluated as the product of the per-coordinate ratios, which
/// equals ball_prob_exact(x)/max_ball_prob without underflow.
[[nodiscard]] inline std::vector<RatioPoint> strong_mode_diagnostic(const SeqPoint& x, const WeightSequence& gamma,
                                                                    std::span<const double> deltas) {
    if (!in_E_gamma(x, gamma)) {
        throw std::invalid_argument("point is outside E_gamma; its ball ratio vanishes for small radii");
    }
    detail::require_decreasing_schedule(deltas);
    std::vector<RatioPoint> out;
    out.reserve(deltas.size());
    for (double delta : deltas) {
        const std::size_t n = detail::active_coordinates(gamma, x, delta);
        double ratio = 1.0;
        for (std::size_t i = 0; i < n; ++i) ratio *= component_ratio(gamma[i], x[i], delta);
        out.push_back({delta, ratio});
    }
    return out;
}

/// Geometric schedule start, start*factor, ..., `steps` entries.
[[nodiscard]] inline std::vector<double> geometric_schedule(double start, double factor, std::size_t steps) {
    if (!(start > 0.0)) throw std::invalid_argument("delta-start must be positive");
    if (!(factor > 0.0 && factor < 1.0)) throw std::invalid_argument("delta-factor must lie in (0, 1)");
    if (steps == 0) throw std::invalid_argument("steps must be positive");
    std::vector<double> out(steps);
    double d = start;
    for (auto& v : out) {
        v = d;
        d *= factor;
    }
    return out;
}

}  // namespace genmap
