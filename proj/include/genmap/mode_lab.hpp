#pragma once

// Numerical laboratory for strong and generalized modes of 1D measures.
//
// All quantities are ratios of small-ball probabilities mu(B^delta(x)) =
// mu((x - delta, x + delta)) evaluated along a decreasing radius schedule.
// Limits cannot be certified numerically; the functions report curves.

#include "genmap/density.hpp"
#include "genmap/prior.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace genmap {

inline constexpr std::size_t kDefaultModeGrid = 2001;

template <Density1D D>
[[nodiscard]] double ball_prob_1d(const D& density, double center, double delta) {
    detail::require_positive_delta(delta);
    return density.mass(center - delta, center + delta);
}

struct BallMaximum {
    double center = 0.0;
    double probability = 0.0;
};

namespace detail {

/// Ties within this relative gap resolve toward the smaller center.
inline constexpr double kTieTolerance = 1e-13;

[[nodiscard]] inline bool better(const BallMaximum& a, const BallMaximum& b) {
    const double gap = kTieTolerance * std::max(a.probability, b.probability);
    if (a.probability > b.probability + gap) return true;
    if (b.probability > a.probability + gap) return false;
    return a.center < b.center;
}

/// Golden-section search for a maximum on [a, b]; equal values move left.
template <class F>
[[nodiscard]] BallMaximum golden_max(F&& f, double a, double b) {
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-14 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    BallMaximum best{x1, f1};
    for (BallMaximum c : {BallMaximum{x2, f2}, BallMaximum{a, f(a)}, BallMaximum{b, f(b)}}) {
        if (better(c, best)) best = c;
    }
    return best;
}

}  // namespace detail

/// Maximizes the ball probability over centers in [lo, hi]: a uniform grid of
/// `grid` points, then golden-section polish around every grid local maximum.
template <Density1D D>
[[nodiscard]] BallMaximum max_ball_prob_in(const D& density, double delta, double lo, double hi,
                                           std::size_t grid = kDefaultModeGrid) {
    detail::require_positive_delta(delta);
    if (grid < 2) throw std::invalid_argument("grid must have at least two points");
    if (!(hi >= lo)) throw std::invalid_argument("search window is empty");
    auto f = [&](double c) { return density.mass(c - delta, c + delta); };
    if (hi == lo) return {lo, f(lo)};

    const double h = (hi - lo) / static_cast<double>(grid - 1);
    std::vector<double> values(grid);
    for (std::size_t i = 0; i < grid; ++i) values[i] = f(lo + h * static_cast<double>(i));

    // First point of each non-decreasing-then-non-increasing run.
    std::vector<std::size_t> candidates;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < grid; ++i) {
        if (values[i] > values[best_idx]) best_idx = i;
        const bool rises = i == 0 || values[i] > values[i - 1];
        const bool holds = i + 1 == grid || values[i] >= values[i + 1];
        if (rises && holds && values[i] > 0.0) candidates.push_back(i);
    }
    constexpr std::size_t kMaxPolished = 16;
    if (candidates.size() > kMaxPolished) {
        std::partial_sort(candidates.begin(), candidates.begin() + kMaxPolished, candidates.end(),
                          [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
        candidates.resize(kMaxPolished);
    }
    if (std::find(candidates.begin(), candidates.end(), best_idx) == candidates.end()) {
        candidates.push_back(best_idx);
    }

    BallMaximum best{lo + h * static_cast<double>(best_idx), values[best_idx]};
    for (std::size_t i : candidates) {
        const double a = std::max(lo, lo + h * (static_cast<double>(i) - 1.0));
        const double b = std::min(hi, lo + h * (static_cast<double>(i) + 1.0));
        BallMaximum grid_point{lo + h * static_cast<double>(i), values[i]};
        BallMaximum polished = detail::golden_max(f, a, b);
        if (detail::better(grid_point, polished)) polished = grid_point;
        if (detail::better(polished, best)) best = polished;
    }
    return best;
}

/// sup over all centers; the search window is the support widened by delta.
template <Density1D D>
[[nodiscard]] BallMaximum max_ball_prob_1d(const D& density, double delta, std::size_t grid = kDefaultModeGrid) {
    const auto [lo, hi] = density.support();
    return max_ball_prob_in(density, delta, lo - delta, hi + delta, grid);
}

struct StrongModePoint {
    double delta = 0.0;
    double argmax = 0.0;  ///< maximizing center found for this radius
    double ratio = 0.0;   ///< mu(B(x_hat)) / M^delta
};

struct GeneralizedModePoint {
    double delta = 0.0;
    double w = 0.0;      ///< best center within sqrt(delta) of x_hat
    double ratio = 0.0;  ///< mu(B(w)) / M^delta
};

struct PropertyRatioPoint {
    double delta = 0.0;
    double w = 0.0;
    double ratio_to_w = 0.0;  ///< mu(B(x_hat)) / mu(B(w))
};

/// Radius of the window around x_hat searched for approximating centers.
[[nodiscard]] inline double approximating_window(double delta) { return std::sqrt(delta); }

template <Density1D D>
[[nodiscard]] std::vector<StrongModePoint> strong_mode_ratio_curve(const D& density, double x_hat,
                                                                   std::span<const double> deltas,
                                                                   std::size_t grid = kDefaultModeGrid) {
    detail::require_decreasing_schedule(deltas);
    std::vector<StrongModePoint> out;
    out.reserve(deltas.size());
    for (double delta : deltas) {
        const BallMaximum m = max_ball_prob_1d(density, delta, grid);
        const double p = ball_prob_1d(density, x_hat, delta);
        out.push_back({delta, m.center, m.probability > 0.0 ? p / m.probability : 0.0});
    }
    return out;
}

namespace detail {

template <Density1D D>
[[nodiscard]] BallMaximum approximating_center(const D& density, double x_hat, double delta, std::size_t grid) {
    const double r = approximating_window(delta);
    return max_ball_prob_in(density, delta, x_hat - r, x_hat + r, grid);
}

}  // namespace detail

/// For each radius, the best center w within sqrt(delta) of x_hat and its ratio
/// to the global maximum. w -> x_hat with ratio -> 1 is evidence of a
/// generalized mode.
template <Density1D D>
[[nodiscard]] std::vector<GeneralizedModePoint> generalized_mode_diagnostic(const D& density, double x_hat,
                                                                            std::span<const double> deltas,
                                                                            std::size_t grid = kDefaultModeGrid) {
    detail::require_decreasing_schedule(deltas);
    std::vector<GeneralizedModePoint> out;
    out.reserve(deltas.size());
    for (double delta : deltas) {
        const BallMaximum m = max_ball_prob_1d(density, delta, grid);
        const BallMaximum w = detail::approximating_center(density, x_hat, delta, grid);
        out.push_back({delta, w.center, m.probability > 0.0 ? w.probability / m.probability : 0.0});
    }
    return out;
}

/// mu(B(x_hat)) / mu(B(w_delta)) with w_delta from generalized_mode_diagnostic.
/// A generalized mode whose curve tends to 1 is a strong mode.
template <Density1D D>
[[nodiscard]] std::vector<PropertyRatioPoint> property_ratio_check(const D& density, double x_hat,
                                                                   std::span<const double> deltas,
                                                                   std::size_t grid = kDefaultModeGrid) {
    detail::require_decreasing_schedule(deltas);
    std::vector<PropertyRatioPoint> out;
    out.reserve(deltas.size());
    for (double delta : deltas) {
        const BallMaximum w = detail::approximating_center(density, x_hat, delta, grid);
        const double p = ball_prob_1d(density, x_hat, delta);
        out.push_back({delta, w.center, w.probability > 0.0 ? p / w.probability : 0.0});
    }
    return out;
}

}  // namespace genmap
