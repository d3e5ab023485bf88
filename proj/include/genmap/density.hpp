#pragma once

// One-dimensional probability densities with closed-form interval masses.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace genmap {

/// A 1D law whose mass on (a, b) is available in closed form.
template <class D>
concept Density1D = requires(const D& d, double a, double b) {
    { d.mass(a, b) } -> std::convertible_to<double>;
    { d.pdf(a) } -> std::convertible_to<double>;
    { d.support() } -> std::convertible_to<std::pair<double, double>>;
};

/// Piecewise polynomial density of degree <= 2 on [b_0, b_m], zero outside.
///
/// Piece i covers [b_i, b_{i+1}] and is given by coefficients (c0, c1, c2) of
/// c0 + c1 t + c2 t^2 in the local coordinate t = x - b_i. The stored pieces
/// need not integrate to one; normalization() holds their integral and all
/// probabilities are divided by it.
class PiecewiseDensity1D {
public:
    PiecewiseDensity1D(std::vector<double> breakpoints, std::vector<std::vector<double>> pieces)
        : breaks_(std::move(breakpoints)), pieces_(std::move(pieces)) {
        if (breaks_.size() < 2) throw std::invalid_argument("density needs at least two breakpoints");
        if (pieces_.size() + 1 != breaks_.size()) {
            throw std::invalid_argument("density needs exactly one piece per breakpoint interval");
        }
        for (std::size_t i = 0; i < breaks_.size(); ++i) {
            if (!std::isfinite(breaks_[i])) throw std::invalid_argument("breakpoints must be finite");
            if (i > 0 && !(breaks_[i] > breaks_[i - 1])) {
                throw std::invalid_argument("breakpoints must be strictly increasing");
            }
        }
        cumulative_.assign(breaks_.size(), 0.0);
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            auto& c = pieces_[i];
            if (c.empty() || c.size() > 3) {
                throw std::invalid_argument("piece " + std::to_string(i) + " must have degree at most 2");
            }
            for (double v : c) {
                if (!std::isfinite(v)) throw std::invalid_argument("piece coefficients must be finite");
            }
            c.resize(3, 0.0);
            check_nonnegative(i);
            cumulative_[i + 1] = cumulative_[i] + local_integral(i, 0.0, width(i));
        }
        norm_ = cumulative_.back();
        if (!(norm_ > 0.0)) throw std::invalid_argument("density must have positive total mass");
    }

    [[nodiscard]] const std::vector<double>& breakpoints() const noexcept { return breaks_; }
    [[nodiscard]] const std::vector<std::vector<double>>& pieces() const noexcept { return pieces_; }
    [[nodiscard]] double normalization() const noexcept { return norm_; }
    [[nodiscard]] std::pair<double, double> support() const noexcept { return {breaks_.front(), breaks_.back()}; }

    [[nodiscard]] double pdf(double x) const {
        if (x < breaks_.front() || x > breaks_.back()) return 0.0;
        const std::size_t i = piece_index(x);
        const double t = x - breaks_[i];
        const auto& c = pieces_[i];
        return (c[0] + t * (c[1] + t * c[2])) / norm_;
    }

    /// Probability of the interval (a, b).
    [[nodiscard]] double mass(double a, double b) const {
        a = std::max(a, breaks_.front());
        b = std::min(b, breaks_.back());
        if (!(b > a)) return 0.0;
        // Sum piece by piece; avoids cancellation between large cumulative values.
        std::size_t i = piece_index(a);
        double total = 0.0;
        while (i < pieces_.size() && breaks_[i] < b) {
            const double lo = std::max(a, breaks_[i]) - breaks_[i];
            const double hi = std::min(b, breaks_[i + 1]) - breaks_[i];
            if (hi > lo) total += local_integral(i, lo, hi);
            ++i;
        }
        return std::clamp(total / norm_, 0.0, 1.0);
    }

private:
    [[nodiscard]] double width(std::size_t i) const { return breaks_[i + 1] - breaks_[i]; }

    [[nodiscard]] std::size_t piece_index(double x) const {
        auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
        const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - breaks_.begin() - 1, 0));
        return std::min(idx, pieces_.size() - 1);
    }

    [[nodiscard]] double local_integral(std::size_t i, double lo, double hi) const {
        const auto& c = pieces_[i];
        auto anti = [&](double t) { return t * (c[0] + t * (c[1] / 2.0 + t * c[2] / 3.0)); };
        return anti(hi) - anti(lo);
    }

    void check_nonnegative(std::size_t i) const {
        const auto& c = pieces_[i];
        const double w = width(i);
        auto eval = [&](double t) { return c[0] + t * (c[1] + t * c[2]); };
        const double scale = std::abs(c[0]) + std::abs(c[1]) * w + std::abs(c[2]) * w * w;
        const double tol = 1e-12 * scale;
        double lowest = std::min(eval(0.0), eval(w));
        if (c[2] != 0.0) {
            const double vertex = -c[1] / (2.0 * c[2]);
            if (vertex > 0.0 && vertex < w) lowest = std::min(lowest, eval(vertex));
        }
        if (lowest < -tol) throw std::invalid_argument("density piece " + std::to_string(i) + " is negative");
    }

    std::vector<double> breaks_;
    std::vector<std::vector<double>> pieces_;
    std::vector<double> cumulative_;
    double norm_ = 0.0;
};

/// N(mean, sigma^2); support() is the +-10 sigma search window.
class GaussianDensity1D {
public:
    explicit GaussianDensity1D(double mean = 0.0, double sigma = 1.0) : mean_(mean), sigma_(sigma) {
        if (!(sigma > 0.0) || !std::isfinite(mean)) throw std::invalid_argument("gaussian needs sigma > 0");
    }

    [[nodiscard]] double mean() const noexcept { return mean_; }
    [[nodiscard]] double sigma() const noexcept { return sigma_; }
    [[nodiscard]] std::pair<double, double> support() const noexcept {
        return {mean_ - 10.0 * sigma_, mean_ + 10.0 * sigma_};
    }

    [[nodiscard]] double pdf(double x) const {
        const double z = (x - mean_) / sigma_;
        return std::exp(-0.5 * z * z) / (sigma_ * std::sqrt(2.0 * std::numbers::pi));
    }

    [[nodiscard]] double mass(double a, double b) const {
        if (!(b > a)) return 0.0;
        const double s = sigma_ * std::numbers::sqrt2;
        const double za = (a - mean_) / s;
        const double zb = (b - mean_) / s;
        // Same-sign tails via erfc keep precision away from the mean.
        if (za >= 0.0) return 0.5 * (std::erfc(za) - std::erfc(zb));
        if (zb <= 0.0) return 0.5 * (std::erfc(-zb) - std::erfc(-za));
        return 0.5 * (std::erf(zb) - std::erf(za));
    }

private:
    double mean_;
    double sigma_;
};

/// p(x) proportional to 1 - x on [0, 1]: the maximizer 0 of the density sits at
/// a jump and is not a strong mode.
[[nodiscard]] inline PiecewiseDensity1D standard_example_density() { return PiecewiseDensity1D({0.0, 1.0}, {{1.0, -1.0}}); }

/// Two-bump density whose family of ball maximizers clusters at both -1 and +1.
///
/// With g(t) = (3/4) 2^-n on 2^-(n+1) < |t| <= 2^-n, the unnormalized density is
/// max{1 - g(x - 1), 1 - sqrt(2) g((x + 1)/sqrt(2)), 0}. The dyadic shells are
/// resolved down to |t| = 2^-levels; the innermost core takes the value of the
/// next shell.
[[nodiscard]] inline PiecewiseDensity1D cluster_example_density(int levels = 40) {
    if (levels < 2 || levels > 50) throw std::invalid_argument("cluster density levels must lie in [2, 50]");
    const double r2 = std::numbers::sqrt2;
    std::vector<double> breaks;
    std::vector<std::vector<double>> pieces;
    auto push_piece = [&](double right, double value) {
        pieces.push_back({value});
        breaks.push_back(right);
    };

    // Bump at -1: shells n = 1..levels-1 scaled by sqrt(2), value 1 - sqrt(2) (3/4) 2^-n.
    auto left_value = [&](int n) { return 1.0 - r2 * 0.75 * std::ldexp(1.0, -n); };
    breaks.push_back(-1.0 - r2 * 0.5);
    for (int n = 1; n < levels; ++n) push_piece(-1.0 - r2 * std::ldexp(1.0, -(n + 1)), left_value(n));
    push_piece(-1.0 + r2 * std::ldexp(1.0, -levels), left_value(levels));
    for (int n = levels - 1; n >= 1; --n) push_piece(-1.0 + r2 * std::ldexp(1.0, -n), left_value(n));

    // Gap with zero density.
    push_piece(0.0, 0.0);

    // Bump at +1: shells n = 0..levels-1, value 1 - (3/4) 2^-n.
    auto right_value = [](int n) { return 1.0 - 0.75 * std::ldexp(1.0, -n); };
    for (int n = 0; n < levels; ++n) push_piece(1.0 - std::ldexp(1.0, -(n + 1)), right_value(n));
    push_piece(1.0 + std::ldexp(1.0, -levels), right_value(levels));
    for (int n = levels - 1; n >= 0; --n) push_piece(1.0 + std::ldexp(1.0, -n), right_value(n));

    return PiecewiseDensity1D(std::move(breaks), std::move(pieces));
}

}  // namespace genmap
