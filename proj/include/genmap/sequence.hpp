#pragma once

// Finite representation of the weighted sequence space c0 under the sup-norm,
// the feasible boxes E_gamma = {|x_k| <= gamma_k} and
// E_gamma^delta = {|x_k| <= max(gamma_k - delta, 0)}, and the metric
// projections onto them.
//
// Indices are 0-based in code: coefficient i corresponds to k = i + 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace genmap {

/// Largest index count any tail-dependent computation may touch.
inline constexpr std::size_t kMaxActiveIndices = std::size_t{1} << 26;

/// gamma_k = c * k^(-p) for k beyond the explicit values.
struct PowerLawTail {
    double c = 0.0;
    double p = 0.0;

    [[nodiscard]] double at(std::size_t k) const { return c * std::pow(static_cast<double>(k), -p); }

    friend bool operator==(const PowerLawTail&, const PowerLawTail&) = default;
};

class WeightSequence {
public:
    WeightSequence() = default;

    explicit WeightSequence(std::vector<double> values, std::optional<PowerLawTail> tail = std::nullopt)
        : values_(std::move(values)), tail_(tail) {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
                throw std::invalid_argument("weight gamma_" + std::to_string(i + 1) +
                                            " must be a finite non-negative number");
            }
        }
        if (tail_) {
            if (!(tail_->c > 0.0) || !(tail_->p > 0.0) || !std::isfinite(tail_->c) || !std::isfinite(tail_->p)) {
                throw std::invalid_argument("power-law tail requires c > 0 and p > 0");
            }
            if (!values_.empty() && tail_->at(values_.size() + 1) > values_.back()) {
                throw std::invalid_argument("power-law tail must not exceed the last explicit weight");
            }
        }
    }

    WeightSequence(std::initializer_list<double> values) : WeightSequence(std::vector<double>(values)) {}

    /// Number of explicitly stored weights.
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] const std::optional<PowerLawTail>& tail() const noexcept { return tail_; }

    /// gamma at 0-based index i, including the tail; zero past the support.
    [[nodiscard]] double operator[](std::size_t i) const {
        if (i < values_.size()) return values_[i];
        return tail_ ? tail_->at(i + 1) : 0.0;
    }

    /// Smallest m such that gamma_k <= threshold for every k > m (1-based k).
    /// Throws std::domain_error if the tail needs more than kMaxActiveIndices terms.
    [[nodiscard]] std::size_t active_count(double threshold) const {
        std::size_t m = values_.size();
        while (m > 0 && values_[m - 1] <= threshold) --m;
        if (!tail_ || tail_->at(values_.size() + 1) <= threshold) return m;
        if (!(threshold > 0.0)) {
            throw std::domain_error("weight tail cannot be bounded below a non-positive threshold");
        }
        // c k^-p <= t  <=>  k >= (c / t)^(1/p)
        const double k_min = std::ceil(std::pow(tail_->c / threshold, 1.0 / tail_->p));
        if (!(k_min < static_cast<double>(kMaxActiveIndices))) {
            throw std::domain_error("weight tail cannot be bounded below " + std::to_string(threshold) +
                                    " within the supported index range");
        }
        auto k = std::max(static_cast<std::size_t>(k_min), values_.size() + 1);
        // pow rounding: step to the exact crossing
        while (k > values_.size() + 1 && tail_->at(k - 1) <= threshold) --k;
        while (tail_->at(k) > threshold) ++k;
        return std::max(m, k - 1);
    }

    friend bool operator==(const WeightSequence&, const WeightSequence&) = default;

private:
    std::vector<double> values_;
    std::optional<PowerLawTail> tail_;
};

/// Finitely supported point of c0: x_k = 0 past the stored coefficients.
class SeqPoint {
public:
    SeqPoint() = default;

    explicit SeqPoint(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
        for (std::size_t i = 0; i < coeffs_.size(); ++i) {
            if (!std::isfinite(coeffs_[i])) {
                throw std::invalid_argument("coefficient x_" + std::to_string(i + 1) + " is not finite");
            }
        }
    }

    SeqPoint(std::initializer_list<double> coeffs) : SeqPoint(std::vector<double>(coeffs)) {}

    /// All-zero point with n stored coefficients.
    static SeqPoint zeros(std::size_t n) { return SeqPoint(std::vector<double>(n, 0.0)); }

    [[nodiscard]] std::size_t size() const noexcept { return coeffs_.size(); }
    [[nodiscard]] std::span<const double> coeffs() const noexcept { return coeffs_; }

    [[nodiscard]] double operator[](std::size_t i) const noexcept { return i < coeffs_.size() ? coeffs_[i] : 0.0; }

    /// Copy zero-padded (or truncated) to n coefficients.
    [[nodiscard]] SeqPoint resized(std::size_t n) const {
        std::vector<double> c(n, 0.0);
        std::copy_n(coeffs_.begin(), std::min(n, coeffs_.size()), c.begin());
        return SeqPoint(std::move(c));
    }

    friend bool operator==(const SeqPoint&, const SeqPoint&) = default;

private:
    std::vector<double> coeffs_;
};

namespace detail {

inline void require_positive_delta(double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be positive");
}

}  // namespace detail

/// |x_k| <= gamma_k for all k. Exact comparison, no tolerance.
[[nodiscard]] inline bool in_E_gamma(const SeqPoint& x, const WeightSequence& gamma) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(std::abs(x[i]) <= gamma[i])) return false;
    }
    return true;
}

[[nodiscard]] inline bool in_E_gamma_delta(const SeqPoint& x, const WeightSequence& gamma, double delta) {
    detail::require_positive_delta(delta);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(std::abs(x[i]) <= std::max(gamma[i] - delta, 0.0))) return false;
    }
    return true;
}

/// Sup-norm nearest point of E_gamma^delta, computed componentwise.
[[nodiscard]] inline SeqPoint project_delta(const SeqPoint& x, const WeightSequence& gamma, double delta) {
    detail::require_positive_delta(delta);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double g = gamma[i];
        if (g < delta) {
            out[i] = 0.0;
        } else {
            const double bound = std::max(g - delta, 0.0);
            out[i] = std::clamp(x[i], -bound, bound);
        }
    }
    return SeqPoint(std::move(out));
}

/// Componentwise clamp onto [-gamma_k, gamma_k].
[[nodiscard]] inline SeqPoint box_project(const SeqPoint& v, const WeightSequence& gamma) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i], -gamma[i], gamma[i]);
    return SeqPoint(std::move(out));
}

[[nodiscard]] inline double sup_norm(const SeqPoint& x) noexcept {
    double m = 0.0;
    for (double c : x.coeffs()) m = std::max(m, std::abs(c));
    return m;
}

/// sup_k |a_k - b_k| over the union of both supports.
[[nodiscard]] inline double sup_distance(const SeqPoint& a, const SeqPoint& b) noexcept {
    const std::size_t n = std::max(a.size(), b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Diagnostic only: sup_k max(|x_k| - gamma_k, 0), the sup-norm distance to E_gamma.
[[nodiscard]] inline double distance_to_E_gamma(const SeqPoint& x, const WeightSequence& gamma) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i]) - gamma[i]);
    return m;
}

}  // namespace genmap
