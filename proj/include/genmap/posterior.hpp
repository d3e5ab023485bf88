#pragma once

// Posterior measures mu^y(dx) proportional to exp(-Phi(x)) mu_gamma(dx) with the
// Gaussian misfit Phi(x) = |Sigma^{-1/2}(F(x) - y)|^2 / (2 s^2), the
// generalized Onsager-Machlup functional I = Phi + indicator(E_gamma), and
// Monte Carlo estimates of posterior ball probabilities.

#include "genmap/prior.hpp"
#include "genmap/random.hpp"
#include "genmap/sequence.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace genmap {

class EvaluationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EstimationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// How a forward model was built; used for serialization.
struct ForwardDescriptor {
    enum class Kind { linear, builtin, custom };
    Kind kind = Kind::custom;
    Eigen::MatrixXd matrix;  ///< linear
    std::string name;        ///< builtin
};

/// F: X -> R^K reading the first in_dim coefficients of x.
class ForwardModel {
public:
    using EvalFn = std::function<Eigen::VectorXd(std::span<const double>)>;
    /// (x, v) -> F'(x)^* v, a vector of in_dim entries.
    using AdjointFn = std::function<Eigen::VectorXd(std::span<const double>, const Eigen::VectorXd&)>;
    /// (x_new, x_old) -> F(x_new) - F(x_old), evaluated without cancellation.
    using DifferenceFn = std::function<Eigen::VectorXd(std::span<const double>, std::span<const double>)>;

    ForwardModel(std::size_t in_dim, std::size_t out_dim, EvalFn eval, AdjointFn adjoint = {},
                 std::optional<double> lipschitz_hint = std::nullopt, ForwardDescriptor descriptor = {})
        : in_dim_(in_dim),
          out_dim_(out_dim),
          eval_(std::move(eval)),
          adjoint_(std::move(adjoint)),
          lipschitz_(lipschitz_hint),
          descriptor_(std::move(descriptor)) {
        if (in_dim_ == 0 || out_dim_ == 0) throw std::invalid_argument("forward model dimensions must be positive");
        if (!eval_) throw std::invalid_argument("forward model needs an evaluation map");
    }

    static ForwardModel linear(Eigen::MatrixXd a) {
        if (a.size() == 0 || !a.allFinite()) throw std::invalid_argument("linear forward matrix must be finite and non-empty");
        const auto in = static_cast<std::size_t>(a.cols());
        const auto out = static_cast<std::size_t>(a.rows());
        const double lip = a.operatorNorm();
        ForwardDescriptor desc{ForwardDescriptor::Kind::linear, a, {}};
        auto view = [](std::span<const double> x) {
            return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
        };
        ForwardModel f(
            in, out, [a, view](std::span<const double> x) -> Eigen::VectorXd { return a * view(x); },
            [a](std::span<const double>, const Eigen::VectorXd& v) -> Eigen::VectorXd { return a.transpose() * v; },
            lip, std::move(desc));
        f.difference_ = [a, view](std::span<const double> p, std::span<const double> q) -> Eigen::VectorXd {
            return a * (view(p) - view(q));
        };
        return f;
    }

    static ForwardModel identity(std::size_t dim) {
        return linear(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
    }

    /// F(x)_i = x_i^2.
    static ForwardModel componentwise_square(std::size_t dim) {
        ForwardDescriptor desc{ForwardDescriptor::Kind::builtin, {}, "square"};
        ForwardModel f(
            dim, dim,
            [](std::span<const double> x) -> Eigen::VectorXd {
                Eigen::VectorXd out(static_cast<Eigen::Index>(x.size()));
                for (std::size_t i = 0; i < x.size(); ++i) out[static_cast<Eigen::Index>(i)] = x[i] * x[i];
                return out;
            },
            [](std::span<const double> x, const Eigen::VectorXd& v) -> Eigen::VectorXd {
                Eigen::VectorXd out(v.size());
                for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = 2.0 * x[static_cast<std::size_t>(i)] * v[i];
                return out;
            },
            std::nullopt, std::move(desc));
        f.difference_ = [](std::span<const double> p, std::span<const double> q) -> Eigen::VectorXd {
            Eigen::VectorXd out(static_cast<Eigen::Index>(p.size()));
            for (std::size_t i = 0; i < p.size(); ++i) out[static_cast<Eigen::Index>(i)] = (p[i] - q[i]) * (p[i] + q[i]);
            return out;
        };
        return f;
    }

    /// F(x)_i = tanh(x_i); bounded and smooth.
    static ForwardModel componentwise_tanh(std::size_t dim) {
        ForwardDescriptor desc{ForwardDescriptor::Kind::builtin, {}, "tanh"};
        ForwardModel f(
            dim, dim,
            [](std::span<const double> x) -> Eigen::VectorXd {
                Eigen::VectorXd out(static_cast<Eigen::Index>(x.size()));
                for (std::size_t i = 0; i < x.size(); ++i) out[static_cast<Eigen::Index>(i)] = std::tanh(x[i]);
                return out;
            },
            [](std::span<const double> x, const Eigen::VectorXd& v) -> Eigen::VectorXd {
                Eigen::VectorXd out(v.size());
                for (Eigen::Index i = 0; i < v.size(); ++i) {
                    const double t = std::tanh(x[static_cast<std::size_t>(i)]);
                    out[i] = (1.0 - t * t) * v[i];
                }
                return out;
            },
            1.0, std::move(desc));
        // tanh a - tanh b = sinh(a - b) / (cosh a cosh b)
        f.difference_ = [](std::span<const double> p, std::span<const double> q) -> Eigen::VectorXd {
            Eigen::VectorXd out(static_cast<Eigen::Index>(p.size()));
            for (std::size_t i = 0; i < p.size(); ++i) {
                out[static_cast<Eigen::Index>(i)] = std::sinh(p[i] - q[i]) / (std::cosh(p[i]) * std::cosh(q[i]));
            }
            return out;
        };
        return f;
    }

    static ForwardModel builtin(const std::string& name, std::size_t dim) {
        if (name == "square") return componentwise_square(dim);
        if (name == "tanh") return componentwise_tanh(dim);
        if (name == "identity") return identity(dim);
        throw std::invalid_argument("unknown builtin forward model '" + name + "'");
    }

    [[nodiscard]] std::size_t in_dim() const noexcept { return in_dim_; }
    [[nodiscard]] std::size_t out_dim() const noexcept { return out_dim_; }
    [[nodiscard]] bool has_adjoint() const noexcept { return static_cast<bool>(adjoint_); }
    [[nodiscard]] const std::optional<double>& lipschitz_hint() const noexcept { return lipschitz_; }
    [[nodiscard]] const ForwardDescriptor& descriptor() const noexcept { return descriptor_; }

    /// F(x); coefficients past in_dim are ignored and missing ones read as 0.
    [[nodiscard]] Eigen::VectorXd eval(const SeqPoint& x) const { return eval_(inputs(x)); }
    [[nodiscard]] Eigen::VectorXd eval(std::span<const double> x) const { return eval_(x); }

    /// F(x_new) - F(x_old); exact-difference formula when the model has one.
    [[nodiscard]] Eigen::VectorXd difference(const SeqPoint& x_new, const SeqPoint& x_old) const {
        if (!difference_) return eval(x_new) - eval(x_old);
        return difference_(inputs(x_new), inputs(x_old));
    }

    void set_difference(DifferenceFn fn) { difference_ = std::move(fn); }

    [[nodiscard]] Eigen::VectorXd adjoint(const SeqPoint& x, const Eigen::VectorXd& v) const {
        if (!adjoint_) throw std::logic_error("forward model has no gradient-adjoint action");
        return adjoint_(inputs(x), v);
    }

private:
    [[nodiscard]] std::vector<double> inputs(const SeqPoint& x) const {
        std::vector<double> in(in_dim_);
        for (std::size_t i = 0; i < in_dim_; ++i) in[i] = x[i];
        return in;
    }

    std::size_t in_dim_;
    std::size_t out_dim_;
    EvalFn eval_;
    AdjointFn adjoint_;
    DifferenceFn difference_;
    std::optional<double> lipschitz_;
    ForwardDescriptor descriptor_;
};

struct PosteriorSpec {
    WeightSequence gamma;
    ForwardModel forward;
    Eigen::VectorXd data;
    Eigen::MatrixXd noise_cov;
    double noise_scale = 1.0;
};

/// +infinity or a finite real; +infinity compares above every finite value.
class ExtendedReal {
public:
    static ExtendedReal finite(double v) { return ExtendedReal(v, false); }
    static ExtendedReal infinity() { return ExtendedReal(0.0, true); }

    [[nodiscard]] bool is_finite() const noexcept { return !infinite_; }
    [[nodiscard]] double value() const {
        if (infinite_) throw std::logic_error("extended real is +infinity");
        return value_;
    }
    [[nodiscard]] double as_double() const noexcept {
        return infinite_ ? std::numeric_limits<double>::infinity() : value_;
    }

    friend std::partial_ordering operator<=>(const ExtendedReal& a, const ExtendedReal& b) noexcept {
        if (a.infinite_ || b.infinite_) return a.infinite_ <=> b.infinite_;
        return a.value_ <=> b.value_;
    }
    friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) noexcept {
        return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
    }

private:
    ExtendedReal(double v, bool inf) : value_(v), infinite_(inf) {}
    double value_;
    bool infinite_;
};

/// A validated PosteriorSpec with the noise covariance factored once.
class Posterior {
public:
    explicit Posterior(PosteriorSpec spec) : spec_(std::move(spec)) {
        const auto k = static_cast<Eigen::Index>(spec_.forward.out_dim());
        if (spec_.data.size() != k) throw std::invalid_argument("data length does not match the forward output dimension");
        if (spec_.noise_cov.rows() != k || spec_.noise_cov.cols() != k) {
            throw std::invalid_argument("noise covariance must be K x K");
        }
        if (!spec_.data.allFinite() || !spec_.noise_cov.allFinite()) {
            throw std::invalid_argument("data and noise covariance must be finite");
        }
        if (!spec_.noise_cov.isApprox(spec_.noise_cov.transpose(), 1e-12)) {
            throw std::invalid_argument("noise covariance must be symmetric");
        }
        if (!(spec_.noise_scale > 0.0) || !std::isfinite(spec_.noise_scale)) {
            throw std::invalid_argument("noise scale must be positive");
        }
        llt_.compute(spec_.noise_cov);
        if (llt_.info() != Eigen::Success) throw std::invalid_argument("noise covariance is not positive definite");
    }

    [[nodiscard]] const PosteriorSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const WeightSequence& gamma() const noexcept { return spec_.gamma; }
    [[nodiscard]] const ForwardModel& forward() const noexcept { return spec_.forward; }

    /// Coefficients the posterior acts on: explicit weights plus model inputs.
    [[nodiscard]] std::size_t dim() const noexcept { return std::max(spec_.gamma.size(), spec_.forward.in_dim()); }

    /// Sigma^{-1/2} v via the lower Cholesky factor.
    [[nodiscard]] Eigen::VectorXd whiten(const Eigen::VectorXd& v) const { return llt_.matrixL().solve(v); }

    [[nodiscard]] double phi_from_output(const Eigen::VectorXd& fx) const {
        const double s = spec_.noise_scale;
        return whiten(fx - spec_.data).squaredNorm() / (2.0 * s * s);
    }

    [[nodiscard]] double phi(const SeqPoint& x) const { return phi_from_output(spec_.forward.eval(x)); }
    [[nodiscard]] double phi(std::span<const double> x) const { return phi_from_output(spec_.forward.eval(x)); }

    /// Phi and its gradient, the gradient padded to `n` coefficients.
    [[nodiscard]] std::pair<double, std::vector<double>> phi_and_gradient(const SeqPoint& x, std::size_t n) const {
        const Eigen::VectorXd fx = spec_.forward.eval(x);
        const Eigen::VectorXd r = whiten(fx - spec_.data);
        const double s2 = spec_.noise_scale * spec_.noise_scale;
        const Eigen::VectorXd v = llt_.matrixU().solve(r) / s2;  // Sigma^{-1}(F(x) - y) / s^2
        const Eigen::VectorXd g = spec_.forward.adjoint(x, v);
        std::vector<double> grad(std::max(n, static_cast<std::size_t>(g.size())), 0.0);
        for (Eigen::Index i = 0; i < g.size(); ++i) grad[static_cast<std::size_t>(i)] = g[i];
        return {r.squaredNorm() / (2.0 * s2), std::move(grad)};
    }

private:
    PosteriorSpec spec_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

[[nodiscard]] inline double likelihood_phi(const Posterior& post, const SeqPoint& x) {
    const double v = post.phi(x);
    if (!std::isfinite(v)) throw EvaluationFailure("forward model produced a non-finite misfit");
    return v;
}

/// I(x) = Phi(x) on E_gamma, +infinity elsewhere.
[[nodiscard]] inline ExtendedReal om_functional(const Posterior& post, const SeqPoint& x) {
    if (!in_E_gamma(x, post.gamma())) return ExtendedReal::infinity();
    return ExtendedReal::finite(likelihood_phi(post, x));
}

struct BallQuery {
    SeqPoint center;
    double radius = 0.0;
};

namespace detail {

/// Streaming weighted sums with weights exp(-(Phi - running minimum)).
struct WeightedSums {
    double phi_min = std::numeric_limits<double>::infinity();
    double sw = 0.0;
    double sw2 = 0.0;
    std::vector<double> a;  ///< sum of w over samples in ball j
    std::vector<double> b;  ///< sum of w^2 over samples in ball j

    explicit WeightedSums(std::size_t balls = 0) : a(balls, 0.0), b(balls, 0.0) {}

    void rebase(double new_min) {
        if (!(new_min < phi_min)) return;
        const double s = std::isinf(phi_min) ? 0.0 : std::exp(new_min - phi_min);
        sw *= s;
        sw2 *= s * s;
        for (auto& v : a) v *= s;
        for (auto& v : b) v *= s * s;
        phi_min = new_min;
    }

    void merge(const WeightedSums& o) {
        if (std::isinf(o.phi_min)) return;
        rebase(o.phi_min);
        const double s = std::exp(phi_min - o.phi_min);
        sw += s * o.sw;
        sw2 += s * s * o.sw2;
        for (std::size_t j = 0; j < a.size(); ++j) {
            a[j] += s * o.a[j];
            b[j] += s * s * o.b[j];
        }
    }
};

}  // namespace detail

/// Self-normalized importance sampling from the prior for several balls at once
/// over one shared sample set. Standard errors use the delta method on the ratio.
[[nodiscard]] inline std::vector<BallEstimate> posterior_ball_probs_mc(const Posterior& post,
                                                                       std::span<const BallQuery> queries,
                                                                       std::uint64_t n, const RngSpec& rng,
                                                                       McOptions opts = {}) {
    if (n == 0) throw std::invalid_argument("sample count must be positive");
    std::size_t trunc = std::max(post.dim(), opts.trunc);
    for (const auto& q : queries) {
        if (!(q.radius > 0.0) || std::isnan(q.radius)) throw std::invalid_argument("radius must be positive");
        if (std::isfinite(q.radius)) trunc = std::max(trunc, default_mc_truncation(post.gamma(), q.center, q.radius));
        trunc = std::max(trunc, q.center.size());
    }
    const std::size_t m = queries.size();
    std::vector<double> g(trunc);
    for (std::size_t i = 0; i < trunc; ++i) g[i] = post.gamma()[i];

    std::vector<detail::WeightedSums> parts(kMonteCarloChunks, detail::WeightedSums(m));
    parallel_chunks(kMonteCarloChunks, opts.threads, [&](std::size_t chunk) {
        Engine eng = make_engine(rng, chunk);
        const std::size_t count = chunk_size(n, kMonteCarloChunks, chunk);
        detail::WeightedSums acc(m);
        std::vector<double> x(trunc);
        std::vector<char> inside(m);
        for (std::size_t s = 0; s < count; ++s) {
            for (std::size_t i = 0; i < trunc; ++i) {
                const double xi = uniform_pm1(eng);
                x[i] = g[i] == 0.0 ? 0.0 : g[i] * xi;
            }
            const double phi = post.phi(std::span<const double>(x.data(), post.forward().in_dim()));
            if (!std::isfinite(phi)) throw EstimationFailure("non-finite likelihood at a prior sample");
            for (std::size_t j = 0; j < m; ++j) {
                bool in = true;
                for (std::size_t i = 0; i < trunc && in; ++i) in = std::abs(x[i] - queries[j].center[i]) < queries[j].radius;
                inside[j] = in;
            }
            acc.rebase(phi);
            const double w = std::exp(-(phi - acc.phi_min));
            acc.sw += w;
            acc.sw2 += w * w;
            for (std::size_t j = 0; j < m; ++j) {
                if (inside[j]) {
                    acc.a[j] += w;
                    acc.b[j] += w * w;
                }
            }
        }
        parts[chunk] = std::move(acc);
    });
    detail::WeightedSums total(m);
    for (const auto& p : parts) total.merge(p);
    if (!(total.sw > 0.0) || !std::isfinite(total.sw)) {
        throw EstimationFailure("all importance weights vanished; posterior ball estimate is degenerate");
    }

    std::vector<BallEstimate> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double p = total.a[j] / total.sw;
        const double var = (total.b[j] * (1.0 - 2.0 * p) + p * p * total.sw2) / (total.sw * total.sw);
        out[j] = BallEstimate{p, BallMethod::monte_carlo, std::sqrt(std::max(var, 0.0)), n};
    }
    return out;
}

[[nodiscard]] inline BallEstimate posterior_ball_prob_mc(const Posterior& post, const SeqPoint& center, double radius,
                                                         std::uint64_t n, const RngSpec& rng, McOptions opts = {}) {
    const BallQuery q{center, radius};
    return posterior_ball_probs_mc(post, std::span<const BallQuery>(&q, 1), n, rng, opts)[0];
}

struct OmRatioPoint {
    double delta = 0.0;
    double empirical_ratio = 0.0;
    double predicted_ratio = 0.0;
    double std_error = 0.0;
};

/// J(P^delta x1) / J(P^delta x2) along the schedule against exp(I(x2) - I(x1)).
///
/// Each posterior ball mass is factored as mu_gamma(B) * E[exp(-Phi) | B]. The
/// prior factor is exact; the conditional mean is estimated from uniform draws
/// inside B. Both centers and all radii reuse the same uniforms, so identical
/// centers give ratio 1 exactly and so does a constant likelihood.
[[nodiscard]] inline std::vector<OmRatioPoint> om_ratio_check(const Posterior& post, const SeqPoint& x1,
                                                              const SeqPoint& x2, std::span<const double> deltas,
                                                              std::uint64_t n, const RngSpec& rng,
                                                              McOptions opts = {}) {
    if (n == 0) throw std::invalid_argument("sample count must be positive");
    if (!in_E_gamma(x1, post.gamma()) || !in_E_gamma(x2, post.gamma())) {
        throw std::invalid_argument("both points must lie in E_gamma");
    }
    detail::require_decreasing_schedule(deltas);
    const double predicted = std::exp(likelihood_phi(post, x2) - likelihood_phi(post, x1));
    const std::size_t d = post.forward().in_dim();
    const std::size_t nd = deltas.size();

    // Per radius: conditional sampling boxes and the exact prior mass ratio.
    struct Box {
        std::vector<double> lo1, w1, lo2, w2;
        double prior_ratio = 1.0;
    };
    std::vector<Box> boxes(nd);
    for (std::size_t j = 0; j < nd; ++j) {
        const double delta = deltas[j];
        const SeqPoint c1 = project_delta(x1, post.gamma(), delta);
        const SeqPoint c2 = project_delta(x2, post.gamma(), delta);
        const double m1 = ball_prob_exact(post.gamma(), c1, delta).value;
        const double m2 = ball_prob_exact(post.gamma(), c2, delta).value;
        boxes[j].prior_ratio = m1 == m2 ? 1.0 : m1 / m2;
        auto fill = [&](const SeqPoint& c, std::vector<double>& lo, std::vector<double>& w) {
            lo.resize(d);
            w.resize(d);
            for (std::size_t i = 0; i < d; ++i) {
                const double g = post.gamma()[i];
                const double a = std::max(c[i] - delta, -g);
                const double b = std::min(c[i] + delta, g);
                lo[i] = a;
                w[i] = b - a;
            }
        };
        fill(c1, boxes[j].lo1, boxes[j].w1);
        fill(c2, boxes[j].lo2, boxes[j].w2);
    }

    // Sums per radius: e1, e2, e1^2, e2^2, e1 e2 with a shared running minimum.
    struct PairSums {
        double phi_min = std::numeric_limits<double>::infinity();
        double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
        void rebase(double m) {
            if (!(m < phi_min)) return;
            const double s = std::isinf(phi_min) ? 0.0 : std::exp(m - phi_min);
            s1 *= s;
            s2 *= s;
            s11 *= s * s;
            s22 *= s * s;
            s12 *= s * s;
            phi_min = m;
        }
        void merge(const PairSums& o) {
            if (std::isinf(o.phi_min)) return;
            rebase(o.phi_min);
            const double s = std::exp(phi_min - o.phi_min);
            s1 += s * o.s1;
            s2 += s * o.s2;
            s11 += s * s * o.s11;
            s22 += s * s * o.s22;
            s12 += s * s * o.s12;
        }
    };

    std::vector<std::vector<PairSums>> parts(kMonteCarloChunks, std::vector<PairSums>(nd));
    parallel_chunks(kMonteCarloChunks, opts.threads, [&](std::size_t chunk) {
        Engine eng = make_engine(rng, chunk);
        const std::size_t count = chunk_size(n, kMonteCarloChunks, chunk);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<double> u(d), y1(d), y2(d);
        auto& acc = parts[chunk];
        for (std::size_t s = 0; s < count; ++s) {
            for (auto& v : u) v = unit(eng);
            for (std::size_t j = 0; j < nd; ++j) {
                const Box& bx = boxes[j];
                for (std::size_t i = 0; i < d; ++i) {
                    y1[i] = bx.lo1[i] + u[i] * bx.w1[i];
                    y2[i] = bx.lo2[i] + u[i] * bx.w2[i];
                }
                const double p1 = post.phi(std::span<const double>(y1));
                const double p2 = post.phi(std::span<const double>(y2));
                if (!std::isfinite(p1) || !std::isfinite(p2)) {
                    throw EstimationFailure("non-finite likelihood inside a posterior ball");
                }
                auto& a = acc[j];
                a.rebase(std::min(p1, p2));
                const double e1 = std::exp(-(p1 - a.phi_min));
                const double e2 = std::exp(-(p2 - a.phi_min));
                a.s1 += e1;
                a.s2 += e2;
                a.s11 += e1 * e1;
                a.s22 += e2 * e2;
                a.s12 += e1 * e2;
            }
        }
    });

    std::vector<OmRatioPoint> out(nd);
    for (std::size_t j = 0; j < nd; ++j) {
        PairSums t;
        for (const auto& p : parts) t.merge(p[j]);
        if (!(t.s2 > 0.0) || !std::isfinite(t.s1)) throw EstimationFailure("conditional likelihood weights vanished");
        const double r = t.s1 == t.s2 ? 1.0 : t.s1 / t.s2;
        const double var = std::max(t.s11 - 2.0 * r * t.s12 + r * r * t.s22, 0.0) / (t.s2 * t.s2);
        const double rho = boxes[j].prior_ratio;
        out[j] = {deltas[j], rho * r, predicted, rho * std::sqrt(var)};
    }
    return out;
}

}  // namespace genmap
