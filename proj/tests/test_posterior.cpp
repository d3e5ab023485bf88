#include "genmap/posterior.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace genmap;

namespace {

Posterior one_term(double y, double s = 1.0, double g = 1.0) {
    return Posterior(PosteriorSpec{WeightSequence({g}), ForwardModel::identity(1), Eigen::VectorXd::Constant(1, y),
                                   Eigen::MatrixXd::Identity(1, 1), s});
}

/// Phi identically zero: F maps everything to the datum.
Posterior flat_likelihood(const WeightSequence& g, std::size_t dim) {
    ForwardModel zero(
        dim, 1, [](std::span<const double>) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(1); },
        [dim](std::span<const double>, const Eigen::VectorXd&) -> Eigen::VectorXd {
            return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
        });
    return Posterior(PosteriorSpec{g, zero, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 1.0});
}

}  // namespace

TEST(PosteriorSpecValidation, RejectsBadInput) {
    const WeightSequence g({1.0});
    auto make = [&](Eigen::VectorXd y, Eigen::MatrixXd cov, double s) {
        return Posterior(PosteriorSpec{g, ForwardModel::identity(1), std::move(y), std::move(cov), s});
    };
    EXPECT_THROW(make(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(1, 1), 1.0), std::invalid_argument);
    EXPECT_THROW(make(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(2, 2), 1.0), std::invalid_argument);
    EXPECT_THROW(make(Eigen::VectorXd::Zero(1), -Eigen::MatrixXd::Identity(1, 1), 1.0), std::invalid_argument);
    EXPECT_THROW(make(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 0.0), std::invalid_argument);
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.0, 1.0;
    EXPECT_THROW(Posterior(PosteriorSpec{g, ForwardModel::identity(2), Eigen::VectorXd::Zero(2), asym, 1.0}),
                 std::invalid_argument);
    EXPECT_THROW(ForwardModel::builtin("cube", 2), std::invalid_argument);
}

TEST(LikelihoodPhi, Examples) {
    EXPECT_EQ(likelihood_phi(one_term(0.3), SeqPoint{0.3}), 0.0);
    EXPECT_EQ(likelihood_phi(one_term(0.0), SeqPoint{2.0}), 2.0);
    EXPECT_DOUBLE_EQ(likelihood_phi(one_term(0.0, 0.5), SeqPoint{2.0}), 8.0);
}

TEST(LikelihoodPhi, UsesFullCovariance) {
    Eigen::MatrixXd cov(2, 2);
    cov << 2.0, 0.6, 0.6, 1.0;
    Eigen::MatrixXd a(2, 3);
    a << 1.0, 0.5, -0.2, 0.0, 1.0, 0.3;
    const Eigen::Vector2d y(0.4, -0.1);
    const Posterior post(PosteriorSpec{WeightSequence({1.0, 1.0, 1.0}), ForwardModel::linear(a), y, cov, 0.7});
    const SeqPoint x{0.2, -0.4, 0.9};
    const Eigen::Vector3d xv(0.2, -0.4, 0.9);
    const Eigen::Vector2d r = a * xv - y;
    const double expect = 0.5 * r.dot(cov.inverse() * r) / (0.7 * 0.7);
    EXPECT_NEAR(likelihood_phi(post, x), expect, 1e-14 * expect);
}

TEST(OmFunctional, InfinityOutsideBox) {
    const auto post = one_term(0.0);
    EXPECT_FALSE(om_functional(post, SeqPoint{1.5}).is_finite());
    EXPECT_EQ(om_functional(post, SeqPoint{0.5}).value(), likelihood_phi(post, SeqPoint{0.5}));
    EXPECT_EQ(om_functional(post, SeqPoint{0.0}).value(), 0.0);
    EXPECT_GT(om_functional(post, SeqPoint{1.5}), ExtendedReal::finite(1e300));
    EXPECT_LT(ExtendedReal::finite(3.0), ExtendedReal::infinity());
    EXPECT_EQ(ExtendedReal::infinity(), ExtendedReal::infinity());
    EXPECT_THROW((void)ExtendedReal::infinity().value(), std::logic_error);
}

TEST(Gradient, MatchesCentralDifferences) {
    std::mt19937_64 eng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd cov(3, 3);
    cov << 1.0, 0.2, 0.0, 0.2, 1.5, 0.1, 0.0, 0.1, 0.8;
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(3, 3);
    for (const auto& fwd : {ForwardModel::linear(a), ForwardModel::componentwise_square(3), ForwardModel::componentwise_tanh(3)}) {
        const Posterior post(PosteriorSpec{WeightSequence({1.0, 1.0, 1.0}), fwd, Eigen::Vector3d(0.3, -0.2, 0.5), cov, 0.6});
        for (int trial = 0; trial < 20; ++trial) {
            const SeqPoint x{u(eng), u(eng), u(eng)};
            const std::vector<double> dir{u(eng), u(eng), u(eng)};
            const auto [phi, grad] = post.phi_and_gradient(x, 3);
            const double h = 1e-5 * (1.0 + sup_norm(x));
            std::vector<double> xp(3), xm(3);
            for (int i = 0; i < 3; ++i) {
                xp[i] = x[i] + h * dir[i];
                xm[i] = x[i] - h * dir[i];
            }
            const double fd = (post.phi(SeqPoint(xp)) - post.phi(SeqPoint(xm))) / (2.0 * h);
            double an = 0.0;
            for (int i = 0; i < 3; ++i) an += grad[i] * dir[i];
            EXPECT_NEAR(fd, an, 1e-5 * std::max(1.0, std::abs(an))) << fwd.descriptor().name;
            EXPECT_EQ(phi, post.phi(x));
        }
    }
}

TEST(ForwardDifference, MatchesDirectDifference) {
    for (const auto& fwd : {ForwardModel::componentwise_square(2), ForwardModel::componentwise_tanh(2),
                            ForwardModel::identity(2)}) {
        const SeqPoint a{0.3, -1.2}, b{0.31, -1.1};
        const Eigen::VectorXd d = fwd.difference(a, b);
        const Eigen::VectorXd e = fwd.eval(a) - fwd.eval(b);
        EXPECT_LE((d - e).norm(), 1e-14);
    }
}

TEST(BoundedOnEGamma, NoNonFiniteMisfitOnSamples) {
    const WeightSequence g({1.0, 0.8, 0.6});
    Engine eng = make_engine(RngSpec{3, 0});
    for (const auto& fwd : {ForwardModel::identity(3), ForwardModel::componentwise_square(3), ForwardModel::componentwise_tanh(3)}) {
        const Posterior post(PosteriorSpec{g, fwd, Eigen::Vector3d(2.0, -1.0, 0.5), Eigen::Matrix3d::Identity(), 0.1});
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double v = likelihood_phi(post, sample_prior(g, 3, eng));
            ASSERT_TRUE(std::isfinite(v));
            worst = std::max(worst, v);
        }
        EXPECT_LT(worst, 1e4);
    }
}

TEST(PosteriorBallMc, FlatLikelihoodMatchesPriorEstimate) {
    const WeightSequence g({1.0, 0.5});
    const auto post = flat_likelihood(g, 2);
    const SeqPoint c{0.3, 0.1};
    const auto pe = posterior_ball_prob_mc(post, c, 0.4, 400000, RngSpec{1, 0});
    const auto pr = ball_prob_mc(g, c, 0.4, 400000, RngSpec{2, 0});
    EXPECT_LE(std::abs(pe.value - pr.value), 3.0 * std::hypot(pe.std_error, pr.std_error));
    EXPECT_LE(std::abs(pe.value - ball_prob_exact(g, c, 0.4).value), 3.0 * pe.std_error);
}

TEST(PosteriorBallMc, HugeRadiusGivesOne) {
    const auto post = one_term(0.2);
    const auto e = posterior_ball_prob_mc(post, SeqPoint{0.0}, 1e6, 1000, RngSpec{});
    EXPECT_DOUBLE_EQ(e.value, 1.0);
    EXPECT_THROW((void)posterior_ball_prob_mc(post, SeqPoint{0.0}, -1.0, 10, RngSpec{}), std::invalid_argument);
}

TEST(PosteriorBallMc, MatchesQuadratureOracle) {
    const auto post = one_term(0.5);
    for (double c : {0.0, 0.5, 0.9}) {
        for (double d : {0.05, 0.2}) {
            const double truth = oracle::posterior_ball_1d(1.0, 0.5, 1.0, c, d);
            const auto e = posterior_ball_prob_mc(post, SeqPoint{c}, d, 1000000, RngSpec{11, 0});
            EXPECT_LE(std::abs(e.value - truth), 3.0 * e.std_error) << c << ' ' << d;
        }
    }
}

TEST(PosteriorBallMc, SmallNoiseDoesNotUnderflow) {
    // Phi reaches ~1e5 at the far corner; weights are rebased on the running minimum.
    const auto post = one_term(0.9, 0.003);
    const auto e = posterior_ball_prob_mc(post, SeqPoint{0.9}, 0.02, 200000, RngSpec{4, 0});
    EXPECT_GT(e.value, 0.99);
    EXPECT_TRUE(std::isfinite(e.std_error));
}

TEST(PosteriorBallMc, ErrorShrinksWithSampleSize) {
    const auto post = one_term(0.5);
    double ratio_sum = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = posterior_ball_prob_mc(post, SeqPoint{0.2}, 0.1, 20000, RngSpec{100, static_cast<std::uint64_t>(rep)});
        const auto b = posterior_ball_prob_mc(post, SeqPoint{0.2}, 0.1, 40000, RngSpec{200, static_cast<std::uint64_t>(rep)});
        ratio_sum += b.std_error / a.std_error;
    }
    EXPECT_NEAR(ratio_sum / 20.0, 1.0 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
}

TEST(PosteriorBallMc, ProjectionImprovesMass) {
    const WeightSequence g({1.0, 0.5});
    Eigen::MatrixXd a(1, 2);
    a << 1.0, 1.0;
    const Posterior post(PosteriorSpec{g, ForwardModel::linear(a), Eigen::VectorXd::Constant(1, 0.8),
                                       Eigen::MatrixXd::Identity(1, 1), 0.5});
    Engine eng = make_engine(RngSpec{9, 0});
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 5; ++trial) {
        const SeqPoint x{u(eng), u(eng)};
        for (double d : {0.3, 0.15}) {
            const std::vector<BallQuery> q{{project_delta(x, g, d), d}, {x, d}};
            const auto est = posterior_ball_probs_mc(post, q, 200000, RngSpec{21, static_cast<std::uint64_t>(trial)});
            EXPECT_GE(est[0].value, est[1].value - 3.0 * std::hypot(est[0].std_error, est[1].std_error));
        }
    }
}

TEST(PosteriorBallMc, ThreadCountInvariant) {
    const auto post = one_term(0.5);
    const auto a = posterior_ball_prob_mc(post, SeqPoint{0.3}, 0.1, 50001, RngSpec{6, 1}, McOptions{0, 1});
    const auto b = posterior_ball_prob_mc(post, SeqPoint{0.3}, 0.1, 50001, RngSpec{6, 1}, McOptions{0, 3});
    EXPECT_EQ(a, b);
}

TEST(OmRatioCheck, IdenticalPointsGiveOne) {
    const auto post = one_term(0.3);
    const std::vector<double> deltas{0.1, 0.05, 0.01};
    for (const auto& p : om_ratio_check(post, SeqPoint{0.4}, SeqPoint{0.4}, deltas, 2000, RngSpec{})) {
        EXPECT_EQ(p.empirical_ratio, 1.0);
        EXPECT_EQ(p.predicted_ratio, 1.0);
        EXPECT_EQ(p.std_error, 0.0);
    }
}

TEST(OmRatioCheck, FlatLikelihoodGivesOneExactly) {
    const WeightSequence g({1.0, 0.5, 0.25});
    const auto post = flat_likelihood(g, 3);
    const std::vector<double> deltas{0.2, 0.1, 0.05, 0.01};
    for (const auto& p : om_ratio_check(post, SeqPoint{1.0, -0.2, 0.0}, SeqPoint{0.0, 0.5, 0.25}, deltas, 1000, RngSpec{})) {
        EXPECT_EQ(p.empirical_ratio, 1.0) << p.delta;
        EXPECT_EQ(p.predicted_ratio, 1.0);
    }
}

TEST(OmRatioCheck, OneTermFixtureMatchesPrediction) {
    const auto post = one_term(0.0);
    const std::vector<double> deltas{0.05, 0.02, 0.01};
    const auto pts = om_ratio_check(post, SeqPoint{0.0}, SeqPoint{0.8}, deltas, 200000, RngSpec{5, 0});
    for (const auto& p : pts) {
        EXPECT_DOUBLE_EQ(p.predicted_ratio, std::exp(0.32));
        // Quadrature oracle for the exact ratio at this radius.
        const double exact = oracle::posterior_ball_1d(1.0, 0.0, 1.0, 0.0, p.delta) /
                             oracle::posterior_ball_1d(1.0, 0.0, 1.0, 0.8, p.delta);
        EXPECT_LE(std::abs(p.empirical_ratio - exact), 3.0 * p.std_error) << p.delta;
        EXPECT_LE(std::abs(p.empirical_ratio - p.predicted_ratio), 3.0 * p.std_error + std::abs(exact - p.predicted_ratio));
    }
}

TEST(OmRatioCheck, RejectsPointsOutsideBox) {
    const auto post = one_term(0.0);
    const std::vector<double> deltas{0.1};
    EXPECT_THROW((void)om_ratio_check(post, SeqPoint{1.2}, SeqPoint{0.0}, deltas, 10, RngSpec{}), std::invalid_argument);
}
