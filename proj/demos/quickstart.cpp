// Walks through the library on small problems: prior ball probabilities,
// the strong-mode curve of a boundary point, and a MAP solve.

#include "genmap/genmap.hpp"

#include <iostream>

int main() {
    using namespace genmap;

    const WeightSequence gamma({1.0, 0.5, 0.25});
    const SeqPoint inside{0.3, 0.1};
    const SeqPoint boundary{1.0, 0.0, 0.0};

    const double delta = 0.2;
    std::cout << "J(0)        = " << max_ball_prob(gamma, delta).value << '\n';
    std::cout << "J(inside)   = " << ball_prob_exact(gamma, inside, delta).value << '\n';
    std::cout << "J(boundary) = " << ball_prob_exact(gamma, boundary, delta).value << '\n';
    const auto mc = ball_prob_mc(gamma, boundary, delta, 200000, RngSpec{42, 0});
    std::cout << "MC boundary = " << mc.value << " +- " << mc.std_error << "\n\n";

    // Boundary points are generalized modes but not strong modes.
    std::cout << "generalized mode: " << std::boolalpha << classify_generalized_mode(boundary, gamma) << '\n';
    for (const auto& p : strong_mode_diagnostic(boundary, gamma, geometric_schedule(0.4, 0.5, 6))) {
        std::cout << "  delta " << p.delta << "  J(x)/J(0) " << p.ratio << '\n';
    }

    // MAP estimate for a linear problem whose unconstrained solution leaves the box.
    Eigen::MatrixXd a(2, 2);
    a << 1.0, 0.3, 0.0, 1.0;
    const Posterior post(PosteriorSpec{WeightSequence({1.0, 0.5}), ForwardModel::linear(a),
                                       Eigen::Vector2d(1.6, 0.2), Eigen::Matrix2d::Identity(), 0.1});
    const SolveReport rep = solve_map_pg(post, SeqPoint{});
    std::cout << "\nMAP estimate (" << rep.solution[0] << ", " << rep.solution[1] << ")  objective " << rep.objective
              << "  after " << rep.iterations << " steps, " << to_string(rep.termination) << '\n';
    return 0;
}
