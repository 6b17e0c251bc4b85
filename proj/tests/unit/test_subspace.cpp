#include <algorithm>

#include "support.hpp"
#include "ttt/subspace.hpp"

using namespace ttt::subspace;

namespace {

Eigen::VectorXd draw(const Model& m, Dist dist, std::uint64_t seed) { return sample(m, dist, 1, seed).Y.col(0); }

}  // namespace

TEST_CASE("model basis is orthonormal and seeded") {
    auto m = make_model(50, 5, 1.0, 0.5, 3);
    CHECK((m.U.transpose() * m.U - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-10);
    CHECK(m.U == make_model(50, 5, 1.0, 0.5, 3).U);
    CHECK(m.U != make_model(50, 5, 1.0, 0.5, 4).U);
    CHECK_THROWS_AS(make_model(5, 5, 1.0, 0.5, 0), ttt::ContractError);
}

TEST_CASE("sampling statistics") {
    auto m = make_model(30, 6, 0.0, 0.5, 1);
    auto p = sample(m, Dist::P, 20, 2);
    CHECK(p.X == p.Y);
    auto q = sample(m, Dist::Q, 100000, 3);
    CHECK(q.X.colwise().squaredNorm().mean() / 6.0 == doctest::Approx(1.0).epsilon(0.02));
    CHECK((q.Y - q.X).colwise().squaredNorm().mean() / 30.0 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("closed-form risk") {
    auto m = make_model(40, 10, 1.0, 0.5, 5);
    CHECK(risk(0.5, m.U, m, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(risk(0.0, m.U, m, 1.0) == doctest::Approx(10.0).epsilon(1e-12));
    // A basis orthogonal to U: the complement of U's span.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.U);
    Eigen::MatrixXd Q = qr.householderQ();
    Eigen::MatrixXd V = Q.rightCols(10);
    CHECK(risk(0.7, V, m, 0.5) == doctest::Approx(10.0 + 0.49 * 0.5 * 10.0).epsilon(1e-10));
    for (double a = 0.0; a <= 1.2; a += 0.05) CHECK(risk(0.5, m.U, m, 1.0) <= risk(a, m.U, m, 1.0) + 1e-12);
    Eigen::MatrixXd bad = 2.0 * m.U;
    CHECK_THROWS_AS(risk(0.5, bad, m, 1.0), ttt::ContractError);
}

TEST_CASE("risk matches Monte Carlo") {
    auto m = make_model(40, 10, 1.0, 0.5, 6);
    auto s = sample(m, Dist::P, 100000, 7);
    const Eigen::MatrixXd proj = m.U * m.U.transpose();
    const double mc = (s.X - 0.5 * proj * s.Y).colwise().squaredNorm().mean();
    CHECK(mc == doctest::Approx(risk(0.5, m.U, m, 1.0)).epsilon(0.01));
}

TEST_CASE("supervised fits recover the shrinkage factor") {
    auto noiseless = make_model(20, 4, 0.0, 0.5, 2);
    auto exact = supervised_fit_population(noiseless);
    CHECK(exact.alpha_hat == doctest::Approx(1.0).epsilon(1e-10));
    CHECK((exact.W - noiseless.U * noiseless.U.transpose()).norm() < 1e-8);

    auto m = make_model(50, 5, 0.5, 0.5, 9);
    auto fit = supervised_fit(m, 200000, 10);
    const Eigen::MatrixXd target = (1.0 / 1.5) * m.U * m.U.transpose();
    CHECK((fit.W - target).norm() / target.norm() < 0.05);
    CHECK(fit.alpha_hat == doctest::Approx(1.0 / 1.5).epsilon(0.02));

    CHECK_THROWS_AS(supervised_fit(m, 10, 1), ttt::RankError);
    CHECK_THROWS_AS(supervised_fit(noiseless, 1000, 1), ttt::RankError);
}

TEST_CASE("self-supervised loss") {
    auto m = make_model(100, 10, 1.0, 0.5, 11);
    Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(10, -1.0, 1.0);
    Eigen::VectorXd inside = m.U * c;
    CHECK(lss(1.0, m.U, inside) == doctest::Approx(0.0).scale(1.0));
    Eigen::VectorXd noise = draw(m, Dist::Q, 12);
    Eigen::VectorXd outside = noise - m.U * (m.U.transpose() * noise);
    CHECK(lss(0.3, m.U, outside) == doctest::Approx(outside.squaredNorm() * (1.0 + 2 * 0.3 * 10 / 90.0)));

    CHECK(expected_lss(0.4, m) == doctest::Approx(54.4).epsilon(1e-12));
    CHECK(expected_lss(1.0 / 1.5, m) == doctest::Approx(50.0 + 10.0 * 0.5 / 1.5).epsilon(1e-12));
    auto s = sample(m, Dist::Q, 100000, 13);
    for (double a : {0.0, 0.4, 1.0}) {
        double mc = 0.0;
        for (Eigen::Index k = 0; k < s.Y.cols(); ++k) mc += lss(a, m.U, s.Y.col(k));
        CHECK(mc / static_cast<double>(s.Y.cols()) == doctest::Approx(expected_lss(a, m)).epsilon(0.01));
    }
    auto clean = make_model(100, 10, 1.0, 0.0, 11);
    CHECK(expected_lss(1.0, clean) == 0.0);
}

TEST_CASE("per-instance minimizer matches a grid search") {
    auto m = make_model(60, 8, 1.0, 0.5, 14);
    CHECK(ttt_alpha(m.U, m.U * Eigen::VectorXd::Ones(8)) == doctest::Approx(1.0));
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto y = draw(m, Dist::Q, 100 + seed);
        double best = 0.0, best_val = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 2000; ++k) {
            const double a = k * 0.001;
            const double v = lss(a, m.U, y);
            if (v < best_val) {
                best_val = v;
                best = a;
            }
        }
        // The quadratic's vertex may fall outside the grid; then the grid picks the nearest end.
        CHECK(std::abs(std::clamp(ttt_alpha(m.U, y), 0.0, 2.0) - best) <= 0.0005 + 1e-12);
    }
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(60);
    CHECK_THROWS_AS(ttt_alpha(m.U, zero), ttt::DegenerateError);
}

TEST_CASE("test-time minimizers under Q") {
    auto m = make_model(200, 20, 1.0, 0.5, 15);
    auto s = sample(m, Dist::Q, 10000, 16);
    CHECK(ttt_alpha_pooled(m.U, s.Y) == doctest::Approx(2.0 / 3.0).epsilon(0.02));
    double mean = 0.0;
    for (Eigen::Index k = 0; k < s.Y.cols(); ++k) mean += ttt_alpha(m.U, s.Y.col(k));
    mean /= static_cast<double>(s.Y.cols());
    CHECK(mean == doctest::Approx(expected_instance_ttt_alpha(20, 0.5)).epsilon(0.01));
    CHECK(expected_instance_ttt_alpha(20, 0.5) == doctest::Approx(1.0 - 0.5 * 20 / (1.5 * 18)));
}

TEST_CASE("adapting to Q beats the supervised shrinkage under Q") {
    auto m = make_model(60, 6, 1.0, 0.25, 17);
    const double a_sup = supervised_fit_population(m).alpha_hat;
    auto s = sample(m, Dist::Q, 20000, 18);
    const double a_ttt = ttt_alpha_pooled(m.U, s.Y);
    CHECK(a_sup == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(a_ttt == doctest::Approx(0.8).epsilon(0.02));
    CHECK(risk(a_ttt, m.U, m, 0.25) < risk(a_sup, m.U, m, 0.25));
}

TEST_CASE("theory report is deterministic") {
    TheoryOptions opt;
    opt.n = 40;
    opt.d = 5;
    opt.n_seeds = 2;
    opt.fit_samples = 2000;
    opt.ttt_draws = 2000;
    opt.mc_draws = 2000;
    opt.alphas = {0.0, 0.5, 1.0};
    auto a = run_theory(opt);
    auto b = run_theory(opt);
    CHECK(a.curve_csv() == b.curve_csv());
    CHECK(a.summary() == b.summary());
    CHECK(a.curve.size() == 3);
    CHECK(a.alpha_supervised.size() == 2);
    CHECK(a.curve_csv().rfind("alpha,expected_lss,monte_carlo_lss,risk_P,risk_Q\n", 0) == 0);
    CHECK(a.risk_q_ttt < a.risk_q_supervised);
}
