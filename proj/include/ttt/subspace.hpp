#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Linear subspace denoising model: x = U c with c ~ N(0, I_d), observed as
// y = x + z. Under P the noise variance is sigma2, under Q it is varsigma2.
// Estimators have the form x_hat = alpha V V^T y.
namespace ttt::subspace {

enum class Dist { P, Q };

struct Model {
    int n = 0;
    int d = 0;
    Eigen::MatrixXd U;  // n x d, orthonormal columns
    double sigma2 = 1.0;
    double varsigma2 = 0.5;
    std::uint64_t seed = 0;

    double noise_var(Dist dist) const { return dist == Dist::P ? sigma2 : varsigma2; }
};

// U from a thin QR of an n x d Gaussian matrix drawn with `seed`.
Model make_model(int n, int d, double sigma2, double varsigma2, std::uint64_t seed);

struct Samples {
    Eigen::MatrixXd X;  // n x count, one draw per column
    Eigen::MatrixXd Y;
};

Samples sample(const Model& model, Dist dist, int count, std::uint64_t seed);

// E||x - alpha V V^T y||^2 in closed form.
double risk(double alpha, const Eigen::MatrixXd& V, const Model& model, double noise_var);

struct SupervisedFit {
    double alpha_hat = 0.0;
    Eigen::MatrixXd W;
};

// W = Sxy Syy^{-1} from n_samples draws of P, alpha_hat = tr(W U U^T) / d.
SupervisedFit supervised_fit(const Model& model, int n_samples, std::uint64_t seed);
// Same with the exact population covariances (pseudo-inverse when singular).
SupervisedFit supervised_fit_population(const Model& model);

// ||y - alpha U U^T y||^2 + 2 alpha d / (n - d) ||(I - U U^T) y||^2
double lss(double alpha, const Eigen::MatrixXd& U, const Eigen::VectorXd& y);

// Per-instance minimizer of lss over alpha.
double ttt_alpha(const Eigen::MatrixXd& U, const Eigen::VectorXd& y);

// Minimizer of the mean of lss over the columns of Y (one TTT step over a
// batch of draws). Converges to 1 / (1 + varsigma2) as the batch grows.
double ttt_alpha_pooled(const Eigen::MatrixXd& U, const Eigen::MatrixXd& Y);

// E[ttt_alpha(U, y)] for y ~ Q. The per-instance minimizer is a ratio of
// chi-square variables, so its mean is 1 - varsigma2 d / ((1 + varsigma2)(d - 2)),
// not 1 / (1 + varsigma2). Requires d > 2.
double expected_instance_ttt_alpha(int d, double varsigma2);

// E_Q[lss(alpha)] = varsigma2 n + (1 - alpha)^2 d + alpha^2 varsigma2 d
double expected_lss(double alpha, const Model& model);

struct TheoryOptions {
    int n = 200;
    int d = 20;
    double sigma2 = 1.0;
    double varsigma2 = 0.5;
    std::uint64_t seed = 0;
    int n_seeds = 5;
    int fit_samples = 20000;
    int ttt_draws = 10000;
    int mc_draws = 100000;
    std::vector<double> alphas;  // curve grid; empty means 0, 0.05, ..., 1.2
};

struct CurvePoint {
    double alpha = 0.0;
    double expected_lss = 0.0;
    double monte_carlo_lss = 0.0;
    double risk_p = 0.0;
    double risk_q = 0.0;
};

struct TheoryReport {
    TheoryOptions options;
    std::vector<double> alpha_supervised;  // per seed
    std::vector<double> alpha_ttt;           // per seed, pooled over ttt_draws Q samples
    std::vector<double> alpha_ttt_instance;  // per seed, mean of per-draw minimizers
    double mean_alpha_supervised = 0.0;
    double mean_alpha_ttt = 0.0;
    double mean_alpha_ttt_instance = 0.0;
    double risk_q_supervised = 0.0;  // risk under Q with V = U
    double risk_q_ttt = 0.0;
    std::vector<CurvePoint> curve;  // Monte Carlo averaged over seeds

    // alpha,expected_lss,monte_carlo_lss,risk_P,risk_Q
    std::string curve_csv() const;
    std::string summary() const;
};

TheoryReport run_theory(const TheoryOptions& options);

}  // namespace ttt::subspace
