#include "ttt/subspace.hpp"

#include <cmath>
#include <cstdio>

#include "ttt/errors.hpp"
#include "ttt/random.hpp"

namespace ttt::subspace {

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

void check_orthonormal(const Eigen::MatrixXd& V, double tol, const char* what) {
    const Eigen::MatrixXd gram = V.transpose() * V;
    const double dev = (gram - Eigen::MatrixXd::Identity(V.cols(), V.cols())).cwiseAbs().maxCoeff();
    if (!(dev <= tol)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s: columns are not orthonormal (max |V^T V - I| = %.3g)", what, dev);
        throw ContractError(buf);
    }
}

struct Energies {
    double in = 0.0;   // ||U U^T y||^2
    double out = 0.0;  // ||(I - U U^T) y||^2
};

Energies energies(const Eigen::MatrixXd& U, const Eigen::VectorXd& y) {
    const Eigen::VectorXd c = U.transpose() * y;
    Energies e;
    e.in = c.squaredNorm();
    e.out = std::max(0.0, y.squaredNorm() - e.in);
    return e;
}

double alpha_from_w(const Eigen::MatrixXd& W, const Model& model) {
    return (model.U.transpose() * W * model.U).trace() / model.d;
}

}  // namespace

Model make_model(int n, int d, double sigma2, double varsigma2, std::uint64_t seed) {
    if (d < 1 || d >= n) throw ContractError("subspace: need 1 <= d < n");
    if (sigma2 < 0.0 || varsigma2 < 0.0) throw ContractError("subspace: noise variances must be >= 0");
    Rng rng(derive_seed(seed, 0x0b));
    const Eigen::MatrixXd G = gaussian(n, d, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Model m;
    m.n = n;
    m.d = d;
    m.U = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);
    m.sigma2 = sigma2;
    m.varsigma2 = varsigma2;
    m.seed = seed;
    return m;
}

Samples sample(const Model& model, Dist dist, int count, std::uint64_t seed) {
    if (count < 1) throw ContractError("subspace: sample count must be >= 1");
    Rng rng(derive_seed(seed, dist == Dist::P ? 0x50 : 0x51));
    const double sd = std::sqrt(model.noise_var(dist));
    Samples s;
    s.X = model.U * gaussian(model.d, count, rng);
    s.Y = s.X;
    if (sd > 0.0) s.Y += sd * gaussian(model.n, count, rng);
    return s;
}

double risk(double alpha, const Eigen::MatrixXd& V, const Model& model, double noise_var) {
    if (V.rows() != model.n) throw ContractError("risk: V must have n rows");
    check_orthonormal(V, 1e-8, "risk");
    // tr(V V^T U U^T) = ||V^T U||_F^2 and tr(V V^T) = cols(V).
    const double overlap = (V.transpose() * model.U).squaredNorm();
    return model.d - (2.0 * alpha - alpha * alpha) * overlap + alpha * alpha * noise_var * static_cast<double>(V.cols());
}

SupervisedFit supervised_fit(const Model& model, int n_samples, std::uint64_t seed) {
    const auto s = sample(model, Dist::P, n_samples, seed);
    const Eigen::MatrixXd sxy = s.X * s.Y.transpose() / n_samples;
    const Eigen::MatrixXd syy = s.Y * s.Y.transpose() / n_samples;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(syy);
    if (lu.rank() < model.n) {
        throw RankError("supervised_fit: sample covariance has rank " + std::to_string(lu.rank()) + " < n = " +
                        std::to_string(model.n) + "; use more samples or positive noise");
    }
    SupervisedFit fit;
    // W Syy = Sxy with Syy symmetric.
    fit.W = syy.ldlt().solve(sxy.transpose()).transpose();
    fit.alpha_hat = alpha_from_w(fit.W, model);
    return fit;
}

SupervisedFit supervised_fit_population(const Model& model) {
    const Eigen::MatrixXd uut = model.U * model.U.transpose();
    const Eigen::MatrixXd syy = uut + model.sigma2 * Eigen::MatrixXd::Identity(model.n, model.n);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(syy);
    SupervisedFit fit;
    fit.W = uut * cod.pseudoInverse();
    fit.alpha_hat = alpha_from_w(fit.W, model);
    return fit;
}

double lss(double alpha, const Eigen::MatrixXd& U, const Eigen::VectorXd& y) {
    const auto n = static_cast<double>(U.rows()), d = static_cast<double>(U.cols());
    if (!(d < n)) throw ContractError("lss: need d < n");
    const Eigen::VectorXd proj = U * (U.transpose() * y);
    return (y - alpha * proj).squaredNorm() + 2.0 * alpha * d / (n - d) * (y - proj).squaredNorm();
}

double ttt_alpha(const Eigen::MatrixXd& U, const Eigen::VectorXd& y) {
    const auto n = static_cast<double>(U.rows()), d = static_cast<double>(U.cols());
    const auto e = energies(U, y);
    if (e.in == 0.0) throw DegenerateError("ttt_alpha: y has no energy in the subspace");
    return 1.0 - d / (n - d) * e.out / e.in;
}

double ttt_alpha_pooled(const Eigen::MatrixXd& U, const Eigen::MatrixXd& Y) {
    const auto n = static_cast<double>(U.rows()), d = static_cast<double>(U.cols());
    const double in = (U.transpose() * Y).squaredNorm();
    const double out = std::max(0.0, Y.squaredNorm() - in);
    if (in == 0.0) throw DegenerateError("ttt_alpha_pooled: samples have no energy in the subspace");
    return 1.0 - d / (n - d) * out / in;
}

double expected_instance_ttt_alpha(int d, double varsigma2) {
    if (d <= 2) throw ContractError("expected_instance_ttt_alpha: needs d > 2");
    return 1.0 - varsigma2 * d / ((1.0 + varsigma2) * (d - 2.0));
}

double expected_lss(double alpha, const Model& model) {
    const double v = model.varsigma2;
    return v * model.n + (1.0 - alpha) * (1.0 - alpha) * model.d + alpha * alpha * v * model.d;
}

TheoryReport run_theory(const TheoryOptions& opt) {
    TheoryReport rep;
    rep.options = opt;
    if (opt.n_seeds < 1) throw ContractError("theory: n_seeds must be >= 1");
    std::vector<double> alphas = opt.alphas;
    if (alphas.empty())
        for (int i = 0; i <= 24; ++i) alphas.push_back(0.05 * i);
    rep.curve.resize(alphas.size());

    const double n = opt.n, d = opt.d;
    const double c = 2.0 * d / (n - d);
    for (int k = 0; k < opt.n_seeds; ++k) {
        const std::uint64_t seed = derive_seed(opt.seed, static_cast<std::uint64_t>(k));
        const auto model = make_model(opt.n, opt.d, opt.sigma2, opt.varsigma2, seed);
        rep.alpha_supervised.push_back(supervised_fit(model, opt.fit_samples, derive_seed(seed, 1)).alpha_hat);

        const auto q = sample(model, Dist::Q, opt.ttt_draws, derive_seed(seed, 2));
        double acc = 0.0;
        for (int j = 0; j < opt.ttt_draws; ++j) acc += ttt_alpha(model.U, q.Y.col(j));
        rep.alpha_ttt_instance.push_back(acc / opt.ttt_draws);
        rep.alpha_ttt.push_back(ttt_alpha_pooled(model.U, q.Y));

        // lss(alpha) = (1 - alpha)^2 ||Py||^2 + ||(I-P)y||^2 (1 + c alpha), so the
        // sample means of the two energies give the whole Monte Carlo curve.
        double sum_in = 0.0, sum_out = 0.0;
        const int batch = 5000;
        for (int done = 0, b = 0; done < opt.mc_draws; done += batch, ++b) {
            const int m = std::min(batch, opt.mc_draws - done);
            const auto s = sample(model, Dist::Q, m, derive_seed(derive_seed(seed, 3), static_cast<std::uint64_t>(b)));
            const Eigen::MatrixXd proj = model.U.transpose() * s.Y;
            const double total = s.Y.squaredNorm(), in = proj.squaredNorm();
            sum_in += in;
            sum_out += total - in;
        }
        const double mean_in = sum_in / opt.mc_draws, mean_out = sum_out / opt.mc_draws;
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            const double a = alphas[i];
            auto& p = rep.curve[i];
            p.alpha = a;
            p.expected_lss = expected_lss(a, model);
            p.monte_carlo_lss += ((1.0 - a) * (1.0 - a) * mean_in + mean_out * (1.0 + c * a)) / opt.n_seeds;
            p.risk_p = risk(a, model.U, model, model.sigma2);
            p.risk_q = risk(a, model.U, model, model.varsigma2);
        }
    }
    for (double a : rep.alpha_supervised) rep.mean_alpha_supervised += a / opt.n_seeds;
    for (double a : rep.alpha_ttt) rep.mean_alpha_ttt += a / opt.n_seeds;
    for (double a : rep.alpha_ttt_instance) rep.mean_alpha_ttt_instance += a / opt.n_seeds;
    const auto ref = make_model(opt.n, opt.d, opt.sigma2, opt.varsigma2, opt.seed);
    rep.risk_q_supervised = risk(rep.mean_alpha_supervised, ref.U, ref, opt.varsigma2);
    rep.risk_q_ttt = risk(rep.mean_alpha_ttt, ref.U, ref, opt.varsigma2);
    return rep;
}

std::string TheoryReport::curve_csv() const {
    std::string out = "alpha,expected_lss,monte_carlo_lss,risk_P,risk_Q\n";
    char buf[200];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof buf, "%.4f,%.6f,%.6f,%.6f,%.6f\n", p.alpha, p.expected_lss, p.monte_carlo_lss,
                      p.risk_p, p.risk_q);
        out += buf;
    }
    return out;
}

std::string TheoryReport::summary() const {
    char buf[768];
    const double instance_expected =
        options.d > 2 ? expected_instance_ttt_alpha(options.d, options.varsigma2) : std::nan("");
    std::snprintf(buf, sizeof buf,
                  "n=%d d=%d sigma2=%g varsigma2=%g seeds=%d\n"
                  "supervised alpha (P)          %.4f   (1/(1+sigma2) = %.4f)\n"
                  "mean TTT alpha (Q)            %.4f   (1/(1+varsigma2) = %.4f)\n"
                  "per-draw TTT alpha, averaged  %.4f   (expected %.4f)\n"
                  "risk_Q supervised             %.4f\n"
                  "risk_Q TTT                    %.4f\n",
                  options.n, options.d, options.sigma2, options.varsigma2, options.n_seeds, mean_alpha_supervised,
                  1.0 / (1.0 + options.sigma2), mean_alpha_ttt, 1.0 / (1.0 + options.varsigma2),
                  mean_alpha_ttt_instance, instance_expected, risk_q_supervised, risk_q_ttt);
    return buf;
}

}  // namespace ttt::subspace
