// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "volblend/arch_family.hpp"
#include "volblend/augmentation.hpp"
#include "volblend/blending.hpp"
#include "volblend/evaluation.hpp"
#include "volblend/pipeline.hpp"
#include "volblend/svr.hpp"

using namespace volblend;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::vector<std::string> notes;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes.push_back("failed: " + what);
        }
    }
    void note(const std::string& s) { notes.push_back(s); }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<double> normals(std::size_t n, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, scale);
    std::vector<double> r(n);
    for (auto& v : r) v = z(rng);
    return r;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return a.size() == b.size() ? m : INFINITY;
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

double variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd X(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) X(r, c) = z(rng);
    return X;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Outcome garch_recovery() {
    Outcome o;
    const ModelSpec spec{Family::GARCH, 1, 1, DistKind::Normal};
    const ModelParams truth{5e-6, {0.10}, {0.85}, {}, InnovationDist::normal()};
    int within = 0;
    double slowest = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = simulate(spec, truth, 5000, seed).returns;
        const auto start = std::chrono::steady_clock::now();
        const auto fit = fit_mle(spec, r);
        const double secs = seconds_since(start);
        slowest = std::max(slowest, secs);
        const bool ok = std::abs(fit.params.alphas[0] - 0.10) <= 0.05 && std::abs(fit.params.betas[0] - 0.85) <= 0.05;
        within += ok;
        o.note("seed " + std::to_string(seed) + ": alpha " + fmt("%.4f", fit.params.alphas[0]) + " beta " +
               fmt("%.4f", fit.params.betas[0]) + " (" + fmt("%.2f", secs) + " s)");
        o.require(secs < 30.0, "seed " + std::to_string(seed) + " fit under 30 s");
    }
    o.require(within >= 4, std::to_string(within) + "/5 seeds within 0.05");
    o.note(std::to_string(within) + "/5 within tolerance, slowest fit " + fmt("%.2f", slowest) + " s");
    return o;
}

Outcome recursion_oracles() {
    Outcome o;
    const auto r = normals(10, 3, 0.8);
    const double h0 = 0.9;
    const auto normal = InnovationDist::normal();
    double worst = 0.0;
    worst = std::max(worst, max_abs_diff(variance_recursion({Family::ARCH, 3, 0, DistKind::Normal},
                                                            {0.2, {0.3, 0.2, 0.1}, {}, {}, normal}, r, h0),
                                         oracle::arch(0.2, {0.3, 0.2, 0.1}, r, h0)));
    worst = std::max(worst, max_abs_diff(variance_recursion({Family::GARCH, 2, 2, DistKind::Normal},
                                                            {0.1, {0.1, 0.05}, {0.5, 0.2}, {}, normal}, r, h0),
                                         oracle::garch(0.1, {0.1, 0.05}, {0.5, 0.2}, r, h0)));
    worst = std::max(worst, max_abs_diff(variance_recursion({Family::GJR, 1, 2, DistKind::Normal},
                                                            {0.1, {0.05, 0.04}, {0.7}, {0.2, 0.1}, normal}, r, h0),
                                         oracle::gjr(0.1, {0.05, 0.04}, {0.2, 0.1}, {0.7}, r, h0)));
    worst = std::max(worst, max_abs_diff(variance_recursion({Family::EGARCH, 1, 1, DistKind::Normal},
                                                            {-0.2, {0.25}, {0.9}, {-0.4}, normal}, r, h0),
                                         oracle::egarch(-0.2, {0.25}, {-0.4}, {0.9}, r, h0)));
    o.require(worst <= 1e-12, "recursions match literal evaluation within 1e-12");
    o.note("max oracle deviation " + fmt("%.2e", worst));

    const auto long_r = normals(200, 9, 0.01);
    const double arch_vs_garch =
        max_abs_diff(variance_recursion({Family::ARCH, 2, 0, DistKind::Normal}, {1e-5, {0.2, 0.1}, {}, {}, normal},
                                        long_r, 1e-4),
                     variance_recursion({Family::GARCH, 1, 2, DistKind::Normal},
                                        {1e-5, {0.2, 0.1}, {0.0}, {}, normal}, long_r, 1e-4));
    const double gjr_vs_garch =
        max_abs_diff(variance_recursion({Family::GJR, 2, 1, DistKind::Normal},
                                        {1e-5, {0.1}, {0.5, 0.3}, {0.0}, normal}, long_r, 1e-4),
                     variance_recursion({Family::GARCH, 2, 1, DistKind::Normal}, {1e-5, {0.1}, {0.5, 0.3}, {}, normal},
                                        long_r, 1e-4));
    o.require(arch_vs_garch <= 1e-12, "ARCH equals GARCH with beta = 0");
    o.require(gjr_vs_garch <= 1e-12, "GJR with gamma = 0 equals GARCH");
    o.note("identities " + fmt("%.2e", arch_vs_garch) + ", " + fmt("%.2e", gjr_vs_garch));
    return o;
}

Outcome ols_blending() {
    Outcome o;
    Eigen::MatrixXd X(100, 6);
    X << gaussian_matrix(100, 5, 1), Eigen::VectorXd::Ones(100);
    Eigen::VectorXd w_star(6);
    w_star << 0.3, -1.2, 2.0, 0.05, 0.7, 1e-3;
    const double recovery = (ols_fit(X, to_vec(X * w_star)).w - w_star).cwiseAbs().maxCoeff();
    o.require(recovery <= 1e-8, "exact interpolation within 1e-8");

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(1e-5, 5e-4);
    int beats_uniform = 0;
    double worst_ratio = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index n = 3 + rep % 8;
        Eigen::MatrixXd D(120, n + 1);
        for (Eigen::Index r = 0; r < 120; ++r)
            for (Eigen::Index c = 0; c < n; ++c) D(r, c) = u(rng);
        D.col(n).setOnes();
        std::vector<double> h(120);
        for (auto& v : h) v = u(rng);
        const auto fit = ols_fit(D, h);
        const Eigen::Map<const Eigen::VectorXd> y(h.data(), 120);
        const double grad = (D.transpose() * (D * fit.w - y)).cwiseAbs().maxCoeff();
        worst_ratio = std::max(worst_ratio, grad / (D.transpose() * y).cwiseAbs().maxCoeff());
        beats_uniform += mse(linear_blend(D, fit), h) <= mse(uniform_blend(D), h);
    }
    o.require(beats_uniform == 100, "MSE(OLS) <= MSE(uniform) on all 100 instances");
    o.require(worst_ratio < 1e-8, "normal-equation residual below 1e-8 relative");
    o.note("recovery error " + fmt("%.2e", recovery) + ", " + std::to_string(beats_uniform) +
           "/100 no worse than uniform, worst residual ratio " + fmt("%.2e", worst_ratio));
    return o;
}

Outcome mlp() {
    Outcome o;
    MlpConfig cfg;
    cfg.seed = 3;
    auto m = mlp_init(3, cfg);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z(0.0, 0.1);
    for (auto& l : m.layers)
        for (Eigen::Index j = 0; j < l.b.size(); ++j) l.b(j) = z(rng);
    const Eigen::MatrixXd A = gaussian_matrix(5, 3, 12);
    Eigen::VectorXd y(5);
    y << 0.3, -0.2, 1.1, 0.0, 0.7;
    const double alpha = 1e-2;
    const auto lg = mlp_loss_gradient(m, A, y, alpha);
    const Eigen::VectorXd theta = m.parameters();
    double worst = 0.0;
    MlpModel probe = m;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double step = 1e-6 * std::max(1.0, std::abs(theta(k)));
        Eigen::VectorXd t = theta;
        t(k) = theta(k) + step;
        probe.set_parameters(t);
        const long double up = oracle::mlp_loss(probe, A, y, alpha);
        t(k) = theta(k) - step;
        probe.set_parameters(t);
        const long double down = oracle::mlp_loss(probe, A, y, alpha);
        const double fd = static_cast<double>((up - down) / (2.0L * step));
        const double g = lg.gradient(k);
        worst = std::max(worst, std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6}));
    }
    o.require(worst < 1e-4, "finite-difference relative error below 1e-4");
    o.note(std::to_string(theta.size()) + " parameters, max relative error " + fmt("%.2e", worst));

    const Eigen::MatrixXd X = gaussian_matrix(2000, 4, 21);
    const auto h = to_vec(X * Eigen::Vector4d(0.8, -0.5, 0.3, 1.2));
    MlpConfig lin;
    lin.seed = 5;
    lin.max_epochs = 500;
    lin.patience = 500;
    const auto fit = mlp_fit(X, h, Eigen::MatrixXd(0, 4), {}, lin);
    const double rel = mse(fit.train_predictions, h) / variance(h);
    o.require(fit.epochs_run <= 500 && rel < 1e-4, "linear target MSE below 1e-4 var within 500 epochs");
    o.note("linear fixture MSE/var " + fmt("%.2e", rel) + " after " + std::to_string(fit.epochs_run) + " epochs");

    const Eigen::MatrixXd V = gaussian_matrix(60, 4, 22);
    const auto hv = to_vec(V * Eigen::Vector4d(0.8, -0.5, 0.3, 1.2));
    MlpConfig short_cfg;
    short_cfg.seed = 11;
    short_cfg.max_epochs = 40;
    const auto a = mlp_fit(X, h, V, hv, short_cfg);
    const auto b = mlp_fit(X, h, V, hv, short_cfg);
    o.require(a.parameters() == b.parameters() && a.train_predictions == b.train_predictions,
              "two seeded runs are bit-identical");
    return o;
}

struct Triple {
    std::vector<double> y, f, g;
};

Triple noisy(std::size_t T, double sf, double sg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Triple out;
    for (std::size_t i = 0; i < T; ++i) {
        const double y = std::sin(0.3 * static_cast<double>(i)) + n(rng);
        out.y.push_back(y);
        out.f.push_back(y + sf * n(rng));
        out.g.push_back(y + sg * n(rng));
    }
    return out;
}

Outcome diebold_mariano() {
    Outcome o;
    const auto t = noisy(27, 0.5, 0.9, 27);
    const double dev = std::abs(dm_test(t.y, t.f, t.g).stat - oracle::dm_statistic(t.y, t.f, t.g));
    o.require(dev <= 1e-12, "27-point statistic matches the oracle within 1e-12");

    bool antisymmetric = true;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = noisy(40 + seed, 1.0, 1.3, seed);
        const auto a = dm_test(s.y, s.f, s.g), b = dm_test(s.y, s.g, s.f);
        antisymmetric &= a.stat == -b.stat && a.p_value == b.p_value;
    }
    o.require(antisymmetric, "antisymmetry is bit-exact");

    int rejections = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = noisy(252, 1.0, 2.0, 500 + seed);
        rejections += std::abs(dm_test(s.y, s.f, s.g).stat) > 1.96;
    }
    o.require(rejections >= 95, "power: at least 95/100 rejections");
    o.note("oracle deviation " + fmt("%.2e", dev) + ", " + std::to_string(rejections) + "/100 rejections");
    return o;
}

Outcome efficiency_ratio() {
    Outcome o;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> win(1, 40);
    double largest = 0.0, oracle_dev = 0.0;
    for (int rep = 0; rep < 10000; ++rep) {
        const std::size_t M = win(rng);
        std::vector<double> h(M + 1);
        for (auto& v : h) v = z(rng);
        const double e = effective_ratio(h, M, M + 1);
        largest = std::max(largest, std::abs(e));
        oracle_dev = std::max(oracle_dev, std::abs(e - oracle::efficiency_ratio(h, M, M + 1)));
    }
    o.require(largest <= 1.0, "|e| <= 1 on 10^4 random windows");

    const std::vector<double> up{1, 2, 4, 7, 7.5, 9, 20};
    const std::vector<double> down{20, 9, 7.5, 7, 4, 2, 1};
    o.require(effective_ratio(up, 5, 6) == 1.0 && effective_ratio(up, 6, 7) == 1.0, "increasing window gives +1");
    o.require(effective_ratio(down, 5, 6) == -1.0 && effective_ratio(down, 6, 7) == -1.0,
              "decreasing window gives -1");

    std::uniform_real_distribution<double> u(0.0, 1e-3);
    std::vector<double> proxy(400), base(200);
    for (auto& v : proxy) v = u(rng);
    for (auto& v : base) v = u(rng);
    bool identity = true;
    for (auto mode : {ScaleMode::Raw, ScaleMode::ProxyStd})
        for (std::size_t M : {5u, 15u, 35u}) identity &= augment(base, 200, proxy, {M, 0.0, mode}, 0.3) == base;
    o.require(identity, "sigma = 0 augmentation is the identity");
    o.note("max |e| " + fmt("%.17g", largest) + ", oracle deviation " + fmt("%.1e", oracle_dev));
    return o;
}

Eigen::MatrixXd grid_1d(int n) {
    Eigen::MatrixXd X(n, 1);
    for (int i = 0; i < n; ++i) X(i, 0) = -1.0 + 2.0 * i / (n - 1);
    return X;
}

Outcome svr() {
    Outcome o;
    double worst_kkt = 0.0;
    int fits = 0;
    auto check = [&](const Eigen::MatrixXd& X, const std::vector<double>& z, const SvrModel& m) {
        worst_kkt = std::max(worst_kkt, oracle::svr_kkt_residual(X, z, m));
        ++fits;
    };

    const auto Xc = grid_1d(15);
    const std::vector<double> zc(15, 0.37);
    const auto mc = svr_fit(Xc, zc, {1.0, 1e-3, 1.0});
    check(Xc, zc, mc);
    bool constant = mc.support.rows() == 0 && std::abs(mc.intercept - 0.37) <= 1e-15;
    for (double p : mc.predict(grid_1d(7))) constant &= std::abs(p - 0.37) <= 1e-15;
    o.require(constant, "constant target gives the constant predictor");

    const auto Xl = grid_1d(20);
    std::vector<double> zl(20);
    for (int i = 0; i < 20; ++i) zl[static_cast<std::size_t>(i)] = Xl(i, 0);
    const SvrHyper hl{100.0, 1e-3, 10.0};
    const auto ml = svr_fit(Xl, zl, hl);
    check(Xl, zl, ml);
    const auto pl = ml.predict(Xl);
    double tube = 0.0;
    for (std::size_t i = 0; i < zl.size(); ++i) tube = std::max(tube, std::abs(pl[i] - zl[i]));
    o.require(tube <= hl.epsilon + 1e-3, "linear target within eps + 1e-3");

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (const SvrHyper& h : {SvrHyper{0.1, 1e-2, 0.5}, SvrHyper{1.0, 1e-3, 1.0}, SvrHyper{10.0, 1e-4, 10.0},
                              SvrHyper{100.0, 0.05, 0.1}}) {
        Eigen::MatrixXd X(60, 2);
        std::vector<double> z(60);
        for (Eigen::Index i = 0; i < 60; ++i) {
            X(i, 0) = n01(rng);
            X(i, 1) = n01(rng);
            z[static_cast<std::size_t>(i)] = std::sin(X(i, 0)) + 0.3 * X(i, 1) + 0.1 * n01(rng);
        }
        check(X, z, svr_fit(X, z, h));
    }
    o.require(worst_kkt < 1e-6, "KKT residual below 1e-6 on every converged fit");
    o.note(std::to_string(fits) + " fits, worst KKT residual " + fmt("%.2e", worst_kkt) + ", linear tube " +
           fmt("%.2e", tube));
    return o;
}

Outcome end_to_end() {
    Outcome o;
    auto parsed = parse_config_file(fs::path(VOLBLEND_SOURCE_DIR) / "configs" / "default.ini");
    parsed.config.output_dir = fs::path(VOLBLEND_SCRATCH_DIR) / "acceptance-default";
    fs::remove_all(parsed.config.output_dir);
    const auto start = std::chrono::steady_clock::now();
    const auto res = run_pipeline(parsed);
    const double secs = seconds_since(start);

    const ScoreRow* blended = res.report.find("aBARCH-NN(CO)");
    o.require(blended != nullptr, "aBARCH-NN(CO) is reported");
    const ScoreRow* best = nullptr;
    for (const auto& s : res.report.scores) {
        if (s.model.find('(') == std::string::npos) continue;
        try {
            ModelSpec::parse(s.model);
        } catch (const Error&) {
            continue;
        }
        if (!best || s.rmse < best->rmse) best = &s;
    }
    o.require(best != nullptr, "single ARCH-family models are reported");
    if (blended && best) {
        o.require(blended->rmse <= best->rmse, "aBARCH-NN(CO) RMSE <= best single model RMSE");
        o.note("aBARCH-NN(CO) " + fmt("%.4f", blended->rmse * 1e3) + "e-3 vs " + best->model + " " +
               fmt("%.4f", best->rmse * 1e3) + "e-3");
    }
    o.require(secs < 600.0, "pipeline under 10 minutes");
    o.note("pipeline " + fmt("%.1f", secs) + " s");
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"GARCH(1,1) parameter recovery", garch_recovery},
        {"variance recursion oracles and nesting identities", recursion_oracles},
        {"OLS blending", ols_blending},
        {"MLP gradient, fit and determinism", mlp},
        {"Diebold-Mariano statistic", diebold_mariano},
        {"efficiency ratio and augmentation identity", efficiency_ratio},
        {"SVR optimality and fixtures", svr},
        {"end-to-end on the two-regime fixture", end_to_end},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.ok = false;
            o.notes.push_back(std::string("exception: ") + e.what());
        }
        failures += !o.ok;
        std::string detail;
        for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
        std::printf("%s criterion %zu: %s (%s)\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    detail.c_str());
        std::fflush(stdout);
    }
    std::printf("SKIP criterion 9: needs user-supplied index closes\n");
    return failures == 0 ? 0 : 1;
}
