#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "evaluation.hpp"
#include "parallel.hpp"

namespace volblend {

struct SvrHyper {
    double C = 1.0;
    double epsilon = 1e-4;
    double gamma = 1.0;  // RBF bandwidth: K(x, x') = exp(-gamma |x - x'|^2)

    void validate() const {
        if (!(C > 0.0) || !(epsilon > 0.0) || !(gamma > 0.0))
            throw ConfigError("SVR hyperparameters C, epsilon and gamma must be positive");
    }
};

enum class PairSelection {
    MaximalViolating,  // both indices by first-order violation
    SecondOrder,       // i by first-order violation, j by the largest guaranteed decrease
};

struct SvrOptions {
    double tolerance = 1e-6;  // maximal KKT violation gap
    long max_iterations = 100000;
    PairSelection selection = PairSelection::SecondOrder;
    bool shrinking = true;
};

struct SvrModel {
    SvrHyper hyper;
    Eigen::MatrixXd support;   // rows are support vectors
    Eigen::VectorXd coef;      // alpha - alpha* for each support vector
    double intercept = 0.0;
    Eigen::VectorXd alpha, alpha_star;  // full dual solution over the training rows
    long iterations = 0;
    double kkt_gap = 0.0;

    double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        double f = intercept;
        for (Eigen::Index i = 0; i < support.rows(); ++i)
            f += coef(i) * std::exp(-hyper.gamma * (support.row(i) - x).squaredNorm());
        return f;
    }

    std::vector<double> predict(const Eigen::MatrixXd& X) const {
        if (support.rows() > 0 && X.cols() != support.cols()) throw LengthError("SVR input width mismatch");
        std::vector<double> out(static_cast<std::size_t>(X.rows()));
        for (Eigen::Index r = 0; r < X.rows(); ++r) out[static_cast<std::size_t>(r)] = predict_one(X.row(r));
        return out;
    }
};

inline Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& X, double gamma) {
    const auto n = X.rows();
    const Eigen::VectorXd sq = X.rowwise().squaredNorm();
    Eigen::MatrixXd K = X * X.transpose();
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) K(i, j) = std::exp(-gamma * std::max(0.0, sq(i) + sq(j) - 2.0 * K(i, j)));
    K.diagonal().setOnes();
    return K;
}

/// Epsilon-SVR dual solved by two-variable analytic steps on the 2l-variable formulation:
/// entries [0, l) are alpha (label +1), [l, 2l) are alpha* (label -1). The first index of each
/// pair is the maximal violator. `K` is the precomputed training kernel.
inline SvrModel svr_fit_kernel(const Eigen::MatrixXd& X, const Eigen::MatrixXd& K, std::span<const double> z,
                               const SvrHyper& hyper, const SvrOptions& opt = {}) {
    hyper.validate();
    const Eigen::Index l = X.rows();
    if (l < 2) throw LengthError("SVR needs at least two samples");
    if (static_cast<std::size_t>(l) != z.size() || K.rows() != l || K.cols() != l)
        throw LengthError("SVR training size mismatch");
    const Eigen::Index n = 2 * l;
    const double C = hyper.C;
    constexpr double inf = std::numeric_limits<double>::infinity();
    constexpr double tau = 1e-12;

    // yg[t] = y_t * G_t, the label-signed gradient of the dual objective.
    std::vector<double> a(static_cast<std::size_t>(n), 0.0), yg(static_cast<std::size_t>(n)), step(static_cast<std::size_t>(l));
    for (Eigen::Index t = 0; t < l; ++t) {
        yg[static_cast<std::size_t>(t)] = hyper.epsilon - z[static_cast<std::size_t>(t)];
        yg[static_cast<std::size_t>(t + l)] = -(hyper.epsilon + z[static_cast<std::size_t>(t)]);
    }
    const double* ap = a.data();
    const double* ygp = yg.data();
    const auto L = static_cast<std::size_t>(l);
    const Eigen::VectorXd diag = K.diagonal();

    SvrModel m;
    m.hyper = hyper;
    // Membership of each variable in I_up / I_low, expressed on the signed gradient.
    auto up_value = [&](std::size_t t) { return (t < L ? ap[t] < C : ap[t] > 0.0) ? -ygp[t] : -inf; };
    auto low_value = [&](std::size_t t) { return (t < L ? ap[t] > 0.0 : ap[t] < C) ? ygp[t] : -inf; };

    // Shrinking: variables stuck at a bound far from violation leave the working scan; the
    // gradient is still maintained for all of them, so reactivation is exact.
    std::vector<std::size_t> active(2 * L);
    std::iota(active.begin(), active.end(), std::size_t{0});
    bool reactivated = false;
    const long shrink_every = std::min<long>(l, 1000);
    long countdown = shrink_every;
    auto reactivate = [&] {
        // Rebuild the gradient of every variable from the current duals.
        std::fill(step.begin(), step.end(), 0.0);
        for (std::size_t t = 0; t < 2 * L; ++t) {
            if (a[t] == 0.0) continue;
            const double c = (t < L ? 1.0 : -1.0) * a[t];
            const double* Kt = K.data() + static_cast<Eigen::Index>(t < L ? t : t - L) * l;
            for (std::size_t s = 0; s < L; ++s) step[s] += c * Kt[s];
        }
        for (std::size_t s = 0; s < L; ++s) {
            yg[s] = hyper.epsilon - z[s] + step[s];
            yg[s + L] = -(hyper.epsilon + z[s]) + step[s];
        }
        active.resize(2 * L);
        std::iota(active.begin(), active.end(), std::size_t{0});
        countdown = shrink_every;
    };

    long iter = 0;
    for (;; ++iter) {
        if (opt.shrinking && --countdown == 0) {
            countdown = shrink_every;
            double g1 = -inf, g2 = -inf;
            for (std::size_t t : active) g1 = std::max(g1, up_value(t)), g2 = std::max(g2, low_value(t));
            std::size_t kept = 0;
            for (std::size_t t : active) {
                const double u = up_value(t), v = low_value(t);
                const bool drop = (v == -inf && u < -g2) || (u == -inf && v < -g1);
                if (!drop) active[kept++] = t;
            }
            active.resize(kept);
        }

        // i maximizes -yG over I_up; gmax2 is the largest yG over I_low.
        std::size_t i = 0, j = 0;
        double gmax = -inf, gmax2 = -inf;
        for (std::size_t t : active) {
            const double u = up_value(t), v = low_value(t);
            if (u > gmax) gmax = u, i = t;
            if (v > gmax2) gmax2 = v, j = t;
        }
        m.kkt_gap = gmax + gmax2;
        const bool done = gmax == -inf || gmax2 == -inf || m.kkt_gap < opt.tolerance;
        if (active.size() < 2 * L && (done || (!reactivated && m.kkt_gap <= 10.0 * opt.tolerance))) {
            reactivated = true;
            reactivate();
            continue;
        }
        if (done) break;
        if (iter >= opt.max_iterations)
            throw NumericalError("SVR solver hit the iteration cap (" + std::to_string(opt.max_iterations) +
                                 ") with KKT gap " + std::to_string(m.kkt_gap));

        const std::size_t ki = i < L ? i : i - L;
        const double* Ki = K.data() + static_cast<Eigen::Index>(ki) * l;
        if (opt.selection == PairSelection::SecondOrder) {
            double best = inf;
            const double kii = diag[ki];
            for (std::size_t t : active) {
                const std::size_t kt = t < L ? t : t - L;
                const double grad_diff = gmax + ygp[t];
                const double quad = std::max(kii + diag[kt] - 2.0 * Ki[kt], tau);
                const double gain = low_value(t) != -inf && grad_diff > 0.0 ? -grad_diff * grad_diff / quad : inf;
                if (gain < best) best = gain, j = t;
            }
        }
        const std::size_t kj = j < L ? j : j - L;
        const double* Kj = K.data() + static_cast<Eigen::Index>(kj) * l;

        const double yi = i < L ? 1.0 : -1.0, yj = j < L ? 1.0 : -1.0;
        const double Gi = yi * yg[i], Gj = yj * yg[j];
        const double old_i = a[i], old_j = a[j];
        double quad = Ki[ki] + Kj[kj] - 2.0 * Ki[kj];
        if (quad <= 0.0) quad = tau;
        double& ai = a[i];
        double& aj = a[j];
        if (yi != yj) {
            const double delta = (-Gi - Gj) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) aj = 0.0, ai = diff;
            } else if (ai < 0.0) {
                ai = 0.0, aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > C) ai = C, aj = C - diff;
            } else if (aj > C) {
                aj = C, ai = C + diff;
            }
        } else {
            const double delta = (Gi - Gj) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) ai = C, aj = sum - C;
            } else if (aj < 0.0) {
                aj = 0.0, ai = sum;
            }
            if (sum > C) {
                if (aj > C) aj = C, ai = sum - C;
            } else if (ai < 0.0) {
                ai = 0.0, aj = sum;
            }
        }
        // y_s * dG_s = y_i da_i K(s, i) + y_j da_j K(s, j), identical for both halves.
        const double ci = yi * (ai - old_i), cj = yj * (aj - old_j);
        if (active.size() == 2 * L) {
            for (std::size_t s = 0; s < L; ++s) step[s] = ci * Ki[s] + cj * Kj[s];
            for (std::size_t s = 0; s < L; ++s) {
                yg[s] += step[s];
                yg[s + L] += step[s];
            }
        } else {
            for (std::size_t t : active) {
                const std::size_t kt = t < L ? t : t - L;
                yg[t] += ci * Ki[kt] + cj * Kj[kt];
            }
        }
    }
    m.iterations = iter;

    // Intercept: mean over free variables, else the midpoint of the feasible interval.
    double ub = inf, lb = -inf, free_sum = 0.0;
    long free_count = 0;
    for (std::size_t t = 0; t < 2 * L; ++t) {
        const bool positive = t < L;
        if (a[t] >= C) {
            if (!positive) ub = std::min(ub, yg[t]);
            else lb = std::max(lb, yg[t]);
        } else if (a[t] <= 0.0) {
            if (positive) ub = std::min(ub, yg[t]);
            else lb = std::max(lb, yg[t]);
        } else {
            free_sum += yg[t];
            ++free_count;
        }
    }
    const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);
    m.intercept = -rho;

    m.alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), l);
    m.alpha_star = Eigen::Map<const Eigen::VectorXd>(a.data() + l, l);
    const Eigen::VectorXd coef = m.alpha - m.alpha_star;
    std::vector<Eigen::Index> sv;
    for (Eigen::Index t = 0; t < l; ++t)
        if (coef(t) != 0.0) sv.push_back(t);
    m.support.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
    m.coef.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t k = 0; k < sv.size(); ++k) {
        m.support.row(static_cast<Eigen::Index>(k)) = X.row(sv[k]);
        m.coef(static_cast<Eigen::Index>(k)) = coef(sv[k]);
    }
    return m;
}

inline SvrModel svr_fit(const Eigen::MatrixXd& X, std::span<const double> z, const SvrHyper& hyper,
                        const SvrOptions& opt = {}) {
    hyper.validate();
    return svr_fit_kernel(X, rbf_kernel(X, hyper.gamma), z, hyper, opt);
}

struct SvrGrid {
    std::vector<double> C{0.1, 1.0, 10.0, 100.0};
    std::vector<double> epsilon{1e-5, 1e-4, 1e-3};
    std::vector<double> gamma{0.1, 1.0, 10.0};

    std::vector<SvrHyper> cells() const {
        std::vector<SvrHyper> out;
        for (double g : gamma)
            for (double c : C)
                for (double e : epsilon) out.push_back({c, e, g});
        return out;
    }
};

/// Column standardization fitted on training rows; zero spread falls back to 1.
struct Standardizer {
    Eigen::RowVectorXd mean, scale;

    static Standardizer fit(const Eigen::MatrixXd& X) {
        Standardizer s;
        s.mean = X.colwise().mean();
        const Eigen::RowVectorXd var = (X.rowwise() - s.mean).array().square().colwise().sum() / static_cast<double>(X.rows());
        s.scale = var.cwiseSqrt().unaryExpr([](double v) { return v > 0.0 ? v : 1.0; });
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
        return (X.rowwise() - mean).array().rowwise() / scale.array();
    }
};

struct SvrSelection {
    SvrModel model;
    Standardizer inputs;
    double validation_rmse = std::numeric_limits<double>::infinity();
    std::size_t failed_cells = 0;
};

/// Fits every grid cell on the training rows and keeps the lowest validation RMSE; ties keep the
/// earlier cell. Cells whose solver does not converge are skipped.
inline SvrSelection svr_grid_search(const Eigen::MatrixXd& X_train, std::span<const double> y_train,
                                    const Eigen::MatrixXd& X_val, std::span<const double> y_val, const SvrGrid& grid,
                                    const SvrOptions& opt = {}, std::size_t threads = 1) {
    const auto cells = grid.cells();
    if (cells.empty()) throw ConfigError("SVR hyperparameter grid is empty");
    SvrSelection out;
    out.inputs = Standardizer::fit(X_train);
    const Eigen::MatrixXd A = out.inputs.apply(X_train), V = out.inputs.apply(X_val);
    std::vector<std::optional<SvrModel>> fits(cells.size());
    std::vector<double> scores(cells.size(), std::numeric_limits<double>::infinity());
    // One kernel per bandwidth, shared by the cells that use it.
    for (double g : grid.gamma) {
        if (!(g > 0.0)) throw ConfigError("SVR gamma must be positive");
        const Eigen::MatrixXd K = rbf_kernel(A, g);
        parallel_for(cells.size(), threads, [&](std::size_t c) {
            if (cells[c].gamma != g) return;
            try {
                fits[c] = svr_fit_kernel(A, K, y_train, cells[c], opt);
                scores[c] = rmse(y_val, fits[c]->predict(V));
            } catch (const NumericalError&) {
                fits[c].reset();
            }
        });
    }
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (!fits[c]) {
            ++out.failed_cells;
            continue;
        }
        if (!best || scores[c] < scores[*best]) best = c;
    }
    if (!best) throw NumericalError("no SVR grid cell converged");
    out.model = std::move(*fits[*best]);
    out.validation_rmse = scores[*best];
    return out;
}

struct SvrGarchResult {
    std::vector<double> forecasts;  // h for t in [train_len, T)
    std::size_t first_index = 0;
    SvrSelection mean_stage, variance_stage;
};

/// SVR-GARCH: r_t = f(r_{t-1}) + a_t, then h~_t = g(h~_{t-1}, a_{t-1}^2) on the realized proxy.
/// Both stages are trained on rows before `train_len` and tuned on [train_len, train_len + val_len);
/// forecasts are fed the realized proxy at t - 1.
inline SvrGarchResult svr_garch_forecast(std::span<const double> r, std::size_t train_len, std::size_t val_len,
                                         const SvrGrid& grid, const SvrOptions& opt = {}, std::size_t threads = 1) {
    const std::size_t T = r.size();
    if (train_len < 20) throw LengthError("SVR-GARCH needs at least 20 training returns");
    if (val_len == 0 || train_len + val_len > T) throw LengthError("SVR-GARCH validation window outside the series");
    const auto proxy = realized_vol_proxy(r);

    auto lagged = [&](std::size_t from, std::size_t to) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(to - from), 1);
        for (std::size_t t = from; t < to; ++t) X(static_cast<Eigen::Index>(t - from), 0) = r[t - 1];
        return X;
    };
    const std::size_t val_end = train_len + val_len;
    SvrGarchResult out;
    out.first_index = train_len;
    out.mean_stage = svr_grid_search(lagged(1, train_len), r.subspan(1, train_len - 1), lagged(train_len, val_end),
                                     r.subspan(train_len, val_len), grid, opt, threads);

    const Eigen::MatrixXd all_lags = out.mean_stage.inputs.apply(lagged(1, T));
    const auto fitted_mean = out.mean_stage.model.predict(all_lags);
    std::vector<double> a_sq(T, 0.0);
    for (std::size_t t = 1; t < T; ++t) {
        const double a = r[t] - fitted_mean[t - 1];
        a_sq[t] = a * a;
    }

    auto stage2 = [&](std::size_t from, std::size_t to) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(to - from), 2);
        for (std::size_t t = from; t < to; ++t) {
            X(static_cast<Eigen::Index>(t - from), 0) = proxy[t - 1];
            X(static_cast<Eigen::Index>(t - from), 1) = a_sq[t - 1];
        }
        return X;
    };
    constexpr std::size_t first = kProxyWarmup + 1;
    out.variance_stage =
        svr_grid_search(stage2(first, train_len), std::span<const double>(proxy).subspan(first, train_len - first),
                        stage2(train_len, val_end), std::span<const double>(proxy).subspan(train_len, val_len), grid,
                        opt, threads);
    out.forecasts = out.variance_stage.model.predict(out.variance_stage.inputs.apply(stage2(train_len, T)));
    return out;
}

/// out[k] = proxy[k], the forecast for time k + 1.
inline std::vector<double> eavesdrop(std::span<const double> proxy) {
    if (proxy.size() < 2) throw LengthError("eavesdrop needs at least two values");
    return {proxy.begin(), proxy.end() - 1};
}

}  // namespace volblend
