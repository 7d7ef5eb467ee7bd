#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace volblend {

/// Mean of the prediction columns (the trailing bias column is excluded).
inline std::vector<double> uniform_blend(const Eigen::MatrixXd& X_with_bias) {
    const auto n = X_with_bias.cols() - 1;
    if (n < 1) throw LengthError("uniform blend needs at least one feature");
    std::vector<double> out(static_cast<std::size_t>(X_with_bias.rows()));
    for (Eigen::Index t = 0; t < X_with_bias.rows(); ++t)
        out[static_cast<std::size_t>(t)] = X_with_bias.row(t).head(n).sum() / static_cast<double>(n);
    return out;
}

/// Linear weights over N features plus a trailing intercept.
struct BlendWeights {
    Eigen::VectorXd w;
    Eigen::Index rank = 0;
    std::string warning;  // non-empty when the design was rank deficient
};

/// Least squares via a complete orthogonal decomposition; rank-deficient designs get the
/// minimum-norm solution.
inline BlendWeights ols_fit(const Eigen::MatrixXd& X, std::span<const double> h) {
    if (static_cast<std::size_t>(X.rows()) != h.size()) throw LengthError("ols_fit: row count does not match target");
    if (X.rows() <= X.cols()) throw LengthError("ols_fit needs more rows than columns");
    if (!X.allFinite()) throw NumericalError("ols_fit: non-finite design entry");
    const Eigen::Map<const Eigen::VectorXd> y(h.data(), static_cast<Eigen::Index>(h.size()));
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    BlendWeights out;
    out.w = cod.solve(y);
    out.rank = cod.rank();
    if (out.rank < X.cols())
        out.warning = "design matrix has rank " + std::to_string(out.rank) + " < " + std::to_string(X.cols()) +
                      "; minimum-norm weights returned";
    if (!out.w.allFinite()) throw NumericalError("ols_fit produced non-finite weights");
    return out;
}

inline std::vector<double> linear_blend(const Eigen::MatrixXd& X, const BlendWeights& w) {
    if (X.cols() != w.w.size()) throw LengthError("linear_blend: weight length does not match feature count");
    const Eigen::VectorXd y = X * w.w;
    return {y.data(), y.data() + y.size()};
}

inline void floor_at_zero(std::vector<double>& h) {
    for (double& v : h) v = std::max(v, 0.0);
}

struct MlpConfig {
    std::vector<int> hidden{100, 50, 50};
    double learning_rate = 1e-3;
    std::size_t batch_size = 200;  // 0 means full batch
    double alpha = 1e-4;           // L2 penalty on weights (not biases)
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int max_epochs = 500;
    int patience = 50;  // epochs without validation improvement before stopping
    std::uint64_t seed = 1;
    bool shuffle = true;
    bool standardize_inputs = true;
    /// Train on (h - mean) / std of the training target and map predictions back.
    bool standardize_target = false;
};

struct DenseLayer {
    Eigen::MatrixXd W;  // fan_in x fan_out
    Eigen::VectorXd b;  // fan_out
};

struct MlpModel {
    std::vector<DenseLayer> layers;  // last layer is the linear output
    Eigen::RowVectorXd input_mean, input_scale;
    double target_mean = 0.0, target_scale = 1.0;
    MlpConfig config;
    int epochs_run = 0;
    int best_epoch = 0;
    std::vector<double> train_loss;  // per epoch, penalized full-sample loss
    std::vector<double> val_mse;     // per epoch, original target units
    std::vector<double> train_predictions;

    Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().W.rows(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
        return n;
    }

    /// Flat view order: per layer, W column-major then b.
    Eigen::VectorXd parameters() const {
        Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
        Eigen::Index k = 0;
        for (const auto& l : layers) {
            p.segment(k, l.W.size()) = l.W.reshaped();
            k += l.W.size();
            p.segment(k, l.b.size()) = l.b;
            k += l.b.size();
        }
        return p;
    }

    void set_parameters(const Eigen::VectorXd& p) {
        if (static_cast<std::size_t>(p.size()) != parameter_count()) throw LengthError("parameter vector size mismatch");
        Eigen::Index k = 0;
        for (auto& l : layers) {
            l.W.reshaped() = p.segment(k, l.W.size());
            k += l.W.size();
            l.b = p.segment(k, l.b.size());
            k += l.b.size();
        }
    }
};

/// Glorot-uniform weights, zero biases.
inline MlpModel mlp_init(Eigen::Index input_dim, const MlpConfig& cfg) {
    if (input_dim < 1) throw LengthError("MLP needs at least one input");
    for (int h : cfg.hidden)
        if (h < 1) throw ConfigError("hidden layer sizes must be positive");
    MlpModel m;
    m.config = cfg;
    std::mt19937_64 rng(cfg.seed);
    std::vector<Eigen::Index> sizes{input_dim};
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
        std::uniform_real_distribution<double> u(-bound, bound);
        DenseLayer layer{Eigen::MatrixXd(sizes[l], sizes[l + 1]), Eigen::VectorXd::Zero(sizes[l + 1])};
        for (Eigen::Index j = 0; j < layer.W.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.W.rows(); ++i) layer.W(i, j) = u(rng);
        m.layers.push_back(std::move(layer));
    }
    m.input_mean = Eigen::RowVectorXd::Zero(input_dim);
    m.input_scale = Eigen::RowVectorXd::Ones(input_dim);
    return m;
}

namespace detail {

/// Forward pass on already-standardized inputs; keeps every activation for backprop.
inline std::vector<Eigen::MatrixXd> mlp_forward(const MlpModel& m, const Eigen::MatrixXd& A0) {
    std::vector<Eigen::MatrixXd> acts{A0};
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        Eigen::MatrixXd Z = acts.back() * m.layers[l].W;
        Z.rowwise() += m.layers[l].b.transpose();
        if (l + 1 < m.layers.size()) Z = Z.cwiseMax(0.0);
        acts.push_back(std::move(Z));
    }
    return acts;
}

inline Eigen::MatrixXd standardize(const MlpModel& m, const Eigen::MatrixXd& X) {
    return (X.rowwise() - m.input_mean).array().rowwise() / m.input_scale.array();
}

}  // namespace detail

struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;  // same order as MlpModel::parameters()
};

/// Batch objective 0.5 * mean((p - y)^2) + alpha / (2 B) * sum(W^2) and its gradient, on inputs
/// and targets already in the network's (standardized) units.
inline LossGradient mlp_loss_gradient(const MlpModel& m, const Eigen::MatrixXd& A0, const Eigen::VectorXd& y,
                                      double alpha) {
    const auto B = A0.rows();
    if (B == 0 || y.size() != B) throw LengthError("mlp_loss_gradient: batch size mismatch");
    const auto acts = detail::mlp_forward(m, A0);
    const Eigen::VectorXd err = acts.back().col(0) - y;
    const double Bd = static_cast<double>(B);
    double penalty = 0.0;
    for (const auto& l : m.layers) penalty += l.W.squaredNorm();
    LossGradient out;
    out.loss = 0.5 * err.squaredNorm() / Bd + 0.5 * alpha * penalty / Bd;

    std::vector<Eigen::MatrixXd> dW(m.layers.size());
    std::vector<Eigen::VectorXd> db(m.layers.size());
    Eigen::MatrixXd delta = err / Bd;  // B x 1
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        dW[l] = acts[l].transpose() * delta + (alpha / Bd) * m.layers[l].W;
        db[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd back = delta * m.layers[l].W.transpose();
            delta = (acts[l].array() > 0.0).select(back, 0.0);
        }
    }
    out.gradient.resize(static_cast<Eigen::Index>(m.parameter_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        out.gradient.segment(k, dW[l].size()) = dW[l].reshaped();
        k += dW[l].size();
        out.gradient.segment(k, db[l].size()) = db[l];
        k += db[l].size();
    }
    return out;
}

inline std::vector<double> mlp_predict(const MlpModel& m, const Eigen::MatrixXd& X) {
    if (X.cols() != m.input_dim()) throw LengthError("mlp_predict: expected " + std::to_string(m.input_dim()) +
                                                     " features, got " + std::to_string(X.cols()));
    const auto acts = detail::mlp_forward(m, detail::standardize(m, X));
    std::vector<double> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out[static_cast<std::size_t>(i)] = acts.back()(i, 0) * m.target_scale + m.target_mean;
    return out;
}

/// Mini-batch Adam with per-epoch shuffling. Keeps the weights from the epoch with the lowest
/// validation MSE (training loss when no validation rows are given) and stops after `patience`
/// epochs without improvement.
inline MlpModel mlp_fit(const Eigen::MatrixXd& X_train, std::span<const double> h_train, const Eigen::MatrixXd& X_val,
                        std::span<const double> h_val, const MlpConfig& cfg = {}) {
    const auto n = X_train.rows();
    if (n < 1 || static_cast<std::size_t>(n) != h_train.size()) throw LengthError("mlp_fit: training size mismatch");
    if (static_cast<std::size_t>(X_val.rows()) != h_val.size()) throw LengthError("mlp_fit: validation size mismatch");
    if (X_val.rows() > 0 && X_val.cols() != X_train.cols()) throw LengthError("mlp_fit: validation width mismatch");
    if (cfg.max_epochs < 0 || cfg.patience < 1 || !(cfg.learning_rate > 0.0) || cfg.alpha < 0.0)
        throw ConfigError("invalid MLP training configuration");

    MlpModel m = mlp_init(X_train.cols(), cfg);
    if (cfg.standardize_inputs) {
        m.input_mean = X_train.colwise().mean();
        const Eigen::RowVectorXd var =
            (X_train.rowwise() - m.input_mean).array().square().colwise().sum() / static_cast<double>(n);
        m.input_scale = var.cwiseSqrt().unaryExpr([](double s) { return s > 0.0 ? s : 1.0; });
    }
    const Eigen::Map<const Eigen::VectorXd> y_raw(h_train.data(), n);
    if (cfg.standardize_target) {
        m.target_mean = y_raw.mean();
        const double sd = std::sqrt((y_raw.array() - m.target_mean).square().mean());
        m.target_scale = sd > 0.0 ? sd : 1.0;
    }
    const Eigen::MatrixXd A = detail::standardize(m, X_train);
    const Eigen::VectorXd y = (y_raw.array() - m.target_mean) / m.target_scale;

    const std::size_t batch = cfg.batch_size == 0 ? static_cast<std::size_t>(n)
                                                  : std::min<std::size_t>(cfg.batch_size, static_cast<std::size_t>(n));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    Eigen::VectorXd theta = m.parameters();
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size()), m2 = m1;
    long step = 0;

    auto full_loss = [&] {
        const auto acts = detail::mlp_forward(m, A);
        double penalty = 0.0;
        for (const auto& l : m.layers) penalty += l.W.squaredNorm();
        const double nd = static_cast<double>(n);
        return 0.5 * (acts.back().col(0) - y).squaredNorm() / nd + 0.5 * cfg.alpha * penalty / nd;
    };
    auto val_score = [&] {
        if (X_val.rows() == 0) return full_loss();
        const auto p = mlp_predict(m, X_val);
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - h_val[i]) * (p[i] - h_val[i]);
        return s / static_cast<double>(p.size());
    };

    double best = val_score();
    Eigen::VectorXd best_theta = theta;
    int since_best = 0;
    Eigen::MatrixXd Ab;
    Eigen::VectorXd yb;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const auto bsz = static_cast<Eigen::Index>(end - start);
            Ab.resize(bsz, A.cols());
            yb.resize(bsz);
            for (Eigen::Index i = 0; i < bsz; ++i) {
                Ab.row(i) = A.row(order[start + static_cast<std::size_t>(i)]);
                yb(i) = y(order[start + static_cast<std::size_t>(i)]);
            }
            const auto lg = mlp_loss_gradient(m, Ab, yb, cfg.alpha);
            if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
                throw NumericalError("MLP training diverged at epoch " + std::to_string(epoch) + " (batch loss " +
                                     std::to_string(lg.loss) + ")");
            ++step;
            m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * lg.gradient;
            m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * lg.gradient.cwiseAbs2();
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            theta.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.adam_epsilon);
            m.set_parameters(theta);
        }
        m.epochs_run = epoch;
        m.train_loss.push_back(full_loss());
        const double score = val_score();
        if (X_val.rows() > 0) m.val_mse.push_back(score);
        if (!std::isfinite(score)) throw NumericalError("MLP validation loss is non-finite at epoch " + std::to_string(epoch));
        if (score < best) {
            best = score;
            best_theta = theta;
            m.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    m.set_parameters(best_theta);
    m.train_predictions = mlp_predict(m, X_train);
    return m;
}

}  // namespace volblend
