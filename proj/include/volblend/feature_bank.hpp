#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "arch_family.hpp"
#include "error.hpp"
#include "market_data.hpp"
#include "parallel.hpp"

namespace volblend {

/// The 90-model default bank: ARCH p = 1..10 (40), GARCH/EGARCH/GJR with
/// (p,q) in {(1,1),(2,1),(1,2),(2,2)} (48), plus GARCH-N(3,3) and GJR-N(3,3).
/// Each group is enumerated over the four innovations N, t, st, G.
inline std::vector<ModelSpec> default_bank() {
    constexpr DistKind kDists[] = {DistKind::Normal, DistKind::StudentT, DistKind::SkewStudentT, DistKind::GED};
    std::vector<ModelSpec> bank;
    for (int p = 1; p <= 10; ++p)
        for (auto d : kDists) bank.push_back({Family::ARCH, p, 0, d});
    for (Family f : {Family::GARCH, Family::EGARCH, Family::GJR})
        for (auto [p, q] : {std::pair{1, 1}, {2, 1}, {1, 2}, {2, 2}})
            for (auto d : kDists) bank.push_back({f, p, q, d});
    bank.push_back({Family::GARCH, 3, 3, DistKind::Normal});
    bank.push_back({Family::GJR, 3, 3, DistKind::Normal});
    return bank;
}

/// T x (N + 1): column j < N holds model j's one-step variance, the last column is the bias 1.
struct FeatureMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> labels;  // N model names
    std::vector<Date> dates;          // T

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t features() const { return labels.size(); }

    /// Rows [begin, end) of the prediction columns (bias excluded).
    Eigen::MatrixXd predictions(std::size_t begin, std::size_t end) const {
        return values.block(static_cast<Eigen::Index>(begin), 0, static_cast<Eigen::Index>(end - begin),
                            static_cast<Eigen::Index>(features()));
    }

    /// A new matrix holding the chosen prediction columns plus the bias column.
    FeatureMatrix select(const std::vector<std::size_t>& columns) const {
        FeatureMatrix out;
        out.dates = dates;
        out.values.resize(values.rows(), static_cast<Eigen::Index>(columns.size() + 1));
        for (std::size_t k = 0; k < columns.size(); ++k) {
            if (columns[k] >= features()) throw LengthError("feature index out of range");
            out.values.col(static_cast<Eigen::Index>(k)) = values.col(static_cast<Eigen::Index>(columns[k]));
            out.labels.push_back(labels[columns[k]]);
        }
        out.values.col(static_cast<Eigen::Index>(columns.size())).setOnes();
        return out;
    }
};

/// N x N cosine matrix of the prediction columns (bias excluded).
struct CorrelationMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> labels;
};

/// Builds the matrix from models fitted on the first `train_len` returns: training rows use the
/// in-sample recursion, later rows the frozen-parameter one-step forecasts.
inline FeatureMatrix assemble_feature_matrix(const std::vector<FittedModel>& models, const ReturnSeries& returns,
                                             std::size_t train_len) {
    if (train_len > returns.size()) throw LengthError("training length exceeds the series");
    const auto T = static_cast<Eigen::Index>(returns.size());
    FeatureMatrix X;
    X.dates = returns.dates;
    X.values.resize(T, static_cast<Eigen::Index>(models.size() + 1));
    for (std::size_t j = 0; j < models.size(); ++j) {
        const auto& m = models[j];
        if (m.in_sample_h.size() != train_len) throw LengthError(m.spec.name() + " was not fitted on the training split");
        auto oos = forecast_path(m, returns.returns, train_len);
        auto col = X.values.col(static_cast<Eigen::Index>(j));
        for (std::size_t t = 0; t < train_len; ++t) col(static_cast<Eigen::Index>(t)) = m.in_sample_h[t];
        for (std::size_t k = 0; k < oos.size(); ++k) col(static_cast<Eigen::Index>(train_len + k)) = oos[k];
        if (!col.allFinite() || (col.array() <= 0.0).any())
            throw NumericalError(m.spec.name() + " produced a non-positive or non-finite variance");
        X.labels.push_back(m.spec.name());
    }
    X.values.col(static_cast<Eigen::Index>(models.size())).setOnes();
    return X;
}

struct FeatureBank {
    FeatureMatrix matrix;
    std::vector<FittedModel> models;
    std::vector<std::string> warnings;
};

/// Fits every spec on the training split (concurrently when threads != 1) and assembles the
/// feature matrix over the whole series. Specs whose fit fails are dropped with a warning.
inline FeatureBank build_feature_bank(const ReturnSeries& returns, const SplitSpec& split_spec,
                                      const std::vector<ModelSpec>& specs, const FitOptions& opt = {},
                                      std::size_t threads = 1) {
    if (split_spec.total() != returns.size()) throw LengthError("split does not cover the return series");
    if (specs.empty()) throw ConfigError("feature bank is empty");
    std::span<const double> train(returns.returns.data(), split_spec.train_len);
    std::vector<std::optional<FittedModel>> slots(specs.size());
    std::vector<std::string> errors(specs.size());
    parallel_for(specs.size(), threads, [&](std::size_t i) {
        try {
            slots[i] = fit_mle(specs[i], train, opt);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    FeatureBank bank;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (slots[i]) {
            bank.models.push_back(std::move(*slots[i]));
        } else {
            bank.warnings.push_back("dropped " + specs[i].name() + ": " + errors[i]);
        }
    }
    if (bank.models.empty()) throw NumericalError("every feature-bank fit failed");
    bank.matrix = assemble_feature_matrix(bank.models, returns, split_spec.train_len);
    return bank;
}

inline double cosine(std::span<const double> x1, std::span<const double> x2) {
    if (x1.size() != x2.size()) throw LengthError("cosine: length mismatch");
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < x1.size(); ++i) {
        dot += x1[i] * x2[i];
        n1 += x1[i] * x1[i];
        n2 += x2[i] * x2[i];
    }
    if (n1 == 0.0 || n2 == 0.0) throw DomainError("cosine of a zero-norm vector");
    return dot / (std::sqrt(n1) * std::sqrt(n2));
}

/// Cosine similarity between prediction columns over rows [row_begin, row_end), normally the
/// training rows. The result is exactly symmetric with a unit diagonal.
inline CorrelationMatrix correlation_matrix(const FeatureMatrix& X, std::size_t row_begin, std::size_t row_end) {
    const std::size_t N = X.features();
    if (N < 2) throw LengthError("correlation matrix needs at least two features");
    if (row_begin >= row_end || row_end > X.rows()) throw LengthError("invalid row range for correlation");
    const Eigen::MatrixXd block = X.predictions(row_begin, row_end);
    std::vector<std::vector<double>> cols(N);
    for (std::size_t j = 0; j < N; ++j) {
        auto c = block.col(static_cast<Eigen::Index>(j));
        cols[j].assign(c.data(), c.data() + c.size());
    }
    CorrelationMatrix C;
    C.labels = X.labels;
    C.values.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    for (std::size_t i = 0; i < N; ++i) {
        (void)cosine(cols[i], cols[i]);  // zero-norm check
        C.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
        for (std::size_t j = i + 1; j < N; ++j) {
            const double c = std::clamp(cosine(cols[i], cols[j]), -1.0, 1.0);
            C.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
            C.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
        }
    }
    return C;
}

/// Mean of each row's off-diagonal entries.
inline std::vector<double> mean_off_diagonal(const CorrelationMatrix& C) {
    const auto N = C.values.rows();
    std::vector<double> means(static_cast<std::size_t>(N), 0.0);
    if (N < 2) return means;
    for (Eigen::Index i = 0; i < N; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < N; ++j)
            if (j != i) s += C.values(i, j);
        means[static_cast<std::size_t>(i)] = s / static_cast<double>(N - 1);
    }
    return means;
}

/// Indices (ascending) of features whose mean off-diagonal correlation is below `threshold`.
inline std::vector<std::size_t> select_features(const CorrelationMatrix& C, double threshold = 0.9) {
    const auto means = mean_off_diagonal(C);
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < means.size(); ++i)
        if (means[i] < threshold) chosen.push_back(i);
    return chosen;
}

/// K distinct column indices drawn uniformly from [0, n), returned ascending.
inline std::vector<std::size_t> random_feature_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k == 0 || k > n) throw ConfigError("random subset size must lie in 1.." + std::to_string(n));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// CSV with a `date` column followed by one column per model and `bias`.
inline void write_csv(std::ostream& os, const FeatureMatrix& X) {
    os << "date";
    for (const auto& l : X.labels) os << ',' << csv_field(l);
    os << ",bias\n" << std::setprecision(17);
    for (Eigen::Index t = 0; t < X.values.rows(); ++t) {
        os << X.dates[static_cast<std::size_t>(t)].iso();
        for (Eigen::Index j = 0; j < X.values.cols(); ++j) os << ',' << X.values(t, j);
        os << '\n';
    }
}

/// Square CSV with a leading label column, suitable as a heatmap source.
inline void write_csv(std::ostream& os, const CorrelationMatrix& C) {
    os << "model";
    for (const auto& l : C.labels) os << ',' << csv_field(l);
    os << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < C.values.rows(); ++i) {
        os << csv_field(C.labels[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < C.values.cols(); ++j) os << ',' << C.values(i, j);
        os << '\n';
    }
}

}  // namespace volblend
