#include "volblend/feature_bank.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace volblend;

namespace {

double brute_cosine(const Eigen::MatrixXd& m, Eigen::Index i, Eigen::Index j) {
    long double dot = 0, a = 0, b = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        dot += static_cast<long double>(m(r, i)) * m(r, j);
        a += static_cast<long double>(m(r, i)) * m(r, i);
        b += static_cast<long double>(m(r, j)) * m(r, j);
    }
    return static_cast<double>(dot / (std::sqrt(a) * std::sqrt(b)));
}

FeatureMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    FeatureMatrix X;
    X.values.resize(rows, cols + 1);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) X.values(r, c) = u(rng);
    X.values.col(cols).setOnes();
    for (Eigen::Index c = 0; c < cols; ++c) X.labels.push_back("m" + std::to_string(c));
    X.dates = business_days(Date{2010, 1, 4}, static_cast<std::size_t>(rows));
    return X;
}

CorrelationMatrix constant_corr(Eigen::Index n, double off) {
    CorrelationMatrix C;
    C.values = Eigen::MatrixXd::Constant(n, n, off);
    C.values.diagonal().setOnes();
    C.labels.resize(static_cast<std::size_t>(n));
    return C;
}

ReturnSeries garch_returns(std::size_t n, std::uint64_t seed) {
    ModelParams p{1e-5, {0.08}, {0.88}, {}, InnovationDist::normal()};
    return simulate(ModelSpec{Family::GARCH, 1, 1, DistKind::Normal}, p, n, seed);
}

}  // namespace

TEST(DefaultBank, HasNinetyDistinctModels) {
    const auto bank = default_bank();
    ASSERT_EQ(bank.size(), 90u);
    std::set<std::string> names;
    for (const auto& s : bank) names.insert(s.name());
    EXPECT_EQ(names.size(), 90u);
    EXPECT_TRUE(names.count("ARCH-st(10)"));
    EXPECT_TRUE(names.count("EGARCH-G(2,2)"));
    EXPECT_TRUE(names.count("GARCH-N(3,3)"));
    EXPECT_TRUE(names.count("GJR-N(3,3)"));
}

TEST(Cosine, KnownValues) {
    const std::vector<double> x{1, 2, 3}, y{4, 5, 6};
    EXPECT_NEAR(cosine(x, y), 32.0 / (std::sqrt(14.0) * std::sqrt(77.0)), 1e-15);
    EXPECT_NEAR(cosine(x, y), 0.9746318, 1e-7);
    EXPECT_DOUBLE_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
    EXPECT_NEAR(cosine(x, x), 1.0, 1e-15);
}

TEST(Cosine, Errors) {
    EXPECT_THROW(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 2}), DomainError);
    EXPECT_THROW(cosine(std::vector<double>{1}, std::vector<double>{1, 2}), LengthError);
}

TEST(CorrelationMatrix, MatchesBruteForceOracle) {
    const auto X = random_matrix(50, 3, 7);
    const auto C = correlation_matrix(X, 0, 50);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(C.values(i, j), brute_cosine(X.values, i, j), 1e-12);
}

TEST(CorrelationMatrix, SymmetricUnitDiagonalBounded) {
    const auto X = random_matrix(80, 12, 11);
    const auto C = correlation_matrix(X, 0, 60);
    EXPECT_TRUE(C.values == C.values.transpose());
    for (Eigen::Index i = 0; i < 12; ++i) EXPECT_EQ(C.values(i, i), 1.0);
    EXPECT_LE(C.values.maxCoeff(), 1.0);
    EXPECT_GE(C.values.minCoeff(), -1.0);
}

TEST(CorrelationMatrix, ProportionalColumnsAreOne) {
    auto X = random_matrix(30, 2, 3);
    X.values.col(1) = 3.5 * X.values.col(0);
    const auto C = correlation_matrix(X, 0, 30);
    EXPECT_NEAR(C.values(0, 1), 1.0, 1e-15);
}

TEST(CorrelationMatrix, UsesOnlyRequestedRows) {
    auto X = random_matrix(40, 3, 5);
    const auto before = correlation_matrix(X, 0, 20);
    X.values.bottomRows(20).setConstant(123.0);
    const auto after = correlation_matrix(X, 0, 20);
    EXPECT_TRUE(before.values == after.values);
}

TEST(CorrelationMatrix, Errors) {
    auto X = random_matrix(10, 1, 1);
    EXPECT_THROW(correlation_matrix(X, 0, 10), LengthError);
    X = random_matrix(10, 2, 1);
    X.values.col(1).setZero();
    EXPECT_THROW(correlation_matrix(X, 0, 10), DomainError);
}

TEST(SelectFeatures, ThresholdCases) {
    EXPECT_TRUE(select_features(constant_corr(5, 0.99)).empty());
    EXPECT_EQ(select_features(constant_corr(4, 0.0)), (std::vector<std::size_t>{0, 1, 2, 3}));
    // Row means exclude the diagonal: 0.9 exactly is not below the threshold.
    EXPECT_TRUE(select_features(constant_corr(3, 0.9)).empty());
}

TEST(SelectFeatures, ScaleInvariant) {
    auto X = random_matrix(60, 8, 21);
    X.values.col(2) = X.values.col(0) * 1.01 + X.values.col(1) * 0.01;  // a correlated cluster
    X.values.col(3) = X.values.col(0) * 0.98;
    const auto base = select_features(correlation_matrix(X, 0, 60), 0.85);
    auto Y = X;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.01, 100.0);
    for (Eigen::Index c = 0; c < 8; ++c) Y.values.col(c) *= u(rng);
    EXPECT_EQ(select_features(correlation_matrix(Y, 0, 60), 0.85), base);
}

TEST(SelectFeatures, PermutationEquivariant) {
    auto X = random_matrix(60, 6, 31);
    X.values.col(4) = X.values.col(1) * 2.0;
    const auto base = select_features(correlation_matrix(X, 0, 60), 0.86);
    std::vector<std::size_t> perm{5, 3, 0, 4, 1, 2};
    const auto Y = X.select(perm);
    const auto permuted = select_features(correlation_matrix(Y, 0, 60), 0.86);
    std::set<std::size_t> expected;
    for (std::size_t k = 0; k < perm.size(); ++k)
        if (std::find(base.begin(), base.end(), perm[k]) != base.end()) expected.insert(k);
    EXPECT_EQ(std::set<std::size_t>(permuted.begin(), permuted.end()), expected);
}

TEST(RandomSubset, DeterministicDistinctSorted) {
    const auto a = random_feature_subset(90, 10, 42);
    EXPECT_EQ(a, random_feature_subset(90, 10, 42));
    EXPECT_NE(a, random_feature_subset(90, 10, 43));
    EXPECT_EQ(a.size(), 10u);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 10u);
    EXPECT_LT(a.back(), 90u);
    EXPECT_THROW(random_feature_subset(5, 6, 1), ConfigError);
}

TEST(BuildFeatureBank, SingleSpecGivesPredictionAndBias) {
    const auto r = garch_returns(700, 1);
    const SplitSpec s{500, 100, 100};
    const auto bank = build_feature_bank(r, s, {ModelSpec::parse("GARCH-N(1,1)")});
    const auto& X = bank.matrix;
    ASSERT_EQ(X.values.rows(), 700);
    ASSERT_EQ(X.values.cols(), 2);
    EXPECT_TRUE((X.values.col(1).array() == 1.0).all());
    EXPECT_TRUE((X.values.col(0).array() > 0.0).all());
    EXPECT_TRUE(X.values.allFinite());
    EXPECT_EQ(X.dates, r.dates);
    for (std::size_t t = 0; t < 500; ++t) EXPECT_EQ(X.values(static_cast<Eigen::Index>(t), 0), bank.models[0].in_sample_h[t]);
}

TEST(BuildFeatureBank, IdenticalSpecsGiveIdenticalColumns) {
    const auto r = garch_returns(700, 2);
    const auto spec = ModelSpec::parse("GJR-t(1,1)");
    const auto bank = build_feature_bank(r, {500, 100, 100}, {spec, spec}, {}, 2);
    EXPECT_TRUE(bank.matrix.values.col(0) == bank.matrix.values.col(1));
}

TEST(BuildFeatureBank, OutOfSampleHasNoLookAhead) {
    const auto r = garch_returns(700, 3);
    const SplitSpec s{500, 100, 100};
    const std::vector<ModelSpec> specs{ModelSpec::parse("EGARCH-N(1,1)"), ModelSpec::parse("ARCH-G(3)")};
    const auto bank = build_feature_bank(r, s, specs);
    for (std::size_t t : {500u, 555u, 699u}) {
        // Truncate at t-1 and append junk; the value at t must not change.
        auto truncated = r;
        truncated.returns.resize(t);
        truncated.returns.push_back(0.5);
        truncated.dates.resize(t + 1);
        for (std::size_t j = 0; j < bank.models.size(); ++j) {
            const auto path = forecast_path(bank.models[j], truncated.returns, s.train_len);
            EXPECT_EQ(path.back(), bank.matrix.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)));
        }
    }
}

TEST(BuildFeatureBank, SplitMustCoverSeries) {
    const auto r = garch_returns(600, 4);
    EXPECT_THROW(build_feature_bank(r, {400, 100, 50}, {ModelSpec::parse("GARCH-N(1,1)")}), LengthError);
    EXPECT_THROW(build_feature_bank(r, {400, 100, 100}, {}), ConfigError);
}

TEST(FeatureMatrix, CsvExport) {
    const auto X = random_matrix(3, 2, 9);
    std::ostringstream os;
    write_csv(os, X);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "date,m0,m1,bias");
    int lines = 0;
    for (std::string l; std::getline(is, l);) ++lines;
    EXPECT_EQ(lines, 3);

    std::ostringstream oc;
    write_csv(oc, correlation_matrix(X, 0, 3));
    EXPECT_EQ(oc.str().substr(0, oc.str().find('\n')), "model,m0,m1");
}
