#include "volblend/innovations.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace volblend;

namespace {

// Integrates g over the real line as two half-line exp-sinh pieces split at 0.
template <class G>
double integrate_line(G g) {
    boost::math::quadrature::exp_sinh<double> right;
    const double pos = right.integrate([&](double z) { return g(z); }, 0.0, std::numeric_limits<double>::infinity());
    const double neg = right.integrate([&](double z) { return g(-z); }, 0.0, std::numeric_limits<double>::infinity());
    return pos + neg;
}

std::vector<InnovationDist> shape_settings() {
    return {InnovationDist::normal(),       InnovationDist::student_t(4.5), InnovationDist::student_t(10.0),
            InnovationDist::skew_t(5.0, -0.3), InnovationDist::skew_t(8.0, 0.5), InnovationDist::ged(1.0),
            InnovationDist::ged(1.5),       InnovationDist::ged(3.0)};
}

}  // namespace

TEST(LogDensity, NormalMode) { EXPECT_NEAR(log_density(InnovationDist::normal(), 0.0), -0.9189385332046727, 1e-15); }

TEST(LogDensity, StudentTModeMatchesQuadratureNormalizer) {
    const double nu = 10.0;
    // Unnormalized unit-variance t kernel; the normalizer comes from quadrature only.
    const double z_norm = integrate_line([&](double z) { return std::pow(1.0 + z * z / (nu - 2.0), -(nu + 1.0) / 2.0); });
    EXPECT_NEAR(log_density(InnovationDist::student_t(nu), 0.0), -std::log(z_norm), 1e-10);
}

TEST(LogDensity, GedTwoIsNormal) {
    for (double z : {-3.0, -0.7, 0.0, 0.25, 1.9, 5.0})
        EXPECT_NEAR(log_density(InnovationDist::ged(2.0), z), log_density(InnovationDist::normal(), z), 1e-10);
}

TEST(LogDensity, SkewTWithZeroLambdaIsStudentT) {
    for (double nu : {2.5, 5.0, 30.0})
        for (double z : {-4.0, -1.0, -0.1, 0.0, 0.3, 2.2})
            EXPECT_NEAR(log_density(InnovationDist::skew_t(nu, 0.0), z), log_density(InnovationDist::student_t(nu), z),
                        1e-10);
}

TEST(LogDensity, IntegratesToOneWithUnitVariance) {
    for (const auto& d : shape_settings()) {
        LogDensity f(d);
        const double mass = integrate_line([&](double z) { return std::exp(f(z)); });
        const double mean = integrate_line([&](double z) { return z * std::exp(f(z)); });
        const double second = integrate_line([&](double z) { return z * z * std::exp(f(z)); });
        EXPECT_NEAR(mass, 1.0, 1e-6) << static_cast<int>(d.kind) << " " << d.shape;
        EXPECT_NEAR(mean, 0.0, 1e-6) << static_cast<int>(d.kind) << " " << d.shape;
        EXPECT_NEAR(second, 1.0, 1e-6) << static_cast<int>(d.kind) << " " << d.shape;
    }
}

TEST(LogDensity, ExpectedAbsMatchesQuadrature) {
    for (const auto& d : shape_settings()) {
        LogDensity f(d);
        const double oracle = integrate_line([&](double z) { return std::abs(z) * std::exp(f(z)); });
        EXPECT_NEAR(expected_abs(d), oracle, 1e-6) << static_cast<int>(d.kind) << " " << d.shape;
    }
}

TEST(LogDensity, InvalidShapes) {
    EXPECT_THROW(log_density(InnovationDist::student_t(2.0), 0.0), DomainError);
    EXPECT_THROW(log_density(InnovationDist::skew_t(5.0, 1.0), 0.0), DomainError);
    EXPECT_THROW(log_density(InnovationDist::skew_t(1.5, 0.0), 0.0), DomainError);
    EXPECT_THROW(log_density(InnovationDist::ged(0.0), 0.0), DomainError);
    EXPECT_THROW(sample(InnovationDist::ged(-1.0), 1, 10), DomainError);
}

namespace {

struct Moments {
    double mean, var, excess_kurtosis;
};

Moments moments(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d2 = (v - m) * (v - m);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    return {m, m2, m4 / (m2 * m2) - 3.0};
}

}  // namespace

TEST(Sample, NormalVarianceConverges) {
    auto x = sample(InnovationDist::normal(), 42, 1'000'000);
    auto m = moments(x);
    EXPECT_GE(m.var, 0.99);
    EXPECT_LE(m.var, 1.01);
    EXPECT_NEAR(m.mean, 0.0, 0.005);
}

TEST(Sample, Deterministic) {
    for (const auto& d : shape_settings()) EXPECT_EQ(sample(d, 7, 1000), sample(d, 7, 1000));
    EXPECT_NE(sample(InnovationDist::normal(), 7, 10), sample(InnovationDist::normal(), 8, 10));
}

TEST(Sample, StudentTExcessKurtosis) {
    auto m = moments(sample(InnovationDist::student_t(5.0), 2024, 1'000'000));
    EXPECT_NEAR(m.var, 1.0, 0.02);
    EXPECT_NEAR(m.excess_kurtosis, 6.0, 0.2 * 6.0);
}

TEST(Sample, AllKindsAreStandardized) {
    for (const auto& d : shape_settings()) {
        auto m = moments(sample(d, 99, 400'000));
        EXPECT_NEAR(m.mean, 0.0, 0.01) << static_cast<int>(d.kind) << " " << d.shape;
        EXPECT_NEAR(m.var, 1.0, d.kind == DistKind::StudentT && d.shape < 5 ? 0.06 : 0.02)
            << static_cast<int>(d.kind) << " " << d.shape;
    }
}

TEST(Sample, SkewTLeftMassMatchesDensity) {
    const auto d = InnovationDist::skew_t(6.0, 0.4);
    LogDensity f(d);
    boost::math::quadrature::exp_sinh<double> q;
    const double left_mass = q.integrate([&](double u) { return std::exp(f(-u)); }, 0.0,
                                         std::numeric_limits<double>::infinity());
    auto x = sample(d, 3, 400'000);
    const double frac = static_cast<double>(std::count_if(x.begin(), x.end(), [](double v) { return v < 0.0; })) /
                        static_cast<double>(x.size());
    EXPECT_NEAR(frac, left_mass, 0.004);
}
