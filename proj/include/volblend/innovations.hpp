#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "error.hpp"

namespace volblend {

enum class DistKind { Normal, StudentT, SkewStudentT, GED };

/// Short tag used in model names: N, t, st, G.
inline std::string_view dist_tag(DistKind k) {
    switch (k) {
        case DistKind::Normal: return "N";
        case DistKind::StudentT: return "t";
        case DistKind::SkewStudentT: return "st";
        case DistKind::GED: return "G";
    }
    return "?";
}

inline DistKind parse_dist_tag(std::string_view tag) {
    if (tag == "N") return DistKind::Normal;
    if (tag == "t") return DistKind::StudentT;
    if (tag == "st") return DistKind::SkewStudentT;
    if (tag == "G") return DistKind::GED;
    throw DomainError("unknown innovation tag '" + std::string(tag) + "' (expected N, t, st or G)");
}

/// Number of free shape parameters carried by each innovation kind.
inline int shape_param_count(DistKind k) {
    switch (k) {
        case DistKind::Normal: return 0;
        case DistKind::StudentT: return 1;
        case DistKind::SkewStudentT: return 2;
        case DistKind::GED: return 1;
    }
    return 0;
}

/// Zero-mean, unit-variance innovation law. `shape` is the degrees of freedom (t, skew-t)
/// or the GED tail exponent; `skew` is Hansen's lambda.
struct InnovationDist {
    DistKind kind = DistKind::Normal;
    double shape = 0.0;
    double skew = 0.0;

    static InnovationDist normal() { return {DistKind::Normal, 0.0, 0.0}; }
    static InnovationDist student_t(double nu) { return {DistKind::StudentT, nu, 0.0}; }
    static InnovationDist skew_t(double nu, double lambda) { return {DistKind::SkewStudentT, nu, lambda}; }
    static InnovationDist ged(double nu) { return {DistKind::GED, nu, 0.0}; }

    void validate() const {
        switch (kind) {
            case DistKind::Normal: return;
            case DistKind::StudentT:
                if (!(shape > 2.0)) throw DomainError("Student-t degrees of freedom must exceed 2");
                return;
            case DistKind::SkewStudentT:
                if (!(shape > 2.0)) throw DomainError("skewed-t degrees of freedom must exceed 2");
                if (!(skew > -1.0 && skew < 1.0)) throw DomainError("skewed-t lambda must lie in (-1, 1)");
                return;
            case DistKind::GED:
                if (!(shape > 0.0)) throw DomainError("GED shape must be positive");
                return;
        }
    }
};

/// Precomputed normalizing constants so the per-observation cost is a handful of flops.
class LogDensity {
public:
    explicit LogDensity(const InnovationDist& d) : dist_(d) {
        d.validate();
        using std::numbers::pi;
        switch (d.kind) {
            case DistKind::Normal:
                log_norm_ = -0.5 * std::log(2.0 * pi);
                break;
            case DistKind::StudentT:
                log_norm_ = std::lgamma(0.5 * (d.shape + 1.0)) - std::lgamma(0.5 * d.shape) -
                            0.5 * std::log(pi * (d.shape - 2.0));
                break;
            case DistKind::SkewStudentT: {
                // Hansen (1994)
                const double nu = d.shape, lam = d.skew;
                const double log_c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                                     0.5 * std::log(pi * (nu - 2.0));
                const double c = std::exp(log_c);
                a_ = 4.0 * lam * c * (nu - 2.0) / (nu - 1.0);
                b_ = std::sqrt(1.0 + 3.0 * lam * lam - a_ * a_);
                log_norm_ = std::log(b_) + log_c;
                break;
            }
            case DistKind::GED: {
                const double nu = d.shape;
                scale_ = std::sqrt(std::exp2(-2.0 / nu) * std::exp(std::lgamma(1.0 / nu) - std::lgamma(3.0 / nu)));
                log_norm_ = std::log(nu) - std::log(scale_) - (1.0 + 1.0 / nu) * std::log(2.0) - std::lgamma(1.0 / nu);
                break;
            }
        }
    }

    double operator()(double z) const {
        switch (dist_.kind) {
            case DistKind::Normal:
                return log_norm_ - 0.5 * z * z;
            case DistKind::StudentT:
                return log_norm_ - 0.5 * (dist_.shape + 1.0) * std::log1p(z * z / (dist_.shape - 2.0));
            case DistKind::SkewStudentT: {
                const double side = z < -a_ / b_ ? 1.0 - dist_.skew : 1.0 + dist_.skew;
                const double u = (b_ * z + a_) / side;
                return log_norm_ - 0.5 * (dist_.shape + 1.0) * std::log1p(u * u / (dist_.shape - 2.0));
            }
            case DistKind::GED:
                return log_norm_ - 0.5 * std::pow(std::abs(z / scale_), dist_.shape);
        }
        return 0.0;
    }

    const InnovationDist& dist() const { return dist_; }

private:
    InnovationDist dist_;
    double log_norm_ = 0.0;
    double a_ = 0.0, b_ = 1.0;  // skew-t location/scale
    double scale_ = 1.0;        // GED lambda
};

inline double log_density(const InnovationDist& d, double z) { return LogDensity(d)(z); }

/// E|z| under the standardized law (used by the centered EGARCH variant).
inline double expected_abs(const InnovationDist& d) {
    d.validate();
    using std::numbers::pi;
    switch (d.kind) {
        case DistKind::Normal:
            return std::sqrt(2.0 / pi);
        case DistKind::StudentT: {
            const double nu = d.shape;
            return 2.0 * std::sqrt(nu - 2.0) / (nu - 1.0) *
                   std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)) / std::sqrt(pi);
        }
        case DistKind::SkewStudentT: {
            LogDensity f(d);
            boost::math::quadrature::exp_sinh<double> half_line;
            constexpr double inf = std::numeric_limits<double>::infinity();
            const double right = half_line.integrate([&](double z) { return z * std::exp(f(z)); }, 0.0, inf);
            const double left = half_line.integrate([&](double z) { return z * std::exp(f(-z)); }, 0.0, inf);
            return right + left;
        }
        case DistKind::GED: {
            const double nu = d.shape;
            const double scale = std::sqrt(std::exp2(-2.0 / nu) * std::exp(std::lgamma(1.0 / nu) - std::lgamma(3.0 / nu)));
            return scale * std::exp2(1.0 / nu) * std::exp(std::lgamma(2.0 / nu) - std::lgamma(1.0 / nu));
        }
    }
    return 0.0;
}

/// Stateful standardized-innovation generator; owns its engine.
class InnovationSampler {
public:
    InnovationSampler(const InnovationDist& d, std::uint64_t seed) : dist_(d), engine_(seed) {
        d.validate();
        if (d.kind == DistKind::StudentT || d.kind == DistKind::SkewStudentT) {
            t_scale_ = std::sqrt((d.shape - 2.0) / d.shape);
        }
        if (d.kind == DistKind::SkewStudentT) {
            const double nu = d.shape, lam = d.skew;
            const double c = std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)) /
                             std::sqrt(std::numbers::pi * (nu - 2.0));
            a_ = 4.0 * lam * c * (nu - 2.0) / (nu - 1.0);
            b_ = std::sqrt(1.0 + 3.0 * lam * lam - a_ * a_);
        }
        if (d.kind == DistKind::GED) {
            const double nu = d.shape;
            ged_scale_ = std::sqrt(std::exp2(-2.0 / nu) * std::exp(std::lgamma(1.0 / nu) - std::lgamma(3.0 / nu)));
        }
    }

    double operator()() {
        switch (dist_.kind) {
            case DistKind::Normal:
                return normal_(engine_);
            case DistKind::StudentT:
                return t_scale_ * student();
            case DistKind::SkewStudentT: {
                // Each half of Hansen's density is a half standardized-t mapped affinely;
                // the left half carries mass (1 - lambda) / 2.
                const double w = std::abs(t_scale_ * student());
                const bool left = uniform_(engine_) < 0.5 * (1.0 - dist_.skew);
                const double u = left ? -(1.0 - dist_.skew) * w : (1.0 + dist_.skew) * w;
                return (u - a_) / b_;
            }
            case DistKind::GED: {
                // |z| = lambda * (2 G)^(1/nu), G ~ Gamma(1/nu, 1)
                std::gamma_distribution<double> gamma(1.0 / dist_.shape, 1.0);
                const double mag = ged_scale_ * std::pow(2.0 * gamma(engine_), 1.0 / dist_.shape);
                return uniform_(engine_) < 0.5 ? -mag : mag;
            }
        }
        return 0.0;
    }

private:
    double student() {
        // classical t as N / sqrt(chi2 / nu)
        std::chi_squared_distribution<double> chi2(dist_.shape);
        const double n = normal_(engine_);
        return n / std::sqrt(chi2(engine_) / dist_.shape);
    }

    InnovationDist dist_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    double t_scale_ = 1.0;
    double a_ = 0.0, b_ = 1.0;
    double ged_scale_ = 1.0;
};

inline std::vector<double> sample(const InnovationDist& d, std::uint64_t seed, std::size_t n) {
    InnovationSampler draw(d, seed);
    std::vector<double> out(n);
    for (auto& x : out) x = draw();
    return out;
}

}  // namespace volblend
