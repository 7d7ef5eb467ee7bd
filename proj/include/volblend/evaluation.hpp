#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "error.hpp"

namespace volblend {

/// Number of leading time points for which the 5-day proxy is undefined.
constexpr std::size_t kProxyWarmup = 4;

/// Realized-variance proxy: mean of the five most recent squared returns including r_t.
/// Entries 0..3 are NaN (warm-up).
inline std::vector<double> realized_vol_proxy(std::span<const double> returns) {
    if (returns.size() < 5) throw LengthError("realized volatility proxy needs at least 5 returns");
    std::vector<double> out(returns.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = kProxyWarmup; t < returns.size(); ++t) {
        double s = 0.0;
        for (std::size_t i = 0; i < 5; ++i) s += returns[t - i] * returns[t - i];
        out[t] = s / 5.0;
    }
    return out;
}

namespace detail {
inline void check_pair(std::span<const double> y, std::span<const double> yhat, const char* what) {
    if (y.size() != yhat.size()) throw LengthError(std::string(what) + ": length mismatch");
    if (y.empty()) throw LengthError(std::string(what) + ": empty input");
}
}  // namespace detail

inline double rmse(std::span<const double> y, std::span<const double> yhat) {
    detail::check_pair(y, yhat, "rmse");
    double s = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) s += (y[t] - yhat[t]) * (y[t] - yhat[t]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

inline double mae(std::span<const double> y, std::span<const double> yhat) {
    detail::check_pair(y, yhat, "mae");
    double s = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) s += std::abs(y[t] - yhat[t]);
    return s / static_cast<double>(y.size());
}

struct DmOptions {
    /// Harvey, Leybourne & Newbold small-sample factor with Student-t reference (off by default).
    bool harvey_correction = false;
};

struct DmResult {
    double stat = 0.0;
    double p_value = 1.0;
    std::size_t n_lags = 0;  // N - 1 autocovariance lags
    double mean_diff = 0.0;
    bool degenerate = false;  // all loss differentials are zero
};

/// Two-sided Diebold-Mariano test on absolute-error loss differentials d_i = |f_i - y_i| - |g_i - y_i|.
/// Positive statistics mean `f` has the larger loss. Truncation N = floor(T^(1/3)) + 1.
inline DmResult dm_test(std::span<const double> y, std::span<const double> f, std::span<const double> g,
                        const DmOptions& opt = {}) {
    if (y.size() != f.size() || y.size() != g.size()) throw LengthError("dm_test: length mismatch");
    const std::size_t T = y.size();
    if (T < 8) throw LengthError("dm_test needs at least 8 observations");
    const double Td = static_cast<double>(T);

    std::vector<double> d(T);
    bool all_zero = true;
    for (std::size_t i = 0; i < T; ++i) {
        d[i] = std::abs(f[i] - y[i]) - std::abs(g[i] - y[i]);
        all_zero = all_zero && d[i] == 0.0;
    }

    DmResult res;
    const auto N = static_cast<std::size_t>(std::floor(std::cbrt(Td))) + 1;
    res.n_lags = N - 1;
    if (all_zero) {
        res.degenerate = true;
        return res;
    }

    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= Td;
    res.mean_diff = mean;

    auto autocov = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t i = k; i < T; ++i) s += (d[i] - mean) * (d[i - k] - mean);
        return s / Td;
    };
    double long_run = autocov(0);
    for (std::size_t k = 1; k < N; ++k) long_run += 2.0 * autocov(k);
    if (!(long_run > 0.0))
        throw NumericalError("dm_test: non-positive long-run variance estimate " + std::to_string(long_run) +
                             " (T = " + std::to_string(T) + ", lags = " + std::to_string(N - 1) + ")");

    res.stat = mean / std::sqrt(long_run / Td);
    if (opt.harvey_correction) {
        constexpr double h = 1.0;
        res.stat *= std::sqrt((Td + 1.0 - 2.0 * h + h * (h - 1.0) / Td) / Td);
        boost::math::students_t dist(Td - 1.0);
        res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.stat)));
    } else {
        res.p_value = std::erfc(std::abs(res.stat) / std::sqrt(2.0));
    }
    return res;
}

}  // namespace volblend
