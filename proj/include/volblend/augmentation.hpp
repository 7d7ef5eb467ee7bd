#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace volblend {

enum class ScaleMode { Raw, ProxyStd };

inline std::string scale_mode_name(ScaleMode m) { return m == ScaleMode::Raw ? "raw" : "proxy_std"; }

inline ScaleMode parse_scale_mode(const std::string& s) {
    if (s == "raw") return ScaleMode::Raw;
    if (s == "proxy_std") return ScaleMode::ProxyStd;
    throw ConfigError("unknown augment scale mode '" + s + "' (expected raw or proxy_std)");
}

struct AugmentConfig {
    std::size_t M = 15;
    double sigma = 0.1;
    ScaleMode scale_mode = ScaleMode::ProxyStd;

    void validate() const {
        if (M < 1) throw ConfigError("augment window M must be >= 1");
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("augment sigma must be finite and >= 0");
    }
};

/// e_t(M) = (h_{t-1} - h_{t-1-M}) / sum_{i=1..M} |h_{t-i} - h_{t-1-i}|, reading only h before t.
/// A flat window (zero denominator) yields 0.
inline double effective_ratio(std::span<const double> h, std::size_t M, std::size_t t) {
    if (M < 1) throw ConfigError("effective ratio window must be >= 1");
    if (t < M + 1) throw LengthError("effective ratio at t = " + std::to_string(t) + " needs " + std::to_string(M + 1) +
                                     " earlier values");
    if (t > h.size()) throw LengthError("effective ratio index beyond the series");
    double path = 0.0;
    for (std::size_t i = 1; i <= M; ++i) {
        const double step = h[t - i] - h[t - 1 - i];
        if (!std::isfinite(step)) throw DomainError("effective ratio window contains undefined proxy values");
        path += std::abs(step);
    }
    if (path == 0.0) return 0.0;
    // |net| <= path holds exactly; rounding in the two sums can break it by an ulp.
    return std::clamp((h[t - 1] - h[t - 1 - M]) / path, -1.0, 1.0);
}

/// Population standard deviation of the finite entries.
inline double finite_std(std::span<const double> x) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : x)
        if (std::isfinite(v)) sum += v, ++n;
    if (n == 0) throw LengthError("standard deviation of an empty series");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : x)
        if (std::isfinite(v)) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(n));
}

/// Multiplier applied to e_t: sigma itself, or sigma times the in-sample proxy's standard deviation.
inline double effective_sigma(const AugmentConfig& cfg, double proxy_std) {
    return cfg.scale_mode == ScaleMode::Raw ? cfg.sigma : cfg.sigma * proxy_std;
}

/// base[k] forecasts time first_index + k; returns base[k] + sigma_eff * e_{first_index + k}(M)
/// computed on `proxy` (indexed on the same time axis).
inline std::vector<double> augment(std::span<const double> base, std::size_t first_index,
                                   std::span<const double> proxy, const AugmentConfig& cfg, double proxy_std) {
    cfg.validate();
    if (first_index + base.size() > proxy.size() + 1)
        throw LengthError("augment: forecasts extend past the proxy history");
    const double s = effective_sigma(cfg, proxy_std);
    std::vector<double> out(base.begin(), base.end());
    if (s == 0.0) return out;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += s * effective_ratio(proxy, cfg.M, first_index + k);
    return out;
}

struct AugmentChoice {
    AugmentConfig config;
    double validation_rmse = std::numeric_limits<double>::infinity();
};

/// Picks (M, sigma) from the grid by RMSE of the augmented base forecast against `target` over the
/// validation rows. Ties keep the earliest grid entry.
inline AugmentChoice tune_augment(std::span<const double> base, std::size_t first_index, std::span<const double> proxy,
                                  std::span<const double> target, double proxy_std, ScaleMode mode,
                                  const std::vector<std::size_t>& windows, const std::vector<double>& sigmas) {
    if (base.size() != target.size()) throw LengthError("tune_augment: target length mismatch");
    if (windows.empty() || sigmas.empty()) throw ConfigError("augment grid is empty");
    AugmentChoice best;
    for (std::size_t M : windows) {
        for (double sigma : sigmas) {
            AugmentConfig cfg{M, sigma, mode};
            const auto pred = augment(base, first_index, proxy, cfg, proxy_std);
            double ss = 0.0;
            for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - target[i]) * (pred[i] - target[i]);
            const double score = std::sqrt(ss / static_cast<double>(pred.size()));
            if (score < best.validation_rmse) best = {cfg, score};
        }
    }
    return best;
}

}  // namespace volblend
