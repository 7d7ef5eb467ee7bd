#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace volblend {

struct SimplexOptions {
    std::size_t max_iterations = 5000;
    /// Stop when the best value improves by less than this over a full polytope cycle (n + 1 iterations).
    double cycle_tolerance = 1e-9;
    double initial_step = 0.25;
};

struct SimplexResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
};

/// Nelder-Mead minimization. Non-finite objective values are treated as +inf, so the
/// objective can reject infeasible points simply by returning NaN or inf.
/// After the first convergence the polytope is rebuilt around the best vertex and the
/// search continues; a restart that fails to improve by the cycle tolerance ends the run.
inline SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                                 std::vector<double> start, const SimplexOptions& opt = {}) {
    const std::size_t n = start.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    auto eval = [&](const std::vector<double>& x) {
        const double v = objective(x);
        return std::isfinite(v) ? v : kInf;
    };

    SimplexResult res;
    if (n == 0) {
        res.x = start;
        res.value = eval(start);
        res.converged = true;
        return res;
    }

    std::vector<std::vector<double>> pts(n + 1, start);
    std::vector<double> vals(n + 1);
    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);

    auto build = [&](const std::vector<double>& base, double step) {
        pts.assign(n + 1, base);
        for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
        for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);
    };

    build(start, opt.initial_step);
    std::size_t iter = 0;
    double step = opt.initial_step;
    double checkpoint = kInf;
    double best_at_restart = kInf;

    while (iter < opt.max_iterations) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

        if (iter % (n + 1) == 0) {
            const bool stalled = std::isfinite(checkpoint) && checkpoint - vals[best] < opt.cycle_tolerance;
            checkpoint = vals[best];
            if (stalled) {
                if (best_at_restart - vals[best] < opt.cycle_tolerance) {
                    res.converged = true;
                    break;
                }
                best_at_restart = vals[best];
                step *= 0.5;
                auto base = pts[best];
                build(base, step);
                checkpoint = kInf;
                ++iter;
                continue;
            }
        }
        ++iter;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t k = 0; k <= n; ++k) {
            if (k == worst) continue;
            for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[k][i];
        }
        for (auto& c : centroid) c /= static_cast<double>(n);

        auto along = [&](double coef, std::vector<double>& out) {
            for (std::size_t i = 0; i < n; ++i) out[i] = centroid[i] + coef * (pts[worst][i] - centroid[i]);
            return eval(out);
        };

        const double fr = along(-1.0, trial);
        if (fr < vals[best]) {
            const double fe = along(-2.0, trial2);
            if (fe < fr) {
                pts[worst] = trial2;
                vals[worst] = fe;
            } else {
                pts[worst] = trial;
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = trial;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            const double fc = along(outside ? -0.5 : 0.5, trial2);
            if (fc < (outside ? fr : vals[worst])) {
                pts[worst] = trial2;
                vals[worst] = fc;
            } else {
                for (std::size_t k = 0; k <= n; ++k) {
                    if (k == best) continue;
                    for (std::size_t i = 0; i < n; ++i) pts[k][i] = pts[best][i] + 0.5 * (pts[k][i] - pts[best][i]);
                    vals[k] = eval(pts[k]);
                }
            }
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    res.x = pts[best];
    res.value = vals[best];
    res.iterations = iter;
    return res;
}

}  // namespace volblend
