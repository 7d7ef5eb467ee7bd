#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "innovations.hpp"
#include "market_data.hpp"
#include "parallel.hpp"
#include "simplex.hpp"

namespace volblend {

enum class Family { ARCH, GARCH, EGARCH, GJR };

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::ARCH: return "ARCH";
        case Family::GARCH: return "GARCH";
        case Family::EGARCH: return "EGARCH";
        case Family::GJR: return "GJR";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    std::string up(s);
    for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "ARCH") return Family::ARCH;
    if (up == "GARCH") return Family::GARCH;
    if (up == "EGARCH") return Family::EGARCH;
    if (up == "GJR") return Family::GJR;
    throw DomainError("unknown model family '" + std::string(s) + "'");
}

/// Family + orders + innovation law. `p` counts variance lags (beta), `q` counts shock lags
/// (alpha/gamma); ARCH(p) has p shock lags and no variance lags.
struct ModelSpec {
    Family family = Family::GARCH;
    int p = 1;
    int q = 1;
    DistKind innovation = DistKind::Normal;

    auto operator<=>(const ModelSpec&) const = default;

    int alpha_count() const { return family == Family::ARCH ? p : q; }
    int beta_count() const { return family == Family::ARCH ? 0 : p; }
    int gamma_count() const { return family == Family::EGARCH || family == Family::GJR ? q : 0; }
    int param_count() const {
        return 1 + alpha_count() + beta_count() + gamma_count() + shape_param_count(innovation);
    }
    int max_lag() const { return std::max(alpha_count(), beta_count()); }

    void validate() const {
        if (p < 1) throw DomainError("model order p must be >= 1");
        if (family != Family::ARCH && q < 1) throw DomainError("model order q must be >= 1");
    }

    /// Display name, e.g. "GARCH-N(1,1)", "ARCH-st(11)".
    std::string name() const {
        std::string s(family_name(family));
        s += '-';
        s += dist_tag(innovation);
        s += '(' + std::to_string(p);
        if (family != Family::ARCH) s += ',' + std::to_string(q);
        return s + ')';
    }

    static ModelSpec parse(std::string_view text) {
        auto fail = [&] { return DomainError("cannot parse model name '" + std::string(text) + "'"); };
        const auto dash = text.find('-');
        const auto open = text.find('(');
        if (dash == text.npos || open == text.npos || open < dash || text.back() != ')') throw fail();
        ModelSpec m;
        m.family = parse_family(text.substr(0, dash));
        m.innovation = parse_dist_tag(text.substr(dash + 1, open - dash - 1));
        auto args = text.substr(open + 1, text.size() - open - 2);
        auto read_int = [&](std::string_view s) {
            int v = 0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size()) throw fail();
            return v;
        };
        const auto comma = args.find(',');
        if (m.family == Family::ARCH) {
            if (comma != args.npos) throw fail();
            m.p = read_int(args);
            m.q = 0;
        } else {
            if (comma == args.npos) throw fail();
            m.p = read_int(args.substr(0, comma));
            m.q = read_int(args.substr(comma + 1));
        }
        m.validate();
        return m;
    }
};

struct ModelParams {
    double alpha0 = 0.0;
    std::vector<double> alphas;
    std::vector<double> betas;
    std::vector<double> gammas;
    InnovationDist dist;
};

struct RecursionOptions {
    /// Subtract E|z| inside the EGARCH news term (Nelson's form). Off: the literal uncentered form.
    bool egarch_centered = false;
};

/// Persistence used for stationarity: sum(alpha) + sum(beta) + sum(gamma) / 2 for the
/// quadratic families, sum(|beta|) for EGARCH.
inline double persistence(const ModelSpec& spec, const ModelParams& params) {
    if (spec.family == Family::EGARCH) {
        double s = 0.0;
        for (double b : params.betas) s += std::abs(b);
        return s;
    }
    double s = std::accumulate(params.alphas.begin(), params.alphas.end(), 0.0) +
               std::accumulate(params.betas.begin(), params.betas.end(), 0.0);
    if (spec.family == Family::GJR) s += 0.5 * std::accumulate(params.gammas.begin(), params.gammas.end(), 0.0);
    return s;
}

inline void validate_params(const ModelSpec& spec, const ModelParams& params) {
    spec.validate();
    if (params.alphas.size() != static_cast<std::size_t>(spec.alpha_count()) ||
        params.betas.size() != static_cast<std::size_t>(spec.beta_count()) ||
        params.gammas.size() != static_cast<std::size_t>(spec.gamma_count()))
        throw DomainError("parameter vector sizes do not match " + spec.name());
    if (params.dist.kind != spec.innovation) throw DomainError("innovation kind does not match " + spec.name());
    params.dist.validate();
    auto all_finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!std::isfinite(params.alpha0) || !all_finite(params.alphas) || !all_finite(params.betas) ||
        !all_finite(params.gammas))
        throw DomainError("non-finite model parameter");
    if (spec.family == Family::EGARCH) return;
    if (!(params.alpha0 > 0.0)) throw DomainError("alpha0 must be > 0 for " + spec.name());
    auto nonneg = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
    };
    if (!nonneg(params.alphas) || !nonneg(params.betas) || !nonneg(params.gammas))
        throw DomainError("coefficients must be non-negative for " + spec.name());
}

namespace detail {

/// Incremental variance filter. Keeps per-lag shock summaries so the pre-sample seeding
/// (a^2 = h_init, |z| = 1, z = 0, E[S-] = 1/2) is expressed once.
class VarianceFilter {
public:
    VarianceFilter(const ModelSpec& spec, const ModelParams& params, double h_seed, const RecursionOptions& opt,
                   std::size_t reserve = 0)
        : spec_(spec), params_(&params) {
        if (spec.family == Family::EGARCH && opt.egarch_centered) abs_shift_ = expected_abs(params.dist);
        const std::size_t lags = static_cast<std::size_t>(spec.max_lag());
        for (auto* v : {&sq_, &neg_sq_, &abs_z_, &z_, &h_, &log_h_}) v->reserve(lags + reserve);
        for (std::size_t i = 0; i < lags; ++i) {
            sq_.push_back(h_seed);
            neg_sq_.push_back(0.5 * h_seed);
            abs_z_.push_back(1.0);
            z_.push_back(0.0);
            h_.push_back(h_seed);
            log_h_.push_back(std::log(h_seed));
        }
    }

    void set_params(const ModelParams& params) { params_ = &params; }

    /// Conditional variance for the next step given everything pushed so far.
    double next() const {
        const ModelParams& pr = *params_;
        const std::size_t n = h_.size();
        double acc = pr.alpha0;
        switch (spec_.family) {
            case Family::ARCH:
            case Family::GARCH:
                for (std::size_t i = 1; i <= pr.alphas.size(); ++i) acc += pr.alphas[i - 1] * sq_[n - i];
                for (std::size_t i = 1; i <= pr.betas.size(); ++i) acc += pr.betas[i - 1] * h_[n - i];
                return acc;
            case Family::GJR:
                for (std::size_t i = 1; i <= pr.alphas.size(); ++i)
                    acc += pr.alphas[i - 1] * sq_[n - i] + pr.gammas[i - 1] * neg_sq_[n - i];
                for (std::size_t i = 1; i <= pr.betas.size(); ++i) acc += pr.betas[i - 1] * h_[n - i];
                return acc;
            case Family::EGARCH:
                for (std::size_t i = 1; i <= pr.betas.size(); ++i) acc += pr.betas[i - 1] * log_h_[n - i];
                for (std::size_t i = 1; i <= pr.alphas.size(); ++i)
                    acc += pr.alphas[i - 1] * (abs_z_[n - i] - abs_shift_ + pr.gammas[i - 1] * z_[n - i]);
                return std::exp(acc);
        }
        return acc;
    }

    void push(double a, double h) {
        const double sq = a * a;
        const double root = std::sqrt(h);
        sq_.push_back(sq);
        neg_sq_.push_back(a < 0.0 ? sq : 0.0);
        abs_z_.push_back(std::abs(a) / root);
        z_.push_back(a / root);
        h_.push_back(h);
        log_h_.push_back(std::log(h));
    }

private:
    ModelSpec spec_;
    const ModelParams* params_;
    double abs_shift_ = 0.0;
    std::vector<double> sq_, neg_sq_, abs_z_, z_, h_, log_h_;
};

}  // namespace detail

/// One-step conditional variances h_0..h_{T-1}; h_t uses returns strictly before t.
inline std::vector<double> variance_recursion(const ModelSpec& spec, const ModelParams& params,
                                              std::span<const double> returns, double h_init,
                                              const RecursionOptions& opt = {}) {
    if (!(h_init > 0.0) || !std::isfinite(h_init)) throw DomainError("h_init must be finite and > 0");
    validate_params(spec, params);
    detail::VarianceFilter filter(spec, params, h_init, opt, returns.size());
    std::vector<double> h(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) {
        h[t] = filter.next();
        filter.push(returns[t], h[t]);
    }
    return h;
}

namespace detail {

/// Log-likelihood without re-validating; returns -inf on any non-finite or non-positive variance.
inline double log_likelihood_unchecked(const ModelSpec& spec, const ModelParams& params,
                                       std::span<const double> returns, double h_init,
                                       const RecursionOptions& opt) {
    LogDensity density(params.dist);
    VarianceFilter filter(spec, params, h_init, opt, returns.size());
    double ll = 0.0;
    for (double a : returns) {
        const double h = filter.next();
        if (!(h > 0.0) || !std::isfinite(h)) return -std::numeric_limits<double>::infinity();
        ll += density(a / std::sqrt(h)) - 0.5 * std::log(h);
        filter.push(a, h);
    }
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// sum_t [ log f(a_t / sqrt(h_t)) - ln(h_t) / 2 ]
inline double log_likelihood(const ModelSpec& spec, const ModelParams& params, std::span<const double> returns,
                             double h_init, const RecursionOptions& opt = {}) {
    if (!(h_init > 0.0)) throw DomainError("h_init must be > 0");
    validate_params(spec, params);
    const double ll = detail::log_likelihood_unchecked(spec, params, returns, h_init, opt);
    if (!std::isfinite(ll)) throw NumericalError("variance recursion produced a non-finite value for " + spec.name());
    return ll;
}

struct InformationCriteria {
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
};

inline InformationCriteria information_criteria(double loglik, int k, std::size_t n_obs) {
    return {loglik, 2.0 * k - 2.0 * loglik, k * std::log(static_cast<double>(n_obs)) - 2.0 * loglik};
}

struct FittedModel {
    ModelSpec spec;
    ModelParams params;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double h_init = 0.0;
    std::vector<double> in_sample_h;
    std::size_t n_obs = 0;
    bool egarch_centered = false;
    bool converged = false;
    std::size_t iterations = 0;

    RecursionOptions recursion_options() const { return {egarch_centered}; }
};

inline InformationCriteria information_criteria(const FittedModel& m) {
    return information_criteria(m.loglik, m.spec.param_count(), m.n_obs);
}

struct FitOptions {
    bool egarch_centered = false;
    SimplexOptions simplex{5000, 1e-9, 0.5};
};

/// Recursion seed: in-sample variance of the returns around their mean.
inline double backcast_variance(std::span<const double> returns) {
    if (returns.empty()) throw LengthError("cannot seed recursion from an empty series");
    const double n = static_cast<double>(returns.size());
    const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : returns) ss += (r - mean) * (r - mean);
    const double v = ss / n;
    return v > 0.0 ? v : 1e-12;
}

namespace detail {

/// Maps an unconstrained vector onto a feasible parameter set and back.
/// Quadratic families: alpha0 = exp(x0); the coefficients s_i = w_i c_i form a point in the
/// open simplex {s > 0, sum s < 1} via a logistic (softmax-with-slack) map, with w = 1/2 on
/// GJR gammas so the constraint is the persistence bound. EGARCH coefficients are identity-mapped.
/// Shape: nu = 2 + exp(x) for t / skew-t, nu = exp(x) for GED, lambda = tanh(x).
class Reparam {
public:
    explicit Reparam(const ModelSpec& spec) : spec_(spec) {}

    std::size_t size() const { return static_cast<std::size_t>(spec_.param_count()); }

    ModelParams to_params(const std::vector<double>& x) const {
        ModelParams p;
        p.alphas.resize(spec_.alpha_count());
        p.betas.resize(spec_.beta_count());
        p.gammas.resize(spec_.gamma_count());
        const std::size_t nc = p.alphas.size() + p.betas.size() + p.gammas.size();
        std::vector<double> coef(nc);
        if (spec_.family == Family::EGARCH) {
            p.alpha0 = x[0];
            std::copy(x.begin() + 1, x.begin() + 1 + static_cast<long>(nc), coef.begin());
        } else {
            p.alpha0 = std::exp(x[0]);
            double mx = 0.0;
            for (std::size_t i = 0; i < nc; ++i) mx = std::max(mx, x[1 + i]);
            double denom = std::exp(-mx);
            for (std::size_t i = 0; i < nc; ++i) denom += std::exp(x[1 + i] - mx);
            for (std::size_t i = 0; i < nc; ++i) coef[i] = std::exp(x[1 + i] - mx) / denom;
        }
        std::size_t k = 0;
        for (auto& a : p.alphas) a = coef[k++];
        for (auto& b : p.betas) b = coef[k++];
        for (auto& g : p.gammas) g = spec_.family == Family::GJR ? 2.0 * coef[k++] : coef[k++];
        const std::size_t s = 1 + nc;
        p.dist.kind = spec_.innovation;
        switch (spec_.innovation) {
            case DistKind::Normal: break;
            case DistKind::StudentT: p.dist.shape = 2.0 + std::exp(x[s]); break;
            case DistKind::SkewStudentT:
                p.dist.shape = 2.0 + std::exp(x[s]);
                p.dist.skew = std::tanh(x[s + 1]);
                break;
            case DistKind::GED: p.dist.shape = std::exp(x[s]); break;
        }
        return p;
    }

    std::vector<double> to_unconstrained(const ModelParams& p) const {
        std::vector<double> x;
        x.reserve(size());
        std::vector<double> coef;
        for (double a : p.alphas) coef.push_back(a);
        for (double b : p.betas) coef.push_back(b);
        for (double g : p.gammas) coef.push_back(spec_.family == Family::GJR ? 0.5 * g : g);
        if (spec_.family == Family::EGARCH) {
            x.push_back(p.alpha0);
            x.insert(x.end(), coef.begin(), coef.end());
        } else {
            x.push_back(std::log(p.alpha0));
            const double slack = 1.0 - std::accumulate(coef.begin(), coef.end(), 0.0);
            if (!(slack > 0.0)) throw DomainError("starting point violates the stationarity bound");
            for (double c : coef) {
                if (!(c > 0.0)) throw DomainError("starting coefficients must be strictly positive");
                x.push_back(std::log(c / slack));
            }
        }
        switch (spec_.innovation) {
            case DistKind::Normal: break;
            case DistKind::StudentT: x.push_back(std::log(p.dist.shape - 2.0)); break;
            case DistKind::SkewStudentT:
                x.push_back(std::log(p.dist.shape - 2.0));
                x.push_back(std::atanh(p.dist.skew));
                break;
            case DistKind::GED: x.push_back(std::log(p.dist.shape)); break;
        }
        return x;
    }

private:
    ModelSpec spec_;
};

inline std::vector<double> spread(double total, int n) {
    return std::vector<double>(static_cast<std::size_t>(n), n > 0 ? total / n : 0.0);
}

}  // namespace detail

/// The three fixed starting points used by fit_mle, in order. Shock/variance budgets:
/// (0.05, 0.90), (0.10, 0.80), (0.20, 0.60) for GARCH/GJR (GJR splits the shock budget as
/// alpha = b/2, gamma = b); ARCH uses total alpha 0.1, 0.4, 0.7; EGARCH uses
/// beta 0.95/0.90/0.80 with alpha 0.10/0.15/0.25 and gamma -0.05. alpha0 matches the
/// unconditional level to h_init. Shape starts: nu = 8 (t, skew-t), lambda = 0, GED nu = 1.5.
inline std::vector<ModelParams> starting_points(const ModelSpec& spec, double h_init, bool egarch_centered = false) {
    spec.validate();
    InnovationDist dist{spec.innovation, 0.0, 0.0};
    if (spec.innovation == DistKind::StudentT || spec.innovation == DistKind::SkewStudentT) dist.shape = 8.0;
    if (spec.innovation == DistKind::GED) dist.shape = 1.5;

    std::vector<ModelParams> starts;
    const int na = spec.alpha_count(), nb = spec.beta_count(), ng = spec.gamma_count();
    switch (spec.family) {
        case Family::ARCH:
            for (double a : {0.1, 0.4, 0.7})
                starts.push_back({h_init * (1.0 - a), detail::spread(a, na), {}, {}, dist});
            break;
        case Family::GARCH:
            for (auto [a, b] : {std::pair{0.05, 0.90}, {0.10, 0.80}, {0.20, 0.60}})
                starts.push_back({h_init * (1.0 - a - b), detail::spread(a, na), detail::spread(b, nb), {}, dist});
            break;
        case Family::GJR:
            for (auto [a, b] : {std::pair{0.05, 0.90}, {0.10, 0.80}, {0.20, 0.60}})
                starts.push_back({h_init * (1.0 - a - b), detail::spread(0.5 * a, na), detail::spread(b, nb),
                                  detail::spread(a, ng), dist});
            break;
        case Family::EGARCH: {
            const double mean_abs = egarch_centered ? 0.0 : expected_abs(dist);
            for (auto [a, b] : {std::pair{0.10, 0.95}, {0.15, 0.90}, {0.25, 0.80}})
                starts.push_back({(1.0 - b) * std::log(h_init) - a * mean_abs, detail::spread(a, na),
                                  detail::spread(b, nb), std::vector<double>(static_cast<std::size_t>(ng), -0.05),
                                  dist});
            break;
        }
    }
    return starts;
}

/// Maximum-likelihood fit by multi-start Nelder-Mead over the unconstrained reparametrization.
/// Throws NumericalError if no starting point yields a finite likelihood; otherwise returns the
/// best point found with `converged` reporting whether the simplex met its tolerance.
inline FittedModel fit_mle(const ModelSpec& spec, std::span<const double> returns, const FitOptions& opt = {}) {
    spec.validate();
    const int k = spec.param_count();
    if (returns.size() <= static_cast<std::size_t>(10 * k))
        throw LengthError(spec.name() + " needs more than " + std::to_string(10 * k) + " observations");

    const double h_init = backcast_variance(returns);
    const RecursionOptions ropt{opt.egarch_centered};
    const detail::Reparam map(spec);

    auto objective = [&](const std::vector<double>& x) {
        ModelParams p = map.to_params(x);
        if (spec.family == Family::EGARCH && persistence(spec, p) >= 1.0) return std::numeric_limits<double>::infinity();
        for (double c : {p.dist.shape, p.dist.skew})
            if (!std::isfinite(c)) return std::numeric_limits<double>::infinity();
        if (p.dist.kind == DistKind::SkewStudentT && std::abs(p.dist.skew) >= 1.0)
            return std::numeric_limits<double>::infinity();
        if ((p.dist.kind == DistKind::StudentT || p.dist.kind == DistKind::SkewStudentT) && !(p.dist.shape > 2.0))
            return std::numeric_limits<double>::infinity();
        if (p.dist.kind == DistKind::GED && !(p.dist.shape > 0.0)) return std::numeric_limits<double>::infinity();
        if (spec.family != Family::EGARCH && !(p.alpha0 > 0.0)) return std::numeric_limits<double>::infinity();
        return -detail::log_likelihood_unchecked(spec, p, returns, h_init, ropt);
    };

    std::optional<SimplexResult> best;
    std::size_t total_iterations = 0;
    for (const auto& start : starting_points(spec, h_init, opt.egarch_centered)) {
        auto res = nelder_mead(objective, map.to_unconstrained(start), opt.simplex);
        total_iterations += res.iterations;
        if (!best || res.value < best->value) best = std::move(res);
    }
    if (!best || !std::isfinite(best->value))
        throw NumericalError("no finite likelihood found for " + spec.name());

    FittedModel m;
    m.spec = spec;
    m.params = map.to_params(best->x);
    m.h_init = h_init;
    m.n_obs = returns.size();
    m.egarch_centered = opt.egarch_centered;
    m.converged = best->converged;
    m.iterations = total_iterations;
    m.loglik = -best->value;
    const auto ic = information_criteria(m.loglik, k, m.n_obs);
    m.aic = ic.aic;
    m.bic = ic.bic;
    m.in_sample_h = variance_recursion(spec, m.params, returns, h_init, ropt);
    return m;
}

/// Default order grid: ARCH p in 1..15 (q unused); others (p,q) in {1,2,3}^2.
inline std::vector<std::pair<int, int>> default_order_grid(Family family) {
    std::vector<std::pair<int, int>> grid;
    if (family == Family::ARCH) {
        for (int p = 1; p <= 15; ++p) grid.emplace_back(p, 0);
    } else {
        for (int p = 1; p <= 3; ++p)
            for (int q = 1; q <= 3; ++q) grid.emplace_back(p, q);
    }
    return grid;
}

struct OrderSelection {
    FittedModel best;
    std::vector<FittedModel> candidates;
    std::vector<std::string> failures;
};

/// Minimum-BIC choice; ties go to smaller p + q, then smaller p.
inline const FittedModel& pick_min_bic(const std::vector<FittedModel>& fits) {
    if (fits.empty()) throw NumericalError("no candidate fits to select from");
    auto key = [](const FittedModel& m) {
        const int q = m.spec.family == Family::ARCH ? 0 : m.spec.q;
        return std::tuple(m.bic, m.spec.p + q, m.spec.p);
    };
    return *std::min_element(fits.begin(), fits.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
}

inline OrderSelection select_order(Family family, DistKind innovation, const std::vector<std::pair<int, int>>& grid,
                                   std::span<const double> returns, const FitOptions& opt = {},
                                   std::size_t threads = 1) {
    if (grid.empty()) throw DomainError("order grid is empty");
    std::vector<std::optional<FittedModel>> slots(grid.size());
    std::vector<std::string> errors(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        ModelSpec spec{family, grid[i].first, family == Family::ARCH ? 0 : grid[i].second, innovation};
        try {
            slots[i] = fit_mle(spec, returns, opt);
        } catch (const Error& e) {
            errors[i] = spec.name() + ": " + e.what();
        }
    });
    OrderSelection out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (slots[i]) out.candidates.push_back(std::move(*slots[i]));
        if (!errors[i].empty()) out.failures.push_back(errors[i]);
    }
    if (out.candidates.empty())
        throw NumericalError("all fits failed for " + std::string(family_name(family)) + "-" +
                             std::string(dist_tag(innovation)));
    out.best = pick_min_bic(out.candidates);
    return out;
}

/// One-step-ahead variances for t in [start, T) with frozen parameters; the filter is driven by
/// realized returns, so h_t only sees returns before t.
inline std::vector<double> forecast_path(const FittedModel& model, std::span<const double> full_returns,
                                         std::size_t out_of_sample_start) {
    if (out_of_sample_start > full_returns.size())
        throw LengthError("out-of-sample start " + std::to_string(out_of_sample_start) + " beyond series length " +
                          std::to_string(full_returns.size()));
    auto h = variance_recursion(model.spec, model.params, full_returns, model.h_init, model.recursion_options());
    return {h.begin() + static_cast<long>(out_of_sample_start), h.end()};
}

namespace detail {

inline double stationary_level(const ModelSpec& spec, const ModelParams& params, const RecursionOptions& opt) {
    const double pers = persistence(spec, params);
    if (spec.family == Family::EGARCH) {
        double news = 0.0;
        const double mean_abs = expected_abs(params.dist);
        for (double a : params.alphas) news += a * (mean_abs - (opt.egarch_centered ? mean_abs : 0.0));
        double beta_sum = std::accumulate(params.betas.begin(), params.betas.end(), 0.0);
        return std::exp((params.alpha0 + news) / (1.0 - beta_sum));
    }
    return params.alpha0 / (1.0 - pers);
}

inline void check_simulable(const ModelSpec& spec, const ModelParams& params) {
    validate_params(spec, params);
    if (persistence(spec, params) >= 1.0) throw DomainError(spec.name() + " parameters are not stationary");
}

}  // namespace detail

constexpr std::size_t kSimulationBurnIn = 500;

/// Regime-switching simulation: `regimes[(t / block) % regimes.size()]` drives step t (after burn-in,
/// which uses the first regime). Variance state carries across switches.
inline ReturnSeries simulate_switching(const ModelSpec& spec, const std::vector<ModelParams>& regimes,
                                       std::size_t block, std::size_t n, std::uint64_t seed,
                                       const RecursionOptions& opt = {}) {
    if (regimes.empty()) throw DomainError("at least one parameter regime is required");
    if (block == 0) throw DomainError("regime block length must be positive");
    for (const auto& r : regimes) detail::check_simulable(spec, r);
    InnovationSampler draw(regimes.front().dist, seed);
    const double h0 = detail::stationary_level(spec, regimes.front(), opt);
    detail::VarianceFilter filter(spec, regimes.front(), h0, opt, n + kSimulationBurnIn);
    ReturnSeries out;
    out.returns.reserve(n);
    for (std::size_t t = 0; t < n + kSimulationBurnIn; ++t) {
        if (t >= kSimulationBurnIn) filter.set_params(regimes[((t - kSimulationBurnIn) / block) % regimes.size()]);
        const double h = filter.next();
        const double a = std::sqrt(h) * draw();
        filter.push(a, h);
        if (t >= kSimulationBurnIn) out.returns.push_back(a);
    }
    out.dates = business_days(Date{2000, 1, 4}, n);
    return out;
}

/// r_t = sqrt(h_t) * eps_t after discarding a 500-step burn-in.
inline ReturnSeries simulate(const ModelSpec& spec, const ModelParams& params, std::size_t n, std::uint64_t seed,
                             const RecursionOptions& opt = {}) {
    return simulate_switching(spec, {params}, n + 1, n, seed, opt);
}

}  // namespace volblend
