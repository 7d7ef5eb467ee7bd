#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "arch_family.hpp"
#include "blending.hpp"
#include "evaluation.hpp"
#include "market_data.hpp"
#include "svr.hpp"

namespace volblend {

using Json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double; NaN and infinities are spelled out.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

/// JSON has no NaN; undefined values become null.
inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::vector<double> json_doubles(const Json& j) {
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
}

inline Json to_json(const DescriptiveStats& s) {
    return Json{{"observations", s.observations}, {"mean", s.mean},         {"std_dev", s.std_dev},
                {"median", s.median},             {"kurtosis", s.kurtosis}, {"skewness", s.skewness},
                {"maximum", s.maximum},           {"minimum", s.minimum}};
}

inline Json to_json(const ModelParams& p) {
    Json j{{"alpha0", p.alpha0}, {"alphas", p.alphas}, {"betas", p.betas}, {"gammas", p.gammas}};
    const int shapes = shape_param_count(p.dist.kind);
    if (shapes >= 1) j["shape"] = p.dist.shape;
    if (p.dist.kind == DistKind::SkewStudentT) j["skew"] = p.dist.skew;
    return j;
}

/// Raw criteria are stored; the per-observation values match the magnitude of published fit tables.
inline Json to_json(const FittedModel& m) {
    const double n = static_cast<double>(m.n_obs);
    return Json{{"name", m.spec.name()},
                {"family", std::string(family_name(m.spec.family))},
                {"p", m.spec.p},
                {"q", m.spec.q},
                {"innovation", std::string(dist_tag(m.spec.innovation))},
                {"params", to_json(m.params)},
                {"loglik", m.loglik},
                {"aic", m.aic},
                {"bic", m.bic},
                {"aic_per_obs", m.aic / n},
                {"bic_per_obs", m.bic / n},
                {"n_obs", m.n_obs},
                {"h_init", m.h_init},
                {"egarch_centered", m.egarch_centered},
                {"converged", m.converged},
                {"iterations", m.iterations}};
}

/// Rebuilds a fitted model from its JSON form; the in-sample path is recomputed from `train`.
inline FittedModel fitted_model_from_json(const Json& j, std::span<const double> train) {
    FittedModel m;
    m.spec = ModelSpec::parse(j.at("name").get<std::string>());
    const auto& p = j.at("params");
    m.params.alpha0 = p.at("alpha0").get<double>();
    m.params.alphas = json_doubles(p.at("alphas"));
    m.params.betas = json_doubles(p.at("betas"));
    m.params.gammas = json_doubles(p.at("gammas"));
    m.params.dist.kind = m.spec.innovation;
    if (p.contains("shape")) m.params.dist.shape = p.at("shape").get<double>();
    if (p.contains("skew")) m.params.dist.skew = p.at("skew").get<double>();
    m.loglik = j.at("loglik").get<double>();
    m.aic = j.at("aic").get<double>();
    m.bic = j.at("bic").get<double>();
    m.n_obs = j.at("n_obs").get<std::size_t>();
    m.h_init = j.at("h_init").get<double>();
    m.egarch_centered = j.at("egarch_centered").get<bool>();
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<std::size_t>();
    if (m.n_obs != train.size()) throw LengthError(m.spec.name() + ": cached fit used a different training length");
    m.in_sample_h = variance_recursion(m.spec, m.params, train, m.h_init, m.recursion_options());
    return m;
}

inline Json to_json(const BlendWeights& w) {
    Json j{{"weights", std::vector<double>(w.w.data(), w.w.data() + w.w.size())}, {"rank", w.rank}};
    if (!w.warning.empty()) j["warning"] = w.warning;
    return j;
}

inline Json to_json(const MlpConfig& c) {
    return Json{{"hidden", c.hidden},
                {"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"alpha", c.alpha},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"adam_epsilon", c.adam_epsilon},
                {"max_epochs", c.max_epochs},
                {"patience", c.patience},
                {"seed", c.seed},
                {"shuffle", c.shuffle},
                {"standardize_inputs", c.standardize_inputs},
                {"standardize_target", c.standardize_target}};
}

inline Json to_json(const MlpModel& m) {
    Json layers = Json::array();
    for (const auto& l : m.layers) {
        Json W = Json::array();
        for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
            const Eigen::RowVectorXd row = l.W.row(r);
            W.push_back(std::vector<double>(row.data(), row.data() + row.size()));
        }
        layers.push_back(Json{{"W", W}, {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
    }
    auto vec = [](const Eigen::RowVectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return Json{{"config", to_json(m.config)},
                {"epochs_run", m.epochs_run},
                {"best_epoch", m.best_epoch},
                {"input_mean", vec(m.input_mean)},
                {"input_scale", vec(m.input_scale)},
                {"target_mean", m.target_mean},
                {"target_scale", m.target_scale},
                {"layers", layers}};
}

inline Json to_json(const SvrSelection& s) {
    const auto& h = s.model.hyper;
    return Json{{"C", h.C},
                {"epsilon", h.epsilon},
                {"gamma", h.gamma},
                {"validation_rmse", s.validation_rmse},
                {"support_vectors", s.model.support.rows()},
                {"intercept", s.model.intercept},
                {"iterations", s.model.iterations},
                {"failed_cells", s.failed_cells}};
}

struct ScoreRow {
    std::string model;
    double rmse = 0.0;
    double mae = 0.0;
};

struct DmRow {
    std::string model;
    DmResult result;
    std::string note;  // set when the statistic could not be computed
};

/// Forecast accuracy and significance against one benchmark, over a common window.
struct EvalReport {
    std::string benchmark;
    std::vector<Date> dates;
    std::vector<ScoreRow> scores;
    std::vector<DmRow> dm;

    const ScoreRow* find(const std::string& model) const {
        for (const auto& s : scores)
            if (s.model == model) return &s;
        return nullptr;
    }
};

inline void write_scores_csv(std::ostream& os, const EvalReport& r) {
    os << "model,rmse,mae,rmse_x1e3,mae_x1e3\n";
    for (const auto& s : r.scores)
        os << csv_field(s.model) << ',' << format_double(s.rmse) << ',' << format_double(s.mae) << ','
           << format_double(s.rmse * 1e3) << ',' << format_double(s.mae * 1e3) << '\n';
}

inline Json scores_json(const EvalReport& r) {
    Json rows = Json::array();
    for (const auto& s : r.scores)
        rows.push_back(Json{{"model", s.model}, {"rmse", s.rmse}, {"mae", s.mae}, {"rmse_x1e3", s.rmse * 1e3},
                            {"mae_x1e3", s.mae * 1e3}});
    return Json{{"window", {{"first", r.dates.empty() ? "" : r.dates.front().iso()},
                            {"last", r.dates.empty() ? "" : r.dates.back().iso()},
                            {"observations", r.dates.size()}}},
                {"models", rows}};
}

/// Positive statistics mean the model has the smaller absolute error than the benchmark.
inline void write_dm_csv(std::ostream& os, const EvalReport& r) {
    os << "model,benchmark,dm_stat,p_value,mean_diff,n_lags,degenerate,note\n";
    for (const auto& d : r.dm)
        os << csv_field(d.model) << ',' << csv_field(r.benchmark) << ',' << format_double(d.result.stat) << ','
           << format_double(d.result.p_value) << ',' << format_double(d.result.mean_diff) << ',' << d.result.n_lags
           << ',' << (d.result.degenerate ? "true" : "false") << ',' << csv_field(d.note) << '\n';
}

inline Json dm_json(const EvalReport& r) {
    Json rows = Json::array();
    for (const auto& d : r.dm) {
        Json j{{"model", d.model},
               {"dm_stat", json_number(d.result.stat)},
               {"p_value", json_number(d.result.p_value)},
               {"mean_diff", json_number(d.result.mean_diff)},
               {"n_lags", d.result.n_lags},
               {"degenerate", d.result.degenerate}};
        if (!d.note.empty()) j["note"] = d.note;
        rows.push_back(j);
    }
    return Json{{"benchmark", r.benchmark}, {"loss", "absolute error"}, {"models", rows}};
}

}  // namespace volblend
