#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "augmentation.hpp"
#include "blending.hpp"
#include "config.hpp"
#include "evaluation.hpp"
#include "feature_bank.hpp"
#include "market_data.hpp"
#include "report.hpp"
#include "svr.hpp"

namespace volblend {

/// A library error tagged with the pipeline stage it came from; keeps the original kind.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error(cause.kind(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

enum class Stage {
    All,    // fit everything from scratch and refresh the fit cache
    Blend,  // reuse cached fits and rerun selection, blending, baselines and evaluation
};

inline Stage parse_stage(const std::string& s) {
    if (s == "all" || s == "fit") return Stage::All;
    if (s == "blend") return Stage::Blend;
    throw ConfigError("unknown stage '" + s + "' (expected all or blend)");
}

struct PipelineOptions {
    Stage stage = Stage::All;
    std::ostream* log = nullptr;
};

struct PipelineResult {
    EvalReport report;
    std::vector<std::string> selected_features;
    std::vector<std::string> warnings;
    std::filesystem::path output_dir;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream seed for a named consumer of the master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    return splitmix64(master ^ fnv1a(tag));
}

inline std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ParseError("cannot read '" + p.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// File name for a model's forecast CSV: punctuation becomes '_'.
inline std::string forecast_file_name(const std::string& model) {
    std::string s;
    for (char c : model) s += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s + ".csv";
}

class StageRunner {
public:
    explicit StageRunner(std::ostream* log) : log_(log) {}

    template <class Fn>
    auto operator()(const std::string& name, Fn&& fn) {
        const auto start = std::chrono::steady_clock::now();
        note(name, "start");
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                done(name, start);
            } else {
                auto out = fn();
                done(name, start);
                return out;
            }
        } catch (const StageError&) {
            throw;
        } catch (const Error& e) {
            throw StageError(name, e);
        } catch (const std::filesystem::filesystem_error& e) {
            throw StageError(name, ParseError(e.what()));
        }
    }

    void note(const std::string& stage, const std::string& msg) const {
        if (log_) *log_ << "[" << stage << "] " << msg << '\n' << std::flush;
    }

private:
    void done(const std::string& name, std::chrono::steady_clock::time_point start) const {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ostringstream os;
        os << std::fixed << std::setprecision(1) << "done in " << s << " s";
        note(name, os.str());
    }

    std::ostream* log_;
};

struct Forecast {
    std::string name;
    std::vector<double> values;  // one per time point from the validation start to the series end
};

}  // namespace detail

/// Runs ingest -> fits -> feature bank -> selection -> blends -> augmentation -> baselines ->
/// evaluation and writes every artifact to `cfg.output_dir`. Artifacts are staged and moved into
/// place only after every stage succeeded.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineOptions& opt = {}) {
    detail::StageRunner stage(opt.log);
    PipelineResult result;
    result.output_dir = cfg.output_dir;
    auto warn = [&](const std::string& where, const std::string& msg) {
        result.warnings.push_back(where + ": " + msg);
        stage.note(where, "warning: " + msg);
    };

    // Ingest and split.
    struct Data {
        std::string bytes;
        ReturnSeries returns;
        SplitSpec split;
        std::vector<double> proxy;
    };
    const Data data = stage("data", [&] {
        Data d;
        d.bytes = detail::read_file(cfg.data_path);
        std::istringstream in(d.bytes);
        d.returns = log_returns(read_prices(in));
        const std::size_t T = d.returns.size();
        d.split = {cfg.train_len, cfg.val_len, cfg.test_len};
        if (d.split.train_len == 0) {
            if (T <= cfg.val_len + cfg.test_len)
                throw LengthError("series of " + std::to_string(T) + " returns leaves no training data");
            d.split.train_len = T - cfg.val_len - cfg.test_len;
        }
        split(d.returns, d.split);
        if (d.split.train_len < 50) throw LengthError("training split needs at least 50 returns");
        d.proxy = realized_vol_proxy(d.returns.returns);
        return d;
    });
    const std::size_t T = data.returns.size();
    const std::size_t train_len = data.split.train_len;
    const std::size_t val_end = train_len + data.split.val_len;
    const std::span<const double> train(data.returns.returns.data(), train_len);

    // Every model needed by the bank and the single-model order searches, fitted once.
    constexpr DistKind kDists[] = {DistKind::Normal, DistKind::StudentT, DistKind::SkewStudentT, DistKind::GED};
    constexpr Family kFamilies[] = {Family::ARCH, Family::GARCH, Family::EGARCH, Family::GJR};
    std::vector<ModelSpec> to_fit;
    {
        std::set<std::string> seen;
        auto add = [&](const ModelSpec& s) {
            if (seen.insert(s.name()).second) to_fit.push_back(s);
        };
        for (const auto& s : cfg.bank) add(s);
        if (cfg.single_models)
            for (Family f : kFamilies)
                for (auto d : kDists)
                    for (auto [p, q] : cfg.order_grid(f)) add(ModelSpec{f, p, q, d});
    }
    const FitOptions fit_opt = cfg.fit_options();
    std::uint64_t cache_key = detail::fnv1a(data.bytes);
    {
        std::ostringstream os;
        os << train_len << '|' << fit_opt.egarch_centered << '|' << fit_opt.simplex.max_iterations << '|'
           << fit_opt.simplex.cycle_tolerance << '|' << fit_opt.simplex.initial_step;
        for (const auto& s : to_fit) os << '|' << s.name();
        cache_key = detail::fnv1a(os.str(), cache_key);
    }
    const auto cache_path = cfg.output_dir / ".cache" / ("fits-" + detail::hex(cache_key) + ".json");

    std::map<std::string, FittedModel> fits;
    std::map<std::string, std::string> fit_failures;
    stage("fit", [&] {
        if (opt.stage == Stage::Blend) {
            if (!std::filesystem::exists(cache_path))
                throw ConfigError("no cached fits for this data and bank (" + cache_path.string() +
                                  "); run the full pipeline first");
            const auto j = Json::parse(detail::read_file(cache_path));
            for (const auto& m : j.at("fits")) {
                auto f = fitted_model_from_json(m, train);
                fits.emplace(f.spec.name(), std::move(f));
            }
            for (const auto& [k, v] : j.at("failures").items()) fit_failures[k] = v.get<std::string>();
            stage.note("fit", "loaded " + std::to_string(fits.size()) + " fits from cache");
            return;
        }
        stage.note("fit", "fitting " + std::to_string(to_fit.size()) + " models on " + std::to_string(train_len) +
                              " training returns");
        std::vector<std::optional<FittedModel>> slots(to_fit.size());
        std::vector<std::string> errors(to_fit.size());
        parallel_for(to_fit.size(), cfg.threads, [&](std::size_t i) {
            try {
                slots[i] = fit_mle(to_fit[i], train, fit_opt);
            } catch (const Error& e) {
                errors[i] = e.what();
            }
        });
        Json cache{{"key", detail::hex(cache_key)}, {"fits", Json::array()}, {"failures", Json::object()}};
        for (std::size_t i = 0; i < to_fit.size(); ++i) {
            if (slots[i]) {
                cache["fits"].push_back(to_json(*slots[i]));
                fits.emplace(to_fit[i].name(), std::move(*slots[i]));
            } else {
                fit_failures[to_fit[i].name()] = errors[i];
                cache["failures"][to_fit[i].name()] = errors[i];
            }
        }
        std::filesystem::create_directories(cache_path.parent_path());
        std::ofstream(cache_path) << cache.dump() << '\n';
    });

    // Feature bank over the whole series; failed specs are dropped.
    FeatureMatrix X = stage("bank", [&] {
        std::vector<FittedModel> models;
        for (const auto& s : cfg.bank) {
            auto it = fits.find(s.name());
            if (it == fits.end()) {
                warn("bank", "dropped " + s.name() + ": " + fit_failures[s.name()]);
                continue;
            }
            models.push_back(it->second);
        }
        if (models.empty()) throw NumericalError("every feature-bank fit failed");
        return assemble_feature_matrix(models, data.returns, train_len);
    });
    const std::size_t N = X.features();

    // BIC-selected single models, one per family and innovation.
    std::vector<FittedModel> singles = stage("orders", [&] {
        std::vector<FittedModel> out;
        if (!cfg.single_models) return out;
        for (Family f : kFamilies)
            for (auto d : kDists) {
                std::vector<FittedModel> cands;
                for (auto [p, q] : cfg.order_grid(f)) {
                    auto it = fits.find(ModelSpec{f, p, q, d}.name());
                    if (it != fits.end()) cands.push_back(it->second);
                }
                const std::string label = std::string(family_name(f)) + "-" + std::string(dist_tag(d));
                if (cands.empty()) {
                    warn("orders", "every " + label + " fit failed; row omitted");
                    continue;
                }
                out.push_back(pick_min_bic(cands));
            }
        return out;
    });

    // Feature sets: random subsets of each size K, then the correlation-filtered set.
    struct FeatureSet {
        std::string label;
        std::vector<std::size_t> columns;
    };
    CorrelationMatrix corr;
    std::vector<double> mean_corr;
    const std::vector<FeatureSet> sets = stage("selection", [&] {
        std::vector<FeatureSet> out;
        for (auto k : cfg.random_k) {
            if (k > N)
                throw ConfigError("random subset size " + std::to_string(k) + " exceeds the " + std::to_string(N) +
                                  " fitted features");
            out.push_back({std::to_string(k), random_feature_subset(N, k, detail::derive_seed(cfg.seed, "subset-" + std::to_string(k)))});
        }
        if (N >= 2) {
            corr = correlation_matrix(X, 0, train_len);
            mean_corr = mean_off_diagonal(corr);
        }
        if (cfg.correlation_selection) {
            if (N < 2) throw LengthError("correlation selection needs at least two features");
            auto chosen = select_features(corr, cfg.threshold);
            const std::size_t floor_count = std::min(cfg.min_features, N);
            if (chosen.size() < floor_count) {
                warn("selection", std::to_string(chosen.size()) + " features below the mean-correlation threshold; "
                                  "filling up to " + std::to_string(floor_count) + " by lowest mean correlation");
                std::vector<std::size_t> order(N);
                std::iota(order.begin(), order.end(), std::size_t{0});
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) { return mean_corr[a] < mean_corr[b]; });
                for (std::size_t idx : order) {
                    if (chosen.size() >= floor_count) break;
                    if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) chosen.push_back(idx);
                }
                std::sort(chosen.begin(), chosen.end());
            }
            for (auto c : chosen) result.selected_features.push_back(X.labels[c]);
            stage.note("selection", std::to_string(chosen.size()) + " of " + std::to_string(N) + " features selected");
            out.push_back({"CO", chosen});
        }
        return out;
    });

    // Blends. Models train on rows with a defined proxy before the validation split.
    const std::size_t first_row = kProxyWarmup;
    const std::span<const double> proxy(data.proxy);
    const auto target_train = proxy.subspan(first_row, train_len - first_row);
    const auto target_val = proxy.subspan(train_len, data.split.val_len);
    std::vector<detail::Forecast> blends;
    Json blend_manifest = Json::object();
    stage("blend", [&] {
        for (auto method : cfg.blend_methods) {
            for (const auto& set : sets) {
                const FeatureMatrix Xs = X.select(set.columns);
                std::vector<double> full;
                Json info{{"method", blend_method_name(method)}, {"features", Xs.labels}};
                std::string name;
                if (method == BlendMethod::Uniform) {
                    name = "UBARCH(" + set.label + ")";
                    full = uniform_blend(Xs.values);
                } else if (method == BlendMethod::Ols) {
                    name = "BARCH(" + set.label + ")";
                    const auto w = ols_fit(Xs.values.middleRows(static_cast<Eigen::Index>(first_row),
                                                                static_cast<Eigen::Index>(train_len - first_row)),
                                           target_train);
                    if (!w.warning.empty()) warn("blend", name + ": " + w.warning);
                    full = linear_blend(Xs.values, w);
                    info["ols"] = to_json(w);
                } else {
                    name = "BARCH-NN(" + set.label + ")";
                    MlpConfig mc = cfg.mlp;
                    mc.seed = detail::derive_seed(cfg.seed, "mlp-" + set.label);
                    const Eigen::MatrixXd P = Xs.predictions(0, T);
                    const auto m = mlp_fit(P.middleRows(static_cast<Eigen::Index>(first_row),
                                                        static_cast<Eigen::Index>(train_len - first_row)),
                                           target_train,
                                           P.middleRows(static_cast<Eigen::Index>(train_len),
                                                        static_cast<Eigen::Index>(data.split.val_len)),
                                           target_val, mc);
                    stage.note("blend", name + ": best epoch " + std::to_string(m.best_epoch) + " of " +
                                            std::to_string(m.epochs_run));
                    full = mlp_predict(m, P);
                    info["mlp"] = to_json(m);
                }
                std::vector<double> tail(full.begin() + static_cast<long>(train_len), full.end());
                if (cfg.floor_negative) floor_at_zero(tail);
                blends.push_back({name, std::move(tail)});
                blend_manifest[name] = std::move(info);
            }
        }
    });

    // SVR-GARCH baseline.
    std::optional<detail::Forecast> svr_forecast;
    Json svr_manifest;
    stage("svr", [&] {
        if (!cfg.svr) return;
        const auto res = svr_garch_forecast(data.returns.returns, train_len, data.split.val_len, cfg.svr_grid,
                                            cfg.svr_options, cfg.threads);
        for (const auto* st : {&res.mean_stage, &res.variance_stage})
            if (st->failed_cells > 0)
                warn("svr", std::to_string(st->failed_cells) + " grid cells did not converge and were skipped");
        auto f = res.forecasts;
        if (cfg.floor_negative) floor_at_zero(f);
        svr_forecast = detail::Forecast{"SVR-GARCH", std::move(f)};
        svr_manifest = Json{{"mean_stage", to_json(res.mean_stage)}, {"variance_stage", to_json(res.variance_stage)}};
    });

    // Augmented variants of every blend and of SVR-GARCH.
    std::vector<detail::Forecast> augmented;
    Json augment_manifest = Json::object();
    stage("augment", [&] {
        if (!cfg.augment) return;
        const double proxy_std = finite_std(proxy.first(train_len));
        std::vector<const detail::Forecast*> bases;
        for (const auto& b : blends) bases.push_back(&b);
        if (svr_forecast) bases.push_back(&*svr_forecast);
        for (const auto* b : bases) {
            AugmentConfig ac = cfg.augment_cfg;
            if (cfg.augment_tune) {
                const auto choice = tune_augment(std::span<const double>(b->values).first(data.split.val_len),
                                                 train_len, proxy, target_val, proxy_std, ac.scale_mode,
                                                 cfg.augment_windows, cfg.augment_sigmas);
                ac = choice.config;
            }
            auto out = augment(b->values, train_len, proxy, ac, proxy_std);
            if (cfg.floor_negative) floor_at_zero(out);
            const std::string name = "a" + b->name;
            augment_manifest[name] = Json{{"window", ac.M},
                                          {"sigma", ac.sigma},
                                          {"scale_mode", scale_mode_name(ac.scale_mode)},
                                          {"effective_sigma", effective_sigma(ac, proxy_std)}};
            augmented.push_back({name, std::move(out)});
        }
    });

    // Scoring on the test window, identical for every model.
    std::vector<detail::Forecast> rows;
    result.report = stage("evaluate", [&] {
        std::vector<double> eav(proxy.begin() + static_cast<long>(train_len) - 1, proxy.end() - 1);
        rows.push_back({"Eavesdrop", std::move(eav)});
        for (const auto& b : blends) rows.push_back(b);
        for (const auto& a : augmented)
            if (a.name != "aSVR-GARCH") rows.push_back(a);
        if (svr_forecast) rows.push_back(*svr_forecast);
        for (const auto& a : augmented)
            if (a.name == "aSVR-GARCH") rows.push_back(a);
        for (const auto& m : singles) rows.push_back({m.spec.name(), forecast_path(m, data.returns.returns, train_len)});

        const std::size_t off = val_end - train_len;
        const auto y = proxy.subspan(val_end);
        EvalReport rep;
        rep.benchmark = cfg.benchmark;
        rep.dates.assign(data.returns.dates.begin() + static_cast<long>(val_end), data.returns.dates.end());
        const detail::Forecast* bench = nullptr;
        for (const auto& r : rows) {
            if (r.values.size() != T - train_len) throw LengthError(r.name + " forecast does not cover the window");
            const auto f = std::span<const double>(r.values).subspan(off);
            for (double v : f)
                if (!std::isfinite(v)) throw NumericalError(r.name + " produced a non-finite forecast");
            rep.scores.push_back({r.name, rmse(y, f), mae(y, f)});
            if (r.name == cfg.benchmark) bench = &r;
        }
        if (!bench) throw ConfigError("benchmark '" + cfg.benchmark + "' is not among the evaluated models");
        const auto b = std::span<const double>(bench->values).subspan(off);
        DmOptions dmo;
        dmo.harvey_correction = cfg.harvey_correction;
        for (const auto& r : rows) {
            if (&r == bench) continue;
            DmRow row{r.name, {}, {}};
            try {
                row.result = dm_test(y, b, std::span<const double>(r.values).subspan(off), dmo);
                if (row.result.degenerate) row.note = "identical losses";
            } catch (const NumericalError& e) {
                row.result.stat = std::numeric_limits<double>::quiet_NaN();
                row.result.p_value = std::numeric_limits<double>::quiet_NaN();
                row.note = e.what();
                warn("evaluate", r.name + ": " + e.what());
            }
            rep.dm.push_back(row);
        }
        return rep;
    });

    // Artifacts: staged in a scratch directory, then moved into place.
    stage("write", [&] {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.output_dir);
        const fs::path staging = cfg.output_dir / ".staging";
        fs::remove_all(staging);
        fs::create_directories(staging / "forecasts");
        try {
            auto write = [&](const fs::path& rel, auto&& body) {
                std::ofstream os(staging / rel, std::ios::binary);
                if (!os) throw ParseError("cannot write " + (staging / rel).string());
                body(os);
                if (!os) throw ParseError("write failed for " + (staging / rel).string());
            };
            write("eval_report.csv", [&](std::ostream& os) { write_scores_csv(os, result.report); });
            write("eval_report.json", [&](std::ostream& os) { os << scores_json(result.report).dump(2) << '\n'; });
            write("dm_report.csv", [&](std::ostream& os) { write_dm_csv(os, result.report); });
            write("dm_report.json", [&](std::ostream& os) { os << dm_json(result.report).dump(2) << '\n'; });
            for (const auto& r : rows) {
                write(fs::path("forecasts") / detail::forecast_file_name(r.name), [&](std::ostream& os) {
                    os << "date,predicted_h,realized_proxy\n";
                    for (std::size_t t = val_end; t < T; ++t)
                        os << data.returns.dates[t].iso() << ',' << format_double(r.values[t - train_len])
                           << ',' << format_double(proxy[t]) << '\n';
                });
            }
            if (N >= 2) {
                write("correlation_matrix.csv", [&](std::ostream& os) { write_csv(os, corr); });
                if (!result.selected_features.empty()) {
                    std::vector<std::size_t> idx;
                    for (const auto& name : result.selected_features)
                        idx.push_back(static_cast<std::size_t>(
                            std::find(X.labels.begin(), X.labels.end(), name) - X.labels.begin()));
                    CorrelationMatrix sub;
                    sub.labels = result.selected_features;
                    sub.values.resize(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
                    for (std::size_t i = 0; i < idx.size(); ++i)
                        for (std::size_t j = 0; j < idx.size(); ++j)
                            sub.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                                corr.values(static_cast<Eigen::Index>(idx[i]), static_cast<Eigen::Index>(idx[j]));
                    write("selected_correlation_matrix.csv", [&](std::ostream& os) { write_csv(os, sub); });
                }
            }
            if (cfg.write_features) write("features.csv", [&](std::ostream& os) { write_csv(os, X); });

            Json bank = Json::array();
            for (const auto& s : cfg.bank) {
                auto it = fits.find(s.name());
                if (it != fits.end()) bank.push_back(to_json(it->second));
            }
            Json single = Json::array();
            for (const auto& m : singles) single.push_back(to_json(m));
            Json mean_corr_json = Json::object();
            for (std::size_t j = 0; j < mean_corr.size(); ++j) mean_corr_json[X.labels[j]] = mean_corr[j];
            Json feature_sets = Json::object();
            for (const auto& s : sets) {
                Json names = Json::array();
                for (auto c : s.columns) names.push_back(X.labels[c]);
                feature_sets[s.label] = names;
            }
            Json manifest{{"data",
                           {{"observations", T},
                            {"first_date", data.returns.dates.front().iso()},
                            {"last_date", data.returns.dates.back().iso()},
                            {"describe", to_json(describe(data.returns))}}},
                          {"split",
                           {{"train", train_len}, {"validation", data.split.val_len}, {"test", data.split.test_len}}},
                          {"seed", cfg.seed},
                          {"bank", bank},
                          {"fit_failures", fit_failures},
                          {"single_models", single},
                          {"selection",
                           {{"threshold", cfg.threshold},
                            {"mean_correlation", mean_corr_json},
                            {"selected", result.selected_features}}},
                          {"feature_sets", feature_sets},
                          {"warnings", result.warnings}};
            write("fitted_models.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
            Json blend_models{{"blends", blend_manifest}, {"augment", augment_manifest}};
            if (cfg.svr) blend_models["svr_garch"] = svr_manifest;
            write("blend_models.json", [&](std::ostream& os) { os << blend_models.dump(2) << '\n'; });

            fs::remove_all(cfg.output_dir / "forecasts");
            for (const auto& entry : fs::directory_iterator(staging)) {
                const auto target = cfg.output_dir / entry.path().filename();
                if (!entry.is_directory()) fs::remove(target);
                fs::rename(entry.path(), target);
            }
            fs::remove_all(staging);
        } catch (...) {
            std::error_code ec;
            fs::remove_all(staging, ec);
            throw;
        }
    });
    return result;
}

/// Validates first; every problem is reported in one configuration error.
inline PipelineResult run_pipeline(const ParsedConfig& parsed, const PipelineOptions& opt = {}) {
    const auto problems = validate_config(parsed);
    if (!problems.empty()) {
        std::string msg = "stage 'config': invalid configuration";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return run_pipeline(parsed.config, opt);
}

}  // namespace volblend
