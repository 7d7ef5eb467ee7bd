#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "arch_family.hpp"
#include "augmentation.hpp"
#include "blending.hpp"
#include "error.hpp"
#include "feature_bank.hpp"
#include "svr.hpp"

namespace volblend {

enum class BlendMethod { Uniform, Ols, Mlp };

inline std::string blend_method_name(BlendMethod m) {
    switch (m) {
        case BlendMethod::Uniform: return "uniform";
        case BlendMethod::Ols: return "ols";
        case BlendMethod::Mlp: return "mlp";
    }
    return "?";
}

struct PipelineConfig {
    std::filesystem::path source;  // the config file itself; relative paths resolve against its directory

    std::filesystem::path data_path;

    std::size_t train_len = 0;  // 0: whatever remains after validation and test
    std::size_t val_len = 252;
    std::size_t test_len = 252;

    std::vector<ModelSpec> bank = default_bank();

    bool single_models = true;  // BIC-selected model per family and innovation
    int arch_max_p = 15;
    int max_order = 3;

    bool correlation_selection = true;
    double threshold = 0.9;
    std::size_t min_features = 10;  // lowest-mean features fill a smaller selection, capped at the bank size
    std::vector<std::size_t> random_k{5, 15, 35, 55, 75};

    std::vector<BlendMethod> blend_methods{BlendMethod::Ols, BlendMethod::Mlp};
    bool floor_negative = true;
    MlpConfig mlp = [] {
        MlpConfig c;
        c.standardize_target = true;
        return c;
    }();

    bool augment = true;
    AugmentConfig augment_cfg;
    bool augment_tune = false;
    std::vector<std::size_t> augment_windows{5, 15, 35};
    std::vector<double> augment_sigmas{0.0, 0.05, 0.1, 0.2};

    bool svr = true;
    SvrGrid svr_grid;
    SvrOptions svr_options;

    std::string benchmark = "SVR-GARCH";
    bool harvey_correction = false;

    std::filesystem::path output_dir = "out";
    bool write_features = true;

    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0: hardware concurrency
    bool egarch_centered = false;
    int fit_max_iterations = 5000;

    /// Order grid used for the BIC-selected single models of one family.
    std::vector<std::pair<int, int>> order_grid(Family f) const {
        std::vector<std::pair<int, int>> grid;
        if (f == Family::ARCH) {
            for (int p = 1; p <= arch_max_p; ++p) grid.emplace_back(p, 0);
        } else {
            for (int p = 1; p <= max_order; ++p)
                for (int q = 1; q <= max_order; ++q) grid.emplace_back(p, q);
        }
        return grid;
    }

    FitOptions fit_options() const {
        FitOptions o;
        o.egarch_centered = egarch_centered;
        o.simplex.max_iterations = static_cast<std::size_t>(fit_max_iterations);
        return o;
    }
};

namespace detail {

/// Splits a list on commas and whitespace outside parentheses, so model names like GARCH-N(1,1)
/// stay whole.
inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : text) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (depth == 0 && (c == ',' || std::isspace(static_cast<unsigned char>(c)))) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

/// Collects field problems while reading typed values.
class FieldReader {
public:
    FieldReader(const boost::property_tree::ptree& tree, std::vector<std::string>& problems)
        : tree_(tree), problems_(problems) {}

    std::optional<std::string> raw(const std::string& key) {
        used_.insert(key);
        auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return trim(*v);
    }

    void text(const std::string& key, std::string& out) {
        if (auto v = raw(key)) out = *v;
    }

    template <class T>
    void number(const std::string& key, T& out) {
        auto v = raw(key);
        if (!v) return;
        if (auto parsed = parse<T>(*v)) {
            out = *parsed;
        } else {
            problems_.push_back(key + ": cannot read '" + *v + "' as a number");
        }
    }

    void flag(const std::string& key, bool& out) {
        auto v = raw(key);
        if (!v) return;
        const auto s = lower(*v);
        if (s == "true" || s == "yes" || s == "on" || s == "1") {
            out = true;
        } else if (s == "false" || s == "no" || s == "off" || s == "0") {
            out = false;
        } else {
            problems_.push_back(key + ": expected true or false, got '" + *v + "'");
        }
    }

    template <class T>
    void numbers(const std::string& key, std::vector<T>& out) {
        auto v = raw(key);
        if (!v) return;
        std::vector<T> parsed;
        for (const auto& item : split_list(*v)) {
            if (auto x = parse<T>(item)) {
                parsed.push_back(*x);
            } else {
                problems_.push_back(key + ": cannot read '" + item + "' as a number");
                return;
            }
        }
        out = std::move(parsed);
    }

    /// Keys present in the file but never read.
    std::vector<std::string> unknown_keys() const {
        std::vector<std::string> out;
        for (const auto& [section, body] : tree_) {
            if (body.empty()) {
                out.push_back(section);
                continue;
            }
            for (const auto& [key, value] : body)
                if (!used_.count(section + "." + key)) out.push_back(section + "." + key);
        }
        return out;
    }

private:
    template <class T>
    static std::optional<T> parse(const std::string& s) {
        T value{};
        const char* first = s.data();
        const char* last = s.data() + s.size();
        if constexpr (std::is_floating_point_v<T>) {
            char* end = nullptr;
            const double d = std::strtod(first, &end);
            if (s.empty() || end != last) return std::nullopt;
            return static_cast<T>(d);
        } else {
            if (!s.empty() && s.front() == '-' && std::is_unsigned_v<T>) return std::nullopt;
            auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc{} || ptr != last) return std::nullopt;
            return value;
        }
    }

    const boost::property_tree::ptree& tree_;
    std::vector<std::string>& problems_;
    std::set<std::string> used_;
};

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace detail

/// A parsed config plus every problem found while reading it.
struct ParsedConfig {
    PipelineConfig config;
    std::vector<std::string> problems;
};

/// Reads the INI text. Field-level problems are collected; only an unreadable file throws.
inline ParsedConfig parse_config(std::istream& in, const std::filesystem::path& source = {}) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("cannot parse config " + source.string() + ": " + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
    }
    ParsedConfig out;
    auto& c = out.config;
    c.source = source;
    const auto base = source.has_parent_path() ? source.parent_path() : std::filesystem::path(".");
    detail::FieldReader r(tree, out.problems);

    std::string data_path;
    r.text("data.path", data_path);
    if (data_path.empty()) {
        out.problems.push_back("data.path: a price CSV is required");
    } else {
        c.data_path = detail::resolve(base, data_path);
    }

    r.number("split.train", c.train_len);
    r.number("split.validation", c.val_len);
    r.number("split.test", c.test_len);

    if (auto specs = r.raw("bank.specs")) {
        if (detail::lower(*specs) != "default") {
            c.bank.clear();
            for (const auto& name : detail::split_list(*specs)) {
                try {
                    c.bank.push_back(ModelSpec::parse(name));
                } catch (const Error& e) {
                    out.problems.push_back(std::string("bank.specs: ") + e.what());
                }
            }
        }
    }

    r.flag("orders.single_models", c.single_models);
    r.number("orders.arch_max_p", c.arch_max_p);
    r.number("orders.max_order", c.max_order);

    r.flag("selection.correlation", c.correlation_selection);
    r.number("selection.threshold", c.threshold);
    r.number("selection.min_features", c.min_features);
    r.numbers("selection.random_k", c.random_k);

    if (auto methods = r.raw("blend.methods")) {
        c.blend_methods.clear();
        for (const auto& m : detail::split_list(*methods)) {
            const auto s = detail::lower(m);
            if (s == "uniform") c.blend_methods.push_back(BlendMethod::Uniform);
            else if (s == "ols") c.blend_methods.push_back(BlendMethod::Ols);
            else if (s == "mlp") c.blend_methods.push_back(BlendMethod::Mlp);
            else out.problems.push_back("blend.methods: unknown method '" + m + "' (expected uniform, ols, mlp)");
        }
    }
    r.flag("blend.floor_negative", c.floor_negative);

    r.numbers("mlp.hidden", c.mlp.hidden);
    r.number("mlp.learning_rate", c.mlp.learning_rate);
    r.number("mlp.batch_size", c.mlp.batch_size);
    r.number("mlp.alpha", c.mlp.alpha);
    r.number("mlp.beta1", c.mlp.beta1);
    r.number("mlp.beta2", c.mlp.beta2);
    r.number("mlp.adam_epsilon", c.mlp.adam_epsilon);
    r.number("mlp.max_epochs", c.mlp.max_epochs);
    r.number("mlp.patience", c.mlp.patience);
    r.flag("mlp.shuffle", c.mlp.shuffle);
    r.flag("mlp.standardize_inputs", c.mlp.standardize_inputs);
    r.flag("mlp.standardize_target", c.mlp.standardize_target);

    r.flag("augment.enabled", c.augment);
    r.number("augment.window", c.augment_cfg.M);
    r.number("augment.sigma", c.augment_cfg.sigma);
    if (auto mode = r.raw("augment.scale_mode")) {
        try {
            c.augment_cfg.scale_mode = parse_scale_mode(*mode);
        } catch (const Error& e) {
            out.problems.push_back(std::string("augment.scale_mode: ") + e.what());
        }
    }
    r.flag("augment.tune", c.augment_tune);
    r.numbers("augment.tune_windows", c.augment_windows);
    r.numbers("augment.tune_sigmas", c.augment_sigmas);

    r.flag("svr.enabled", c.svr);
    r.numbers("svr.C", c.svr_grid.C);
    r.numbers("svr.epsilon", c.svr_grid.epsilon);
    r.numbers("svr.gamma", c.svr_grid.gamma);
    r.number("svr.tolerance", c.svr_options.tolerance);
    r.number("svr.max_iterations", c.svr_options.max_iterations);

    r.text("evaluation.benchmark", c.benchmark);
    r.flag("evaluation.harvey_correction", c.harvey_correction);

    std::string out_dir;
    r.text("output.directory", out_dir);
    if (!out_dir.empty()) c.output_dir = detail::resolve(base, out_dir);
    else c.output_dir = detail::resolve(base, "out");
    r.flag("output.features", c.write_features);

    r.number("pipeline.seed", c.seed);
    r.number("pipeline.threads", c.threads);
    r.flag("pipeline.egarch_centered", c.egarch_centered);
    r.number("pipeline.fit_max_iterations", c.fit_max_iterations);

    for (const auto& key : r.unknown_keys()) out.problems.push_back(key + ": unknown setting");
    return out;
}

inline ParsedConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse_config(in, path);
}

/// Names of the report rows the configuration will produce, excluding the BIC-selected single
/// models (their orders are only known after fitting).
inline std::vector<std::string> planned_models(const PipelineConfig& c) {
    std::vector<std::string> sets;
    for (auto k : c.random_k) sets.push_back(std::to_string(k));
    if (c.correlation_selection) sets.push_back("CO");
    std::vector<std::string> names{"Eavesdrop"};
    for (bool augmented : {false, true}) {
        if (augmented && !c.augment) break;
        const std::string pre = augmented ? "a" : "";
        for (auto m : c.blend_methods) {
            const std::string stem = m == BlendMethod::Uniform ? "UBARCH" : m == BlendMethod::Ols ? "BARCH" : "BARCH-NN";
            for (const auto& s : sets) names.push_back(pre + stem + "(" + s + ")");
        }
    }
    if (c.svr) {
        names.push_back("SVR-GARCH");
        if (c.augment) names.push_back("aSVR-GARCH");
    }
    return names;
}

/// Every problem that would stop `run_pipeline`; empty iff the config is runnable.
inline std::vector<std::string> validate_config(const ParsedConfig& parsed) {
    auto problems = parsed.problems;
    const auto& c = parsed.config;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) problems.push_back(msg);
    };
    if (!c.data_path.empty())
        need(std::filesystem::is_regular_file(c.data_path), "data.path: file '" + c.data_path.string() + "' does not exist");
    need(c.val_len > 0, "split.validation: must be positive");
    need(c.test_len > 0, "split.test: must be positive");
    need(!c.bank.empty(), "bank.specs: the bank is empty");
    std::set<std::string> names;
    for (const auto& s : c.bank)
        need(names.insert(s.name()).second, "bank.specs: " + s.name() + " is listed twice");
    need(c.arch_max_p >= 1, "orders.arch_max_p: must be >= 1");
    need(c.max_order >= 1, "orders.max_order: must be >= 1");
    need(c.threshold > -1.0 && c.threshold <= 1.0, "selection.threshold: must lie in (-1, 1]");
    for (auto k : c.random_k) {
        need(k >= 1, "selection.random_k: K must be >= 1");
        need(k <= c.bank.size(), "selection.random_k: K = " + std::to_string(k) + " exceeds the bank size " +
                                     std::to_string(c.bank.size()));
    }
    need(c.correlation_selection || !c.random_k.empty(), "selection: no feature set is enabled");
    need(!c.blend_methods.empty(), "blend.methods: at least one method is required");
    need(!c.mlp.hidden.empty(), "mlp.hidden: at least one hidden layer is required");
    for (int h : c.mlp.hidden) need(h >= 1, "mlp.hidden: layer widths must be >= 1");
    need(c.mlp.learning_rate > 0.0, "mlp.learning_rate: must be positive");
    need(c.mlp.alpha >= 0.0, "mlp.alpha: must be >= 0");
    need(c.mlp.beta1 >= 0.0 && c.mlp.beta1 < 1.0, "mlp.beta1: must lie in [0, 1)");
    need(c.mlp.beta2 >= 0.0 && c.mlp.beta2 < 1.0, "mlp.beta2: must lie in [0, 1)");
    need(c.mlp.adam_epsilon > 0.0, "mlp.adam_epsilon: must be positive");
    need(c.mlp.max_epochs >= 0, "mlp.max_epochs: must be >= 0");
    need(c.mlp.patience >= 1, "mlp.patience: must be >= 1");
    need(c.augment_cfg.M >= 1, "augment.window: must be >= 1");
    need(c.augment_cfg.sigma >= 0.0 && std::isfinite(c.augment_cfg.sigma), "augment.sigma: must be finite and >= 0");
    if (c.augment_tune) {
        need(!c.augment_windows.empty() && !c.augment_sigmas.empty(), "augment.tune: the tuning grid is empty");
        for (auto m : c.augment_windows) need(m >= 1, "augment.tune_windows: windows must be >= 1");
        for (auto s : c.augment_sigmas) need(s >= 0.0, "augment.tune_sigmas: values must be >= 0");
    }
    if (c.svr) {
        need(!c.svr_grid.C.empty() && !c.svr_grid.epsilon.empty() && !c.svr_grid.gamma.empty(),
             "svr: every grid axis needs at least one value");
        for (double v : c.svr_grid.C) need(v > 0.0, "svr.C: values must be positive");
        for (double v : c.svr_grid.epsilon) need(v > 0.0, "svr.epsilon: values must be positive");
        for (double v : c.svr_grid.gamma) need(v > 0.0, "svr.gamma: values must be positive");
        need(c.svr_options.tolerance > 0.0, "svr.tolerance: must be positive");
        need(c.svr_options.max_iterations >= 1, "svr.max_iterations: must be >= 1");
    }
    const auto planned = planned_models(c);
    bool known = std::find(planned.begin(), planned.end(), c.benchmark) != planned.end();
    if (!known && c.single_models) {
        try {
            ModelSpec::parse(c.benchmark);
            known = true;
        } catch (const Error&) {
        }
    }
    need(known, "evaluation.benchmark: '" + c.benchmark + "' is not a model this configuration produces");
    need(c.fit_max_iterations >= 1, "pipeline.fit_max_iterations: must be >= 1");
    return problems;
}

inline std::vector<std::string> validate_config(const std::filesystem::path& path) {
    return validate_config(parse_config_file(path));
}

}  // namespace volblend
