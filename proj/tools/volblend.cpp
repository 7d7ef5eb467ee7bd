#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "volblend/arch_family.hpp"
#include "volblend/config.hpp"
#include "volblend/market_data.hpp"
#include "volblend/pipeline.hpp"

namespace {

using namespace volblend;

int exit_code(const Error& e) {
    switch (e.kind()) {
        case Error::Kind::Config: return 2;
        case Error::Kind::Data: return 3;
        case Error::Kind::Numerical: return 4;
    }
    return 1;
}

/// Accepts a full model name ("GJR-t(1,1)") or a bare family, which means order (1,1) with normal shocks.
ModelSpec parse_model(const std::string& text) {
    if (text.find('(') != std::string::npos) return ModelSpec::parse(text);
    const Family f = parse_family(text);
    return ModelSpec{f, 1, f == Family::ARCH ? 0 : 1, DistKind::Normal};
}

/// Comma-separated values in the order alpha0, alphas, betas, gammas, shape, skew.
ModelParams parse_params(const ModelSpec& spec, const std::string& text) {
    std::vector<double> v;
    for (const auto& item : detail::split_list(text)) {
        char* end = nullptr;
        const double x = std::strtod(item.c_str(), &end);
        if (end != item.c_str() + item.size()) throw ConfigError("cannot read parameter '" + item + "'");
        v.push_back(x);
    }
    const auto need = static_cast<std::size_t>(spec.param_count());
    if (v.size() != need)
        throw ConfigError(spec.name() + " takes " + std::to_string(need) +
                          " parameters (alpha0, alphas, betas, gammas, shape) but " + std::to_string(v.size()) +
                          " were given");
    ModelParams p;
    std::size_t k = 0;
    p.alpha0 = v[k++];
    for (int i = 0; i < spec.alpha_count(); ++i) p.alphas.push_back(v[k++]);
    for (int i = 0; i < spec.beta_count(); ++i) p.betas.push_back(v[k++]);
    for (int i = 0; i < spec.gamma_count(); ++i) p.gammas.push_back(v[k++]);
    p.dist.kind = spec.innovation;
    if (shape_param_count(spec.innovation) >= 1) p.dist.shape = v[k++];
    if (spec.innovation == DistKind::SkewStudentT) p.dist.skew = v[k++];
    p.dist.validate();
    return p;
}

void print_report(const EvalReport& r) {
    std::printf("%-22s %12s %12s %10s %10s\n", "model", "RMSE(e-3)", "MAE(e-3)", "DM", "p");
    for (const auto& s : r.scores) {
        const DmRow* dm = nullptr;
        for (const auto& d : r.dm)
            if (d.model == s.model) dm = &d;
        if (dm)
            std::printf("%-22s %12.4f %12.4f %10.3f %10.4f\n", s.model.c_str(), s.rmse * 1e3, s.mae * 1e3,
                        dm->result.stat, dm->result.p_value);
        else
            std::printf("%-22s %12.4f %12.4f %10s %10s\n", s.model.c_str(), s.rmse * 1e3, s.mae * 1e3, "bench", "");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volatility forecasting with blended ARCH-family models"};
    app.require_subcommand(1);

    std::string config_path, stage_name = "all";
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run the forecasting pipeline described by a config file");
    run->add_option("config", config_path, "INI config file")->required();
    run->add_option("--stage", stage_name, "all: fit everything; blend: reuse cached model fits")
        ->check(CLI::IsMember({"all", "fit", "blend"}));
    run->add_flag("-q,--quiet", quiet, "Suppress progress messages");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a config file and list its problems");
    validate->add_option("config", validate_path, "INI config file")->required();

    std::string family, params, out_path, alt_params, start_date = "2000-01-03";
    std::size_t n = 3000, block = 250;
    std::uint64_t seed = 1;
    double start_price = 100.0;
    auto* simulate = app.add_subcommand("simulate", "Simulate a price series from an ARCH-family model");
    simulate->add_option("family", family, "Model name, e.g. GARCH-N(1,1), or a bare family")->required();
    simulate->add_option("params", params, "alpha0,alphas...,betas...,gammas...,shape,skew")->required();
    simulate->add_option("--out", out_path, "Output price CSV (date,close)")->required();
    simulate->add_option("-n,--length", n, "Number of returns")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", seed, "Random seed");
    simulate->add_option("--alt-params", alt_params, "Second parameter regime, alternating every --block steps");
    simulate->add_option("--block", block, "Regime length for --alt-params")->check(CLI::PositiveNumber);
    simulate->add_option("--start-price", start_price, "First close")->check(CLI::PositiveNumber);
    simulate->add_option("--start-date", start_date, "First date (ISO-8601)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            auto parsed = parse_config_file(config_path);
            PipelineOptions opt;
            opt.stage = parse_stage(stage_name);
            if (!quiet) opt.log = &std::cerr;
            const auto res = run_pipeline(parsed, opt);
            print_report(res.report);
            for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
            std::cerr << "artifacts written to " << res.output_dir.string() << '\n';
            return 0;
        }
        if (*validate) {
            const auto problems = validate_config(validate_path);
            if (problems.empty()) {
                std::cout << validate_path << ": ok\n";
                return 0;
            }
            for (const auto& p : problems) std::cout << p << '\n';
            return 2;
        }
        if (*simulate) {
            const ModelSpec spec = parse_model(family);
            std::vector<ModelParams> regimes{parse_params(spec, params)};
            if (!alt_params.empty()) regimes.push_back(parse_params(spec, alt_params));
            const auto r = simulate_switching(spec, regimes, block, n, seed);
            const auto prices = prices_from_returns(r.returns, start_price, Date::parse(start_date));
            std::ofstream os(out_path);
            if (!os) throw ParseError("cannot write '" + out_path + "'");
            os << "date,close\n";
            for (std::size_t t = 0; t < prices.size(); ++t)
                os << prices.dates[t].iso() << ',' << format_double(prices.closes[t]) << '\n';
            if (!os) throw ParseError("write failed for '" + out_path + "'");
            std::cerr << "wrote " << prices.size() << " closes to " << out_path << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
