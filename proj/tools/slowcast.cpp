// Command-line front end: forecast / sweep / uncertainty / ablate / diagnose.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slowcast/errors.hpp"
#include "slowcast/experiment.hpp"

namespace {

using namespace slowcast;

struct Overrides {
    std::string config_path;
    std::string provider;
    std::string strategy;
    double temperature = -1.0;
    long lookback = 0;
    long horizon = 0;
    long k = 0;
    long seed = -1;
    std::string cache_dir;
    std::string out_dir;
};

void add_common_options(CLI::App* cmd, Overrides& o) {
    cmd->set_help_flag("--help", "Print help");  // frees -h / --h for the horizon
    cmd->add_option("--config", o.config_path, "Run config JSON")->required();
    cmd->add_option("--provider", o.provider,
                    "Provider override: mock_seasonal_naive[:period], "
                    "mock_noisy[:base[:sigma[:seed]]], mock_scripted:<fixture>, http_chat");
    cmd->add_option("--strategy", o.strategy, "one_shot | decoupled | rollout");
    cmd->add_option("--temperature", o.temperature, "Sampling temperature");
    cmd->add_option("--l", o.lookback, "Lookback window length");
    cmd->add_option("--h", o.horizon, "Predict window length");
    cmd->add_option("--k", o.k, "Generations per task");
    cmd->add_option("--seed", o.seed, "Global seed");
    cmd->add_option("--cache-dir", o.cache_dir, "Response cache directory");
    cmd->add_option("--out", o.out_dir, "Run directory (resumes if it exists)");
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t at = s.find(sep, start);
        if (at == std::string::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, at - start));
        start = at + 1;
    }
}

void apply_provider_override(RunConfig& config, const std::string& text) {
    const std::vector<std::string> parts = split_on(text, ':');
    const std::string& kind = parts[0];
    if (kind == "mock_seasonal_naive") {
        config.provider.kind = ProviderKind::MockSeasonalNaive;
        if (parts.size() > 1) config.provider.period = std::stoul(parts[1]);
    } else if (kind == "mock_noisy") {
        config.provider.kind = ProviderKind::MockNoisy;
        if (parts.size() > 1) {
            if (parts[1] == "seasonal_naive") config.provider.noisy_base = MockBase::SeasonalNaive;
            else if (parts[1] == "linear_trend") config.provider.noisy_base = MockBase::LinearTrend;
            else throw ConfigInvalid("--provider", "unknown noisy base '" + parts[1] + "'");
        }
        if (parts.size() > 2) config.provider.sigma = std::stod(parts[2]);
        if (parts.size() > 3) config.provider.mock_seed = std::stoull(parts[3]);
    } else if (kind == "mock_scripted") {
        if (parts.size() < 2) throw ConfigInvalid("--provider", "mock_scripted needs a fixture path");
        config.provider.kind = ProviderKind::MockScripted;
        // Fixture paths may contain ':'; rejoin the remainder.
        std::string path = parts[1];
        for (std::size_t i = 2; i < parts.size(); ++i) path += ":" + parts[i];
        config.provider.fixture_path = path;
    } else if (kind == "http_chat") {
        config.provider.kind = ProviderKind::HttpChat;
    } else {
        throw ConfigInvalid("--provider", "unknown provider '" + kind + "'");
    }
}

RunConfig load_with_overrides(const Overrides& o) {
    RunConfig config = load_run_config(o.config_path);
    if (!o.provider.empty()) apply_provider_override(config, o.provider);
    if (!o.strategy.empty()) config.strategy.strategy = parse_strategy(o.strategy);
    if (o.temperature >= 0.0) config.strategy.sampling.temperature = o.temperature;
    if (o.lookback > 0) config.lookback = static_cast<std::size_t>(o.lookback);
    if (o.horizon > 0) config.horizon = static_cast<std::size_t>(o.horizon);
    if (o.k > 0) {
        config.strategy.generations_k = static_cast<int>(o.k);
        config.uncertainty.k = static_cast<int>(o.k);
    }
    if (o.seed >= 0) config.seed = static_cast<std::uint64_t>(o.seed);
    if (!o.cache_dir.empty()) config.cache_dir = o.cache_dir;
    return config;
}

void print_summary(const RunResult& result) {
    std::printf("run directory: %s\n", result.run_dir.string().c_str());
    std::printf("tasks: %zu done, %zu failed, %zu requests (%zu cache hits)\n",
                result.totals.done, result.totals.failed, result.totals.requests,
                result.totals.cache_hits);
    for (const auto& g : result.summary) {
        if (g.count > 0) {
            std::printf("  %-28s %-10s mse=%-14.6g mae=%-12.6g n=%zu fail=%.3f\n",
                        g.variant.c_str(), g.strategy.c_str(), g.mean_mse, g.mean_mae, g.count,
                        g.failure_rate);
        } else {
            std::printf("  %-28s %-10s (no scored tasks) fail=%.3f\n", g.variant.c_str(),
                        g.strategy.c_str(), g.failure_rate);
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inference-time reasoning harness for zero-shot time series forecasting"};
    app.set_help_flag("--help", "Print help");
    app.require_subcommand(1);

    Overrides o;
    auto* forecast = app.add_subcommand("forecast", "Run the forecast pipeline over one config");
    add_common_options(forecast, o);
    auto* sweep = app.add_subcommand("sweep", "One child run per grid point of the config axes");
    add_common_options(sweep, o);
    auto* uncertainty =
        app.add_subcommand("uncertainty", "k-generation bands and per-step spread");
    add_common_options(uncertainty, o);
    auto* ablate = app.add_subcommand("ablate", "Timestamps/context/normalization ablation table");
    add_common_options(ablate, o);

    std::string diagnose_dir;
    auto* diagnose = app.add_subcommand("diagnose", "Re-run failure detectors over a run directory");
    diagnose->add_option("run_dir", diagnose_dir, "Run directory with records.jsonl")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (diagnose->parsed()) {
            const DiagnoseSummary s = run_diagnose(diagnose_dir);
            std::printf("records: %zu (scored %zu, malformed %zu)\n", s.records, s.scored,
                        s.malformed);
            std::printf("constant_collapse: %zu\ncopy_paste: %zu\nphase_shift: %zu\n"
                        "peak_clipping: %zu\nheatmap: %s\n",
                        s.collapse, s.copy_paste, s.phase_shift, s.peak_clipping,
                        s.heatmap_written ? "heatmap.csv" : "skipped (needs >= 10 records)");
            return 0;
        }

        const RunConfig config = load_with_overrides(o);
        RunResult result;
        if (forecast->parsed()) {
            result = run_forecast(config, nullptr, o.out_dir);
        } else if (sweep->parsed()) {
            result = run_sweep(config);
        } else if (uncertainty->parsed()) {
            result = run_uncertainty(config, nullptr, o.out_dir);
        } else if (ablate->parsed()) {
            result = run_ablate(config);
        }
        print_summary(result);
        return result.exit_code;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 3;
    }
}
