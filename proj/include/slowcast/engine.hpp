#pragma once

#include <string>
#include <vector>

#include "slowcast/prompt.hpp"
#include "slowcast/provider.hpp"
#include "slowcast/series.hpp"

namespace slowcast {

enum class Strategy { OneShot, Decoupled, Rollout };
std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

struct StrategyConfig {
    Strategy strategy = Strategy::OneShot;
    int rollout_rounds = 4;
    int generations_k = 3;
    int parse_retries = 2;  // corrective reprompts per generation
    SamplingParams sampling;
};

/// Everything one forecast needs besides the strategy and the backend.
struct ForecastTask {
    PromptWindow window;
    ContextDescriptor context;
    PromptVariantConfig variant;
    FrameMeta meta;
};

/// One strategy pass: a raw-scale forecast plus the provider records that
/// produced it (rollout yields one record per round, reprompts append).
struct GenerationResult {
    std::vector<double> forecast;
    std::vector<GenerationRecord> records;
    std::vector<std::string> repairs;
};

/// Aggregation of k independent generations.
struct ForecastBundle {
    std::vector<std::vector<double>> per_generation;      // k x H, raw scale
    std::vector<double> mean_forecast;                    // length H
    std::vector<double> per_step_std;                     // population std, length H
    std::vector<std::vector<GenerationRecord>> records;   // k lists
    std::vector<std::string> repairs;                     // "g<i>:<label>" entries

    long total_trace_tokens() const;
};

/// Per-round horizon chunks: floor(H/c) per round, remainder on the last.
/// Their sum is exactly H.
std::vector<std::size_t> rollout_partition(std::size_t horizon, int rounds);

GenerationResult run_one_shot(const ForecastTask& task, const StrategyConfig& cfg,
                              Provider& provider, int generation_index = 0);
GenerationResult run_decoupled(const ForecastTask& task, const StrategyConfig& cfg,
                               Provider& provider, int generation_index = 0);
GenerationResult run_rollout(const ForecastTask& task, const StrategyConfig& cfg,
                             Provider& provider, int generation_index = 0);

/// Runs the configured strategy generations_k times and aggregates: mean
/// forecast and per-step population std. Any generation failure fails the
/// whole bundle; there is no partial averaging.
ForecastBundle forecast_window(const ForecastTask& task, const StrategyConfig& cfg,
                               Provider& provider);

}  // namespace slowcast
