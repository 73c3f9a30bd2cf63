#include "slowcast/engine.hpp"

#include <algorithm>
#include <cmath>

#include "slowcast/errors.hpp"
#include "slowcast/parser.hpp"

namespace slowcast {

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::OneShot: return "one_shot";
        case Strategy::Decoupled: return "decoupled";
        case Strategy::Rollout: return "rollout";
    }
    return "one_shot";
}

Strategy parse_strategy(const std::string& name) {
    if (name == "one_shot") return Strategy::OneShot;
    if (name == "decoupled") return Strategy::Decoupled;
    if (name == "rollout") return Strategy::Rollout;
    throw ConfigInvalid("strategy", "unknown value '" + name + "'");
}

std::vector<std::size_t> rollout_partition(std::size_t horizon, int rounds) {
    if (rounds < 1 || static_cast<std::size_t>(rounds) > horizon) {
        throw ConfigInvalid("rollout_rounds", "need 1 <= rounds <= horizon, got rounds=" +
                                                  std::to_string(rounds) + ", horizon=" +
                                                  std::to_string(horizon));
    }
    const auto c = static_cast<std::size_t>(rounds);
    const std::size_t base = horizon / c;
    std::vector<std::size_t> chunks(c, base);
    chunks.back() = horizon - (c - 1) * base;
    return chunks;
}

namespace {

/// Calls the provider once and runs the repair pipeline; reprompts re-invoke
/// the provider with the corrective instruction appended to the schema.
ParsedAnswer call_and_parse(const HybridPrompt& prompt, const StrategyConfig& cfg,
                            Provider& provider, int generation_index,
                            std::vector<GenerationRecord>& records, bool decoupled) {
    GenerationRecord rec = provider.complete(prompt, cfg.sampling, generation_index);
    records.push_back(rec);
    const std::string raw = rec.raw();

    if (decoupled && !contains_block(raw, kForecastOpen, kForecastClose) &&
        contains_block(raw, kDraftOpen, kDraftClose)) {
        throw MissingFinalBlock("response contains a draft but no final forecast block");
    }

    auto reprompt = [&](const std::string& corrective) -> std::string {
        HybridPrompt repair = prompt;
        repair.answer_schema += "\n\n" + corrective;
        GenerationRecord r = provider.complete(repair, cfg.sampling, generation_index);
        records.push_back(r);
        return r.raw();
    };
    return parse_with_repair(raw, prompt.horizon, cfg.parse_retries, reprompt);
}

}  // namespace

GenerationResult run_one_shot(const ForecastTask& task, const StrategyConfig& cfg,
                              Provider& provider, int generation_index) {
    const HybridPrompt prompt =
        build_prompt(task.window, task.context, task.variant, task.meta);
    GenerationResult result;
    ParsedAnswer parsed =
        call_and_parse(prompt, cfg, provider, generation_index, result.records, false);
    result.repairs = parsed.repairs_applied;
    result.forecast = denormalize_forecast(parsed.values, prompt.normalization);
    return result;
}

GenerationResult run_decoupled(const ForecastTask& task, const StrategyConfig& cfg,
                               Provider& provider, int generation_index) {
    const HybridPrompt prompt = build_prompt(task.window, task.context, task.variant, task.meta,
                                             AnswerProtocol::DraftThenFinal);
    GenerationResult result;
    ParsedAnswer parsed =
        call_and_parse(prompt, cfg, provider, generation_index, result.records, true);
    result.repairs = parsed.repairs_applied;
    result.forecast = denormalize_forecast(parsed.values, prompt.normalization);
    return result;
}

GenerationResult run_rollout(const ForecastTask& task, const StrategyConfig& cfg,
                             Provider& provider, int generation_index) {
    if (cfg.rollout_rounds < 2) {
        throw ConfigInvalid("rollout_rounds", "rollout needs at least 2 rounds");
    }
    const std::size_t horizon = task.window.horizon_len();
    // Short horizons take fewer rounds; each round must predict >= 1 step.
    const int rounds = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(cfg.rollout_rounds), horizon));
    const std::vector<std::size_t> chunks = rollout_partition(horizon, rounds);

    GenerationResult result;
    PromptWindow running = task.window;
    std::size_t done = 0;
    for (std::size_t round = 0; round < chunks.size(); ++round) {
        PromptWindow round_window = running;
        round_window.horizon_timestamps.assign(
            task.window.horizon_timestamps.begin() + done,
            task.window.horizon_timestamps.begin() + done + chunks[round]);
        round_window.truth.assign(task.window.truth.begin() + done,
                                  task.window.truth.begin() + done + chunks[round]);

        const HybridPrompt prompt =
            build_prompt(round_window, task.context, task.variant, task.meta);
        ParsedAnswer parsed;
        try {
            parsed = call_and_parse(prompt, cfg, provider, generation_index, result.records,
                                    false);
        } catch (const ParseFailure& e) {
            throw ParseFailure("rollout round " + std::to_string(round + 1) + " of " +
                                   std::to_string(chunks.size()) + ": " + e.what(),
                               e.raw_text());
        }
        for (const std::string& label : parsed.repairs_applied) {
            result.repairs.push_back("round" + std::to_string(round + 1) + ":" + label);
        }

        const std::vector<double> chunk_values =
            denormalize_forecast(parsed.values, prompt.normalization);
        for (std::size_t i = 0; i < chunk_values.size(); ++i) {
            // Predicted points join the context under their true horizon
            // timestamps, which are known a priori from the frequency.
            running.lookback.push_back(
                {task.window.horizon_timestamps[done + i], chunk_values[i]});
            result.forecast.push_back(chunk_values[i]);
        }
        done += chunks[round];
    }
    return result;
}

long ForecastBundle::total_trace_tokens() const {
    long total = 0;
    for (const auto& generation : records) {
        for (const GenerationRecord& rec : generation) total += trace_token_count(rec);
    }
    return total;
}

ForecastBundle forecast_window(const ForecastTask& task, const StrategyConfig& cfg,
                               Provider& provider) {
    if (cfg.generations_k < 1) throw ConfigInvalid("generations_k", "must be >= 1");
    const std::size_t horizon = task.window.horizon_len();

    ForecastBundle bundle;
    for (int gen = 0; gen < cfg.generations_k; ++gen) {
        GenerationResult result;
        switch (cfg.strategy) {
            case Strategy::OneShot: result = run_one_shot(task, cfg, provider, gen); break;
            case Strategy::Decoupled: result = run_decoupled(task, cfg, provider, gen); break;
            case Strategy::Rollout: result = run_rollout(task, cfg, provider, gen); break;
        }
        bundle.per_generation.push_back(std::move(result.forecast));
        bundle.records.push_back(std::move(result.records));
        for (const std::string& label : result.repairs) {
            bundle.repairs.push_back("g" + std::to_string(gen) + ":" + label);
        }
    }

    const auto k = static_cast<double>(cfg.generations_k);
    bundle.mean_forecast.resize(horizon);
    bundle.per_step_std.resize(horizon);
    for (std::size_t i = 0; i < horizon; ++i) {
        bool all_equal = true;
        for (const auto& gen : bundle.per_generation) {
            if (gen[i] != bundle.per_generation[0][i]) {
                all_equal = false;
                break;
            }
        }
        if (all_equal) {
            // Identical draws have zero spread; skip the mean rounding.
            bundle.mean_forecast[i] = bundle.per_generation[0][i];
            bundle.per_step_std[i] = 0.0;
            continue;
        }
        double sum = 0.0;
        for (const auto& gen : bundle.per_generation) sum += gen[i];
        const double mean = sum / k;
        bundle.mean_forecast[i] = mean;
        double var = 0.0;
        for (const auto& gen : bundle.per_generation) {
            var += (gen[i] - mean) * (gen[i] - mean);
        }
        bundle.per_step_std[i] = std::sqrt(var / k);
    }
    return bundle;
}

}  // namespace slowcast
