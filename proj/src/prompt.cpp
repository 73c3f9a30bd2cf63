#include "slowcast/prompt.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "slowcast/errors.hpp"

namespace slowcast {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double population_std(const std::vector<double>& v, double mean) {
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

std::optional<std::string> ContextDescriptor::semantics_for(const std::string& channel) const {
    for (const auto& [name, text] : channel_semantics) {
        if (name == channel) return text;
    }
    return std::nullopt;
}

ContextDescriptor load_context_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileUnreadable("cannot open context file '" + path + "'");
    ContextDescriptor ctx;
    std::string line;
    std::string section;
    std::vector<std::string> domain_lines;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        if (section == "domain") {
            domain_lines.push_back(line);
        } else if (section == "channels") {
            std::size_t colon = line.find(':');
            if (colon == std::string::npos) {
                throw SchemaMismatch("context file '" + path + "': channel line '" + line +
                                     "' has no ':'");
            }
            ctx.channel_semantics.emplace_back(trim(line.substr(0, colon)),
                                               trim(line.substr(colon + 1)));
        } else if (section == "frequency") {
            ctx.frequency_text = line;
        } else {
            throw SchemaMismatch("context file '" + path + "': line outside a known section");
        }
    }
    std::string domain;
    for (std::size_t i = 0; i < domain_lines.size(); ++i) {
        if (i > 0) domain += ' ';
        domain += domain_lines[i];
    }
    ctx.domain_text = domain;
    return ctx;
}

std::string normalization_name(NormalizationMode m) {
    switch (m) {
        case NormalizationMode::Raw: return "raw";
        case NormalizationMode::ZScore: return "zscore";
        case NormalizationMode::RevIn: return "revin";
    }
    return "raw";
}

NormalizationMode parse_normalization(const std::string& name) {
    if (name == "raw") return NormalizationMode::Raw;
    if (name == "zscore") return NormalizationMode::ZScore;
    if (name == "revin") return NormalizationMode::RevIn;
    throw ConfigInvalid("normalization", "unknown value '" + name + "'");
}

std::string variant_label(const PromptVariantConfig& cfg) {
    std::string ts;
    switch (cfg.timestamps.mode) {
        case TimestampMode::Keep: ts = "keep"; break;
        case TimestampMode::Remove: ts = "nots"; break;
        case TimestampMode::Shift:
            ts = "shift" + std::string(cfg.timestamps.shift_seconds >= 0 ? "+" : "") +
                 std::to_string(cfg.timestamps.shift_seconds) + "s";
            break;
    }
    return ts + "-" + (cfg.context_enabled ? "ctx" : "noctx") + "-" +
           normalization_name(cfg.normalization) + "-" + missing_mode_name(cfg.missing_mode);
}

std::optional<std::vector<Timestamp>> transform_timestamps(const std::vector<Timestamp>& ts,
                                                           const TimestampTransform& transform,
                                                           Frequency freq) {
    switch (transform.mode) {
        case TimestampMode::Keep:
            return ts;
        case TimestampMode::Remove:
            return std::nullopt;
        case TimestampMode::Shift: {
            if (transform.shift_seconds % step_seconds(freq) != 0) {
                throw OffsetNotMultipleOfFrequency(
                    "shift of " + std::to_string(transform.shift_seconds) +
                    "s is not a multiple of the " + std::to_string(step_seconds(freq)) +
                    "s step");
            }
            std::vector<Timestamp> out;
            out.reserve(ts.size());
            for (Timestamp t : ts) out.push_back(t + transform.shift_seconds);
            return out;
        }
    }
    return ts;
}

std::pair<std::vector<double>, NormalizationState> normalize_values(
    const std::vector<double>& values, NormalizationMode mode,
    const std::optional<TrainStats>& train_stats) {
    NormalizationState state;
    state.mode = mode;
    switch (mode) {
        case NormalizationMode::Raw:
            return {values, state};
        case NormalizationMode::ZScore: {
            if (!train_stats) {
                throw MissingTrainStats("z-score normalization needs training-split stats");
            }
            if (train_stats->stddev <= 0.0) {
                throw DegenerateWindow("training-split std is zero");
            }
            state.location = train_stats->mean;
            state.scale = train_stats->stddev;
            break;
        }
        case NormalizationMode::RevIn: {
            if (values.empty()) throw DegenerateWindow("empty lookback");
            const double mean =
                std::accumulate(values.begin(), values.end(), 0.0) /
                static_cast<double>(values.size());
            const double stddev = population_std(values, mean);
            if (stddev <= 0.0) throw DegenerateWindow("lookback has zero variance");
            state.location = mean;
            state.scale = stddev;
            break;
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back((v - state.location) / state.scale);
    return {std::move(out), state};
}

std::vector<double> denormalize_forecast(const std::vector<double>& values,
                                         const NormalizationState& state) {
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(v * state.scale + state.location);
    return out;
}

std::string format_value(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

std::string format_value_exact(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string HybridPrompt::text() const {
    std::string out = directive;
    if (!context_block.empty()) {
        out += "\n\n";
        out += context_block;
    }
    out += "\n\nRecent observations, oldest first:\n";
    out += series_block;
    out += "\n\n";
    out += answer_schema;
    return out;
}

HybridPrompt build_prompt(const PromptWindow& window, const ContextDescriptor& context,
                          const PromptVariantConfig& variant, const FrameMeta& meta,
                          AnswerProtocol protocol) {
    const std::size_t horizon = window.horizon_len();
    if (horizon == 0) throw ConfigInvalid("horizon", "window has no horizon steps");

    std::vector<Timestamp> lookback_ts;
    lookback_ts.reserve(window.lookback.size());
    std::vector<double> observed;
    observed.reserve(window.lookback.size());
    for (const SeriesPoint& p : window.lookback) {
        lookback_ts.push_back(p.ts);
        if (p.value) observed.push_back(*p.value);
    }

    const auto shown_lookback_ts = transform_timestamps(lookback_ts, variant.timestamps,
                                                        meta.frequency);
    const auto shown_horizon_ts = transform_timestamps(window.horizon_timestamps,
                                                       variant.timestamps, meta.frequency);

    auto [normalized, state] = normalize_values(observed, variant.normalization,
                                                meta.train_stats);

    HybridPrompt prompt;
    prompt.normalization = state;
    prompt.horizon = horizon;
    prompt.observed_values = normalized;
    prompt.horizon_timestamps = window.horizon_timestamps;

    // Directive: states the objective and the literal horizon length.
    std::string directive = "You are an expert time series forecaster. Forecast the next " +
                            std::to_string(horizon) + " values of the series '" +
                            meta.channel_name + "'.";
    if (shown_horizon_ts) {
        directive += " The forecast horizon runs from " +
                     format_timestamp(shown_horizon_ts->front()) + " to " +
                     format_timestamp(shown_horizon_ts->back()) +
                     " at a sampling interval of " + frequency_text(meta.frequency) + ".";
    }
    if (state.mode != NormalizationMode::Raw) {
        directive += " Values are standardized; forecast in the same standardized scale.";
    }
    prompt.directive = std::move(directive);

    if (variant.context_enabled) {
        if (context.domain_text.empty()) {
            throw ConfigInvalid("context", "context enabled but domain text is empty");
        }
        std::string block = "Context:\n" + context.domain_text;
        if (auto sem = context.semantics_for(meta.channel_name)) {
            block += "\nChannel '" + meta.channel_name + "': " + *sem;
        }
        if (!context.frequency_text.empty()) {
            block += "\nSampling interval: " + context.frequency_text;
        }
        prompt.context_block = std::move(block);
    }

    std::string series;
    std::size_t value_idx = 0;
    for (std::size_t i = 0; i < window.lookback.size(); ++i) {
        if (i > 0) series += '\n';
        if (shown_lookback_ts) {
            series += format_timestamp((*shown_lookback_ts)[i]);
            series += ": ";
        }
        if (window.lookback[i].value) {
            series += format_value(normalized[value_idx], variant.value_precision);
            ++value_idx;
        } else {
            series += "None";
        }
    }
    prompt.series_block = std::move(series);

    std::string schema;
    if (protocol == AnswerProtocol::DraftThenFinal) {
        schema += "First write a preliminary forecast of exactly " + std::to_string(horizon) +
                  " comma-separated values inside " + kDraftOpen + kDraftClose +
                  ", then a short critique of that draft. ";
    }
    schema += "End your response with exactly " + std::to_string(horizon) +
              " comma-separated values inside a single " + std::string(kForecastOpen) +
              kForecastClose + " block, oldest step first, with nothing after it.";
    prompt.answer_schema = std::move(schema);

    return prompt;
}

}  // namespace slowcast
