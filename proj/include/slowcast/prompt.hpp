#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slowcast/series.hpp"
#include "slowcast/timeutil.hpp"

namespace slowcast {

// Answer contract markers. The model must end its response with a
// <FORECAST>...</FORECAST> block; the decoupled protocol adds a preliminary
// <DRAFT>...</DRAFT> block.
inline constexpr const char* kForecastOpen = "<FORECAST>";
inline constexpr const char* kForecastClose = "</FORECAST>";
inline constexpr const char* kDraftOpen = "<DRAFT>";
inline constexpr const char* kDraftClose = "</DRAFT>";

/// Natural-language description of a dataset: domain, per-channel meaning,
/// sampling interval. Loaded from a sidecar text file with [domain],
/// [channels] and [frequency] sections.
struct ContextDescriptor {
    std::string domain_text;
    std::vector<std::pair<std::string, std::string>> channel_semantics;
    std::string frequency_text;

    std::optional<std::string> semantics_for(const std::string& channel) const;
};

ContextDescriptor load_context_file(const std::string& path);

enum class TimestampMode { Keep, Remove, Shift };

struct TimestampTransform {
    TimestampMode mode = TimestampMode::Keep;
    std::int64_t shift_seconds = 0;
};

enum class NormalizationMode { Raw, ZScore, RevIn };
std::string normalization_name(NormalizationMode m);
NormalizationMode parse_normalization(const std::string& name);

/// The ablation axes of a prompt: timestamp handling, context, normalization,
/// missing-data policy, and rendering precision.
struct PromptVariantConfig {
    TimestampTransform timestamps;
    bool context_enabled = true;
    NormalizationMode normalization = NormalizationMode::Raw;
    MissingMode missing_mode = MissingMode::Full;
    int value_precision = 4;
};

std::string variant_label(const PromptVariantConfig& cfg);

/// Per-channel statistics of the training split (population std).
struct TrainStats {
    double mean = 0.0;
    double stddev = 0.0;
};

/// The (location, scale) actually applied to a window, carried so the
/// forecast can be mapped back to raw units.
struct NormalizationState {
    NormalizationMode mode = NormalizationMode::Raw;
    double location = 0.0;
    double scale = 1.0;
};

/// Frame-level facts a prompt needs beyond the window itself.
struct FrameMeta {
    Frequency frequency = Frequency::Hour1;
    std::string channel_name;
    std::optional<TrainStats> train_stats;
};

enum class AnswerProtocol { Direct, DraftThenFinal };

/// The fully rendered hybrid instruction plus the machine-readable payload
/// that local mock providers consume (prompt-scale values, full precision).
struct HybridPrompt {
    std::string directive;
    std::string context_block;  // empty when context is disabled
    std::string series_block;   // one line per lookback point
    std::string answer_schema;
    NormalizationState normalization;
    std::size_t horizon = 0;
    std::vector<double> observed_values;  // lookback values as shown, "None" entries skipped
    std::vector<Timestamp> horizon_timestamps;

    std::string text() const;
};

/// Keep -> identity; Remove -> nullopt (render values only); Shift -> every
/// timestamp offset by shift_seconds, which must be a whole multiple of the
/// frequency step.
std::optional<std::vector<Timestamp>> transform_timestamps(const std::vector<Timestamp>& ts,
                                                           const TimestampTransform& transform,
                                                           Frequency freq);

/// Raw -> identity with state (0,1). ZScore -> (x-mean)/std with train-split
/// stats. RevIn -> instance normalization with the lookback's own mean and
/// population std.
std::pair<std::vector<double>, NormalizationState> normalize_values(
    const std::vector<double>& values, NormalizationMode mode,
    const std::optional<TrainStats>& train_stats);

/// Exact inverse of normalize_values: v * scale + location.
std::vector<double> denormalize_forecast(const std::vector<double>& values,
                                         const NormalizationState& state);

std::string format_value(double v, int precision);  // fixed-point, e.g. "3.1416"
std::string format_value_exact(double v);           // shortest round-trip form

HybridPrompt build_prompt(const PromptWindow& window, const ContextDescriptor& context,
                          const PromptVariantConfig& variant, const FrameMeta& meta,
                          AnswerProtocol protocol = AnswerProtocol::Direct);

}  // namespace slowcast
