#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "slowcast/diagnostics.hpp"
#include "slowcast/engine.hpp"
#include "slowcast/evaluation.hpp"
#include "slowcast/provider.hpp"
#include "slowcast/series.hpp"

namespace slowcast {

struct DatasetConfig {
    std::string name = "dataset";
    std::string path;
    CsvSchema schema;
    std::string context_path;  // sidecar context descriptor, optional
    std::string domain_note;   // fallback domain text when no sidecar exists
};

/// Prompt-variant axes as configured (shift measured in frequency steps;
/// materialized to seconds once the frame's frequency is known).
struct VariantSpec {
    TimestampMode timestamp_mode = TimestampMode::Keep;
    long shift_steps = 0;
    bool context_enabled = true;
    NormalizationMode normalization = NormalizationMode::Raw;
    MissingMode missing_mode = MissingMode::Full;
    int value_precision = 4;

    PromptVariantConfig materialize(Frequency freq) const;
};

struct SweepAxes {
    std::vector<std::size_t> lookbacks;
    std::vector<std::size_t> horizons;
    std::vector<double> temperatures;
    std::vector<std::string> strategies;
    std::vector<std::string> variants;  // named ablation settings

    bool empty() const {
        return lookbacks.empty() && horizons.empty() && temperatures.empty() &&
               strategies.empty() && variants.empty();
    }
};

struct UncertaintyConfig {
    int k = 50;
    double gamma = 0.8;
};

struct RunConfig {
    DatasetConfig dataset;
    std::array<double, 3> split_ratios{0.7, 0.1, 0.2};
    std::size_t lookback = 96;
    std::size_t horizon = 96;
    std::size_t stride = 0;  // 0: non-overlapping windows (stride = horizon)
    std::vector<std::string> channels;  // evaluated channels; empty: all
    StrategyConfig strategy;
    VariantSpec variant;
    ProviderSpec provider;
    SweepAxes axes;
    std::string output_dir = "runs";
    std::string cache_dir = "cache";
    int max_parallel_requests = 1;
    std::uint64_t seed = 0;
    double missing_rate = 0.2;
    double failure_tolerance = 0.05;
    std::size_t sweep_cap = 256;
    long shift_steps = 24;  // ablation shift offset, in frequency steps
    UncertaintyConfig uncertainty;
    DiagnosticThresholds thresholds;

    std::size_t effective_stride() const { return stride == 0 ? horizon : stride; }
    void validate() const;  // throws ConfigInvalid
};

/// Per-dataset lookback/horizon defaults.
struct DatasetPreset {
    std::size_t lookback;
    std::size_t horizon;
    Frequency frequency;
};
const std::vector<std::pair<std::string, DatasetPreset>>& dataset_presets();
void apply_preset(RunConfig& config, const std::string& name);

/// The seven ablation settings by row name: baseline, no_timestamps,
/// forward_shift, backward_shift, no_context, zscore, revin.
VariantSpec ablation_variant(const RunConfig& config, const std::string& name);
const std::vector<std::pair<std::string, std::string>>& ablation_rows();  // (key, display)

/// Loads a JSON config, resolving "include" files (merged first, the
/// including file wins) and a "preset" name. Dataset-relative paths resolve
/// against the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json run_config_to_json(const RunConfig& config);

struct RunTotals {
    std::size_t tasks = 0;
    std::size_t done = 0;
    std::size_t failed = 0;
    std::size_t requests = 0;
    std::size_t cache_hits = 0;
};

struct RunResult {
    std::filesystem::path run_dir;
    std::vector<GroupSummary> summary;
    RunTotals totals;
    int exit_code = 0;
};

/// Runs every (window x channel) task with bounded parallelism, writes
/// records.jsonl / summary.csv / manifest.json, and resumes from an existing
/// run directory when out_dir points at one. provider_override (tests)
/// bypasses the response cache.
RunResult run_forecast(const RunConfig& config,
                       std::shared_ptr<Provider> provider_override = nullptr,
                       const std::filesystem::path& out_dir = {});

/// Forecast with k = uncertainty.k generations; adds per-task band CSVs
/// under uncertainty/ and coverage columns to the records.
RunResult run_uncertainty(const RunConfig& config,
                          std::shared_ptr<Provider> provider_override = nullptr,
                          const std::filesystem::path& out_dir = {});

/// One child run per grid point of the configured axes, plus a combined CSV
/// keyed by axis values.
RunResult run_sweep(const RunConfig& config);

/// The seven-row ablation table (timestamps / context / normalization).
RunResult run_ablate(const RunConfig& config);

struct DiagnoseSummary {
    std::size_t records = 0;
    std::size_t scored = 0;
    std::size_t malformed = 0;
    std::size_t collapse = 0;
    std::size_t copy_paste = 0;
    std::size_t phase_shift = 0;
    std::size_t peak_clipping = 0;
    bool heatmap_written = false;
};

/// Re-runs the detectors offline over a run directory's stored records and
/// emits diagnosis_summary.csv plus heatmap.csv (needs >= 10 scored records).
DiagnoseSummary run_diagnose(const std::filesystem::path& run_dir,
                             const DiagnosticThresholds& thresholds = {});

nlohmann::json diagnosis_to_json(const Diagnosis& d);
Diagnosis diagnosis_from_json(const nlohmann::json& j);

}  // namespace slowcast
