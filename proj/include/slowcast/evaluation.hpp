#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "slowcast/diagnostics.hpp"

namespace slowcast {

double mse(const std::vector<double>& pred, const std::vector<double>& truth);
double mae(const std::vector<double>& pred, const std::vector<double>& truth);

/// One scored (window, channel) task under the channel-independent protocol.
struct EvalRecord {
    std::string dataset;
    std::size_t origin_index = 0;
    int channel_id = 0;
    std::string strategy;
    std::string variant;
    bool parse_failed = false;
    double mse_value = 0.0;  // valid only when !parse_failed
    double mae_value = 0.0;
    long cot_tokens = 0;
    std::vector<std::string> repairs;
    Diagnosis diagnosis;

    /// Checks mse >= 0, mae >= 0 and mae^2 <= mse (power-mean inequality).
    static EvalRecord success(std::string dataset, std::size_t origin_index, int channel_id,
                              std::string strategy, std::string variant, double mse_value,
                              double mae_value, long cot_tokens,
                              std::vector<std::string> repairs, Diagnosis diagnosis);
    static EvalRecord failure(std::string dataset, std::size_t origin_index, int channel_id,
                              std::string strategy, std::string variant);
};

/// Unweighted means over all task records in one (variant, strategy) group;
/// parse failures are excluded from the means and reported as a rate.
struct GroupSummary {
    std::string variant;
    std::string strategy;
    double mean_mse = 0.0;
    double mean_mae = 0.0;
    std::size_t count = 0;     // scored tasks
    std::size_t failures = 0;  // parse failures
    double failure_rate = 0.0;
};

std::vector<GroupSummary> aggregate_dataset(const std::vector<EvalRecord>& records);

/// Per-step empirical quantiles at (1-gamma)/2 and (1+gamma)/2 over k sample
/// vectors, interpolated order statistics with the h = (k-1)p + 1 convention.
std::pair<std::vector<double>, std::vector<double>> quantile_band(
    const std::vector<std::vector<double>>& samples, double gamma);

/// Population standard deviation across the k samples, per step.
std::vector<double> per_step_std(const std::vector<std::vector<double>>& samples);

/// Fraction of steps with lower <= truth <= upper.
double band_coverage(const std::vector<double>& lower, const std::vector<double>& upper,
                     const std::vector<double>& truth);

struct UncertaintyReport {
    std::vector<double> per_step_std;
    std::vector<double> band_lower;
    std::vector<double> band_upper;
    double coverage = 0.0;
    double gamma = 0.0;
};

UncertaintyReport uncertainty_report(const std::vector<std::vector<double>>& samples,
                                     const std::vector<double>& truth, double gamma);

/// Cell (d, r) counts records falling in trace-token decile d (0 shortest)
/// and MSE rank bin r (0 best). Both binnings are equal-count with stable
/// ties in input order.
using HeatmapMatrix = std::array<std::array<int, 10>, 10>;
HeatmapMatrix cot_decile_heatmap(const std::vector<std::pair<long, double>>& cot_and_mse);

}  // namespace slowcast
