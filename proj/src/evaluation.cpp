#include "slowcast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "slowcast/errors.hpp"

namespace slowcast {

namespace {

void check_pair(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.size() != truth.size()) {
        throw LengthMismatch("pred has " + std::to_string(pred.size()) + " values, truth has " +
                             std::to_string(truth.size()));
    }
    if (pred.empty()) throw LengthMismatch("empty vectors");
    for (double v : pred) {
        if (!std::isfinite(v)) throw NonFinite("prediction contains a non-finite value");
    }
    for (double v : truth) {
        if (!std::isfinite(v)) throw NonFinite("truth contains a non-finite value");
    }
}

}  // namespace

double mse(const std::vector<double>& pred, const std::vector<double>& truth) {
    check_pair(pred, truth);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
    check_pair(pred, truth);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        acc += std::abs(pred[i] - truth[i]);
    }
    return acc / static_cast<double>(pred.size());
}

EvalRecord EvalRecord::success(std::string dataset, std::size_t origin_index, int channel_id,
                               std::string strategy, std::string variant, double mse_value,
                               double mae_value, long cot_tokens,
                               std::vector<std::string> repairs, Diagnosis diagnosis) {
    if (mse_value < 0.0 || mae_value < 0.0) {
        throw NonFinite("metrics must be non-negative");
    }
    // Power-mean inequality; the epsilon absorbs rounding.
    if (mae_value * mae_value > mse_value + 1e-9 * std::max(1.0, mse_value)) {
        throw Error("mae^2 > mse: inconsistent metrics (mae=" + std::to_string(mae_value) +
                    ", mse=" + std::to_string(mse_value) + ")");
    }
    EvalRecord rec;
    rec.dataset = std::move(dataset);
    rec.origin_index = origin_index;
    rec.channel_id = channel_id;
    rec.strategy = std::move(strategy);
    rec.variant = std::move(variant);
    rec.mse_value = mse_value;
    rec.mae_value = mae_value;
    rec.cot_tokens = cot_tokens;
    rec.repairs = std::move(repairs);
    rec.diagnosis = diagnosis;
    return rec;
}

EvalRecord EvalRecord::failure(std::string dataset, std::size_t origin_index, int channel_id,
                               std::string strategy, std::string variant) {
    EvalRecord rec;
    rec.dataset = std::move(dataset);
    rec.origin_index = origin_index;
    rec.channel_id = channel_id;
    rec.strategy = std::move(strategy);
    rec.variant = std::move(variant);
    rec.parse_failed = true;
    return rec;
}

std::vector<GroupSummary> aggregate_dataset(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw EmptyGroup("no records to aggregate");
    std::map<std::pair<std::string, std::string>, GroupSummary> groups;
    for (const EvalRecord& rec : records) {
        GroupSummary& g = groups[{rec.variant, rec.strategy}];
        g.variant = rec.variant;
        g.strategy = rec.strategy;
        if (rec.parse_failed) {
            ++g.failures;
        } else {
            // Running totals; finalized below.
            g.mean_mse += rec.mse_value;
            g.mean_mae += rec.mae_value;
            ++g.count;
        }
    }
    std::vector<GroupSummary> out;
    out.reserve(groups.size());
    for (auto& [key, g] : groups) {
        if (g.count > 0) {
            g.mean_mse /= static_cast<double>(g.count);
            g.mean_mae /= static_cast<double>(g.count);
        }
        g.failure_rate =
            static_cast<double>(g.failures) / static_cast<double>(g.count + g.failures);
        out.push_back(std::move(g));
    }
    return out;
}

namespace {

/// Interpolated order statistic at 0 <= p <= 1 with h = (k-1)p + 1, over an
/// already-sorted sample.
double interpolated_quantile(const std::vector<double>& sorted, double p) {
    const std::size_t k = sorted.size();
    const double h = (static_cast<double>(k) - 1.0) * p + 1.0;
    const auto j = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(j);
    if (j >= k) return sorted.back();
    if (frac == 0.0 || j == k) return sorted[j - 1];
    return sorted[j - 1] + frac * (sorted[j] - sorted[j - 1]);
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> quantile_band(
    const std::vector<std::vector<double>>& samples, double gamma) {
    if (samples.size() < 2) throw TooFewSamples("quantile band needs at least 2 samples");
    if (gamma <= 0.0 || gamma >= 1.0) throw ConfigInvalid("gamma", "must be in (0, 1)");
    const std::size_t horizon = samples.front().size();
    for (const auto& s : samples) {
        if (s.size() != horizon) throw LengthMismatch("sample vectors have unequal lengths");
    }
    const double p_low = (1.0 - gamma) / 2.0;
    const double p_high = (1.0 + gamma) / 2.0;
    std::vector<double> lower(horizon), upper(horizon);
    std::vector<double> step(samples.size());
    for (std::size_t i = 0; i < horizon; ++i) {
        for (std::size_t s = 0; s < samples.size(); ++s) step[s] = samples[s][i];
        std::sort(step.begin(), step.end());
        lower[i] = interpolated_quantile(step, p_low);
        upper[i] = interpolated_quantile(step, p_high);
    }
    return {std::move(lower), std::move(upper)};
}

std::vector<double> per_step_std(const std::vector<std::vector<double>>& samples) {
    if (samples.size() < 2) throw TooFewSamples("per-step std needs at least 2 samples");
    const std::size_t horizon = samples.front().size();
    for (const auto& s : samples) {
        if (s.size() != horizon) throw LengthMismatch("sample vectors have unequal lengths");
    }
    const auto k = static_cast<double>(samples.size());
    std::vector<double> out(horizon);
    for (std::size_t i = 0; i < horizon; ++i) {
        bool all_equal = true;
        for (const auto& s : samples) {
            if (s[i] != samples[0][i]) {
                all_equal = false;
                break;
            }
        }
        if (all_equal) {
            out[i] = 0.0;
            continue;
        }
        double sum = 0.0;
        for (const auto& s : samples) sum += s[i];
        const double mean = sum / k;
        double var = 0.0;
        for (const auto& s : samples) var += (s[i] - mean) * (s[i] - mean);
        out[i] = std::sqrt(var / k);
    }
    return out;
}

double band_coverage(const std::vector<double>& lower, const std::vector<double>& upper,
                     const std::vector<double>& truth) {
    if (lower.size() != truth.size() || upper.size() != truth.size()) {
        throw LengthMismatch("band and truth lengths differ");
    }
    if (truth.empty()) throw LengthMismatch("empty band");
    std::size_t inside = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (lower[i] <= truth[i] && truth[i] <= upper[i]) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(truth.size());
}

UncertaintyReport uncertainty_report(const std::vector<std::vector<double>>& samples,
                                     const std::vector<double>& truth, double gamma) {
    UncertaintyReport report;
    report.gamma = gamma;
    report.per_step_std = per_step_std(samples);
    auto [lower, upper] = quantile_band(samples, gamma);
    report.coverage = band_coverage(lower, upper, truth);
    report.band_lower = std::move(lower);
    report.band_upper = std::move(upper);
    return report;
}

HeatmapMatrix cot_decile_heatmap(const std::vector<std::pair<long, double>>& cot_and_mse) {
    const std::size_t n = cot_and_mse.size();
    if (n < 10) throw TooFewRecords("heatmap needs at least 10 records");

    std::vector<std::size_t> by_mse(n), by_cot(n);
    std::iota(by_mse.begin(), by_mse.end(), 0);
    std::iota(by_cot.begin(), by_cot.end(), 0);
    std::stable_sort(by_mse.begin(), by_mse.end(), [&](std::size_t a, std::size_t b) {
        return cot_and_mse[a].second < cot_and_mse[b].second;
    });
    std::stable_sort(by_cot.begin(), by_cot.end(), [&](std::size_t a, std::size_t b) {
        return cot_and_mse[a].first < cot_and_mse[b].first;
    });

    std::vector<std::size_t> rank_bin(n), token_decile(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        rank_bin[by_mse[pos]] = pos * 10 / n;
        token_decile[by_cot[pos]] = pos * 10 / n;
    }
    HeatmapMatrix matrix{};
    for (std::size_t i = 0; i < n; ++i) {
        ++matrix[token_decile[i]][rank_bin[i]];
    }
    return matrix;
}

}  // namespace slowcast
