#include "slowcast/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slowcast/errors.hpp"

namespace slowcast {

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

double range_of(const std::vector<double>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

/// Pearson correlation of equal-length slices a[0..n) and b[0..n).
/// Returns NaN when either slice is constant.
double pearson(const double* a, const double* b, std::size_t n) {
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sa += a[i];
        sb += b[i];
    }
    const double ma = sa / static_cast<double>(n);
    const double mb = sb / static_cast<double>(n);
    double num = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va <= 0.0 || vb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(num / std::sqrt(va * vb), -1.0, 1.0);
}

}  // namespace

std::pair<bool, double> detect_constant_collapse(const std::vector<double>& pred,
                                                 const std::vector<double>& lookback,
                                                 double ratio_threshold) {
    if (pred.empty() || lookback.empty()) throw LengthMismatch("empty input");
    const double look_std = population_std(lookback);
    if (look_std <= 0.0) throw DegenerateLookback("lookback has zero variance");
    const double ratio = population_std(pred) / look_std;
    return {ratio < ratio_threshold, ratio};
}

CopyPasteResult detect_copy_paste(const std::vector<double>& pred,
                                  const std::vector<double>& lookback, double sim_threshold,
                                  double pointwise_frac) {
    if (pred.empty()) throw LengthMismatch("empty prediction");
    if (lookback.size() < pred.size()) {
        throw PredTooLong("prediction of " + std::to_string(pred.size()) +
                          " steps exceeds lookback of " + std::to_string(lookback.size()));
    }
    CopyPasteResult result;
    if (population_std(pred) <= 0.0) return result;  // collapse precedence

    const std::size_t h = pred.size();
    double best = -2.0;
    long best_offset = -1;
    for (std::size_t off = 0; off + h <= lookback.size(); ++off) {
        const double corr = pearson(pred.data(), lookback.data() + off, h);
        if (std::isnan(corr)) continue;  // constant segment
        if (corr >= best) {              // ties resolve to the most recent segment
            best = corr;
            best_offset = static_cast<long>(off);
        }
    }
    if (best_offset < 0) return result;

    result.similarity = best;
    result.offset = best_offset;
    if (best >= sim_threshold) {
        // Correlation alone would flag level-shifted trend following; require
        // near-verbatim values too.
        double max_diff = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            max_diff = std::max(max_diff,
                                std::abs(pred[i] - lookback[best_offset + i]));
        }
        const double look_range = range_of(lookback);
        result.flag = look_range > 0.0 && max_diff <= pointwise_frac * look_range;
    }
    return result;
}

std::pair<bool, long> detect_phase_shift(const std::vector<double>& pred,
                                         const std::vector<double>& truth, long max_lag,
                                         double corr_threshold, double margin) {
    if (pred.size() != truth.size()) throw LengthMismatch("pred and truth lengths differ");
    if (pred.size() < 2) throw ConstantInput("series too short for lag detection");
    if (population_std(pred) <= 0.0 || population_std(truth) <= 0.0) {
        throw ConstantInput("constant series has no phase");
    }
    const auto n = static_cast<long>(pred.size());
    if (max_lag <= 0) max_lag = n / 4;
    max_lag = std::min(max_lag, n - 2);

    double corr_at_zero = pearson(pred.data(), truth.data(), pred.size());
    if (std::isnan(corr_at_zero)) corr_at_zero = 0.0;

    double best = corr_at_zero;
    long best_lag = 0;
    // Visit lags by increasing distance so ties resolve to the smaller shift.
    for (long dist = 1; dist <= max_lag; ++dist) {
        for (long lag : {dist, -dist}) {
            const long overlap = n - dist;
            if (overlap < 2) continue;
            const double* p = pred.data() + std::max(0L, lag);
            const double* t = truth.data() + std::max(0L, -lag);
            const double corr = pearson(p, t, static_cast<std::size_t>(overlap));
            if (!std::isnan(corr) && corr > best) {
                best = corr;
                best_lag = lag;
            }
        }
    }
    const bool flag =
        best_lag != 0 && best >= corr_threshold && best - corr_at_zero >= margin;
    return {flag, best_lag};
}

std::pair<bool, double> detect_peak_clipping(const std::vector<double>& pred,
                                             const std::vector<double>& truth,
                                             double amp_threshold, double corr_floor) {
    if (pred.size() != truth.size()) throw LengthMismatch("pred and truth lengths differ");
    if (pred.empty()) throw LengthMismatch("empty input");
    const double truth_range = range_of(truth);
    if (truth_range <= 0.0) throw ConstantTruth("truth has zero range");
    const double ratio = range_of(pred) / truth_range;
    double corr = pearson(pred.data(), truth.data(), pred.size());
    if (std::isnan(corr)) corr = 0.0;
    const bool flag = ratio < amp_threshold && corr >= corr_floor;
    return {flag, 1.0 - std::min(ratio, 1.0)};
}

Diagnosis diagnose(const std::vector<double>& pred, const std::vector<double>& lookback,
                   const std::vector<double>& truth, const DiagnosticThresholds& thresholds) {
    if (pred.size() != truth.size()) throw LengthMismatch("pred and truth lengths differ");
    if (pred.empty()) throw LengthMismatch("empty prediction");

    Diagnosis d;
    const double pred_std = population_std(pred);
    const double look_std = lookback.empty() ? 0.0 : population_std(lookback);
    const double truth_std = population_std(truth);

    if (look_std > 0.0) {
        auto [flag, ratio] = detect_constant_collapse(pred, lookback, thresholds.collapse_ratio);
        d.constant_collapse = flag;
        d.collapse_ratio = ratio;
    }
    // A constant copy counts as collapse, never as copy-paste.
    if (!d.constant_collapse && pred_std > 0.0 && lookback.size() >= pred.size()) {
        CopyPasteResult copy = detect_copy_paste(pred, lookback, thresholds.copy_similarity,
                                                 thresholds.copy_pointwise_frac);
        d.copy_paste = copy.flag;
        d.copy_offset = copy.offset;
        d.copy_similarity = copy.similarity;
    }
    if (pred_std > 0.0 && truth_std > 0.0 && pred.size() >= 2) {
        auto [flag, lag] = detect_phase_shift(pred, truth, thresholds.max_lag,
                                              thresholds.phase_corr, thresholds.phase_margin);
        d.phase_shift = flag;
        d.phase_lag = lag;
    }
    if (pred_std > 0.0 && truth_std > 0.0) {
        auto [flag, severity] = detect_peak_clipping(pred, truth, thresholds.peak_amplitude,
                                                     thresholds.peak_corr);
        d.peak_clipping = flag;
        d.peak_severity = severity;
    }
    return d;
}

}  // namespace slowcast
