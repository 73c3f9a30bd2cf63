#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace slowcast {

/// Detector thresholds, surfaced in run metadata. Defaults separate the four
/// constructed fixture families cleanly.
struct DiagnosticThresholds {
    double collapse_ratio = 0.05;
    double copy_similarity = 0.99;
    double copy_pointwise_frac = 0.01;  // of the lookback range
    double phase_corr = 0.8;
    double phase_margin = 0.1;          // required improvement over lag 0
    long max_lag = 0;                   // 0: use H/4
    double peak_amplitude = 0.7;
    double peak_corr = 0.5;
};

struct Diagnosis {
    bool constant_collapse = false;
    double collapse_ratio = 0.0;   // std(pred) / std(lookback)
    bool copy_paste = false;
    long copy_offset = -1;
    double copy_similarity = 0.0;
    bool phase_shift = false;
    long phase_lag = 0;
    bool peak_clipping = false;
    double peak_severity = 0.0;

    bool any() const {
        return constant_collapse || copy_paste || phase_shift || peak_clipping;
    }
};

/// ratio = std(pred)/std(lookback); flagged below the threshold.
std::pair<bool, double> detect_constant_collapse(const std::vector<double>& pred,
                                                 const std::vector<double>& lookback,
                                                 double ratio_threshold = 0.05);

/// Best Pearson correlation of pred against every contiguous lookback
/// segment of the same length; flagged when the correlation clears the
/// threshold AND the pointwise difference at the best offset stays within
/// copy_pointwise_frac of the lookback range. Constant pred never flags
/// (collapse precedence).
struct CopyPasteResult {
    bool flag = false;
    long offset = -1;
    double similarity = 0.0;
};
CopyPasteResult detect_copy_paste(const std::vector<double>& pred,
                                  const std::vector<double>& lookback,
                                  double sim_threshold = 0.99,
                                  double pointwise_frac = 0.01);

/// Normalized cross-correlation over lags in [-max_lag, max_lag]; positive
/// lag means pred trails truth. Flagged when the best lag is nonzero, clears
/// corr_threshold, and improves on lag 0 by at least margin.
std::pair<bool, long> detect_phase_shift(const std::vector<double>& pred,
                                         const std::vector<double>& truth, long max_lag = 0,
                                         double corr_threshold = 0.8, double margin = 0.1);

/// Amplitude ratio range(pred)/range(truth); flagged when compressed below
/// amp_threshold while still tracking the shape (corr >= corr_floor).
/// Severity is 1 - min(ratio, 1).
std::pair<bool, double> detect_peak_clipping(const std::vector<double>& pred,
                                             const std::vector<double>& truth,
                                             double amp_threshold = 0.7,
                                             double corr_floor = 0.5);

/// Runs all detectors with precedence collapse > copy_paste; phase shift and
/// peak clipping are independent. Degenerate inputs (constant pred, constant
/// truth, short series) leave the respective flags unset.
Diagnosis diagnose(const std::vector<double>& pred, const std::vector<double>& lookback,
                   const std::vector<double>& truth,
                   const DiagnosticThresholds& thresholds = {});

}  // namespace slowcast
