#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slowcast/timeutil.hpp"

namespace slowcast {

/// Column mapping for CSV ingestion. The first column of the supported
/// datasets is the timestamp; every other column is one channel.
struct CsvSchema {
    std::string timestamp_column = "date";
    std::vector<std::string> channel_columns;  // empty: every non-timestamp column
    std::string timestamp_format;              // empty: auto-detect
    std::optional<Frequency> frequency;        // empty: infer from the first gap
    bool validate_gaps = true;
};

/// A loaded multivariate series in raw units. Immutable after construction;
/// safe to share across threads. Empty CSV cells are stored as NaN.
struct SeriesFrame {
    std::vector<Timestamp> timestamps;
    std::vector<std::string> channels;
    std::vector<std::vector<double>> values;  // rows() x cols()
    Frequency frequency = Frequency::Hour1;
    std::string domain_note;

    std::size_t rows() const { return timestamps.size(); }
    std::size_t cols() const { return channels.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row][col]; }
};

/// One univariate forecasting task cut from a frame. origin_index is the row
/// of the first horizon step in the source frame.
struct WindowInstance {
    int channel_id = 0;
    std::vector<double> lookback_values;
    std::vector<Timestamp> lookback_timestamps;
    std::vector<Timestamp> horizon_timestamps;
    std::vector<double> truth;
    std::size_t origin_index = 0;

    std::size_t lookback_len() const { return lookback_values.size(); }
    std::size_t horizon_len() const { return truth.size(); }
};

/// Positions of the lookback marked missing. Endpoints 0 and L-1 are never
/// masked so linear interpolation always has two observed neighbors.
struct MissingMask {
    std::vector<std::size_t> indices;  // sorted, unique
    std::uint64_t seed = 0;
    double rate = 0.0;
};

MissingMask make_missing_mask(std::size_t lookback_len, double rate, std::uint64_t seed);

enum class MissingMode { Full, NoImp, NoneImp, LinImp };
std::string missing_mode_name(MissingMode m);
MissingMode parse_missing_mode(const std::string& name);

/// One rendered series line: a timestamp and a value, or no value when the
/// point is shown as a "None" placeholder.
struct SeriesPoint {
    Timestamp ts = 0;
    std::optional<double> value;
};

/// The lookback as it will be shown to the model, after a missing-data
/// policy. Length can be below the original L under NoImp.
struct PromptWindow {
    int channel_id = 0;
    std::vector<SeriesPoint> lookback;
    std::vector<Timestamp> horizon_timestamps;
    std::vector<double> truth;
    std::size_t origin_index = 0;

    std::size_t horizon_len() const { return horizon_timestamps.size(); }
};

SeriesFrame load_csv(const std::string& path, const CsvSchema& schema);

/// Splits at floor(T*ratio) boundaries, no shuffling; the concatenation of
/// the parts reproduces the input. min_rows > 0 enforces a per-part floor
/// (callers pass L+H).
std::array<SeriesFrame, 3> chronological_split(const SeriesFrame& frame,
                                               const std::array<double, 3>& ratios,
                                               std::size_t min_rows = 0);

/// Sliding windows for one channel at origins L, L+stride, ... while
/// origin + H <= T. Count is floor((T-L-H)/stride) + 1.
std::vector<WindowInstance> slide_windows(const SeriesFrame& frame, std::size_t lookback,
                                          std::size_t horizon, std::size_t stride,
                                          int channel_id);

/// Applies a missing-data variant to the lookback. Cells that were empty in
/// the source CSV (NaN) count as missing in every mode except Full, where
/// they are an error.
PromptWindow apply_missing(const WindowInstance& window, MissingMode mode,
                           const MissingMask& mask);

}  // namespace slowcast
