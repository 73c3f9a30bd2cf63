#include "slowcast/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "slowcast/errors.hpp"

namespace slowcast {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // Trim whitespace/CR and one pair of surrounding quotes.
        std::size_t b = field.find_first_not_of(" \t\r");
        std::size_t e = field.find_last_not_of(" \t\r");
        field = (b == std::string::npos) ? "" : field.substr(b, e - b + 1);
        if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
            field = field.substr(1, field.size() - 2);
        }
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::optional<double> parse_double_cell(const std::string& cell) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    if (begin != end && *begin == '+') ++begin;
    double v{};
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

Frequency frequency_from_gap(std::int64_t gap) {
    for (Frequency f : {Frequency::Sec3, Frequency::Min15, Frequency::Hour1, Frequency::Day1}) {
        if (gap == step_seconds(f)) return f;
    }
    throw IrregularFrequency("first timestamp gap of " + std::to_string(gap) +
                             "s matches no supported frequency");
}

SeriesFrame slice_frame(const SeriesFrame& frame, std::size_t begin, std::size_t count) {
    SeriesFrame out;
    out.channels = frame.channels;
    out.frequency = frame.frequency;
    out.domain_note = frame.domain_note;
    out.timestamps.assign(frame.timestamps.begin() + begin,
                          frame.timestamps.begin() + begin + count);
    out.values.assign(frame.values.begin() + begin, frame.values.begin() + begin + count);
    return out;
}

}  // namespace

SeriesFrame load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw FileUnreadable("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw SchemaMismatch("'" + path + "' has no header row");
    const std::vector<std::string> header = split_csv_line(line);

    auto column_index = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw SchemaMismatch("column '" + name + "' not found in '" + path + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };

    const std::size_t ts_col = column_index(schema.timestamp_column);

    std::vector<std::size_t> channel_cols;
    SeriesFrame frame;
    if (schema.channel_columns.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i == ts_col) continue;
            channel_cols.push_back(i);
            frame.channels.push_back(header[i]);
        }
    } else {
        for (const std::string& name : schema.channel_columns) {
            channel_cols.push_back(column_index(name));
            frame.channels.push_back(name);
        }
    }
    if (frame.channels.empty()) throw SchemaMismatch("'" + path + "' has no channel columns");

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw SchemaMismatch("row " + std::to_string(row) + " has " +
                                 std::to_string(fields.size()) + " fields, header has " +
                                 std::to_string(header.size()));
        }
        auto ts = try_parse_timestamp(fields[ts_col], schema.timestamp_format);
        if (!ts) throw UnparseableCell(row, schema.timestamp_column, fields[ts_col]);
        if (!frame.timestamps.empty() && *ts <= frame.timestamps.back()) {
            throw NonMonotoneTimestamps(row, "'" + fields[ts_col] + "' does not increase");
        }
        frame.timestamps.push_back(*ts);

        std::vector<double> vals;
        vals.reserve(channel_cols.size());
        for (std::size_t c = 0; c < channel_cols.size(); ++c) {
            const std::string& cell = fields[channel_cols[c]];
            if (cell.empty()) {
                vals.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            auto v = parse_double_cell(cell);
            if (!v) throw UnparseableCell(row, frame.channels[c], cell);
            vals.push_back(*v);
        }
        frame.values.push_back(std::move(vals));
        ++row;
    }

    if (schema.frequency) {
        frame.frequency = *schema.frequency;
    } else if (frame.rows() >= 2) {
        frame.frequency = frequency_from_gap(frame.timestamps[1] - frame.timestamps[0]);
    }
    if (schema.validate_gaps) {
        const std::int64_t step = step_seconds(frame.frequency);
        for (std::size_t i = 1; i < frame.rows(); ++i) {
            if (frame.timestamps[i] - frame.timestamps[i - 1] != step) {
                throw IrregularFrequency("gap at row " + std::to_string(i) + " is " +
                                         std::to_string(frame.timestamps[i] -
                                                        frame.timestamps[i - 1]) +
                                         "s, expected " + std::to_string(step) + "s");
            }
        }
    }
    return frame;
}

std::array<SeriesFrame, 3> chronological_split(const SeriesFrame& frame,
                                               const std::array<double, 3>& ratios,
                                               std::size_t min_rows) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigInvalid("split_ratios", "sum is " + std::to_string(sum) + ", expected 1");
    }
    const auto t = static_cast<double>(frame.rows());
    // floor(T*ratio); the 1e-6 absorbs binary representation error of decimal ratios.
    const auto n0 = static_cast<std::size_t>(std::floor(t * ratios[0] + 1e-6));
    const auto n1 = static_cast<std::size_t>(std::floor(t * ratios[1] + 1e-6));
    if (n0 + n1 > frame.rows()) {
        throw ConfigInvalid("split_ratios", "boundaries exceed frame length");
    }
    const std::size_t n2 = frame.rows() - n0 - n1;

    static const char* kNames[3] = {"train", "val", "test"};
    const std::size_t sizes[3] = {n0, n1, n2};
    if (min_rows > 0) {
        for (int i = 0; i < 3; ++i) {
            if (sizes[i] < min_rows) {
                throw PartTooShort(std::string(kNames[i]) + " split has " +
                                   std::to_string(sizes[i]) + " rows, needs " +
                                   std::to_string(min_rows));
            }
        }
    }
    return {slice_frame(frame, 0, n0), slice_frame(frame, n0, n1),
            slice_frame(frame, n0 + n1, n2)};
}

std::vector<WindowInstance> slide_windows(const SeriesFrame& frame, std::size_t lookback,
                                          std::size_t horizon, std::size_t stride,
                                          int channel_id) {
    if (lookback < 1 || horizon < 1 || stride < 1) {
        throw ConfigInvalid("windowing", "lookback, horizon and stride must be >= 1");
    }
    if (channel_id < 0 || static_cast<std::size_t>(channel_id) >= frame.cols()) {
        throw ConfigInvalid("channel_id", "index " + std::to_string(channel_id) +
                                              " out of range for " + std::to_string(frame.cols()) +
                                              " channels");
    }
    const std::size_t t = frame.rows();
    if (t < lookback + horizon) {
        throw FrameTooShort("frame has " + std::to_string(t) + " rows, needs " +
                            std::to_string(lookback + horizon));
    }

    std::vector<WindowInstance> windows;
    for (std::size_t origin = lookback; origin + horizon <= t; origin += stride) {
        WindowInstance w;
        w.channel_id = channel_id;
        w.origin_index = origin;
        w.lookback_values.reserve(lookback);
        w.lookback_timestamps.reserve(lookback);
        for (std::size_t i = origin - lookback; i < origin; ++i) {
            w.lookback_values.push_back(frame.values[i][channel_id]);
            w.lookback_timestamps.push_back(frame.timestamps[i]);
        }
        w.truth.reserve(horizon);
        w.horizon_timestamps.reserve(horizon);
        for (std::size_t i = origin; i < origin + horizon; ++i) {
            w.truth.push_back(frame.values[i][channel_id]);
            w.horizon_timestamps.push_back(frame.timestamps[i]);
        }
        windows.push_back(std::move(w));
    }
    return windows;
}

MissingMask make_missing_mask(std::size_t lookback_len, double rate, std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigInvalid("missing_rate", "must be in [0, 1)");
    }
    const auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(lookback_len)));
    MissingMask mask;
    mask.seed = seed;
    mask.rate = rate;
    if (count == 0) return mask;
    if (lookback_len < 3 || count > lookback_len - 2) {
        throw ConfigInvalid("missing_rate", "rate " + std::to_string(rate) + " leaves no room for " +
                                                std::to_string(count) +
                                                " masked interior points of L=" +
                                                std::to_string(lookback_len));
    }
    std::vector<std::size_t> interior;
    interior.reserve(lookback_len - 2);
    for (std::size_t i = 1; i + 1 < lookback_len; ++i) interior.push_back(i);
    std::mt19937_64 rng(seed);
    std::sample(interior.begin(), interior.end(), std::back_inserter(mask.indices), count, rng);
    return mask;
}

std::string missing_mode_name(MissingMode m) {
    switch (m) {
        case MissingMode::Full: return "full";
        case MissingMode::NoImp: return "no_imp";
        case MissingMode::NoneImp: return "none_imp";
        case MissingMode::LinImp: return "lin_imp";
    }
    return "full";
}

MissingMode parse_missing_mode(const std::string& name) {
    if (name == "full") return MissingMode::Full;
    if (name == "no_imp") return MissingMode::NoImp;
    if (name == "none_imp") return MissingMode::NoneImp;
    if (name == "lin_imp") return MissingMode::LinImp;
    throw ConfigInvalid("missing_mode", "unknown value '" + name + "'");
}

PromptWindow apply_missing(const WindowInstance& window, MissingMode mode,
                           const MissingMask& mask) {
    const std::size_t len = window.lookback_len();
    std::vector<bool> missing(len, false);
    if (mode != MissingMode::Full) {
        for (std::size_t idx : mask.indices) {
            if (idx >= len) {
                throw MaskOutOfRange("mask index " + std::to_string(idx) + " >= L=" +
                                     std::to_string(len));
            }
            if (idx == 0 || idx == len - 1) {
                throw MaskOutOfRange("mask may not include lookback endpoints");
            }
            missing[idx] = true;
        }
    }
    for (std::size_t i = 0; i < len; ++i) {
        if (std::isnan(window.lookback_values[i])) {
            if (mode == MissingMode::Full) {
                throw Error("empty cell at lookback position " + std::to_string(i) +
                            " under full mode");
            }
            missing[i] = true;
        }
    }

    PromptWindow out;
    out.channel_id = window.channel_id;
    out.horizon_timestamps = window.horizon_timestamps;
    out.truth = window.truth;
    out.origin_index = window.origin_index;
    out.lookback.reserve(len);

    switch (mode) {
        case MissingMode::Full:
            for (std::size_t i = 0; i < len; ++i) {
                out.lookback.push_back({window.lookback_timestamps[i], window.lookback_values[i]});
            }
            break;
        case MissingMode::NoImp:
            for (std::size_t i = 0; i < len; ++i) {
                if (missing[i]) continue;
                out.lookback.push_back({window.lookback_timestamps[i], window.lookback_values[i]});
            }
            break;
        case MissingMode::NoneImp:
            for (std::size_t i = 0; i < len; ++i) {
                out.lookback.push_back({window.lookback_timestamps[i],
                                        missing[i] ? std::nullopt
                                                   : std::optional<double>(window.lookback_values[i])});
            }
            break;
        case MissingMode::LinImp:
            if (len > 0 && (missing.front() || missing.back())) {
                throw MaskOutOfRange("lookback endpoints are missing; cannot interpolate");
            }
            for (std::size_t i = 0; i < len; ++i) {
                double v = window.lookback_values[i];
                if (missing[i]) {
                    std::size_t prev = i;
                    while (prev > 0 && missing[prev]) --prev;
                    std::size_t next = i;
                    while (next + 1 < len && missing[next]) ++next;
                    const double v0 = window.lookback_values[prev];
                    const double v1 = window.lookback_values[next];
                    const double frac = static_cast<double>(i - prev) /
                                        static_cast<double>(next - prev);
                    v = v0 + (v1 - v0) * frac;
                }
                out.lookback.push_back({window.lookback_timestamps[i], v});
            }
            break;
    }
    return out;
}

}  // namespace slowcast
