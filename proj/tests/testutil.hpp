#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "slowcast/prompt.hpp"
#include "slowcast/series.hpp"

namespace slowcast::testutil {

/// Unique temp directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("slowcast_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline constexpr Timestamp kEpoch2016 = 1467331200;  // 2016-07-01 00:00:00

inline SeriesFrame make_hourly_frame(const std::vector<double>& values,
                                     const std::string& channel = "OT") {
    SeriesFrame frame;
    frame.channels = {channel};
    frame.frequency = Frequency::Hour1;
    for (std::size_t i = 0; i < values.size(); ++i) {
        frame.timestamps.push_back(kEpoch2016 + static_cast<Timestamp>(i) * 3600);
        frame.values.push_back({values[i]});
    }
    return frame;
}

inline WindowInstance make_window(const std::vector<double>& lookback,
                                  const std::vector<double>& truth) {
    WindowInstance w;
    w.channel_id = 0;
    w.origin_index = lookback.size();
    for (std::size_t i = 0; i < lookback.size(); ++i) {
        w.lookback_values.push_back(lookback[i]);
        w.lookback_timestamps.push_back(kEpoch2016 + static_cast<Timestamp>(i) * 3600);
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
        w.truth.push_back(truth[i]);
        w.horizon_timestamps.push_back(
            kEpoch2016 + static_cast<Timestamp>(lookback.size() + i) * 3600);
    }
    return w;
}

inline PromptWindow make_prompt_window(const std::vector<double>& lookback,
                                       const std::vector<double>& truth) {
    return apply_missing(make_window(lookback, truth), MissingMode::Full, MissingMask{});
}

inline ContextDescriptor test_context() {
    ContextDescriptor ctx;
    ctx.domain_text = "Synthetic hourly series used by the unit tests.";
    ctx.channel_semantics = {{"OT", "test target channel"}};
    ctx.frequency_text = "1 hour";
    return ctx;
}

inline FrameMeta test_meta() {
    FrameMeta meta;
    meta.frequency = Frequency::Hour1;
    meta.channel_name = "OT";
    return meta;
}

/// Writes an ETT-layout CSV (date column + one column per channel).
inline void write_csv(const std::filesystem::path& file,
                      const std::vector<std::string>& channels,
                      const std::vector<Timestamp>& timestamps,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(file);
    out << "date";
    for (const auto& c : channels) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << format_timestamp(timestamps[r]);
        for (double v : rows[r]) out << ',' << format_value_exact(v);
        out << '\n';
    }
}

/// Deterministic synthetic series: daily cycle plus slow trend and a fixed
/// seeded perturbation.
inline std::vector<double> synthetic_series(std::size_t n, std::uint64_t seed = 17) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-0.25, 0.25);
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double day = std::sin(2.0 * 3.14159265358979323846 *
                                    static_cast<double>(i % 24) / 24.0);
        out.push_back(10.0 + 4.0 * day + 0.002 * static_cast<double>(i) + noise(rng));
    }
    return out;
}

/// Strictly periodic series (period 24); the seasonal-naive forecast of any
/// window equals its truth exactly.
inline std::vector<double> periodic_series(std::size_t n) {
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(5.0 + std::cos(2.0 * 3.14159265358979323846 *
                                     static_cast<double>(i % 24) / 24.0) *
                                3.0 +
                      static_cast<double>(i % 24) * 0.1);
    }
    return out;
}

inline void write_text(const std::filesystem::path& file, const std::string& content) {
    std::ofstream out(file);
    out << content;
}

}  // namespace slowcast::testutil
