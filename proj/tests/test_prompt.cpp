#include "slowcast/prompt.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "doctest.h"
#include "slowcast/errors.hpp"
#include "testutil.hpp"

using namespace slowcast;
namespace tu = slowcast::testutil;

namespace {

std::size_t count_lines(const std::string& block) {
    if (block.empty()) return 0;
    return static_cast<std::size_t>(std::count(block.begin(), block.end(), '\n')) + 1;
}

std::string mask_timestamps(const std::string& text) {
    static const std::regex ts_re(R"(\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2})");
    return std::regex_replace(text, ts_re, "<TS>");
}

}  // namespace

TEST_CASE("transform_timestamps shift by one day") {
    const std::vector<Timestamp> ts = {tu::kEpoch2016, tu::kEpoch2016 + 3600};
    const auto shifted =
        transform_timestamps(ts, {TimestampMode::Shift, 24 * 3600}, Frequency::Hour1);
    REQUIRE(shifted.has_value());
    CHECK(format_timestamp((*shifted)[0]) == "2016-07-02 00:00:00");
    CHECK(format_timestamp((*shifted)[1]) == "2016-07-02 01:00:00");
    // Consecutive differences are unchanged.
    CHECK((*shifted)[1] - (*shifted)[0] == ts[1] - ts[0]);
}

TEST_CASE("transform_timestamps remove and offset validation") {
    const std::vector<Timestamp> ts = {tu::kEpoch2016, tu::kEpoch2016 + 3600};
    CHECK(!transform_timestamps(ts, {TimestampMode::Remove, 0}, Frequency::Hour1).has_value());
    CHECK_THROWS_AS(
        transform_timestamps(ts, {TimestampMode::Shift, 90 * 60}, Frequency::Hour1),
        OffsetNotMultipleOfFrequency);
}

TEST_CASE("normalize raw is the identity") {
    const std::vector<double> v = {1, 2, 3};
    const auto [out, state] = normalize_values(v, NormalizationMode::Raw, std::nullopt);
    CHECK(out == v);
    CHECK(state.location == 0.0);
    CHECK(state.scale == 1.0);
}

TEST_CASE("revin normalizes with lookback mean and population std") {
    const auto [out, state] = normalize_values({1, 2, 3}, NormalizationMode::RevIn, std::nullopt);
    CHECK(state.location == doctest::Approx(2.0));
    CHECK(state.scale == doctest::Approx(0.816497).epsilon(1e-6));
    REQUIRE(out.size() == 3);
    CHECK(out[0] == doctest::Approx(-1.224745).epsilon(1e-6));
    CHECK(out[1] == doctest::Approx(0.0));
    CHECK(out[2] == doctest::Approx(1.224745).epsilon(1e-6));
}

TEST_CASE("revin rejects zero-variance windows") {
    CHECK_THROWS_AS(normalize_values({5, 5, 5}, NormalizationMode::RevIn, std::nullopt),
                    DegenerateWindow);
}

TEST_CASE("zscore needs training stats") {
    CHECK_THROWS_AS(normalize_values({1, 2}, NormalizationMode::ZScore, std::nullopt),
                    MissingTrainStats);
    CHECK_THROWS_AS(normalize_values({1, 2}, NormalizationMode::ZScore, TrainStats{3.0, 0.0}),
                    DegenerateWindow);
    const auto [out, state] = normalize_values({1, 2}, NormalizationMode::ZScore,
                                               TrainStats{1.0, 2.0});
    CHECK(out[0] == doctest::Approx(0.0));
    CHECK(out[1] == doctest::Approx(0.5));
    CHECK(state.location == 1.0);
    CHECK(state.scale == 2.0);
}

TEST_CASE("denormalize_forecast examples") {
    const std::vector<double> v = {-1.224745, 0, 1.224745};
    const auto raw = denormalize_forecast(v, {NormalizationMode::RevIn, 2.0, 0.816497});
    CHECK(raw[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(raw[1] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(raw[2] == doctest::Approx(3.0).epsilon(1e-6));

    const std::vector<double> any = {4.2, -1.0};
    CHECK(denormalize_forecast(any, {NormalizationMode::Raw, 0.0, 1.0}) == any);
    CHECK(denormalize_forecast({0, 0}, {NormalizationMode::RevIn, 10.0, 2.0}) ==
          std::vector<double>{10, 10});
}

TEST_CASE("revin output statistics and round-trip over random windows") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> val(-50, 50);
    std::uniform_int_distribution<std::size_t> len(2, 128);
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<double> window(len(rng));
        for (double& v : window) v = val(rng);
        // Skip the unlikely degenerate draw.
        if (std::adjacent_find(window.begin(), window.end(), std::not_equal_to<>()) ==
            window.end()) {
            continue;
        }
        const auto [normalized, state] =
            normalize_values(window, NormalizationMode::RevIn, std::nullopt);

        double mean = 0;
        for (double v : normalized) mean += v;
        mean /= static_cast<double>(normalized.size());
        double var = 0;
        for (double v : normalized) var += (v - mean) * (v - mean);
        const double pop_std = std::sqrt(var / static_cast<double>(normalized.size()));
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(std::abs(pop_std - 1.0) <= 1e-9);

        const auto restored = denormalize_forecast(normalized, state);
        for (std::size_t i = 0; i < window.size(); ++i) {
            CHECK(restored[i] == doctest::Approx(window[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("format_value rounding") {
    CHECK(format_value(3.14159, 4) == "3.1416");
    CHECK(format_value(-2.0, 2) == "-2.00");
    const double v = 0.1234567890123;
    CHECK(std::stod(format_value_exact(v)) == v);
}

TEST_CASE("build_prompt structure with timestamps and context") {
    const PromptWindow window = tu::make_prompt_window({1.5, 2.5}, {3.5, 4.5, 5.5});
    const HybridPrompt prompt =
        build_prompt(window, tu::test_context(), PromptVariantConfig{}, tu::test_meta());

    CHECK(count_lines(prompt.series_block) == 2);
    CHECK(!prompt.context_block.empty());
    CHECK(prompt.directive.find('3') != std::string::npos);
    CHECK(prompt.answer_schema.find("<FORECAST>") != std::string::npos);
    CHECK(prompt.answer_schema.find("exactly 3") != std::string::npos);
    CHECK(prompt.series_block.find("2016-07-01 00:00:00: 1.5000") == 0);
    CHECK(prompt.horizon == 3);
    CHECK(prompt.observed_values == std::vector<double>{1.5, 2.5});
    // Deterministic rendering.
    const HybridPrompt again =
        build_prompt(window, tu::test_context(), PromptVariantConfig{}, tu::test_meta());
    CHECK(prompt.text() == again.text());
}

TEST_CASE("build_prompt without timestamps or context") {
    const PromptWindow window = tu::make_prompt_window({1.5, 2.5}, {3.5});
    PromptVariantConfig variant;
    variant.timestamps.mode = TimestampMode::Remove;
    variant.context_enabled = false;
    const HybridPrompt prompt =
        build_prompt(window, tu::test_context(), variant, tu::test_meta());
    CHECK(prompt.context_block.empty());
    CHECK(prompt.series_block == "1.5000\n2.5000");
    CHECK(prompt.text().find("Context:") == std::string::npos);
    CHECK(prompt.directive.find("2016-") == std::string::npos);
}

TEST_CASE("shifted prompts differ only inside timestamp substrings") {
    const PromptWindow window = tu::make_prompt_window(tu::synthetic_series(8), {1, 2, 3});
    PromptVariantConfig keep;
    PromptVariantConfig shifted;
    shifted.timestamps.mode = TimestampMode::Shift;
    shifted.timestamps.shift_seconds = -24 * 3600;

    const std::string keep_text =
        build_prompt(window, tu::test_context(), keep, tu::test_meta()).text();
    const std::string shift_text =
        build_prompt(window, tu::test_context(), shifted, tu::test_meta()).text();
    CHECK(keep_text != shift_text);
    CHECK(mask_timestamps(keep_text) == mask_timestamps(shift_text));
}

TEST_CASE("build_prompt renders None placeholders verbatim") {
    WindowInstance w = tu::make_window({1.0, 9.9, 3.0}, {4.0});
    MissingMask mask;
    mask.indices = {1};
    const PromptWindow window = apply_missing(w, MissingMode::NoneImp, mask);
    const HybridPrompt prompt =
        build_prompt(window, tu::test_context(), PromptVariantConfig{}, tu::test_meta());
    CHECK(count_lines(prompt.series_block) == 3);
    CHECK(prompt.series_block.find(": None") != std::string::npos);
    CHECK(prompt.observed_values == std::vector<double>{1.0, 3.0});
}

TEST_CASE("decoupled protocol adds the draft instruction") {
    const PromptWindow window = tu::make_prompt_window({1, 2}, {3, 4});
    const HybridPrompt prompt = build_prompt(window, tu::test_context(), PromptVariantConfig{},
                                             tu::test_meta(), AnswerProtocol::DraftThenFinal);
    CHECK(prompt.answer_schema.find("<DRAFT>") != std::string::npos);
    CHECK(prompt.answer_schema.find("<FORECAST>") != std::string::npos);
}

TEST_CASE("normalized prompts carry the standardization note and state") {
    const PromptWindow window = tu::make_prompt_window({1, 2, 3, 4}, {5});
    PromptVariantConfig variant;
    variant.normalization = NormalizationMode::RevIn;
    const HybridPrompt prompt =
        build_prompt(window, tu::test_context(), variant, tu::test_meta());
    CHECK(prompt.directive.find("standardized") != std::string::npos);
    CHECK(prompt.normalization.mode == NormalizationMode::RevIn);
    CHECK(prompt.normalization.scale > 0);
    // The rendered values are the normalized ones.
    CHECK(prompt.series_block.find("1.0000") == std::string::npos);
}

TEST_CASE("load_context_file parses named sections") {
    tu::TempDir dir("ctx");
    const auto file = dir.path() / "demo.txt";
    tu::write_text(file,
                   "[domain]\nHourly electricity transformer telemetry.\n\n[channels]\n"
                   "OT: oil temperature\nHUFL: high useful load\n\n[frequency]\n1 hour\n");
    const ContextDescriptor ctx = load_context_file(file.string());
    CHECK(ctx.domain_text == "Hourly electricity transformer telemetry.");
    REQUIRE(ctx.channel_semantics.size() == 2);
    CHECK(*ctx.semantics_for("OT") == "oil temperature");
    CHECK(!ctx.semantics_for("XX").has_value());
    CHECK(ctx.frequency_text == "1 hour");
}

TEST_CASE("golden prompt snapshot") {
    const PromptWindow window = tu::make_prompt_window({10.1234, 11.5, 12.25}, {13.0, 14.0});
    const HybridPrompt prompt =
        build_prompt(window, tu::test_context(), PromptVariantConfig{}, tu::test_meta());
    const std::string rendered = prompt.text() + "\n";

    const std::filesystem::path golden =
        std::filesystem::path(SLOWCAST_SOURCE_DIR) / "tests" / "golden" /
        "prompt_baseline.txt";
    if (std::getenv("SLOWCAST_UPDATE_GOLDEN")) {
        std::filesystem::create_directories(golden.parent_path());
        tu::write_text(golden, rendered);
    }
    std::ifstream in(golden);
    REQUIRE_MESSAGE(in.good(), "golden file missing; run with SLOWCAST_UPDATE_GOLDEN=1");
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == rendered);
}
