// Acceptance suite: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Exit code is nonzero if any criterion
// fails. The live-API smoke test is environment-gated and reports SKIP when
// no credentials are configured.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "slowcast/engine.hpp"
#include "slowcast/errors.hpp"
#include "slowcast/evaluation.hpp"
#include "slowcast/experiment.hpp"
#include "slowcast/parser.hpp"
#include "testutil.hpp"

using namespace slowcast;
namespace tu = slowcast::testutil;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

void expect_near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
        throw Failure(what + ": got " + format_value_exact(got) + ", want " +
                      format_value_exact(want) + " within " + format_value_exact(tol));
    }
}

std::string slurp(const std::filesystem::path& file) {
    std::ifstream in(file);
    expect(in.good(), "missing file " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

nlohmann::json first_record(const std::filesystem::path& run_dir) {
    std::ifstream in(run_dir / "records.jsonl");
    std::string line;
    expect(static_cast<bool>(std::getline(in, line)), "empty records.jsonl");
    return nlohmann::json::parse(line);
}

// Shared synthetic fixture: T=1000 hourly rows, one channel.
std::vector<double> fixture_values() { return tu::synthetic_series(1000, 20260810); }

RunConfig fixture_config(const tu::TempDir& dir, const std::vector<double>& values) {
    std::vector<Timestamp> ts;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
        ts.push_back(tu::kEpoch2016 + static_cast<Timestamp>(i) * 3600);
        rows.push_back({values[i]});
    }
    tu::write_csv(dir.path() / "data.csv", {"OT"}, ts, rows);

    RunConfig config;
    config.dataset.name = "fixture";
    config.dataset.path = (dir.path() / "data.csv").string();
    config.lookback = 96;
    config.horizon = 96;
    config.stride = 96;
    config.split_ratios = {0.2, 0.1, 0.7};
    config.provider.kind = ProviderKind::MockSeasonalNaive;
    config.provider.period = 24;
    config.strategy.generations_k = 1;
    config.output_dir = (dir.path() / "runs").string();
    config.cache_dir = (dir.path() / "cache").string();
    return config;
}

// ---------------------------------------------------------------------------
// Criterion 1: mse/mae equal a naive reference loop within 1e-9.
// ---------------------------------------------------------------------------
void criterion_metric_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> val(-1000, 1000);
    std::uniform_int_distribution<std::size_t> len(1, 256);
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<double> a(len(rng)), b(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = val(rng);
            b[i] = val(rng);
        }
        long double se = 0, ae = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const long double d = static_cast<long double>(a[i]) - b[i];
            se += d * d;
            ae += std::abs(d);
        }
        const double ref_mse = static_cast<double>(se / static_cast<long double>(a.size()));
        const double ref_mae = static_cast<double>(ae / static_cast<long double>(a.size()));
        expect_near(mse(a, b), ref_mse, 1e-9 * std::max(1.0, ref_mse), "mse vs reference");
        expect_near(mae(a, b), ref_mae, 1e-9 * std::max(1.0, ref_mae), "mae vs reference");
    }
}

// ---------------------------------------------------------------------------
// Criterion 2: end-to-end forecast equals an independently coded
// seasonal-naive MSE computation, identically for all three strategies.
// ---------------------------------------------------------------------------
double independent_seasonal_naive_mse(const std::filesystem::path& csv, std::size_t lookback,
                                      std::size_t horizon, std::size_t stride,
                                      std::size_t period) {
    // Independent path: re-read the CSV text and recompute everything with
    // plain loops.
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> values;
    while (std::getline(in, line)) {
        const std::size_t comma = line.rfind(',');
        values.push_back(std::stod(line.substr(comma + 1)));
    }
    const double t = static_cast<double>(values.size());
    const auto n_train = static_cast<std::size_t>(t * 0.2 + 1e-6);
    const auto n_val = static_cast<std::size_t>(t * 0.1 + 1e-6);
    const std::vector<double> test(values.begin() + n_train + n_val, values.end());

    double total = 0;
    std::size_t windows = 0;
    for (std::size_t origin = lookback; origin + horizon <= test.size(); origin += stride) {
        double se = 0;
        for (std::size_t i = 0; i < horizon; ++i) {
            const double pred = test[origin - period + (i % period)];
            const double diff = pred - test[origin + i];
            se += diff * diff;
        }
        total += se / static_cast<double>(horizon);
        ++windows;
    }
    expect(windows == 6,
           "oracle expected 6 evaluation windows, got " + std::to_string(windows));
    return total / static_cast<double>(windows);
}

void criterion_end_to_end_oracle() {
    tu::TempDir dir("acc_e2e");
    const std::vector<double> values = fixture_values();
    RunConfig config = fixture_config(dir, values);

    const double oracle =
        independent_seasonal_naive_mse(dir.path() / "data.csv", 96, 96, 96, 24);

    std::vector<double> per_strategy;
    for (Strategy strategy : {Strategy::OneShot, Strategy::Decoupled, Strategy::Rollout}) {
        RunConfig run_cfg = config;
        run_cfg.strategy.strategy = strategy;
        run_cfg.strategy.rollout_rounds = 4;
        const RunResult result = run_forecast(run_cfg);
        expect(result.totals.failed == 0, "run had failures");
        expect(result.summary.size() == 1, "expected one summary group");
        expect(result.totals.tasks == 6, "expected 6 tasks");
        per_strategy.push_back(result.summary[0].mean_mse);
    }
    for (std::size_t i = 0; i < per_strategy.size(); ++i) {
        expect_near(per_strategy[i], oracle, 1e-9 * std::max(1.0, oracle),
                    "strategy " + std::to_string(i) + " vs oracle");
    }
    expect(per_strategy[0] == per_strategy[1] && per_strategy[1] == per_strategy[2],
           "strategies disagree: " + format_value_exact(per_strategy[0]) + " / " +
               format_value_exact(per_strategy[1]) + " / " +
               format_value_exact(per_strategy[2]));
}

// ---------------------------------------------------------------------------
// Criterion 3: aggregation law on scripted generations.
// ---------------------------------------------------------------------------
void criterion_aggregation_law() {
    tu::TempDir dir("acc_agg");
    ForecastTask task;
    task.window = tu::make_prompt_window({1, 2, 3, 4}, {0, 0});
    task.context = tu::test_context();
    task.meta = tu::test_meta();
    const HybridPrompt prompt =
        build_prompt(task.window, task.context, task.variant, task.meta);

    nlohmann::json fixtures;
    fixtures[prompt_hash(prompt) + ":0"] = {{"content", "<FORECAST>0, 0</FORECAST>"}};
    fixtures[prompt_hash(prompt) + ":1"] = {{"content", "<FORECAST>2, 4</FORECAST>"}};
    tu::write_text(dir.path() / "f.json", fixtures.dump());

    ProviderSpec spec;
    spec.kind = ProviderKind::MockScripted;
    spec.fixture_path = (dir.path() / "f.json").string();
    auto provider = make_provider(spec);

    StrategyConfig cfg;
    cfg.generations_k = 2;
    const ForecastBundle bundle = forecast_window(task, cfg, *provider);
    expect(bundle.mean_forecast == std::vector<double>{1, 2}, "mean forecast mismatch");
    expect(bundle.per_step_std == std::vector<double>{1, 2}, "per-step std mismatch");
}

// ---------------------------------------------------------------------------
// Criterion 4: uncertainty calibration with mock_noisy(sigma=1), k=50.
// The window's truth equals the noiseless mock mean plus a fresh unit-noise
// draw, so the 80% band should cover roughly 80% of the steps.
// ---------------------------------------------------------------------------
void criterion_uncertainty_calibration() {
    tu::TempDir dir("acc_unc");
    std::vector<double> values = tu::periodic_series(1000);
    // ratios (0.7, 0.1, 0.2): the single test window has lookback rows
    // 800..895 and horizon rows 896..991.
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> fresh(0.0, 1.0);
    for (std::size_t i = 896; i < 992; ++i) values[i] += fresh(rng);

    RunConfig config = fixture_config(dir, values);
    config.split_ratios = {0.7, 0.1, 0.2};
    config.provider.kind = ProviderKind::MockNoisy;
    config.provider.noisy_base = MockBase::SeasonalNaive;
    config.provider.sigma = 1.0;
    config.provider.mock_seed = 7;
    config.uncertainty.k = 50;
    config.uncertainty.gamma = 0.8;

    const RunResult result = run_uncertainty(config);
    expect(result.totals.tasks == 1, "expected exactly one window");
    expect(result.totals.failed == 0, "uncertainty run failed");

    const nlohmann::json rec = first_record(result.run_dir);
    const auto per_step = rec.at("per_step_std").get<std::vector<double>>();
    double mean_std = 0;
    for (double s : per_step) mean_std += s;
    mean_std /= static_cast<double>(per_step.size());
    expect(mean_std >= 0.85 && mean_std <= 1.15,
           "mean per-step std " + format_value_exact(mean_std) + " outside [0.85, 1.15]");

    const double coverage = rec.at("coverage").get<double>();
    expect(coverage >= 0.70 && coverage <= 0.90,
           "band coverage " + format_value_exact(coverage) + " outside [0.70, 0.90]");
}

// ---------------------------------------------------------------------------
// Criterion 5: interpolated order-statistic quantiles.
// ---------------------------------------------------------------------------
void criterion_quantile_convention() {
    std::vector<std::vector<double>> samples;
    for (int s = 1; s <= 10; ++s) samples.push_back({static_cast<double>(s)});
    const auto [lower, upper] = quantile_band(samples, 0.8);
    expect_near(lower[0], 1.9, 1e-12, "lower quantile");
    expect_near(upper[0], 9.1, 1e-12, "upper quantile");
}

// ---------------------------------------------------------------------------
// Criterion 6: normalization invariants and raw-scale ablation metrics.
// ---------------------------------------------------------------------------
void criterion_normalization() {
    std::mt19937_64 rng(66);
    std::uniform_real_distribution<double> val(-100, 100);
    std::uniform_int_distribution<std::size_t> len(2, 192);
    int tested = 0;
    while (tested < 1000) {
        std::vector<double> window(len(rng));
        for (double& v : window) v = val(rng);
        bool degenerate = true;
        for (double v : window) degenerate = degenerate && v == window[0];
        if (degenerate) continue;
        ++tested;

        const auto [normalized, state] =
            normalize_values(window, NormalizationMode::RevIn, std::nullopt);
        double mean = 0;
        for (double v : normalized) mean += v;
        mean /= static_cast<double>(normalized.size());
        double var = 0;
        for (double v : normalized) var += (v - mean) * (v - mean);
        const double pop_std = std::sqrt(var / static_cast<double>(normalized.size()));
        expect(std::abs(mean) <= 1e-9, "revin mean exceeds 1e-9");
        expect(std::abs(pop_std - 1.0) <= 1e-9, "revin std deviates from 1 beyond 1e-9");

        const auto restored = denormalize_forecast(normalized, state);
        for (std::size_t i = 0; i < window.size(); ++i) {
            expect_near(restored[i], window[i], 1e-9 * std::max(1.0, std::abs(window[i])),
                        "denormalize(normalize(x)) != x");
        }
    }

    // Ablation: the RevIN row must report raw-scale metrics. The tiling mock
    // commutes with affine maps, so RevIN and raw runs coincide.
    tu::TempDir dir("acc_norm");
    RunConfig config = fixture_config(dir, fixture_values());
    const RunResult ablation = run_ablate(config);
    expect(ablation.summary.size() == 7, "expected 7 ablation rows");
    const GroupSummary& baseline = ablation.summary[0];
    const GroupSummary& revin = ablation.summary[6];
    expect(revin.variant == "w/ RevIN", "row order changed");
    expect_near(revin.mean_mse, baseline.mean_mse, 1e-9 * std::max(1.0, baseline.mean_mse),
                "RevIN ablation metrics not raw-scale");
    expect_near(revin.mean_mae, baseline.mean_mae, 1e-9 * std::max(1.0, baseline.mean_mae),
                "RevIN ablation MAE not raw-scale");
}

// ---------------------------------------------------------------------------
// Criterion 7: missing-data variants.
// ---------------------------------------------------------------------------
void criterion_missing_data() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> coef(-10, 10);
    for (int iter = 0; iter < 200; ++iter) {
        const double intercept = coef(rng);
        const double slope = coef(rng);
        std::vector<double> lookback(64);
        for (std::size_t i = 0; i < lookback.size(); ++i) {
            lookback[i] = intercept + slope * static_cast<double>(i);
        }
        const WindowInstance w = tu::make_window(lookback, {0.0});
        const MissingMask mask = make_missing_mask(lookback.size(), 0.25, iter);
        const PromptWindow pw = apply_missing(w, MissingMode::LinImp, mask);
        for (std::size_t i = 0; i < lookback.size(); ++i) {
            expect(std::abs(*pw.lookback[i].value - lookback[i]) <=
                       1e-12 * std::max(1.0, std::abs(lookback[i])),
                   "lin_imp not exact on affine series");
        }
    }

    const WindowInstance w = tu::make_window(tu::synthetic_series(96), {1, 2, 3});
    const MissingMask mask = make_missing_mask(96, 0.2, 5);

    const PromptWindow with_none = apply_missing(w, MissingMode::NoneImp, mask);
    const HybridPrompt none_prompt = build_prompt(with_none, tu::test_context(),
                                                  PromptVariantConfig{}, tu::test_meta());
    std::size_t none_lines = 0;
    std::size_t total_lines = 0;
    std::stringstream none_stream(none_prompt.series_block);
    std::string line;
    while (std::getline(none_stream, line)) {
        ++total_lines;
        if (line.size() >= 4 && line.substr(line.size() - 4) == "None") ++none_lines;
    }
    expect(total_lines == 96, "none_imp changed the line count");
    expect(none_lines == mask.indices.size(),
           "expected " + std::to_string(mask.indices.size()) + " None lines, got " +
               std::to_string(none_lines));

    const PromptWindow without = apply_missing(w, MissingMode::NoImp, mask);
    const HybridPrompt no_prompt = build_prompt(without, tu::test_context(),
                                                PromptVariantConfig{}, tu::test_meta());
    const std::size_t no_lines =
        static_cast<std::size_t>(std::count(no_prompt.series_block.begin(),
                                            no_prompt.series_block.end(), '\n')) +
        1;
    expect(no_lines == 96 - mask.indices.size(), "no_imp line count mismatch");
}

// ---------------------------------------------------------------------------
// Criterion 8: timestamp transforms and the ablation table shape.
// ---------------------------------------------------------------------------
void criterion_timestamp_transforms() {
    const std::vector<double> values = tu::synthetic_series(96);
    std::vector<Timestamp> ts;
    for (std::size_t i = 0; i < 96; ++i) {
        ts.push_back(tu::kEpoch2016 + static_cast<Timestamp>(i) * 3600);
    }
    for (const std::int64_t offset : {24 * 3600L, -24 * 3600L}) {
        const auto shifted =
            transform_timestamps(ts, {TimestampMode::Shift, offset}, Frequency::Hour1);
        expect(shifted.has_value(), "shift dropped the timestamps");
        for (std::size_t i = 1; i < ts.size(); ++i) {
            expect((*shifted)[i] - (*shifted)[i - 1] == ts[i] - ts[i - 1],
                   "shift changed a consecutive difference");
        }
    }

    PromptVariantConfig removed;
    removed.timestamps.mode = TimestampMode::Remove;
    const PromptWindow window = tu::make_prompt_window(values, {1, 2, 3});
    const HybridPrompt prompt =
        build_prompt(window, tu::test_context(), removed, tu::test_meta());
    expect(prompt.series_block.find(':') == std::string::npos,
           "removed timestamps still rendered");

    tu::TempDir dir("acc_ts");
    RunConfig config = fixture_config(dir, fixture_values());
    const RunResult ablation = run_ablate(config);
    const std::string csv = slurp(ablation.run_dir / "ablation.csv");
    for (const char* row : {"baseline", "w/o timestamps", "w/ forward shifting",
                            "w/ backward shifting", "w/o context", "w/ Z-score", "w/ RevIN"}) {
        expect(csv.find(row) != std::string::npos, std::string("missing ablation row ") + row);
    }
    expect(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == 8,
           "ablation.csv row count");
}

// ---------------------------------------------------------------------------
// Criterion 9: parser totality, round trip, and both repair paths.
// ---------------------------------------------------------------------------
void criterion_parser() {
    std::mt19937_64 rng(999);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<std::size_t> len(0, 300);
    std::uniform_int_distribution<std::size_t> horizon(1, 16);
    for (int iter = 0; iter < 10000; ++iter) {
        std::string text(len(rng), '\0');
        for (char& c : text) c = static_cast<char>(byte(rng));
        try {
            const ParsedAnswer answer = parse_with_repair(text, horizon(rng), 0, nullptr);
            for (double v : answer.values) expect(std::isfinite(v), "non-finite parsed value");
        } catch (const Error&) {
        }
    }

    std::uniform_real_distribution<double> val(-1e9, 1e9);
    std::uniform_int_distribution<std::size_t> vec_len(1, 64);
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<double> values(vec_len(rng));
        for (double& v : values) v = val(rng);
        std::string rendered = "<FORECAST>";
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) rendered += ", ";
            rendered += format_value_exact(values[i]);
        }
        rendered += "</FORECAST>";
        const ParsedAnswer answer = parse_with_repair(rendered, values.size(), 0, nullptr);
        expect(answer.values == values, "render-parse round trip not exact");
    }

    // Overlength: a scripted response with H + 2 values is truncated.
    tu::TempDir dir("acc_parse");
    ForecastTask task;
    task.window = tu::make_prompt_window({1, 2, 3, 4}, {0, 0});
    task.context = tu::test_context();
    task.meta = tu::test_meta();
    const HybridPrompt prompt =
        build_prompt(task.window, task.context, task.variant, task.meta);
    HybridPrompt repair = prompt;
    repair.answer_schema += "\n\n" + corrective_instruction(1, 2);

    nlohmann::json fixtures;
    fixtures[prompt_hash(prompt)] = {{"content", "<FORECAST>1, 2, 3, 4</FORECAST>"}};
    tu::write_text(dir.path() / "over.json", fixtures.dump());
    ProviderSpec spec;
    spec.kind = ProviderKind::MockScripted;
    spec.fixture_path = (dir.path() / "over.json").string();
    auto provider = make_provider(spec);
    StrategyConfig cfg;
    const GenerationResult over = run_one_shot(task, cfg, *provider);
    expect(over.forecast == std::vector<double>{1, 2}, "truncation result wrong");
    expect(over.repairs == std::vector<std::string>{"truncated"}, "missing truncated label");

    // Underlength: the corrective reprompt path.
    nlohmann::json fixtures2;
    fixtures2[prompt_hash(prompt)] = {{"content", "<FORECAST>9</FORECAST>"}};
    fixtures2[prompt_hash(repair)] = {{"content", "<FORECAST>7, 8</FORECAST>"}};
    tu::write_text(dir.path() / "under.json", fixtures2.dump());
    spec.fixture_path = (dir.path() / "under.json").string();
    auto provider2 = make_provider(spec);
    const GenerationResult under = run_one_shot(task, cfg, *provider2);
    expect(under.forecast == std::vector<double>{7, 8}, "reprompt result wrong");
    expect(under.repairs == std::vector<std::string>{"reprompted:1"},
           "missing reprompted label");
    expect(under.records.size() == 2, "reprompt should add a second record");
}

// ---------------------------------------------------------------------------
// Criterion 10: rollout partition law and strategy equality.
// ---------------------------------------------------------------------------
void criterion_rollout_partition() {
    for (std::size_t horizon = 1; horizon <= 64; ++horizon) {
        for (int rounds = 1; rounds <= static_cast<int>(horizon); ++rounds) {
            const auto chunks = rollout_partition(horizon, rounds);
            std::size_t total = 0;
            for (std::size_t c : chunks) {
                expect(c >= 1, "empty rollout round");
                total += c;
            }
            expect(total == horizon, "rollout chunks do not sum to the horizon");
        }
    }

    ProviderSpec spec;
    spec.kind = ProviderKind::MockSeasonalNaive;
    spec.period = 24;
    auto provider = make_provider(spec);
    ForecastTask task;
    task.window =
        tu::make_prompt_window(tu::synthetic_series(96), std::vector<double>(96, 0.0));
    task.context = tu::test_context();
    task.meta = tu::test_meta();
    StrategyConfig cfg;
    cfg.rollout_rounds = 4;
    expect(run_rollout(task, cfg, *provider).forecast ==
               run_one_shot(task, cfg, *provider).forecast,
           "rollout and one-shot disagree on the deterministic mock");
}

// ---------------------------------------------------------------------------
// Criterion 11: the four failure-mode fixtures and the healthy one.
// ---------------------------------------------------------------------------
void criterion_diagnostics() {
    constexpr double kPi = 3.14159265358979323846;
    auto sine = [&](std::size_t n, double period, double phase, double amp) {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = amp * std::sin(2.0 * kPi * (static_cast<double>(i) - phase) / period);
        }
        return out;
    };

    // (a) amplitude compression -> peak clipping only, severity 0.5.
    {
        const std::vector<double> truth = sine(96, 48, 0, 4.0);
        const std::vector<double> lookback = sine(96, 48, 0, 4.0);
        std::vector<double> pred;
        for (double v : truth) pred.push_back(0.5 * v);
        const Diagnosis d = diagnose(pred, lookback, truth);
        expect(d.peak_clipping, "compression not flagged as peak clipping");
        expect_near(d.peak_severity, 0.5, 1e-9, "peak severity");
        expect(!d.constant_collapse && !d.copy_paste && !d.phase_shift,
               "compression fixture raised extra flags");
    }
    // (b) lag-5 shift -> phase shift only, lag 5.
    {
        const std::vector<double> truth = sine(96, 48, 0, 4.0);
        const std::vector<double> lookback = sine(96, 48, 0, 4.0);
        const std::vector<double> pred = sine(96, 48, 5.0, 4.0);
        const Diagnosis d = diagnose(pred, lookback, truth);
        expect(d.phase_shift, "shift not flagged");
        expect(d.phase_lag == 5, "wrong lag: " + std::to_string(d.phase_lag));
        expect(!d.constant_collapse && !d.copy_paste && !d.peak_clipping,
               "shift fixture raised extra flags");
    }
    // (c) verbatim lookback copy -> copy-paste only, offset L-H.
    {
        const std::vector<double> lookback = tu::synthetic_series(96, 3);
        std::vector<double> truth = tu::synthetic_series(144, 9);
        truth.erase(truth.begin(), truth.begin() + 96);
        const std::vector<double> pred(lookback.end() - 48, lookback.end());
        const Diagnosis d = diagnose(pred, lookback, truth);
        expect(d.copy_paste, "verbatim copy not flagged");
        expect(d.copy_offset == 48, "wrong copy offset: " + std::to_string(d.copy_offset));
        expect_near(d.copy_similarity, 1.0, 1e-9, "copy similarity");
        expect(!d.constant_collapse, "copy fixture flagged collapse");
    }
    // (d) constant output -> collapse only, ratio 0, copy precedence.
    {
        const std::vector<double> lookback = tu::synthetic_series(96);
        const std::vector<double> truth = tu::synthetic_series(48);
        const std::vector<double> pred(48, 5.0);
        const Diagnosis d = diagnose(pred, lookback, truth);
        expect(d.constant_collapse, "constant output not flagged");
        expect(d.collapse_ratio == 0.0, "collapse ratio should be 0");
        expect(!d.copy_paste, "copy-paste flagged despite collapse precedence");
        expect(!d.phase_shift && !d.peak_clipping, "constant fixture raised extra flags");
    }
    // Healthy continuation -> no flags.
    {
        std::vector<double> lookback, truth;
        for (std::size_t i = 0; i < 96; ++i) {
            lookback.push_back(0.5 * static_cast<double>(i) +
                               3.0 * std::sin(2.0 * kPi * static_cast<double>(i) / 24.0));
        }
        for (std::size_t i = 96; i < 144; ++i) {
            truth.push_back(0.5 * static_cast<double>(i) +
                            3.0 * std::sin(2.0 * kPi * static_cast<double>(i) / 24.0));
        }
        const Diagnosis d = diagnose(truth, lookback, truth);
        expect(!d.any(), "healthy fixture raised a flag");
    }
}

// ---------------------------------------------------------------------------
// Criterion 12: heatmap marginals and diagonal concentration.
// ---------------------------------------------------------------------------
void criterion_heatmap() {
    std::vector<std::pair<long, double>> diagonal;
    for (int i = 0; i < 100; ++i) diagonal.emplace_back(i, static_cast<double>(i));
    const HeatmapMatrix concentrated = cot_decile_heatmap(diagonal);
    for (int d = 0; d < 10; ++d) {
        for (int r = 0; r < 10; ++r) {
            expect(concentrated[d][r] == (d == r ? 10 : 0), "diagonal concentration broken");
        }
    }

    std::mt19937_64 rng(55);
    std::vector<std::pair<long, double>> shuffled;
    std::vector<int> tokens(100);
    for (int i = 0; i < 100; ++i) tokens[i] = i;
    std::shuffle(tokens.begin(), tokens.end(), rng);
    for (int i = 0; i < 100; ++i) {
        shuffled.emplace_back(tokens[i], static_cast<double>((i * 61) % 100));
    }
    const HeatmapMatrix matrix = cot_decile_heatmap(shuffled);
    for (int i = 0; i < 10; ++i) {
        int row = 0, col = 0;
        for (int j = 0; j < 10; ++j) {
            row += matrix[i][j];
            col += matrix[j][i];
        }
        expect(row == 10, "heatmap row sum != 10");
        expect(col == 10, "heatmap column sum != 10");
    }
}

// ---------------------------------------------------------------------------
// Criterion 13: configuration constants.
// ---------------------------------------------------------------------------
void criterion_config_constants() {
    const SamplingParams sampling;
    expect(sampling.temperature == 0.6, "default temperature != 0.6");
    expect(sampling.top_p == 0.7, "default top_p != 0.7");
    expect(sampling.max_tokens == 8192, "default max_tokens != 8192");

    const StrategyConfig strategy;
    expect(strategy.generations_k == 3, "default k != 3");

    const UncertaintyConfig uncertainty;
    expect(uncertainty.k == 50, "uncertainty default k != 50");
    expect(uncertainty.gamma == 0.8, "uncertainty default gamma != 0.8");

    std::size_t seen = 0;
    for (const auto& [name, preset] : dataset_presets()) {
        ++seen;
        if (name == "nasdaq") {
            expect(preset.lookback == 36 && preset.horizon == 36, "nasdaq preset wrong");
        } else if (name == "vitaldb") {
            expect(preset.lookback == 300 && preset.horizon == 200, "vitaldb preset wrong");
        } else {
            expect(preset.lookback == 96 && preset.horizon == 96,
                   "preset " + name + " is not 96/96");
        }
    }
    expect(seen == 10, "expected 10 dataset presets");
}

// ---------------------------------------------------------------------------
// Criterion 14: resumability after an interruption.
// ---------------------------------------------------------------------------
class OutageProvider : public Provider {
public:
    OutageProvider(std::shared_ptr<Provider> inner, int fail_from)
        : inner_(std::move(inner)), fail_from_(fail_from) {}
    GenerationRecord complete(const HybridPrompt& prompt, const SamplingParams& sampling,
                              int generation_index) override {
        if (calls_++ >= fail_from_) throw UpstreamError(503, "synthetic outage");
        return inner_->complete(prompt, sampling, generation_index);
    }
    std::string label() const override { return inner_->label(); }

private:
    std::shared_ptr<Provider> inner_;
    int fail_from_;
    std::atomic<int> calls_{0};
};

void criterion_resumability() {
    tu::TempDir dir("acc_resume");
    RunConfig config = fixture_config(dir, fixture_values());
    auto mock = std::shared_ptr<Provider>(make_provider(config.provider));

    const RunResult reference =
        run_forecast(config, mock, dir.path() / "runs" / "reference");
    expect(reference.totals.failed == 0, "reference run failed");

    auto outage = std::make_shared<OutageProvider>(mock, 3);
    const RunResult interrupted =
        run_forecast(config, outage, dir.path() / "runs" / "resumable");
    expect(interrupted.totals.failed > 0, "outage did not interrupt the run");

    const RunResult resumed = run_forecast(config, mock, dir.path() / "runs" / "resumable");
    expect(resumed.totals.failed == 0, "resumed run still failing");
    expect(slurp(resumed.run_dir / "summary.csv") == slurp(reference.run_dir / "summary.csv"),
           "resumed summary differs from the uninterrupted run");
}

// ---------------------------------------------------------------------------
// Criterion 15 (environment-gated): live API smoke test.
// ---------------------------------------------------------------------------
bool criterion_live_smoke(std::string& note) {
    const char* endpoint = std::getenv("SLOWCAST_LIVE_ENDPOINT");
    const char* model = std::getenv("SLOWCAST_LIVE_MODEL");
    const char* key_var = std::getenv("SLOWCAST_LIVE_KEY_VAR");
    if (!endpoint || !model) {
        note = "set SLOWCAST_LIVE_ENDPOINT / SLOWCAST_LIVE_MODEL / SLOWCAST_LIVE_KEY_VAR "
               "(and the key) to enable";
        return false;
    }
    tu::TempDir dir("acc_live");
    RunConfig config = fixture_config(dir, fixture_values());
    config.provider.kind = ProviderKind::HttpChat;
    config.provider.endpoint = endpoint;
    config.provider.model_name = model;
    if (key_var) config.provider.auth_env_var = key_var;
    config.lookback = 96;
    config.horizon = 24;
    config.stride = 120;  // 5 windows in the 700-row test split
    config.strategy.generations_k = 1;
    config.max_parallel_requests = 1;
    config.failure_tolerance = 0.2;  // the >= 80% parse-rate bar

    const RunResult result = run_forecast(config);
    expect(result.totals.tasks == 5, "expected 5 live windows");
    const double parse_rate = 1.0 - static_cast<double>(result.totals.failed) /
                                        static_cast<double>(result.totals.tasks);
    expect(parse_rate >= 0.8, "live parse rate " + format_value_exact(parse_rate) + " < 0.8");
    for (const auto& g : result.summary) {
        if (g.count > 0) {
            expect(std::isfinite(g.mean_mse) && std::isfinite(g.mean_mae),
                   "live metrics not finite");
        }
    }
    note = "parse rate " + format_value_exact(parse_rate);
    return true;
}

struct Criterion {
    int number;
    const char* name;
    std::function<void()> body;
    double time_limit_s;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "metric oracle equivalence", criterion_metric_oracle, 5.0},
        {2, "end-to-end seasonal-naive oracle, three strategies", criterion_end_to_end_oracle,
         60.0},
        {3, "aggregation law (mean and per-step std)", criterion_aggregation_law, 0.0},
        {4, "uncertainty calibration (sigma=1, k=50)", criterion_uncertainty_calibration, 30.0},
        {5, "interpolated quantile convention", criterion_quantile_convention, 0.0},
        {6, "normalization invariants and raw-scale ablation", criterion_normalization, 0.0},
        {7, "missing-data variants", criterion_missing_data, 0.0},
        {8, "timestamp transforms and ablation table", criterion_timestamp_transforms, 0.0},
        {9, "parser totality, round trip, repair paths", criterion_parser, 0.0},
        {10, "rollout partition law and strategy equality", criterion_rollout_partition, 0.0},
        {11, "failure-mode fixtures", criterion_diagnostics, 0.0},
        {12, "heatmap marginals and concentration", criterion_heatmap, 0.0},
        {13, "configuration constants", criterion_config_constants, 0.0},
        {14, "resumability", criterion_resumability, 0.0},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string error;
        try {
            criterion.body();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (error.empty() && criterion.time_limit_s > 0 && elapsed > criterion.time_limit_s) {
            error = "exceeded time limit of " + format_value_exact(criterion.time_limit_s) + "s";
        }
        if (error.empty()) {
            std::printf("criterion %2d  %-52s PASS  (%.2fs)\n", criterion.number,
                        criterion.name, elapsed);
        } else {
            std::printf("criterion %2d  %-52s FAIL  (%.2fs): %s\n", criterion.number,
                        criterion.name, elapsed, error.c_str());
            ++failures;
        }
    }

    // Criterion 15 is optional: it needs live API credentials.
    {
        std::string note;
        try {
            if (criterion_live_smoke(note)) {
                std::printf("criterion 15  %-52s PASS  (%s)\n", "live API smoke test",
                            note.c_str());
            } else {
                std::printf("criterion 15  %-52s SKIP  (%s)\n", "live API smoke test",
                            note.c_str());
            }
        } catch (const std::exception& e) {
            std::printf("criterion 15  %-52s FAIL  (%s)\n", "live API smoke test", e.what());
            ++failures;
        }
    }

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
