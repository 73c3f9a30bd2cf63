#include "slowcast/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "slowcast/errors.hpp"
#include "slowcast/parser.hpp"

namespace slowcast {

using nlohmann::json;

namespace {

std::string utc_compact_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d%02d%02dT%02d%02d%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

json deep_merge(json base, const json& overlay) {
    if (!base.is_object() || !overlay.is_object()) return overlay;
    for (const auto& [key, value] : overlay.items()) {
        if (base.contains(key) && base[key].is_object() && value.is_object()) {
            base[key] = deep_merge(base[key], value);
        } else {
            base[key] = value;
        }
    }
    return base;
}

void atomic_write(const std::filesystem::path& file, const std::string& content) {
    static std::atomic<unsigned> counter{0};
    const std::filesystem::path tmp =
        file.parent_path() / (file.filename().string() + ".tmp." +
                              std::to_string(::getpid()) + "." +
                              std::to_string(counter.fetch_add(1)));
    {
        std::ofstream out(tmp);
        out << content;
    }
    std::filesystem::rename(tmp, file);
}

std::string resolve_path(const std::string& p, const std::filesystem::path& base_dir) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    if (path.is_absolute() || base_dir.empty()) return p;
    return (base_dir / path).string();
}

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

PromptVariantConfig VariantSpec::materialize(Frequency freq) const {
    PromptVariantConfig cfg;
    cfg.timestamps.mode = timestamp_mode;
    cfg.timestamps.shift_seconds = shift_steps * step_seconds(freq);
    cfg.context_enabled = context_enabled;
    cfg.normalization = normalization;
    cfg.missing_mode = missing_mode;
    cfg.value_precision = value_precision;
    return cfg;
}

void RunConfig::validate() const {
    if (dataset.path.empty()) throw ConfigInvalid("dataset.path", "missing");
    if (lookback < 1) throw ConfigInvalid("lookback", "must be >= 1");
    if (horizon < 1) throw ConfigInvalid("horizon", "must be >= 1");
    const double rsum = split_ratios[0] + split_ratios[1] + split_ratios[2];
    if (std::abs(rsum - 1.0) > 1e-9) throw ConfigInvalid("split_ratios", "must sum to 1");
    for (double r : split_ratios) {
        if (r < 0.0) throw ConfigInvalid("split_ratios", "must be non-negative");
    }
    if (max_parallel_requests < 1) throw ConfigInvalid("max_parallel_requests", "must be >= 1");
    if (strategy.generations_k < 1) throw ConfigInvalid("strategy.generations_k", "must be >= 1");
    if (strategy.strategy == Strategy::Rollout && strategy.rollout_rounds < 2) {
        throw ConfigInvalid("strategy.rollout_rounds", "rollout needs >= 2 rounds");
    }
    if (strategy.sampling.temperature < 0.0) {
        throw ConfigInvalid("sampling.temperature", "must be >= 0");
    }
    if (strategy.sampling.top_p <= 0.0 || strategy.sampling.top_p > 1.0) {
        throw ConfigInvalid("sampling.top_p", "must be in (0, 1]");
    }
    if (strategy.sampling.max_tokens < 1) throw ConfigInvalid("sampling.max_tokens", "must be >= 1");
    if (missing_rate < 0.0 || missing_rate >= 1.0) {
        throw ConfigInvalid("missing_rate", "must be in [0, 1)");
    }
    if (failure_tolerance < 0.0 || failure_tolerance > 1.0) {
        throw ConfigInvalid("failure_tolerance", "must be in [0, 1]");
    }
    if (variant.value_precision < 0 || variant.value_precision > 17) {
        throw ConfigInvalid("variant.value_precision", "must be in [0, 17]");
    }
    if (uncertainty.k < 2) throw ConfigInvalid("uncertainty.k", "must be >= 2");
    if (uncertainty.gamma <= 0.0 || uncertainty.gamma >= 1.0) {
        throw ConfigInvalid("uncertainty.gamma", "must be in (0, 1)");
    }
    if (provider.kind == ProviderKind::HttpChat &&
        (provider.endpoint.empty() || provider.model_name.empty())) {
        throw ConfigInvalid("provider", "http_chat needs endpoint and model_name");
    }
    if (provider.kind == ProviderKind::MockScripted && provider.fixture_path.empty()) {
        throw ConfigInvalid("provider.fixture", "mock_scripted needs a fixture path");
    }
}

const std::vector<std::pair<std::string, DatasetPreset>>& dataset_presets() {
    static const std::vector<std::pair<std::string, DatasetPreset>> presets = {
        {"etth1", {96, 96, Frequency::Hour1}},
        {"etth2", {96, 96, Frequency::Hour1}},
        {"ettm1", {96, 96, Frequency::Min15}},
        {"ettm2", {96, 96, Frequency::Min15}},
        {"aqwan", {96, 96, Frequency::Hour1}},
        {"aqshunyi", {96, 96, Frequency::Hour1}},
        {"exchange", {96, 96, Frequency::Day1}},
        {"wind", {96, 96, Frequency::Min15}},
        {"nasdaq", {36, 36, Frequency::Day1}},
        {"vitaldb", {300, 200, Frequency::Sec3}},
    };
    return presets;
}

void apply_preset(RunConfig& config, const std::string& name) {
    for (const auto& [key, preset] : dataset_presets()) {
        if (key == name) {
            config.lookback = preset.lookback;
            config.horizon = preset.horizon;
            config.dataset.schema.frequency = preset.frequency;
            if (config.dataset.name == "dataset") config.dataset.name = name;
            return;
        }
    }
    throw ConfigInvalid("preset", "unknown preset '" + name + "'");
}

const std::vector<std::pair<std::string, std::string>>& ablation_rows() {
    static const std::vector<std::pair<std::string, std::string>> rows = {
        {"baseline", "baseline"},
        {"no_timestamps", "w/o timestamps"},
        {"forward_shift", "w/ forward shifting"},
        {"backward_shift", "w/ backward shifting"},
        {"no_context", "w/o context"},
        {"zscore", "w/ Z-score"},
        {"revin", "w/ RevIN"},
    };
    return rows;
}

VariantSpec ablation_variant(const RunConfig& config, const std::string& name) {
    VariantSpec v;
    v.missing_mode = config.variant.missing_mode;
    v.value_precision = config.variant.value_precision;
    if (name == "baseline") {
        return v;
    }
    if (name == "no_timestamps") {
        v.timestamp_mode = TimestampMode::Remove;
        return v;
    }
    if (name == "forward_shift" || name == "backward_shift") {
        v.timestamp_mode = TimestampMode::Shift;
        v.shift_steps = name == "forward_shift" ? config.shift_steps : -config.shift_steps;
        return v;
    }
    if (name == "no_context") {
        v.context_enabled = false;
        return v;
    }
    if (name == "zscore") {
        v.normalization = NormalizationMode::ZScore;
        return v;
    }
    if (name == "revin") {
        v.normalization = NormalizationMode::RevIn;
        return v;
    }
    throw ConfigInvalid("variant", "unknown ablation setting '" + name + "'");
}

namespace {

TimestampMode parse_timestamp_mode(const std::string& name) {
    if (name == "keep") return TimestampMode::Keep;
    if (name == "remove") return TimestampMode::Remove;
    if (name == "shift") return TimestampMode::Shift;
    throw ConfigInvalid("variant.timestamps", "unknown mode '" + name + "'");
}

std::string timestamp_mode_name(TimestampMode m) {
    switch (m) {
        case TimestampMode::Keep: return "keep";
        case TimestampMode::Remove: return "remove";
        case TimestampMode::Shift: return "shift";
    }
    return "keep";
}

ProviderKind parse_provider_kind(const std::string& name) {
    if (name == "http_chat") return ProviderKind::HttpChat;
    if (name == "mock_seasonal_naive") return ProviderKind::MockSeasonalNaive;
    if (name == "mock_noisy") return ProviderKind::MockNoisy;
    if (name == "mock_scripted") return ProviderKind::MockScripted;
    throw ConfigInvalid("provider.kind", "unknown kind '" + name + "'");
}

std::string provider_kind_name(ProviderKind k) {
    switch (k) {
        case ProviderKind::HttpChat: return "http_chat";
        case ProviderKind::MockSeasonalNaive: return "mock_seasonal_naive";
        case ProviderKind::MockNoisy: return "mock_noisy";
        case ProviderKind::MockScripted: return "mock_scripted";
    }
    return "mock_seasonal_naive";
}

}  // namespace

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    if (j.contains("preset")) apply_preset(cfg, j.at("preset").get<std::string>());

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        cfg.dataset.name = d.value("name", cfg.dataset.name);
        cfg.dataset.path = resolve_path(d.value("path", ""), base_dir);
        cfg.dataset.schema.timestamp_column =
            d.value("timestamp_column", cfg.dataset.schema.timestamp_column);
        if (d.contains("channels")) {
            cfg.dataset.schema.channel_columns =
                d.at("channels").get<std::vector<std::string>>();
        }
        cfg.dataset.schema.timestamp_format = d.value("timestamp_format", "");
        if (d.contains("frequency")) {
            cfg.dataset.schema.frequency = parse_frequency(d.at("frequency").get<std::string>());
        }
        cfg.dataset.schema.validate_gaps = d.value("validate_gaps", true);
        cfg.dataset.context_path = resolve_path(d.value("context", ""), base_dir);
        cfg.dataset.domain_note = d.value("domain_note", "");
    }
    if (j.contains("split_ratios")) {
        const auto r = j.at("split_ratios").get<std::vector<double>>();
        if (r.size() != 3) throw ConfigInvalid("split_ratios", "expected 3 fractions");
        cfg.split_ratios = {r[0], r[1], r[2]};
    }
    cfg.lookback = j.value("lookback", cfg.lookback);
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.stride = j.value("stride", cfg.stride);
    if (j.contains("channels")) cfg.channels = j.at("channels").get<std::vector<std::string>>();

    if (j.contains("strategy")) {
        const json& s = j.at("strategy");
        cfg.strategy.strategy = parse_strategy(s.value("name", "one_shot"));
        cfg.strategy.rollout_rounds = s.value("rollout_rounds", cfg.strategy.rollout_rounds);
        cfg.strategy.generations_k = s.value("generations_k", cfg.strategy.generations_k);
        cfg.strategy.parse_retries = s.value("parse_retries", cfg.strategy.parse_retries);
        if (s.contains("sampling")) {
            const json& sp = s.at("sampling");
            cfg.strategy.sampling.temperature =
                sp.value("temperature", cfg.strategy.sampling.temperature);
            cfg.strategy.sampling.top_p = sp.value("top_p", cfg.strategy.sampling.top_p);
            cfg.strategy.sampling.max_tokens =
                sp.value("max_tokens", cfg.strategy.sampling.max_tokens);
            if (sp.contains("seed") && !sp.at("seed").is_null()) {
                cfg.strategy.sampling.seed = sp.at("seed").get<std::uint64_t>();
            }
        }
    }
    if (j.contains("variant")) {
        const json& v = j.at("variant");
        cfg.variant.timestamp_mode = parse_timestamp_mode(v.value("timestamps", "keep"));
        cfg.variant.shift_steps = v.value("shift_steps", cfg.variant.shift_steps);
        cfg.variant.context_enabled = v.value("context", cfg.variant.context_enabled);
        cfg.variant.normalization = parse_normalization(v.value("normalization", "raw"));
        cfg.variant.missing_mode = parse_missing_mode(v.value("missing_mode", "full"));
        cfg.variant.value_precision = v.value("value_precision", cfg.variant.value_precision);
    }
    if (j.contains("provider")) {
        const json& p = j.at("provider");
        cfg.provider.kind = parse_provider_kind(p.value("kind", "mock_seasonal_naive"));
        cfg.provider.endpoint = p.value("endpoint", "");
        cfg.provider.model_name = p.value("model_name", "");
        cfg.provider.auth_env_var = p.value("auth_env_var", cfg.provider.auth_env_var);
        cfg.provider.timeout_seconds = p.value("timeout_seconds", cfg.provider.timeout_seconds);
        cfg.provider.max_retries = p.value("max_retries", cfg.provider.max_retries);
        cfg.provider.min_request_interval_ms =
            p.value("min_request_interval_ms", cfg.provider.min_request_interval_ms);
        cfg.provider.backoff_base_ms = p.value("backoff_base_ms", cfg.provider.backoff_base_ms);
        cfg.provider.period = p.value("period", cfg.provider.period);
        if (p.contains("noisy_base")) {
            const std::string base = p.at("noisy_base").get<std::string>();
            if (base == "seasonal_naive") cfg.provider.noisy_base = MockBase::SeasonalNaive;
            else if (base == "linear_trend") cfg.provider.noisy_base = MockBase::LinearTrend;
            else throw ConfigInvalid("provider.noisy_base", "unknown base '" + base + "'");
        }
        cfg.provider.sigma = p.value("sigma", cfg.provider.sigma);
        cfg.provider.mock_seed = p.value("mock_seed", cfg.provider.mock_seed);
        cfg.provider.fixture_path = resolve_path(p.value("fixture", ""), base_dir);
    }
    if (j.contains("axes")) {
        const json& a = j.at("axes");
        if (a.contains("lookbacks")) cfg.axes.lookbacks = a.at("lookbacks").get<std::vector<std::size_t>>();
        if (a.contains("horizons")) cfg.axes.horizons = a.at("horizons").get<std::vector<std::size_t>>();
        if (a.contains("temperatures")) cfg.axes.temperatures = a.at("temperatures").get<std::vector<double>>();
        if (a.contains("strategies")) cfg.axes.strategies = a.at("strategies").get<std::vector<std::string>>();
        if (a.contains("variants")) cfg.axes.variants = a.at("variants").get<std::vector<std::string>>();
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.cache_dir = j.value("cache_dir", cfg.cache_dir);
    cfg.max_parallel_requests = j.value("max_parallel_requests", cfg.max_parallel_requests);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.missing_rate = j.value("missing_rate", cfg.missing_rate);
    cfg.failure_tolerance = j.value("failure_tolerance", cfg.failure_tolerance);
    cfg.sweep_cap = j.value("sweep_cap", cfg.sweep_cap);
    cfg.shift_steps = j.value("shift_steps", cfg.shift_steps);
    if (j.contains("uncertainty")) {
        cfg.uncertainty.k = j.at("uncertainty").value("k", cfg.uncertainty.k);
        cfg.uncertainty.gamma = j.at("uncertainty").value("gamma", cfg.uncertainty.gamma);
    }
    if (j.contains("thresholds")) {
        const json& t = j.at("thresholds");
        cfg.thresholds.collapse_ratio = t.value("collapse_ratio", cfg.thresholds.collapse_ratio);
        cfg.thresholds.copy_similarity = t.value("copy_similarity", cfg.thresholds.copy_similarity);
        cfg.thresholds.copy_pointwise_frac =
            t.value("copy_pointwise_frac", cfg.thresholds.copy_pointwise_frac);
        cfg.thresholds.phase_corr = t.value("phase_corr", cfg.thresholds.phase_corr);
        cfg.thresholds.phase_margin = t.value("phase_margin", cfg.thresholds.phase_margin);
        cfg.thresholds.max_lag = t.value("max_lag", cfg.thresholds.max_lag);
        cfg.thresholds.peak_amplitude = t.value("peak_amplitude", cfg.thresholds.peak_amplitude);
        cfg.thresholds.peak_corr = t.value("peak_corr", cfg.thresholds.peak_corr);
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileUnreadable("cannot open config '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigInvalid("config", std::string("invalid JSON: ") + e.what());
    }
    const std::filesystem::path base_dir = path.parent_path();
    if (j.contains("include")) {
        std::vector<std::string> includes;
        if (j.at("include").is_string()) includes.push_back(j.at("include").get<std::string>());
        else includes = j.at("include").get<std::vector<std::string>>();
        json merged = json::object();
        for (const std::string& inc : includes) {
            const std::filesystem::path inc_path = base_dir / inc;
            std::ifstream inc_in(inc_path);
            if (!inc_in) throw FileUnreadable("cannot open include '" + inc_path.string() + "'");
            json inc_json;
            try {
                inc_in >> inc_json;
            } catch (const json::exception& e) {
                throw ConfigInvalid("include", inc_path.string() + ": " + e.what());
            }
            merged = deep_merge(merged, inc_json);
        }
        j.erase("include");
        j = deep_merge(merged, j);
    }
    return run_config_from_json(j, base_dir);
}

json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["dataset"] = {{"name", cfg.dataset.name},
                    {"path", cfg.dataset.path},
                    {"timestamp_column", cfg.dataset.schema.timestamp_column},
                    {"channels", cfg.dataset.schema.channel_columns},
                    {"timestamp_format", cfg.dataset.schema.timestamp_format},
                    {"validate_gaps", cfg.dataset.schema.validate_gaps},
                    {"context", cfg.dataset.context_path},
                    {"domain_note", cfg.dataset.domain_note}};
    if (cfg.dataset.schema.frequency) {
        j["dataset"]["frequency"] = frequency_name(*cfg.dataset.schema.frequency);
    }
    j["split_ratios"] = cfg.split_ratios;
    j["lookback"] = cfg.lookback;
    j["horizon"] = cfg.horizon;
    j["stride"] = cfg.stride;
    j["channels"] = cfg.channels;
    j["strategy"] = {{"name", strategy_name(cfg.strategy.strategy)},
                     {"rollout_rounds", cfg.strategy.rollout_rounds},
                     {"generations_k", cfg.strategy.generations_k},
                     {"parse_retries", cfg.strategy.parse_retries},
                     {"sampling",
                      {{"temperature", cfg.strategy.sampling.temperature},
                       {"top_p", cfg.strategy.sampling.top_p},
                       {"max_tokens", cfg.strategy.sampling.max_tokens}}}};
    if (cfg.strategy.sampling.seed) j["strategy"]["sampling"]["seed"] = *cfg.strategy.sampling.seed;
    j["variant"] = {{"timestamps", timestamp_mode_name(cfg.variant.timestamp_mode)},
                    {"shift_steps", cfg.variant.shift_steps},
                    {"context", cfg.variant.context_enabled},
                    {"normalization", normalization_name(cfg.variant.normalization)},
                    {"missing_mode", missing_mode_name(cfg.variant.missing_mode)},
                    {"value_precision", cfg.variant.value_precision}};
    j["provider"] = {{"kind", provider_kind_name(cfg.provider.kind)},
                     {"endpoint", cfg.provider.endpoint},
                     {"model_name", cfg.provider.model_name},
                     {"auth_env_var", cfg.provider.auth_env_var},
                     {"timeout_seconds", cfg.provider.timeout_seconds},
                     {"max_retries", cfg.provider.max_retries},
                     {"min_request_interval_ms", cfg.provider.min_request_interval_ms},
                     {"backoff_base_ms", cfg.provider.backoff_base_ms},
                     {"period", cfg.provider.period},
                     {"noisy_base", cfg.provider.noisy_base == MockBase::SeasonalNaive
                                        ? "seasonal_naive"
                                        : "linear_trend"},
                     {"sigma", cfg.provider.sigma},
                     {"mock_seed", cfg.provider.mock_seed},
                     {"fixture", cfg.provider.fixture_path}};
    j["axes"] = {{"lookbacks", cfg.axes.lookbacks},
                 {"horizons", cfg.axes.horizons},
                 {"temperatures", cfg.axes.temperatures},
                 {"strategies", cfg.axes.strategies},
                 {"variants", cfg.axes.variants}};
    j["output_dir"] = cfg.output_dir;
    j["cache_dir"] = cfg.cache_dir;
    j["max_parallel_requests"] = cfg.max_parallel_requests;
    j["seed"] = cfg.seed;
    j["missing_rate"] = cfg.missing_rate;
    j["failure_tolerance"] = cfg.failure_tolerance;
    j["sweep_cap"] = cfg.sweep_cap;
    j["shift_steps"] = cfg.shift_steps;
    j["uncertainty"] = {{"k", cfg.uncertainty.k}, {"gamma", cfg.uncertainty.gamma}};
    j["thresholds"] = {{"collapse_ratio", cfg.thresholds.collapse_ratio},
                       {"copy_similarity", cfg.thresholds.copy_similarity},
                       {"copy_pointwise_frac", cfg.thresholds.copy_pointwise_frac},
                       {"phase_corr", cfg.thresholds.phase_corr},
                       {"phase_margin", cfg.thresholds.phase_margin},
                       {"max_lag", cfg.thresholds.max_lag},
                       {"peak_amplitude", cfg.thresholds.peak_amplitude},
                       {"peak_corr", cfg.thresholds.peak_corr}};
    return j;
}

json diagnosis_to_json(const Diagnosis& d) {
    return json{{"constant_collapse", d.constant_collapse},
                {"collapse_ratio", finite_or(d.collapse_ratio, 0.0)},
                {"copy_paste", d.copy_paste},
                {"copy_offset", d.copy_offset},
                {"copy_similarity", finite_or(d.copy_similarity, 0.0)},
                {"phase_shift", d.phase_shift},
                {"phase_lag", d.phase_lag},
                {"peak_clipping", d.peak_clipping},
                {"peak_severity", finite_or(d.peak_severity, 0.0)}};
}

Diagnosis diagnosis_from_json(const json& j) {
    Diagnosis d;
    d.constant_collapse = j.value("constant_collapse", false);
    d.collapse_ratio = j.value("collapse_ratio", 0.0);
    d.copy_paste = j.value("copy_paste", false);
    d.copy_offset = j.value("copy_offset", -1L);
    d.copy_similarity = j.value("copy_similarity", 0.0);
    d.phase_shift = j.value("phase_shift", false);
    d.phase_lag = j.value("phase_lag", 0L);
    d.peak_clipping = j.value("peak_clipping", false);
    d.peak_severity = j.value("peak_severity", 0.0);
    return d;
}

// ---------------------------------------------------------------------------
// Forecast runner
// ---------------------------------------------------------------------------

namespace {

struct TaskSpec {
    std::size_t task_id = 0;
    int channel_id = 0;
    std::string channel_name;
    WindowInstance window;
};

struct TaskOutcome {
    std::size_t task_id = 0;
    bool done = false;
    json record;  // one records.jsonl line
    EvalRecord eval;
    std::size_t requests = 0;
    std::size_t cache_hits = 0;
};

std::string run_digest(const RunConfig& config) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x",
                  static_cast<unsigned>(fnv1a64(run_config_to_json(config).dump()) & 0xffffffffu));
    return buf;
}

struct ManifestState {
    std::string run_id;
    json config_snapshot;
    std::vector<std::string> statuses;
    std::chrono::steady_clock::time_point started;

    json to_json(const RunTotals& totals) const {
        std::size_t pending = 0, done = 0, failed = 0;
        for (const std::string& s : statuses) {
            if (s == "done") ++done;
            else if (s == "failed") ++failed;
            else ++pending;
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return json{{"run_id", run_id},
                    {"config", config_snapshot},
                    {"tasks", statuses.size()},
                    {"statuses", statuses},
                    {"counts", {{"pending", pending}, {"done", done}, {"failed", failed}}},
                    {"totals",
                     {{"requests", totals.requests},
                      {"cache_hits", totals.cache_hits},
                      {"parse_failures", failed}}},
                    {"duration_seconds", elapsed},
                    {"quantile_convention", "interpolated order statistic h=(k-1)p+1"}};
    }
};

std::map<std::size_t, json> load_existing_records(const std::filesystem::path& file) {
    std::map<std::size_t, json> by_id;
    std::ifstream in(file);
    if (!in) return by_id;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            const std::size_t id = j.at("task_id").get<std::size_t>();
            by_id[id] = std::move(j);
        } catch (const json::exception&) {
            // Torn line from an interrupted run; the task will be re-run.
        }
    }
    return by_id;
}

EvalRecord eval_from_record(const json& j) {
    if (j.value("parse_failed", false)) {
        return EvalRecord::failure(j.value("dataset", ""), j.value("origin_index", 0UL),
                                   j.value("channel_id", 0), j.value("strategy", ""),
                                   j.value("variant", ""));
    }
    return EvalRecord::success(
        j.value("dataset", ""), j.value("origin_index", 0UL), j.value("channel_id", 0),
        j.value("strategy", ""), j.value("variant", ""), j.value("mse", 0.0),
        j.value("mae", 0.0), j.value("cot_tokens", 0L),
        j.value("repairs", std::vector<std::string>{}),
        diagnosis_from_json(j.value("diagnosis", json::object())));
}

void count_requests(const json& record, std::size_t& requests, std::size_t& cache_hits) {
    if (!record.contains("generations")) return;
    for (const json& gen : record.at("generations")) {
        for (const json& rec : gen) {
            ++requests;
            if (rec.value("cache_hit", false)) ++cache_hits;
        }
    }
}

void write_summary_csv(const std::filesystem::path& file,
                       const std::vector<GroupSummary>& summary) {
    std::string out = "variant,strategy,mse,mae,count,failure_rate\n";
    for (const GroupSummary& g : summary) {
        out += csv_field(g.variant) + "," + csv_field(g.strategy) + ",";
        out += g.count > 0 ? format_value_exact(g.mean_mse) : "";
        out += ",";
        out += g.count > 0 ? format_value_exact(g.mean_mae) : "";
        out += "," + std::to_string(g.count) + "," + format_value_exact(g.failure_rate) + "\n";
    }
    atomic_write(file, out);
}

std::vector<TrainStats> train_stats_per_channel(const SeriesFrame& train) {
    std::vector<TrainStats> stats(train.cols());
    for (std::size_t c = 0; c < train.cols(); ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < train.rows(); ++r) {
            const double v = train.values[r][c];
            if (std::isfinite(v)) {
                sum += v;
                ++n;
            }
        }
        const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
        double var = 0.0;
        for (std::size_t r = 0; r < train.rows(); ++r) {
            const double v = train.values[r][c];
            if (std::isfinite(v)) var += (v - mean) * (v - mean);
        }
        stats[c].mean = mean;
        stats[c].stddev = n > 0 ? std::sqrt(var / static_cast<double>(n)) : 0.0;
    }
    return stats;
}

RunResult run_forecast_impl(const RunConfig& config, std::shared_ptr<Provider> provider_override,
                            const std::filesystem::path& out_dir, bool uncertainty_mode) {
    config.validate();

    SeriesFrame frame = load_csv(config.dataset.path, config.dataset.schema);
    if (!config.dataset.domain_note.empty()) frame.domain_note = config.dataset.domain_note;

    const auto parts = chronological_split(frame, config.split_ratios);
    const SeriesFrame& train = parts[0];
    const SeriesFrame& test = parts[2];

    // Evaluated channels.
    std::vector<int> channel_ids;
    if (config.channels.empty()) {
        for (std::size_t c = 0; c < frame.cols(); ++c) channel_ids.push_back(static_cast<int>(c));
    } else {
        for (const std::string& name : config.channels) {
            auto it = std::find(frame.channels.begin(), frame.channels.end(), name);
            if (it == frame.channels.end()) {
                throw ConfigInvalid("channels", "unknown channel '" + name + "'");
            }
            channel_ids.push_back(static_cast<int>(it - frame.channels.begin()));
        }
    }

    ContextDescriptor context;
    if (!config.dataset.context_path.empty()) {
        context = load_context_file(config.dataset.context_path);
    } else {
        context.domain_text = !frame.domain_note.empty()
                                  ? frame.domain_note
                                  : "Multivariate time series from the '" + config.dataset.name +
                                        "' dataset.";
        context.frequency_text = frequency_text(frame.frequency);
    }

    const std::vector<TrainStats> train_stats = train_stats_per_channel(train);
    const PromptVariantConfig variant = config.variant.materialize(frame.frequency);
    const std::string variant_name = variant_label(variant);
    const std::string strategy = strategy_name(config.strategy.strategy);

    StrategyConfig strategy_cfg = config.strategy;
    if (uncertainty_mode) strategy_cfg.generations_k = config.uncertainty.k;

    // Task enumeration, channel-major; deterministic ids.
    std::vector<TaskSpec> tasks;
    for (int channel_id : channel_ids) {
        auto windows = slide_windows(test, config.lookback, config.horizon,
                                     config.effective_stride(), channel_id);
        for (WindowInstance& w : windows) {
            TaskSpec t;
            t.task_id = tasks.size();
            t.channel_id = channel_id;
            t.channel_name = frame.channels[channel_id];
            t.window = std::move(w);
            tasks.push_back(std::move(t));
        }
    }
    if (tasks.empty()) throw FrameTooShort("no evaluation windows for the configured split");

    // Run directory: explicit out_dir resumes in place, otherwise a fresh
    // unique directory under output_dir.
    std::filesystem::path run_dir = out_dir;
    if (run_dir.empty()) {
        const std::string base = utc_compact_now() + "-" + run_digest(config);
        run_dir = std::filesystem::path(config.output_dir) / base;
        for (int i = 2; std::filesystem::exists(run_dir); ++i) {
            run_dir = std::filesystem::path(config.output_dir) / (base + "-" + std::to_string(i));
        }
    }
    std::filesystem::create_directories(run_dir);
    std::filesystem::create_directories(run_dir / "failures");
    if (uncertainty_mode) std::filesystem::create_directories(run_dir / "uncertainty");

    std::shared_ptr<Provider> provider = provider_override;
    if (!provider) {
        provider = std::make_shared<CachingProvider>(
            std::shared_ptr<Provider>(make_provider(config.provider)), config.cache_dir);
    }

    // Resume: completed tasks in an existing records.jsonl are not re-run.
    const std::filesystem::path records_path = run_dir / "records.jsonl";
    std::map<std::size_t, json> finished = load_existing_records(records_path);
    for (auto it = finished.begin(); it != finished.end();) {
        const bool ok = it->first < tasks.size() && !it->second.value("parse_failed", true);
        it = ok ? std::next(it) : finished.erase(it);
    }

    ManifestState manifest;
    manifest.run_id = run_dir.filename().string();
    manifest.config_snapshot = run_config_to_json(config);
    manifest.statuses.assign(tasks.size(), "pending");
    manifest.started = std::chrono::steady_clock::now();
    for (const auto& [id, rec] : finished) manifest.statuses[id] = "done";

    RunTotals totals;
    totals.tasks = tasks.size();

    std::mutex io_mutex;
    std::ofstream records_out(records_path, std::ios::app);
    if (!records_out) throw FileUnreadable("cannot open " + records_path.string());

    const auto write_manifest = [&] {
        atomic_write(run_dir / "manifest.json", manifest.to_json(totals).dump(2) + "\n");
    };
    write_manifest();

    std::vector<json> final_records(tasks.size());
    for (auto& [id, rec] : finished) final_records[id] = std::move(rec);

    std::vector<std::size_t> pending;
    for (const TaskSpec& t : tasks) {
        if (manifest.statuses[t.task_id] != "done") pending.push_back(t.task_id);
    }

    const auto process_task = [&](std::size_t task_id) {
        const TaskSpec& task = tasks[task_id];
        const std::size_t horizon = config.horizon;
        json line = {{"task_id", task.task_id},
                     {"dataset", config.dataset.name},
                     {"channel_id", task.channel_id},
                     {"channel", task.channel_name},
                     {"origin_index", task.window.origin_index},
                     {"strategy", strategy},
                     {"variant", variant_name},
                     {"lookback", task.window.lookback_values},
                     {"truth", task.window.truth}};
        try {
            MissingMask mask;
            if (variant.missing_mode != MissingMode::Full && config.missing_rate > 0.0) {
                mask = make_missing_mask(
                    task.window.lookback_len(), config.missing_rate,
                    fnv1a64(std::to_string(config.seed) + ":" + std::to_string(task.task_id)));
            }
            ForecastTask ft;
            ft.window = apply_missing(task.window, variant.missing_mode, mask);
            ft.context = context;
            ft.variant = variant;
            ft.meta.frequency = frame.frequency;
            ft.meta.channel_name = task.channel_name;
            ft.meta.train_stats = train_stats[task.channel_id];

            ForecastBundle bundle = forecast_window(ft, strategy_cfg, *provider);

            const double mse_value = mse(bundle.mean_forecast, task.window.truth);
            const double mae_value = mae(bundle.mean_forecast, task.window.truth);
            Diagnosis diag;
            try {
                diag = diagnose(bundle.mean_forecast, task.window.lookback_values,
                                task.window.truth, config.thresholds);
            } catch (const Error&) {
                // Degenerate shapes leave the diagnosis empty.
            }
            const long cot_tokens = bundle.total_trace_tokens();

            line["parse_failed"] = false;
            line["per_generation"] = bundle.per_generation;
            line["mean_forecast"] = bundle.mean_forecast;
            line["per_step_std"] = bundle.per_step_std;
            line["mse"] = mse_value;
            line["mae"] = mae_value;
            line["cot_tokens"] = cot_tokens;
            line["repairs"] = bundle.repairs;
            line["diagnosis"] = diagnosis_to_json(diag);
            json gens = json::array();
            for (const auto& gen_records : bundle.records) {
                json gen = json::array();
                for (const GenerationRecord& rec : gen_records) {
                    json rj = record_to_json(rec);
                    rj["cache_hit"] = rec.cache_hit;
                    gen.push_back(std::move(rj));
                }
                gens.push_back(std::move(gen));
            }
            line["generations"] = std::move(gens);

            if (uncertainty_mode && bundle.per_generation.size() >= 2) {
                const UncertaintyReport report = uncertainty_report(
                    bundle.per_generation, task.window.truth, config.uncertainty.gamma);
                line["band_lower"] = report.band_lower;
                line["band_upper"] = report.band_upper;
                line["coverage"] = report.coverage;
                line["gamma"] = report.gamma;
                std::string csv = "step,mean,lower,upper,std,truth\n";
                for (std::size_t i = 0; i < horizon; ++i) {
                    csv += std::to_string(i) + "," + format_value_exact(bundle.mean_forecast[i]) +
                           "," + format_value_exact(report.band_lower[i]) + "," +
                           format_value_exact(report.band_upper[i]) + "," +
                           format_value_exact(report.per_step_std[i]) + "," +
                           format_value_exact(task.window.truth[i]) + "\n";
                }
                atomic_write(run_dir / "uncertainty" /
                                 ("task_" + std::to_string(task.task_id) + ".csv"),
                             csv);
            }

            std::lock_guard<std::mutex> lock(io_mutex);
            records_out << line.dump() << "\n";
            records_out.flush();
            final_records[task.task_id] = std::move(line);
            manifest.statuses[task.task_id] = "done";
            write_manifest();
        } catch (const std::exception& e) {
            line["parse_failed"] = true;
            line["error"] = e.what();
            if (const auto* pf = dynamic_cast<const ParseFailure*>(&e)) {
                std::ofstream raw_out(run_dir / "failures" /
                                      ("task_" + std::to_string(task.task_id) + ".txt"));
                raw_out << pf->raw_text();
            }
            std::lock_guard<std::mutex> lock(io_mutex);
            records_out << line.dump() << "\n";
            records_out.flush();
            final_records[task.task_id] = std::move(line);
            manifest.statuses[task.task_id] = "failed";
            write_manifest();
        }
    };

    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(config.max_parallel_requests),
                              std::max<std::size_t>(pending.size(), 1));
    if (n_workers <= 1) {
        for (std::size_t id : pending) process_task(id);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) {
            workers.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= pending.size()) break;
                    process_task(pending[i]);
                }
            });
        }
        for (auto& t : workers) t.join();
    }

    // Reduce, in task order so repeated runs emit identical bytes.
    std::vector<EvalRecord> evals;
    evals.reserve(tasks.size());
    for (std::size_t id = 0; id < tasks.size(); ++id) {
        const json& rec = final_records[id];
        if (rec.is_null()) continue;
        count_requests(rec, totals.requests, totals.cache_hits);
        try {
            evals.push_back(eval_from_record(rec));
        } catch (const std::exception&) {
            evals.push_back(EvalRecord::failure(config.dataset.name, 0, 0, strategy,
                                                variant_name));
        }
    }
    totals.done = std::count(manifest.statuses.begin(), manifest.statuses.end(), "done");
    totals.failed = std::count(manifest.statuses.begin(), manifest.statuses.end(), "failed");
    write_manifest();

    RunResult result;
    result.run_dir = run_dir;
    result.totals = totals;
    if (!evals.empty()) result.summary = aggregate_dataset(evals);
    write_summary_csv(run_dir / "summary.csv", result.summary);

    const double failure_rate =
        static_cast<double>(totals.failed) / static_cast<double>(totals.tasks);
    result.exit_code = failure_rate > config.failure_tolerance ? 1 : 0;
    return result;
}

}  // namespace

RunResult run_forecast(const RunConfig& config, std::shared_ptr<Provider> provider_override,
                       const std::filesystem::path& out_dir) {
    return run_forecast_impl(config, std::move(provider_override), out_dir, false);
}

RunResult run_uncertainty(const RunConfig& config, std::shared_ptr<Provider> provider_override,
                          const std::filesystem::path& out_dir) {
    return run_forecast_impl(config, std::move(provider_override), out_dir, true);
}

// ---------------------------------------------------------------------------
// Sweep and ablation
// ---------------------------------------------------------------------------

RunResult run_sweep(const RunConfig& config) {
    config.validate();
    const auto lookbacks =
        config.axes.lookbacks.empty() ? std::vector<std::size_t>{config.lookback}
                                      : config.axes.lookbacks;
    const auto horizons = config.axes.horizons.empty() ? std::vector<std::size_t>{config.horizon}
                                                       : config.axes.horizons;
    const auto temperatures = config.axes.temperatures.empty()
                                  ? std::vector<double>{config.strategy.sampling.temperature}
                                  : config.axes.temperatures;
    const auto strategies = config.axes.strategies.empty()
                                ? std::vector<std::string>{strategy_name(config.strategy.strategy)}
                                : config.axes.strategies;
    const auto variants = config.axes.variants.empty() ? std::vector<std::string>{"baseline"}
                                                       : config.axes.variants;

    const std::size_t grid_size = lookbacks.size() * horizons.size() * temperatures.size() *
                                  strategies.size() * variants.size();
    if (grid_size > config.sweep_cap) {
        throw GridTooLarge("sweep grid has " + std::to_string(grid_size) +
                           " points, cap is " + std::to_string(config.sweep_cap));
    }

    const std::string base = utc_compact_now() + "-sweep-" + run_digest(config);
    std::filesystem::path sweep_dir = std::filesystem::path(config.output_dir) / base;
    for (int i = 2; std::filesystem::exists(sweep_dir); ++i) {
        sweep_dir = std::filesystem::path(config.output_dir) / (base + "-" + std::to_string(i));
    }
    std::filesystem::create_directories(sweep_dir);

    std::string combined = "l,h,temperature,strategy,variant,mse,mae,count,failure_rate,run_dir\n";
    RunResult result;
    result.run_dir = sweep_dir;
    std::size_t index = 0;
    for (std::size_t l : lookbacks) {
        for (std::size_t h : horizons) {
            for (double temp : temperatures) {
                for (const std::string& strat : strategies) {
                    for (const std::string& var : variants) {
                        RunConfig child = config;
                        child.lookback = l;
                        child.horizon = h;
                        child.stride = config.stride;  // 0 keeps stride = h per child
                        child.strategy.sampling.temperature = temp;
                        child.strategy.strategy = parse_strategy(strat);
                        child.variant = ablation_variant(config, var);
                        child.axes = SweepAxes{};

                        const std::filesystem::path child_dir =
                            sweep_dir / ("grid_" + std::to_string(index) + "_l" +
                                         std::to_string(l) + "_h" + std::to_string(h) + "_t" +
                                         format_value(temp, 2) + "_" + strat + "_" + var);
                        RunResult child_result = run_forecast(child, nullptr, child_dir);
                        result.exit_code = std::max(result.exit_code, child_result.exit_code);
                        result.totals.tasks += child_result.totals.tasks;
                        result.totals.done += child_result.totals.done;
                        result.totals.failed += child_result.totals.failed;
                        result.totals.requests += child_result.totals.requests;
                        result.totals.cache_hits += child_result.totals.cache_hits;

                        GroupSummary g;
                        if (!child_result.summary.empty()) g = child_result.summary.front();
                        g.variant = var;
                        g.strategy = strat;
                        result.summary.push_back(g);
                        combined += std::to_string(l) + "," + std::to_string(h) + "," +
                                    format_value_exact(temp) + "," + csv_field(strat) + "," +
                                    csv_field(var) + "," +
                                    (g.count > 0 ? format_value_exact(g.mean_mse) : "") + "," +
                                    (g.count > 0 ? format_value_exact(g.mean_mae) : "") + "," +
                                    std::to_string(g.count) + "," +
                                    format_value_exact(g.failure_rate) + "," +
                                    csv_field(child_dir.filename().string()) + "\n";
                        ++index;
                    }
                }
            }
        }
    }
    atomic_write(sweep_dir / "combined.csv", combined);
    return result;
}

RunResult run_ablate(const RunConfig& config) {
    config.validate();
    const std::string base = utc_compact_now() + "-ablate-" + run_digest(config);
    std::filesystem::path ablate_dir = std::filesystem::path(config.output_dir) / base;
    for (int i = 2; std::filesystem::exists(ablate_dir); ++i) {
        ablate_dir = std::filesystem::path(config.output_dir) / (base + "-" + std::to_string(i));
    }
    std::filesystem::create_directories(ablate_dir);

    std::string csv = "setting,variant,mse,mae,count,failure_rate\n";
    RunResult result;
    result.run_dir = ablate_dir;
    for (const auto& [key, display] : ablation_rows()) {
        RunConfig child = config;
        child.variant = ablation_variant(config, key);
        child.axes = SweepAxes{};
        RunResult child_result = run_forecast(child, nullptr, ablate_dir / key);
        result.exit_code = std::max(result.exit_code, child_result.exit_code);
        result.totals.tasks += child_result.totals.tasks;
        result.totals.done += child_result.totals.done;
        result.totals.failed += child_result.totals.failed;
        result.totals.requests += child_result.totals.requests;
        result.totals.cache_hits += child_result.totals.cache_hits;

        GroupSummary g;
        if (!child_result.summary.empty()) g = child_result.summary.front();
        const std::string variant_field = g.variant;
        g.variant = display;
        result.summary.push_back(g);
        csv += csv_field(display) + "," + csv_field(variant_field) + "," +
               (g.count > 0 ? format_value_exact(g.mean_mse) : "") + "," +
               (g.count > 0 ? format_value_exact(g.mean_mae) : "") + "," +
               std::to_string(g.count) + "," + format_value_exact(g.failure_rate) + "\n";
    }
    atomic_write(ablate_dir / "ablation.csv", csv);
    return result;
}

// ---------------------------------------------------------------------------
// Offline diagnosis
// ---------------------------------------------------------------------------

DiagnoseSummary run_diagnose(const std::filesystem::path& run_dir,
                             const DiagnosticThresholds& thresholds) {
    const std::filesystem::path records_path = run_dir / "records.jsonl";
    if (!std::filesystem::exists(records_path)) {
        throw RunDirMissing("no records.jsonl under '" + run_dir.string() + "'");
    }

    std::map<std::size_t, json> by_id;
    std::size_t malformed = 0;
    {
        std::ifstream in(records_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                json j = json::parse(line);
                const std::size_t id = j.at("task_id").get<std::size_t>();
                by_id[id] = std::move(j);
            } catch (const json::exception&) {
                ++malformed;
            }
        }
    }

    DiagnoseSummary summary;
    summary.malformed = malformed;
    std::vector<std::pair<long, double>> cot_and_mse;
    for (const auto& [id, rec] : by_id) {
        ++summary.records;
        if (rec.value("parse_failed", true)) continue;
        std::vector<double> pred, lookback, truth;
        try {
            pred = rec.at("mean_forecast").get<std::vector<double>>();
            lookback = rec.at("lookback").get<std::vector<double>>();
            truth = rec.at("truth").get<std::vector<double>>();
        } catch (const json::exception&) {
            ++summary.malformed;
            continue;
        }
        ++summary.scored;
        try {
            const Diagnosis d = diagnose(pred, lookback, truth, thresholds);
            summary.collapse += d.constant_collapse ? 1 : 0;
            summary.copy_paste += d.copy_paste ? 1 : 0;
            summary.phase_shift += d.phase_shift ? 1 : 0;
            summary.peak_clipping += d.peak_clipping ? 1 : 0;
        } catch (const Error&) {
            // Degenerate stored series; leave unflagged.
        }
        cot_and_mse.emplace_back(rec.value("cot_tokens", 0L), rec.value("mse", 0.0));
    }

    const double denom = summary.scored > 0 ? static_cast<double>(summary.scored) : 1.0;
    std::string csv = "mode,count,rate\n";
    csv += "constant_collapse," + std::to_string(summary.collapse) + "," +
           format_value_exact(summary.collapse / denom) + "\n";
    csv += "copy_paste," + std::to_string(summary.copy_paste) + "," +
           format_value_exact(summary.copy_paste / denom) + "\n";
    csv += "phase_shift," + std::to_string(summary.phase_shift) + "," +
           format_value_exact(summary.phase_shift / denom) + "\n";
    csv += "peak_clipping," + std::to_string(summary.peak_clipping) + "," +
           format_value_exact(summary.peak_clipping / denom) + "\n";
    atomic_write(run_dir / "diagnosis_summary.csv", csv);

    if (cot_and_mse.size() >= 10) {
        const HeatmapMatrix matrix = cot_decile_heatmap(cot_and_mse);
        std::string heatmap;
        for (const auto& row : matrix) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c > 0) heatmap += ',';
                heatmap += std::to_string(row[c]);
            }
            heatmap += '\n';
        }
        atomic_write(run_dir / "heatmap.csv", heatmap);
        summary.heatmap_written = true;
    }
    return summary;
}

}  // namespace slowcast
