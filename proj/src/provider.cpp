#include "slowcast/provider.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <unistd.h>

#include "httplib.h"
#include "slowcast/errors.hpp"
#include "slowcast/parser.hpp"

namespace slowcast {

using nlohmann::json;

namespace {

std::string join_exact(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_value_exact(values[i]);
    }
    return out;
}

/// Everything before the final forecast block is trace; the block (and any
/// trailing text) is the answer. With no block the whole response is trace.
std::pair<std::string, std::string> split_trace_answer(const std::string& content) {
    try {
        BlockMatch m = find_last_block(content, kForecastOpen, kForecastClose);
        return {content.substr(0, m.begin), content.substr(m.begin)};
    } catch (const Error&) {
        return {content, ""};
    }
}

GenerationRecord make_mock_record(const std::string& trace, const std::string& answer,
                                  const HybridPrompt& prompt, const std::string& label) {
    GenerationRecord rec;
    rec.trace_text = trace;
    rec.answer_text = answer;
    rec.prompt_tokens = whitespace_token_count(prompt.text());
    rec.completion_tokens = whitespace_token_count(trace) + whitespace_token_count(answer);
    rec.latency_ms = 0.0;
    rec.provider_label = label;
    return rec;
}

std::vector<double> seasonal_naive_forecast(const std::vector<double>& lookback,
                                            std::size_t horizon, std::size_t period) {
    if (lookback.empty()) throw DegenerateWindow("mock provider got an empty lookback");
    const std::size_t p = std::min(period == 0 ? std::size_t{1} : period, lookback.size());
    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t i = 0; i < horizon; ++i) {
        out.push_back(lookback[lookback.size() - p + (i % p)]);
    }
    return out;
}

std::vector<double> linear_trend_forecast(const std::vector<double>& lookback,
                                          std::size_t horizon) {
    if (lookback.empty()) throw DegenerateWindow("mock provider got an empty lookback");
    const auto n = static_cast<double>(lookback.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lookback.size(); ++i) {
        const auto x = static_cast<double>(i);
        sx += x;
        sy += lookback[i];
        sxx += x * x;
        sxy += x * lookback[i];
    }
    const double denom = n * sxx - sx * sx;
    const double slope = (denom != 0.0) ? (n * sxy - sx * sy) / denom : 0.0;
    const double intercept = (sy - slope * sx) / n;
    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t i = 0; i < horizon; ++i) {
        out.push_back(intercept + slope * (n + static_cast<double>(i)));
    }
    return out;
}

class SeasonalNaiveMock : public Provider {
public:
    explicit SeasonalNaiveMock(ProviderSpec spec) : spec_(std::move(spec)) {}

    GenerationRecord complete(const HybridPrompt& prompt, const SamplingParams&,
                              int) override {
        const auto forecast =
            seasonal_naive_forecast(prompt.observed_values, prompt.horizon, spec_.period);
        std::string trace = "The lookback repeats with period " + std::to_string(spec_.period) +
                            "; tiling the most recent cycle across the horizon.\n";
        std::string answer = std::string(kForecastOpen) + join_exact(forecast) + kForecastClose;
        return make_mock_record(trace, answer, prompt, label());
    }

    std::string label() const override { return spec_.label(); }

private:
    ProviderSpec spec_;
};

class NoisyMock : public Provider {
public:
    explicit NoisyMock(ProviderSpec spec) : spec_(std::move(spec)) {}

    GenerationRecord complete(const HybridPrompt& prompt, const SamplingParams& sampling,
                              int generation_index) override {
        std::vector<double> forecast =
            spec_.noisy_base == MockBase::SeasonalNaive
                ? seasonal_naive_forecast(prompt.observed_values, prompt.horizon, spec_.period)
                : linear_trend_forecast(prompt.observed_values, prompt.horizon);
        if (spec_.sigma > 0.0) {
            const std::uint64_t seed = sampling.seed.value_or(spec_.mock_seed);
            const std::string key = std::to_string(seed) + "|" + prompt_hash(prompt) + "|" +
                                    std::to_string(generation_index);
            std::mt19937_64 rng(fnv1a64(key));
            std::normal_distribution<double> noise(0.0, spec_.sigma);
            for (double& v : forecast) v += noise(rng);
        }
        std::string trace = "Base " +
                            std::string(spec_.noisy_base == MockBase::SeasonalNaive
                                            ? "seasonal-naive"
                                            : "linear-trend") +
                            " forecast with Gaussian perturbation, sigma " +
                            format_value_exact(spec_.sigma) + ".\n";
        std::string answer = std::string(kForecastOpen) + join_exact(forecast) + kForecastClose;
        return make_mock_record(trace, answer, prompt, label());
    }

    std::string label() const override { return spec_.label(); }

private:
    ProviderSpec spec_;
};

class ScriptedMock : public Provider {
public:
    explicit ScriptedMock(ProviderSpec spec) : spec_(std::move(spec)) {
        std::ifstream in(spec_.fixture_path);
        if (!in) throw FileUnreadable("cannot open fixture '" + spec_.fixture_path + "'");
        try {
            in >> fixtures_;
        } catch (const json::exception& e) {
            throw FileUnreadable("fixture '" + spec_.fixture_path + "' is not valid JSON: " +
                                 e.what());
        }
        if (!fixtures_.is_object()) {
            throw FileUnreadable("fixture '" + spec_.fixture_path + "' must be a JSON object");
        }
    }

    GenerationRecord complete(const HybridPrompt& prompt, const SamplingParams&,
                              int generation_index) override {
        const std::string hash = prompt_hash(prompt);
        const json* entry = nullptr;
        for (const std::string& key :
             {hash + ":" + std::to_string(generation_index), hash, std::string("default")}) {
            if (auto it = fixtures_.find(key); it != fixtures_.end()) {
                entry = &*it;
                break;
            }
        }
        if (!entry) {
            throw FixtureMiss("no fixture response for prompt hash " + hash);
        }
        GenerationRecord rec;
        const std::string content = entry->value("content", "");
        if (entry->contains("reasoning")) {
            rec.trace_text = entry->at("reasoning").get<std::string>();
            rec.answer_text = content;
        } else {
            std::tie(rec.trace_text, rec.answer_text) = split_trace_answer(content);
        }
        rec.prompt_tokens = entry->value("prompt_tokens",
                                         whitespace_token_count(prompt.text()));
        rec.completion_tokens =
            entry->value("completion_tokens",
                         whitespace_token_count(rec.trace_text) +
                             whitespace_token_count(rec.answer_text));
        rec.latency_ms = entry->value("latency_ms", 0.0);
        rec.provider_label = label();
        return rec;
    }

    std::string label() const override { return spec_.label(); }

private:
    ProviderSpec spec_;
    json fixtures_;
};

/// Serializes dispatch times per provider label: consecutive dispatches are
/// spaced by at least the configured interval.
class RateGate {
public:
    static void acquire(const std::string& label, int interval_ms) {
        if (interval_ms <= 0) return;
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard<std::mutex> lock(mutex());
            auto& next_free = table()[label];
            const auto now = std::chrono::steady_clock::now();
            if (next_free < now) next_free = now;
            slot = next_free;
            next_free += std::chrono::milliseconds(interval_ms);
        }
        std::this_thread::sleep_until(slot);
    }

private:
    static std::mutex& mutex() {
        static std::mutex m;
        return m;
    }
    static std::map<std::string, std::chrono::steady_clock::time_point>& table() {
        static std::map<std::string, std::chrono::steady_clock::time_point> t;
        return t;
    }
};

class HttpChatProvider : public Provider {
public:
    explicit HttpChatProvider(ProviderSpec spec) : spec_(std::move(spec)) {
        if (spec_.endpoint.empty() || spec_.model_name.empty()) {
            throw ConfigInvalid("provider", "http_chat needs endpoint and model_name");
        }
        const std::size_t scheme = spec_.endpoint.find("://");
        if (scheme == std::string::npos) {
            throw ConfigInvalid("provider.endpoint", "expected scheme://host/path");
        }
        const std::size_t path_at = spec_.endpoint.find('/', scheme + 3);
        if (path_at == std::string::npos) {
            origin_ = spec_.endpoint;
            path_ = "/chat/completions";
        } else {
            origin_ = spec_.endpoint.substr(0, path_at);
            path_ = spec_.endpoint.substr(path_at);
        }
    }

    GenerationRecord complete(const HybridPrompt& prompt, const SamplingParams& sampling,
                              int) override {
        const char* key = std::getenv(spec_.auth_env_var.c_str());
        if (!key || !*key) {
            throw AuthMissing("environment variable '" + spec_.auth_env_var +
                              "' is not set or empty");
        }

        json body;
        body["model"] = spec_.model_name;
        body["messages"] = json::array({{{"role", "user"}, {"content", prompt.text()}}});
        body["temperature"] = sampling.temperature;
        body["top_p"] = sampling.top_p;
        body["max_tokens"] = sampling.max_tokens;
        if (sampling.seed) body["seed"] = *sampling.seed;
        const std::string payload = body.dump();

        httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

        for (int attempt = 0;; ++attempt) {
            RateGate::acquire(label(), spec_.min_request_interval_ms);

            httplib::Client client(origin_);
            const auto timeout = std::chrono::duration<double>(spec_.timeout_seconds);
            client.set_connection_timeout(timeout);
            client.set_read_timeout(timeout);
            client.set_write_timeout(timeout);

            const auto t0 = std::chrono::steady_clock::now();
            httplib::Result res = client.Post(path_, headers, payload, "application/json");
            const double latency_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();

            if (!res) {
                const bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                                       res.error() == httplib::Error::Read ||
                                       res.error() == httplib::Error::Write;
                if (attempt >= spec_.max_retries) {
                    if (timed_out) {
                        throw TimeoutError("request to " + origin_ + " timed out after " +
                                           std::to_string(attempt + 1) + " attempts");
                    }
                    throw UpstreamError(0, httplib::to_string(res.error()));
                }
                backoff(attempt);
                continue;
            }

            if (res->status == 200) {
                return parse_response(res->body, latency_ms, res->status);
            }
            const bool retryable = res->status == 429 || res->status >= 500;
            if (retryable && attempt < spec_.max_retries) {
                backoff(attempt);
                continue;
            }
            if (res->status == 429) {
                throw RateLimited("rate limited after " + std::to_string(attempt + 1) +
                                  " attempts");
            }
            throw UpstreamError(res->status, res->body.substr(0, 200));
        }
    }

    std::string label() const override { return spec_.label(); }

private:
    void backoff(int attempt) const {
        double delay_ms = spec_.backoff_base_ms * std::pow(2.0, attempt);
        thread_local std::mt19937_64 rng(std::random_device{}());
        std::uniform_real_distribution<double> jitter(0.8, 1.2);
        delay_ms = std::min(delay_ms * jitter(rng), 60000.0);
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
    }

    GenerationRecord parse_response(const std::string& body, double latency_ms,
                                    int status) const {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::exception&) {
            throw UpstreamError(status, "response body is not JSON: " + body.substr(0, 120));
        }
        GenerationRecord rec;
        try {
            const json& message = j.at("choices").at(0).at("message");
            const std::string content = message.value("content", "");
            if (message.contains("reasoning_content") &&
                message.at("reasoning_content").is_string()) {
                rec.trace_text = message.at("reasoning_content").get<std::string>();
                rec.answer_text = content;
            } else {
                std::tie(rec.trace_text, rec.answer_text) = split_trace_answer(content);
            }
        } catch (const json::exception& e) {
            throw UpstreamError(status, std::string("unexpected response shape: ") + e.what());
        }
        if (j.contains("usage") && j["usage"].is_object()) {
            rec.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            rec.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
        rec.latency_ms = latency_ms;
        rec.provider_label = label();
        return rec;
    }

    ProviderSpec spec_;
    std::string origin_;
    std::string path_;
};

}  // namespace

std::string ProviderSpec::label() const {
    switch (kind) {
        case ProviderKind::HttpChat:
            return "http:" + model_name + "@" + endpoint;
        case ProviderKind::MockSeasonalNaive:
            return "mock_seasonal_naive(p=" + std::to_string(period) + ")";
        case ProviderKind::MockNoisy:
            return std::string("mock_noisy(base=") +
                   (noisy_base == MockBase::SeasonalNaive ? "seasonal_naive" : "linear_trend") +
                   ",sigma=" + format_value_exact(sigma) + ",seed=" + std::to_string(mock_seed) +
                   ",p=" + std::to_string(period) + ")";
        case ProviderKind::MockScripted:
            return "mock_scripted(" + fixture_path + ")";
    }
    return "unknown";
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::string prompt_hash(const HybridPrompt& prompt) { return hex64(fnv1a64(prompt.text())); }

std::string cache_key(const HybridPrompt& prompt, const SamplingParams& sampling,
                      const std::string& provider_label, int generation_index) {
    std::string canonical = prompt.text();
    canonical += '\x1f';
    canonical += format_value_exact(sampling.temperature);
    canonical += '\x1f';
    canonical += format_value_exact(sampling.top_p);
    canonical += '\x1f';
    canonical += std::to_string(sampling.max_tokens);
    canonical += '\x1f';
    canonical += sampling.seed ? std::to_string(*sampling.seed) : "none";
    canonical += '\x1f';
    canonical += provider_label;
    canonical += '\x1f';
    canonical += std::to_string(generation_index);
    return hex64(fnv1a64(canonical));
}

json record_to_json(const GenerationRecord& record) {
    return json{{"trace_text", record.trace_text},
                {"answer_text", record.answer_text},
                {"prompt_tokens", record.prompt_tokens},
                {"completion_tokens", record.completion_tokens},
                {"latency_ms", record.latency_ms},
                {"provider_label", record.provider_label}};
}

GenerationRecord record_from_json(const json& j) {
    if (!j.is_object() || !j.contains("trace_text") || !j.contains("answer_text") ||
        !j["trace_text"].is_string() || !j["answer_text"].is_string()) {
        throw CacheCorrupt("record is missing trace_text/answer_text strings");
    }
    GenerationRecord rec;
    rec.trace_text = j["trace_text"].get<std::string>();
    rec.answer_text = j["answer_text"].get<std::string>();
    if (j.contains("prompt_tokens") && !j["prompt_tokens"].is_number_integer()) {
        throw CacheCorrupt("prompt_tokens is not an integer");
    }
    if (j.contains("completion_tokens") && !j["completion_tokens"].is_number_integer()) {
        throw CacheCorrupt("completion_tokens is not an integer");
    }
    rec.prompt_tokens = j.value("prompt_tokens", 0L);
    rec.completion_tokens = j.value("completion_tokens", 0L);
    rec.latency_ms = j.value("latency_ms", 0.0);
    rec.provider_label = j.value("provider_label", "");
    return rec;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::optional<GenerationRecord> ResponseCache::lookup(const std::string& key) const {
    const std::filesystem::path file = dir_ / (key + ".json");
    std::ifstream in(file);
    if (!in) return std::nullopt;
    try {
        json j;
        in >> j;
        return record_from_json(j);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "[slowcast] warning: corrupt cache entry %s (%s); treating as miss\n",
                     file.string().c_str(), e.what());
        return std::nullopt;
    }
}

void ResponseCache::store(const std::string& key, const GenerationRecord& record) const {
    static std::atomic<unsigned> counter{0};
    const std::filesystem::path file = dir_ / (key + ".json");
    const std::filesystem::path tmp =
        dir_ / (key + ".tmp." + std::to_string(::getpid()) + "." +
                std::to_string(counter.fetch_add(1)));
    {
        std::ofstream out(tmp);
        out << record_to_json(record).dump(2) << '\n';
    }
    std::filesystem::rename(tmp, file);
}

CachingProvider::CachingProvider(std::shared_ptr<Provider> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), cache_(std::move(cache_dir)) {}

GenerationRecord CachingProvider::complete(const HybridPrompt& prompt,
                                           const SamplingParams& sampling,
                                           int generation_index) {
    const std::string key = cache_key(prompt, sampling, inner_->label(), generation_index);
    if (auto hit = cache_.lookup(key)) {
        hit->cache_hit = true;
        return *hit;
    }
    GenerationRecord rec = inner_->complete(prompt, sampling, generation_index);
    cache_.store(key, rec);
    return rec;
}

std::unique_ptr<Provider> make_provider(const ProviderSpec& spec) {
    switch (spec.kind) {
        case ProviderKind::HttpChat:
            return std::make_unique<HttpChatProvider>(spec);
        case ProviderKind::MockSeasonalNaive:
            return std::make_unique<SeasonalNaiveMock>(spec);
        case ProviderKind::MockNoisy:
            return std::make_unique<NoisyMock>(spec);
        case ProviderKind::MockScripted:
            return std::make_unique<ScriptedMock>(spec);
    }
    throw ConfigInvalid("provider.kind", "unknown provider kind");
}

GenerationRecord complete(const HybridPrompt& prompt, const SamplingParams& sampling,
                          const ProviderSpec& spec, int generation_index) {
    return make_provider(spec)->complete(prompt, sampling, generation_index);
}

GenerationRecord cached_complete(const HybridPrompt& prompt, const SamplingParams& sampling,
                                 const ProviderSpec& spec,
                                 const std::filesystem::path& cache_dir, int generation_index) {
    CachingProvider provider(make_provider(spec), cache_dir);
    return provider.complete(prompt, sampling, generation_index);
}

}  // namespace slowcast
