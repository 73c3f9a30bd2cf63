#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "slowcast/prompt.hpp"

namespace slowcast {

/// Decoding parameters. Defaults follow the study's protocol.
struct SamplingParams {
    double temperature = 0.6;
    double top_p = 0.7;
    int max_tokens = 8192;
    std::optional<std::uint64_t> seed;  // honored by mocks, forwarded to HTTP backends
};

enum class ProviderKind { HttpChat, MockSeasonalNaive, MockNoisy, MockScripted };
enum class MockBase { SeasonalNaive, LinearTrend };

struct ProviderSpec {
    ProviderKind kind = ProviderKind::MockSeasonalNaive;

    // http_chat
    std::string endpoint;  // full URL of the chat-completions route
    std::string model_name;
    std::string auth_env_var = "SLOWCAST_API_KEY";
    double timeout_seconds = 120.0;
    int max_retries = 3;
    int min_request_interval_ms = 0;
    int backoff_base_ms = 1000;

    // mocks
    std::size_t period = 24;                       // seasonal-naive tiling period
    MockBase noisy_base = MockBase::SeasonalNaive;
    double sigma = 0.0;
    std::uint64_t mock_seed = 0;
    std::string fixture_path;

    std::string label() const;
};

/// One backend call's result. trace_text and answer_text partition the raw
/// response; completion_tokens == 0 means the backend reported no usage.
struct GenerationRecord {
    std::string trace_text;
    std::string answer_text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    double latency_ms = 0.0;
    std::string provider_label;
    bool cache_hit = false;

    std::string raw() const { return trace_text + answer_text; }
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual GenerationRecord complete(const HybridPrompt& prompt, const SamplingParams& sampling,
                                      int generation_index) = 0;
    virtual std::string label() const = 0;
};

std::unique_ptr<Provider> make_provider(const ProviderSpec& spec);

/// One-call convenience mirroring the gateway contract.
GenerationRecord complete(const HybridPrompt& prompt, const SamplingParams& sampling,
                          const ProviderSpec& spec, int generation_index = 0);
GenerationRecord cached_complete(const HybridPrompt& prompt, const SamplingParams& sampling,
                                 const ProviderSpec& spec, const std::filesystem::path& cache_dir,
                                 int generation_index = 0);

nlohmann::json record_to_json(const GenerationRecord& record);
/// Strict deserialization; throws CacheCorrupt when the schema is violated.
GenerationRecord record_from_json(const nlohmann::json& j);

std::uint64_t fnv1a64(std::string_view data);

/// Hex digest of the canonical prompt text; scripted fixtures and the
/// response cache key on it.
std::string prompt_hash(const HybridPrompt& prompt);

std::string cache_key(const HybridPrompt& prompt, const SamplingParams& sampling,
                      const std::string& provider_label, int generation_index);

/// Content-addressed response store: one JSON file per key, written with
/// atomic rename. A file that fails schema validation is treated as a miss
/// with a warning.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);
    std::optional<GenerationRecord> lookup(const std::string& key) const;
    void store(const std::string& key, const GenerationRecord& record) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

/// Wraps a provider with the response cache; hits come back with
/// cache_hit == true and the stored payload.
class CachingProvider : public Provider {
public:
    CachingProvider(std::shared_ptr<Provider> inner, std::filesystem::path cache_dir);
    GenerationRecord complete(const HybridPrompt& prompt, const SamplingParams& sampling,
                              int generation_index) override;
    std::string label() const override { return inner_->label(); }

private:
    std::shared_ptr<Provider> inner_;
    ResponseCache cache_;
};

}  // namespace slowcast
