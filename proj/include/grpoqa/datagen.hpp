#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grpoqa/dataset.hpp"
#include "grpoqa/tokenizer.hpp"

namespace grpoqa {

// One row of the caption corpus: per-audio captions describing the acoustic
// scene, the speech and the music. At least one caption must be present.
struct CaptionRecord {
    std::string audio_id;
    std::optional<std::string> scene_caption;
    std::optional<std::string> speech_caption;
    std::optional<std::string> music_caption;
};

void validate_caption(const CaptionRecord& record);
std::vector<CaptionRecord> load_captions(const std::string& path);
void save_captions(std::span<const CaptionRecord> records, const std::string& path);

// Deterministic generation prompt: embeds the audio id and every available
// caption under a labeled heading (absent captions produce no heading) and
// asks for one question, one correct answer and three similar but clearly
// incorrect answers as a single JSON object. Injective on distinct records.
std::string build_generation_prompt(const CaptionRecord& record);

struct GenQaMetadata {
    std::string model;
    std::string raw_hash;       // fnv1a64 hex of the raw service response
    std::int64_t timestamp = 0; // unix seconds; 0 for the offline mock
};

struct GeneratedQA {
    std::string audio_id;
    std::string question;
    std::array<std::string, 4> choices;
    int answer_index = 0;       // position of the correct answer in choices
    CaptionRecord source;       // provenance copy
    GenQaMetadata meta;
};

struct GenClientConfig {
    std::string endpoint;                    // e.g. https://host:443/v1/chat/completions
    std::string model;
    double timeout_seconds = 30.0;
    int max_retries = 3;                     // retries after the first attempt
    double backoff_initial_seconds = 0.5;    // doubled per retry
    double backoff_max_seconds = 8.0;
    std::string cache_dir;                   // empty disables the cache
    int rate_limit_requests = 0;             // 0 = unlimited
    double rate_limit_interval_seconds = 1.0;
    std::string api_key_env = "GRPOQA_API_KEY";

    void validate() const;
    std::string hash() const; // stable config fingerprint for manifests
};

struct TransportResponse {
    int status = 0;        // HTTP status; ignored when transport_error is set
    std::string body;      // assistant text on success
    bool transport_error = false;
    std::string error;
};

using TransportFn = std::function<TransportResponse(const GenClientConfig&, const std::string& prompt)>;

// Text-generation client: prompt-keyed cache, bounded retries with
// exponential backoff on transient failures (transport errors, 429, 5xx),
// and a simple request rate limit. Sleep and clock are injectable so the
// retry/rate-limit behavior is testable without waiting.
class GenClient {
public:
    struct Attempt {
        int status = 0;
        std::string error;
    };

    explicit GenClient(GenClientConfig config);                   // real HTTP transport
    GenClient(GenClientConfig config, TransportFn transport);
    GenClient(GenClientConfig config, TransportFn transport,
              std::function<void(double)> sleep_seconds,
              std::function<double()> clock_seconds);

    // Returns the service's text for this prompt. A cached prompt is served
    // byte-identically with no transport call.
    std::string request_qa(const std::string& prompt);

    const std::vector<Attempt>& last_attempts() const { return attempts_; }
    int transport_calls() const { return transport_calls_; }

private:
    std::string cache_lookup(const std::string& prompt) const;
    void cache_store(const std::string& prompt, const std::string& response) const;
    std::string cache_path(const std::string& prompt, int probe) const;
    void respect_rate_limit();

    GenClientConfig config_;
    TransportFn transport_;
    std::function<void(double)> sleep_;
    std::function<double()> clock_;
    std::vector<Attempt> attempts_;
    std::vector<double> request_times_;
    int transport_calls_ = 0;
};

// Offline stand-in for the generation service: deterministic, schema-valid
// question/answer JSON derived from the prompt hash. Draws words from a
// fixed pool so downstream toy vocabularies stay bounded.
TransportFn mock_transport(std::uint64_t seed);

// Parses the service response (a JSON object with question, correct_answer,
// wrong_answers[3]; markdown fences tolerated) and validates it: four
// pairwise-distinct normalized choices, nonempty question. The correct
// answer starts at index 0; shuffle_answers moves it.
GeneratedQA parse_qa(const std::string& raw, const std::string& audio_id);

// Uniformly random permutation of the four choices, answer_index updated to
// follow the correct answer. The permutation is drawn from a generator seeded
// per item by (rng_seed, audio_id), so results do not depend on item order.
GeneratedQA shuffle_answers(const GeneratedQA& qa, std::uint64_t rng_seed);

struct FilterReport {
    int kept = 0;
    int dropped = 0;
    std::map<int, int> length_histogram; // token count -> items
};

// Keeps items whose question + four choices fit within max_total_tokens;
// stable order.
std::vector<GeneratedQA> length_filter(std::span<const GeneratedQA> items, int max_total_tokens,
                                       const Tokenizer& tokenizer, FilterReport* report = nullptr);

struct ExportManifest {
    int count = 0;
    std::uint64_t seed = 0;
    std::string client_config_hash;
    std::array<int, 4> position_counts{};
    std::map<std::string, int> category_counts;
    FilterReport filter;

    std::string to_json() const;
};

// Writes the items as QAItem JSON-lines (category from caption provenance:
// speech > music > sound; one context token derived from the audio id) plus
// a manifest JSON next to it. Nothing is written when any item is invalid.
ExportManifest export_dataset(std::span<const GeneratedQA> items, const Vocab& vocab,
                              const std::string& dataset_path, const std::string& manifest_path,
                              std::uint64_t seed, const std::string& client_config_hash,
                              const FilterReport& filter);

// flags questions that mention music for manual review (caption corpora are
// known to hallucinate music); returns indices of flagged items
std::vector<std::size_t> flag_music_mentions(std::span<const GeneratedQA> items);

} // namespace grpoqa
