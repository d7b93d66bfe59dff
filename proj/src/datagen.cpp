#include "grpoqa/datagen.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "grpoqa/reward.hpp"
#include "grpoqa/rng.hpp"
#include "grpoqa/util.hpp"

namespace grpoqa {

using nlohmann::json;

void validate_caption(const CaptionRecord& record) {
    if (record.audio_id.empty()) throw InputError("caption: empty audio_id");
    if (!record.scene_caption && !record.speech_caption && !record.music_caption) {
        throw InputError("caption " + record.audio_id + ": no caption present");
    }
}

namespace {

std::optional<std::string> opt_field(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
}

} // namespace

std::vector<CaptionRecord> load_captions(const std::string& path) {
    const auto lines = split_lines(read_file(path));
    std::vector<CaptionRecord> records;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        try {
            json j = json::parse(lines[n]);
            CaptionRecord rec;
            rec.audio_id = j.at("audio_id").get<std::string>();
            rec.scene_caption = opt_field(j, "scene_caption");
            rec.speech_caption = opt_field(j, "speech_caption");
            rec.music_caption = opt_field(j, "music_caption");
            validate_caption(rec);
            records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            throw InputError(path + " line " + std::to_string(n + 1) + ": " + e.what());
        }
    }
    if (records.empty()) throw InputError(path + ": caption file is empty");
    return records;
}

void save_captions(std::span<const CaptionRecord> records, const std::string& path) {
    std::string out;
    for (const auto& rec : records) {
        json j;
        j["audio_id"] = rec.audio_id;
        if (rec.scene_caption) j["scene_caption"] = *rec.scene_caption;
        if (rec.speech_caption) j["speech_caption"] = *rec.speech_caption;
        if (rec.music_caption) j["music_caption"] = *rec.music_caption;
        out += j.dump();
        out.push_back('\n');
    }
    write_file_atomic(path, out);
}

std::string build_generation_prompt(const CaptionRecord& record) {
    validate_caption(record);
    std::string p;
    p += "You are given text captions describing one audio clip (id: " + record.audio_id + ").\n";
    if (record.scene_caption) p += "Scene caption: " + *record.scene_caption + "\n";
    if (record.speech_caption) p += "Speech caption: " + *record.speech_caption + "\n";
    if (record.music_caption) p += "Music caption: " + *record.music_caption + "\n";
    p += "Write one multiple-choice question about the audio that can be answered "
         "from these captions. Provide the correct answer and three other answers "
         "that are similar but clearly incorrect.\n";
    p += "Reply with exactly one JSON object of the form "
         "{\"question\": \"...\", \"correct_answer\": \"...\", "
         "\"wrong_answers\": [\"...\", \"...\", \"...\"]} and nothing else.\n";
    return p;
}

void GenClientConfig::validate() const {
    if (!(timeout_seconds > 0.0)) throw InputError("client config: timeout must be positive");
    if (max_retries < 0) throw InputError("client config: max_retries must be nonnegative");
    if (backoff_initial_seconds < 0.0 || backoff_max_seconds < 0.0) {
        throw InputError("client config: backoff must be nonnegative");
    }
    if (rate_limit_requests < 0) throw InputError("client config: rate limit must be nonnegative");
    if (rate_limit_requests > 0 && !(rate_limit_interval_seconds > 0.0)) {
        throw InputError("client config: rate limit interval must be positive");
    }
}

std::string GenClientConfig::hash() const {
    std::ostringstream os;
    os << endpoint << '|' << model << '|' << timeout_seconds << '|' << max_retries << '|'
       << backoff_initial_seconds << '|' << backoff_max_seconds << '|'
       << rate_limit_requests << '|' << rate_limit_interval_seconds;
    return to_hex(fnv1a64(os.str()));
}

// ---------------------------------------------------------------------------
// client

// defined in gen_http.cpp to keep httplib out of this translation unit
TransportResponse http_transport(const GenClientConfig& config, const std::string& prompt);

namespace {

bool is_transient(const TransportResponse& r) {
    return r.transport_error || r.status == 429 || (r.status >= 500 && r.status < 600);
}

} // namespace

GenClient::GenClient(GenClientConfig config)
    : GenClient(std::move(config), http_transport) {}

GenClient::GenClient(GenClientConfig config, TransportFn transport)
    : GenClient(std::move(config), std::move(transport),
                [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); },
                [] {
                    return std::chrono::duration<double>(
                               std::chrono::steady_clock::now().time_since_epoch())
                        .count();
                }) {}

GenClient::GenClient(GenClientConfig config, TransportFn transport,
                     std::function<void(double)> sleep_seconds,
                     std::function<double()> clock_seconds)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleep_(std::move(sleep_seconds)),
      clock_(std::move(clock_seconds)) {
    config_.validate();
}

std::string GenClient::cache_path(const std::string& prompt, int probe) const {
    // two independent fnv streams; 128 bits make collisions irrelevant, and
    // the stored prompt is verified anyway
    const std::string key = to_hex(fnv1a64(prompt)) + to_hex(fnv1a64(prompt, 0x84222325cbf29ce4ULL));
    std::string name = key;
    if (probe > 0) name += "-" + std::to_string(probe);
    return (std::filesystem::path(config_.cache_dir) / (name + ".json")).string();
}

std::string GenClient::cache_lookup(const std::string& prompt) const {
    if (config_.cache_dir.empty()) return {};
    for (int probe = 0; probe < 16; ++probe) {
        const std::string path = cache_path(prompt, probe);
        if (!std::filesystem::exists(path)) return {};
        try {
            json j = json::parse(read_file(path));
            if (j.at("prompt").get<std::string>() == prompt) {
                return j.at("response").get<std::string>();
            }
        } catch (const std::exception&) {
            return {}; // unreadable entry: treat as miss
        }
    }
    return {};
}

void GenClient::cache_store(const std::string& prompt, const std::string& response) const {
    if (config_.cache_dir.empty()) return;
    std::filesystem::create_directories(config_.cache_dir);
    for (int probe = 0; probe < 16; ++probe) {
        const std::string path = cache_path(prompt, probe);
        if (std::filesystem::exists(path)) {
            try {
                json j = json::parse(read_file(path));
                if (j.at("prompt").get<std::string>() != prompt) continue; // occupied by another prompt
            } catch (const std::exception&) {
            }
        }
        json j;
        j["prompt"] = prompt;
        j["response"] = response;
        j["model"] = config_.model;
        write_file_atomic(path, j.dump() + "\n");
        return;
    }
}

void GenClient::respect_rate_limit() {
    if (config_.rate_limit_requests <= 0) return;
    const double interval = config_.rate_limit_interval_seconds;
    double now = clock_();
    while (request_times_.size() >= std::size_t(config_.rate_limit_requests)) {
        const double oldest = request_times_.front();
        if (now - oldest >= interval) {
            request_times_.erase(request_times_.begin());
            continue;
        }
        sleep_(interval - (now - oldest));
        now = clock_();
        request_times_.erase(request_times_.begin());
    }
    request_times_.push_back(now);
}

std::string GenClient::request_qa(const std::string& prompt) {
    attempts_.clear();
    if (std::string cached = cache_lookup(prompt); !cached.empty()) {
        return cached;
    }

    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        respect_rate_limit();
        ++transport_calls_;
        const TransportResponse resp = transport_(config_, prompt);
        attempts_.push_back({resp.status, resp.error});

        if (!resp.transport_error && resp.status == 200) {
            cache_store(prompt, resp.body);
            return resp.body;
        }
        if (!is_transient(resp)) {
            std::string excerpt = resp.body.substr(0, 200);
            throw ServiceError("service returned status " + std::to_string(resp.status) +
                               ": " + excerpt);
        }
        if (attempt < config_.max_retries) {
            const double delay = std::min(config_.backoff_initial_seconds * double(1 << attempt),
                                          config_.backoff_max_seconds);
            sleep_(delay);
        }
    }

    std::ostringstream os;
    os << "transport failed after " << attempts_.size() << " attempts:";
    for (std::size_t i = 0; i < attempts_.size(); ++i) {
        os << " [" << (i + 1) << "] status=" << attempts_[i].status;
        if (!attempts_[i].error.empty()) os << " " << attempts_[i].error;
    }
    throw TransportError(os.str());
}

// ---------------------------------------------------------------------------
// mock transport

namespace {

const std::vector<std::string>& mock_subjects() {
    static const std::vector<std::string> v = {
        "engine", "rain", "violin", "crowd", "dog", "train", "waves", "siren",
    };
    return v;
}

const std::vector<std::string>& mock_descriptors() {
    static const std::vector<std::string> v = {
        "steady", "loud", "faint", "distant", "rhythmic", "sharp", "soft", "low",
    };
    return v;
}

} // namespace

TransportFn mock_transport(std::uint64_t seed) {
    return [seed](const GenClientConfig&, const std::string& prompt) {
        Rng rng(derive_seed(seed, fnv1a64(prompt)));
        const auto& subjects = mock_subjects();
        const auto& descriptors = mock_descriptors();

        // four distinct (descriptor, subject) pairs; first one is correct
        std::vector<int> pair_ids;
        while (pair_ids.size() < 4) {
            const int id = int(rng.uniform_int(subjects.size() * descriptors.size()));
            if (std::find(pair_ids.begin(), pair_ids.end(), id) == pair_ids.end()) {
                pair_ids.push_back(id);
            }
        }
        auto answer = [&](int id) {
            return descriptors[std::size_t(id) % descriptors.size()] + " " +
                   subjects[std::size_t(id) / descriptors.size()];
        };

        json j;
        j["question"] = "what sound stands out in the clip";
        j["correct_answer"] = answer(pair_ids[0]);
        j["wrong_answers"] = {answer(pair_ids[1]), answer(pair_ids[2]), answer(pair_ids[3])};

        TransportResponse resp;
        resp.status = 200;
        resp.body = j.dump();
        return resp;
    };
}

// ---------------------------------------------------------------------------
// parsing and shaping

GeneratedQA parse_qa(const std::string& raw, const std::string& audio_id) {
    const std::string raw_hash = to_hex(fnv1a64(raw));

    std::string text = trim(raw);
    // tolerate a markdown code fence around the object
    if (text.rfind("```", 0) == 0) {
        const std::size_t first_nl = text.find('\n');
        const std::size_t last_fence = text.rfind("```");
        if (first_nl != std::string::npos && last_fence > first_nl) {
            text = trim(text.substr(first_nl + 1, last_fence - first_nl - 1));
        }
    }

    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError("response " + raw_hash + ": invalid json: " + e.what());
    }

    GeneratedQA qa;
    qa.audio_id = audio_id;
    qa.meta.raw_hash = raw_hash;
    try {
        qa.question = j.at("question").get<std::string>();
        qa.choices[0] = j.at("correct_answer").get<std::string>();
        const auto& wrong = j.at("wrong_answers");
        if (!wrong.is_array() || wrong.size() != 3) {
            throw ParseError("wrong_answers must hold exactly 3 entries");
        }
        for (int i = 0; i < 3; ++i) qa.choices[std::size_t(i) + 1] = wrong.at(i).get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError("response " + raw_hash + ": bad fields: " + e.what());
    }
    qa.answer_index = 0;

    if (normalize_text(qa.question).empty()) {
        throw ParseError("response " + raw_hash + ": empty question");
    }
    for (int i = 0; i < 4; ++i) {
        const std::string norm = normalize_text(qa.choices[i]);
        if (norm.empty()) throw ParseError("response " + raw_hash + ": empty answer");
        for (int k = 0; k < i; ++k) {
            if (norm == normalize_text(qa.choices[k])) {
                throw ParseError("response " + raw_hash + ": duplicate answers: \"" + norm + "\"");
            }
        }
    }
    return qa;
}

GeneratedQA shuffle_answers(const GeneratedQA& qa, std::uint64_t rng_seed) {
    GeneratedQA out = qa;
    Rng rng(derive_seed(rng_seed, fnv1a64(qa.audio_id), 0xA05));
    std::vector<int> perm = {0, 1, 2, 3};
    rng.shuffle(perm);
    for (int i = 0; i < 4; ++i) {
        out.choices[std::size_t(perm[std::size_t(i)])] = qa.choices[std::size_t(i)];
        if (i == qa.answer_index) out.answer_index = perm[std::size_t(i)];
    }
    return out;
}

std::vector<GeneratedQA> length_filter(std::span<const GeneratedQA> items, int max_total_tokens,
                                       const Tokenizer& tokenizer, FilterReport* report) {
    if (max_total_tokens < 0) throw InputError("length_filter: threshold must be nonnegative");
    std::vector<GeneratedQA> kept;
    FilterReport local;
    for (const auto& qa : items) {
        int tokens = tokenizer.count_tokens(qa.question);
        for (const auto& c : qa.choices) tokens += tokenizer.count_tokens(c);
        ++local.length_histogram[tokens];
        if (tokens <= max_total_tokens) {
            kept.push_back(qa);
            ++local.kept;
        } else {
            ++local.dropped;
        }
    }
    if (report) *report = local;
    return kept;
}

// ---------------------------------------------------------------------------
// export

namespace {

std::string provenance_category(const CaptionRecord& source) {
    if (source.speech_caption) return "speech";
    if (source.music_caption) return "music";
    return "sound";
}

} // namespace

std::string ExportManifest::to_json() const {
    json j;
    j["count"] = count;
    j["seed"] = seed;
    j["client_config_hash"] = client_config_hash;
    j["position_counts"] = position_counts;
    json cats = json::object();
    for (const auto& [name, n] : category_counts) cats[name] = n;
    j["category_counts"] = cats;
    j["filter"] = {{"kept", filter.kept}, {"dropped", filter.dropped}};
    json hist = json::object();
    for (const auto& [len, n] : filter.length_histogram) hist[std::to_string(len)] = n;
    j["filter"]["length_histogram"] = hist;
    return j.dump(2) + "\n";
}

ExportManifest export_dataset(std::span<const GeneratedQA> items, const Vocab& vocab,
                              const std::string& dataset_path, const std::string& manifest_path,
                              std::uint64_t seed, const std::string& client_config_hash,
                              const FilterReport& filter) {
    ExportManifest manifest;
    manifest.count = static_cast<int>(items.size());
    manifest.seed = seed;
    manifest.client_config_hash = client_config_hash;
    manifest.filter = filter;

    std::vector<QAItem> rows;
    rows.reserve(items.size());
    for (const auto& qa : items) {
        QAItem item;
        item.id = qa.audio_id;
        item.question = qa.question;
        item.choices = qa.choices;
        item.answer_index = qa.answer_index;
        item.category = provenance_category(qa.source);
        item.split = "train";
        // one context marker stands in for this item's audio token stream
        item.context_tokens = std::vector<int>{
            vocab.context_id(int(fnv1a64(qa.audio_id) % std::uint64_t(vocab.context_count)))};
        validate_item(item);
        rows.push_back(std::move(item));
        ++manifest.position_counts[std::size_t(qa.answer_index)];
        ++manifest.category_counts[rows.back().category];
    }

    save_dataset(rows, dataset_path);
    write_file_atomic(manifest_path, manifest.to_json());
    return manifest;
}

std::vector<std::size_t> flag_music_mentions(std::span<const GeneratedQA> items) {
    std::vector<std::size_t> flagged;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::string q = " " + normalize_text(items[i].question) + " ";
        bool hit = q.find(" music ") != std::string::npos ||
                   q.find(" melody ") != std::string::npos ||
                   q.find(" song ") != std::string::npos;
        if (!hit) {
            for (const auto& c : items[i].choices) {
                const std::string n = " " + normalize_text(c) + " ";
                if (n.find(" music ") != std::string::npos) {
                    hit = true;
                    break;
                }
            }
        }
        if (hit) flagged.push_back(i);
    }
    return flagged;
}

} // namespace grpoqa
