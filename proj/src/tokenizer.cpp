#include "grpoqa/tokenizer.hpp"

#include <sstream>

#include "grpoqa/reward.hpp"

namespace grpoqa {

Tokenizer Tokenizer::from_words(const Vocab& vocab, const std::vector<std::string>& words) {
    Tokenizer t(vocab);
    for (const auto& w : words) t.add_word(w);
    return t;
}

int Tokenizer::add_word(const std::string& word) {
    if (word.empty() || normalize_text(word) != word) {
        throw InputError("tokenizer: word must be in normalized form: \"" + word + "\"");
    }
    if (word.find(' ') != std::string::npos) {
        throw InputError("tokenizer: multi-word entry: \"" + word + "\"");
    }
    auto it = index_.find(word);
    if (it != index_.end()) return it->second;
    if (word_count() >= vocab_.word_slots()) {
        throw InputError("tokenizer: vocabulary overflow at word \"" + word + "\" (" +
                         std::to_string(vocab_.word_slots()) + " slots)");
    }
    const int id = vocab_.first_word_id() + word_count();
    words_.push_back(word);
    index_.emplace(word, id);
    return id;
}

namespace {

template <typename Fn>
void for_each_word(std::string_view text, Fn&& fn) {
    std::istringstream ss{normalize_text(text)};
    std::string w;
    while (ss >> w) fn(w);
}

} // namespace

void Tokenizer::register_text(std::string_view text) {
    for_each_word(text, [&](const std::string& w) { add_word(w); });
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    for_each_word(text, [&](const std::string& w) {
        auto it = index_.find(w);
        if (it == index_.end()) throw InputError("tokenizer: unknown word: \"" + w + "\"");
        ids.push_back(it->second);
    });
    return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (!vocab_.valid_id(id)) throw InputError("tokenizer: id out of range: " + std::to_string(id));
        if (vocab_.is_reserved(id)) continue;
        const std::size_t slot = static_cast<std::size_t>(id - vocab_.first_word_id());
        if (slot >= words_.size()) {
            throw InputError("tokenizer: id has no word: " + std::to_string(id));
        }
        if (!out.empty()) out.push_back(' ');
        out += words_[slot];
    }
    return out;
}

int Tokenizer::count_tokens(std::string_view text) const {
    int n = 0;
    for_each_word(text, [&](const std::string&) { ++n; });
    return n;
}

} // namespace grpoqa
