#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grpoqa/policy.hpp"

namespace grpoqa {

// Word-level tokenizer over the free id range of a Vocab. Words are stored in
// normalized form; ids are assigned in registration order, which makes the
// table reproducible from the same input order. Stands in for a real
// tokenizer; no merges, no training.
class Tokenizer {
public:
    explicit Tokenizer(const Vocab& vocab) : vocab_(vocab) {}

    static Tokenizer from_words(const Vocab& vocab, const std::vector<std::string>& words);

    const Vocab& vocab() const { return vocab_; }

    // adds one normalized word; idempotent; throws InputError when the vocab is full
    int add_word(const std::string& word);

    // normalizes, splits and registers every word in the text
    void register_text(std::string_view text);

    // throws InputError on words that were never registered
    std::vector<int> encode(std::string_view text) const;

    // words joined by single spaces; eos and context ids produce nothing
    std::string decode(std::span<const int> ids) const;

    // token count of a text under this tokenizer (= word count after
    // normalization); does not require the words to be registered
    int count_tokens(std::string_view text) const;

    int word_count() const { return static_cast<int>(words_.size()); }
    const std::vector<std::string>& words() const { return words_; }

private:
    Vocab vocab_;
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_; // word -> token id
};

} // namespace grpoqa
