#pragma once

#include <string>

#include "grpoqa/policy.hpp"
#include "grpoqa/tokenizer.hpp"

namespace grpoqa {

// Parameter checkpoint: text format with a shape header, the tokenizer word
// table (needed to encode datasets consistently in a later process), the
// parameters as IEEE-754 bit patterns (exact round-trip) and an fnv1a64
// checksum over everything above it. Loading rejects shape inconsistencies
// and checksum mismatches.
struct Checkpoint {
    Vocab vocab;
    PolicyParams params;
    std::vector<std::string> words;

    Tokenizer tokenizer() const { return Tokenizer::from_words(vocab, words); }
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// true when the file starts with the checkpoint magic line
bool looks_like_checkpoint(const std::string& content);

} // namespace grpoqa
