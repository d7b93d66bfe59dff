#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grpoqa/policy.hpp"
#include "grpoqa/tokenizer.hpp"

namespace grpoqa {

// Whether the context-token channel (the audio stand-in) is fed to the
// policy. Dropping it is a pure prompt edit.
enum class ModalityMode { with_context, without_context };

const char* modality_name(ModalityMode mode);
ModalityMode modality_from_name(const std::string& name);

// One multiple-choice question. `context_tokens` is absent when the item has
// no context channel at all; an empty list means "present but contributes
// nothing".
struct QAItem {
    std::string id;
    std::string question;
    std::array<std::string, 4> choices;
    int answer_index = 0;
    std::string category;
    std::string split;
    std::optional<std::vector<int>> context_tokens;
};

// Enforces: nonempty id/question, pairwise-distinct normalized choices,
// answer_index in range. Throws InputError.
void validate_item(const QAItem& item);

std::string item_to_json_line(const QAItem& item);
QAItem item_from_json_line(const std::string& line);

// JSON-lines dataset, one QAItem per line. Errors carry the 1-based line number.
std::vector<QAItem> load_dataset(const std::string& path);
void save_dataset(std::span<const QAItem> items, const std::string& path);

// Registers every word appearing in the items' prompts (question, template
// and choices) so the whole dataset encodes without unknown words.
Tokenizer build_tokenizer(const Vocab& vocab, std::span<const QAItem> items);

} // namespace grpoqa
