#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "grpoqa/dataset.hpp"
#include "grpoqa/policy.hpp"
#include "grpoqa/tokenizer.hpp"

namespace grpoqa {

// "<question> Please choose the answer from the following options: <choices>"
// with the choices rendered as a comma-separated list of double-quoted
// strings in stored order. Both training and evaluation build prompts here.
std::string build_prompt(const QAItem& item);

struct ItemRecord {
    std::string id;
    std::string category;
    int matched_index = -1; // -1 = no choice matched
    bool correct = false;
    bool ambiguous = false;
    bool skipped = false;   // with_context requested but item has no context
};

struct CategoryStats {
    int count = 0;
    int correct = 0;
    double accuracy = 0.0;
};

struct EvalReport {
    std::vector<ItemRecord> records;           // input order
    std::map<std::string, CategoryStats> per_category;
    double overall_micro = 0.0;                // total correct / total scored
    double overall_macro = 0.0;                // mean of category accuracies
    int scored = 0;
    int correct = 0;
    int ambiguous = 0;
    int skipped = 0;
};

struct EvalOptions {
    int max_response_len = 7;
};

// Decoder abstraction: maps an encoded prompt to response token ids. The
// production decoder is greedy policy decoding; tests inject scripted ones.
using DecodeFn = std::function<std::vector<int>(const QAItem& item, const std::vector<int>& prompt_ids)>;

EvalReport evaluate(std::span<const QAItem> items, ModalityMode mode,
                    const Tokenizer& tokenizer, const DecodeFn& decode,
                    const EvalOptions& options = {});

// greedy decoding under the given parameters
EvalReport evaluate(const PolicyParams& params, const Tokenizer& tokenizer,
                    std::span<const QAItem> items, ModalityMode mode,
                    const EvalOptions& options = {});

struct FlipRecord {
    std::string id;
    bool correct_a = false;
    bool correct_b = false;
};

struct ReportDelta {
    std::map<std::string, double> per_category; // b - a
    double overall = 0.0;                       // micro, b - a
    std::vector<FlipRecord> flips;
};

// b - a, per category and overall, plus the list of items whose correctness
// flipped. Requires identical item id sets.
ReportDelta compare_reports(const EvalReport& a, const EvalReport& b);

std::string report_to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);
std::string delta_to_json(const ReportDelta& delta);

// prompt ids for an item under a modality mode: context tokens are prepended
// iff mode is with_context; throws StateError when context is required but
// missing (evaluate() records such items as skipped instead)
std::vector<int> encode_prompt(const QAItem& item, ModalityMode mode, const Tokenizer& tokenizer);

} // namespace grpoqa
