#include "grpoqa/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "grpoqa/eval.hpp"
#include "grpoqa/reward.hpp"
#include "grpoqa/util.hpp"

namespace grpoqa {

using nlohmann::json;

const char* modality_name(ModalityMode mode) {
    return mode == ModalityMode::with_context ? "with_context" : "without_context";
}

ModalityMode modality_from_name(const std::string& name) {
    if (name == "with_context") return ModalityMode::with_context;
    if (name == "without_context") return ModalityMode::without_context;
    throw InputError("unknown modality mode: \"" + name + "\"");
}

void validate_item(const QAItem& item) {
    if (item.id.empty()) throw InputError("item: empty id");
    if (item.question.empty()) throw InputError("item " + item.id + ": empty question");
    if (item.answer_index < 0 || item.answer_index > 3) {
        throw InputError("item " + item.id + ": answer_index out of range");
    }
    std::array<std::string, 4> norm;
    for (int i = 0; i < 4; ++i) {
        norm[i] = normalize_text(item.choices[i]);
        if (norm[i].empty()) {
            throw InputError("item " + item.id + ": choice " + std::to_string(i) + " is empty");
        }
        for (int j = 0; j < i; ++j) {
            if (norm[i] == norm[j]) {
                throw InputError("item " + item.id + ": duplicate normalized choices: \"" + norm[i] + "\"");
            }
        }
    }
    if (item.context_tokens) {
        for (int id : *item.context_tokens) {
            if (id < 0) throw InputError("item " + item.id + ": negative context token");
        }
    }
}

std::string item_to_json_line(const QAItem& item) {
    json j;
    j["id"] = item.id;
    j["question"] = item.question;
    j["choices"] = item.choices;
    j["answer_index"] = item.answer_index;
    j["category"] = item.category;
    j["split"] = item.split;
    if (item.context_tokens) j["context_tokens"] = *item.context_tokens;
    return j.dump();
}

QAItem item_from_json_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid json: ") + e.what());
    }
    try {
        QAItem item;
        item.id = j.at("id").get<std::string>();
        item.question = j.at("question").get<std::string>();
        const auto& ch = j.at("choices");
        if (!ch.is_array() || ch.size() != 4) throw ParseError("choices must be an array of 4");
        for (int i = 0; i < 4; ++i) item.choices[i] = ch.at(i).get<std::string>();
        item.answer_index = j.at("answer_index").get<int>();
        item.category = j.value("category", std::string{});
        item.split = j.value("split", std::string{});
        if (j.contains("context_tokens") && !j["context_tokens"].is_null()) {
            item.context_tokens = j["context_tokens"].get<std::vector<int>>();
        }
        return item;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad item fields: ") + e.what());
    }
}

std::vector<QAItem> load_dataset(const std::string& path) {
    const std::string content = read_file(path);
    std::vector<QAItem> items;
    const auto lines = split_lines(content);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        try {
            QAItem item = item_from_json_line(lines[n]);
            validate_item(item);
            items.push_back(std::move(item));
        } catch (const std::exception& e) {
            throw InputError(path + " line " + std::to_string(n + 1) + ": " + e.what());
        }
    }
    if (items.empty()) throw InputError(path + ": dataset is empty");
    return items;
}

void save_dataset(std::span<const QAItem> items, const std::string& path) {
    std::string out;
    for (const auto& item : items) {
        out += item_to_json_line(item);
        out.push_back('\n');
    }
    write_file_atomic(path, out);
}

Tokenizer build_tokenizer(const Vocab& vocab, std::span<const QAItem> items) {
    Tokenizer tok(vocab);
    for (const auto& item : items) {
        tok.register_text(build_prompt(item));
    }
    return tok;
}

} // namespace grpoqa
