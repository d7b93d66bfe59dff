#include "grpoqa/eval.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "grpoqa/reward.hpp"

namespace grpoqa {

using nlohmann::json;

std::string build_prompt(const QAItem& item) {
    std::string prompt = item.question;
    prompt += " Please choose the answer from the following options: ";
    for (int i = 0; i < 4; ++i) {
        if (i > 0) prompt += ", ";
        prompt += '"';
        prompt += item.choices[i];
        prompt += '"';
    }
    return prompt;
}

std::vector<int> encode_prompt(const QAItem& item, ModalityMode mode, const Tokenizer& tokenizer) {
    std::vector<int> ids;
    if (mode == ModalityMode::with_context) {
        if (!item.context_tokens) {
            throw StateError("item " + item.id + ": context requested but missing");
        }
        for (int id : *item.context_tokens) {
            if (!tokenizer.vocab().valid_id(id)) {
                throw InputError("item " + item.id + ": context token out of vocabulary");
            }
            ids.push_back(id);
        }
    }
    const std::vector<int> text = tokenizer.encode(build_prompt(item));
    ids.insert(ids.end(), text.begin(), text.end());
    return ids;
}

EvalReport evaluate(std::span<const QAItem> items, ModalityMode mode,
                    const Tokenizer& tokenizer, const DecodeFn& decode,
                    const EvalOptions& options) {
    if (items.empty()) throw InputError("evaluate: no items");

    EvalReport report;
    report.records.reserve(items.size());
    for (const auto& item : items) {
        validate_item(item);
        ItemRecord rec;
        rec.id = item.id;
        rec.category = item.category;

        if (mode == ModalityMode::with_context && !item.context_tokens) {
            rec.skipped = true;
            ++report.skipped;
            report.records.push_back(std::move(rec));
            continue;
        }

        const std::vector<int> prompt_ids = encode_prompt(item, mode, tokenizer);
        const std::vector<int> response_ids = decode(item, prompt_ids);
        const std::string response = tokenizer.decode(response_ids);

        const MatchResult match = match_choice(response, item.choices);
        rec.matched_index = match.matched_index.value_or(-1);
        rec.correct = match.matched_index && *match.matched_index == item.answer_index;
        rec.ambiguous = match.ambiguous;

        ++report.scored;
        if (rec.correct) ++report.correct;
        if (rec.ambiguous) ++report.ambiguous;
        auto& cat = report.per_category[item.category];
        ++cat.count;
        if (rec.correct) ++cat.correct;
        report.records.push_back(std::move(rec));
    }

    double macro_sum = 0.0;
    for (auto& [name, cat] : report.per_category) {
        cat.accuracy = cat.count > 0 ? double(cat.correct) / cat.count : 0.0;
        macro_sum += cat.accuracy;
    }
    report.overall_micro = report.scored > 0 ? double(report.correct) / report.scored : 0.0;
    report.overall_macro = report.per_category.empty() ? 0.0 : macro_sum / double(report.per_category.size());
    return report;
}

EvalReport evaluate(const PolicyParams& params, const Tokenizer& tokenizer,
                    std::span<const QAItem> items, ModalityMode mode,
                    const EvalOptions& options) {
    DecodeFn greedy = [&](const QAItem&, const std::vector<int>& prompt_ids) {
        TokenSequence prompt{prompt_ids, Role::prompt};
        return sample(params, prompt, 1.0, options.max_response_len, 0, /*greedy=*/true).ids;
    };
    return evaluate(items, mode, tokenizer, greedy, options);
}

ReportDelta compare_reports(const EvalReport& a, const EvalReport& b) {
    std::map<std::string, const ItemRecord*> by_id_a;
    for (const auto& r : a.records) by_id_a.emplace(r.id, &r);
    if (by_id_a.size() != a.records.size()) throw InputError("compare_reports: duplicate ids in first report");

    std::set<std::string> ids_b;
    for (const auto& r : b.records) ids_b.insert(r.id);
    if (ids_b.size() != b.records.size()) throw InputError("compare_reports: duplicate ids in second report");
    if (by_id_a.size() != ids_b.size()) throw InputError("compare_reports: item id sets differ");
    for (const auto& [id, rec] : by_id_a) {
        if (!ids_b.count(id)) throw InputError("compare_reports: item id sets differ at \"" + id + "\"");
    }

    ReportDelta delta;
    for (const auto& [name, cat_b] : b.per_category) {
        auto it = a.per_category.find(name);
        if (it == a.per_category.end()) throw InputError("compare_reports: category sets differ at \"" + name + "\"");
        delta.per_category[name] = cat_b.accuracy - it->second.accuracy;
    }
    for (const auto& [name, cat_a] : a.per_category) {
        if (!b.per_category.count(name)) throw InputError("compare_reports: category sets differ at \"" + name + "\"");
    }
    delta.overall = b.overall_micro - a.overall_micro;

    for (const auto& rb : b.records) {
        const ItemRecord* ra = by_id_a.at(rb.id);
        if (ra->skipped || rb.skipped) continue;
        if (ra->correct != rb.correct) {
            delta.flips.push_back({rb.id, ra->correct, rb.correct});
        }
    }
    return delta;
}

std::string report_to_json(const EvalReport& report) {
    json j;
    j["overall_micro"] = report.overall_micro;
    j["overall_macro"] = report.overall_macro;
    j["scored"] = report.scored;
    j["correct"] = report.correct;
    j["ambiguous"] = report.ambiguous;
    j["skipped"] = report.skipped;
    json cats = json::object();
    for (const auto& [name, cat] : report.per_category) {
        cats[name] = {{"count", cat.count}, {"correct", cat.correct}, {"accuracy", cat.accuracy}};
    }
    j["categories"] = cats;
    json recs = json::array();
    for (const auto& r : report.records) {
        recs.push_back({{"id", r.id},
                        {"category", r.category},
                        {"matched_index", r.matched_index},
                        {"correct", r.correct},
                        {"ambiguous", r.ambiguous},
                        {"skipped", r.skipped}});
    }
    j["records"] = recs;
    return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
    std::ostringstream os;
    os << "category";
    for (const auto& [name, cat] : report.per_category) os << '\t' << name;
    os << "\tavg_micro\tavg_macro\n";
    os << "accuracy";
    os.setf(std::ios::fixed);
    os.precision(4);
    for (const auto& [name, cat] : report.per_category) os << '\t' << cat.accuracy;
    os << '\t' << report.overall_micro << '\t' << report.overall_macro << '\n';
    os << "count";
    for (const auto& [name, cat] : report.per_category) os << '\t' << cat.count;
    os << '\t' << report.scored << "\t-\n";
    return os.str();
}

std::string delta_to_json(const ReportDelta& delta) {
    json j;
    j["overall"] = delta.overall;
    json cats = json::object();
    for (const auto& [name, d] : delta.per_category) cats[name] = d;
    j["per_category"] = cats;
    json flips = json::array();
    for (const auto& f : delta.flips) {
        flips.push_back({{"id", f.id}, {"from", f.correct_a}, {"to", f.correct_b}});
    }
    j["flips"] = flips;
    return j.dump(2) + "\n";
}

} // namespace grpoqa
