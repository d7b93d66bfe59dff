#include "grpoqa/reward.hpp"

#include <cctype>
#include <limits>

#include "grpoqa/errors.hpp"

namespace grpoqa {

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            out.push_back(static_cast<char>(std::tolower(c)));
            pending_space = false;
        } else {
            pending_space = true;
        }
    }
    return out;
}

namespace {

// first word-bounded occurrence of needle in haystack, npos if none;
// both strings are assumed normalized
std::size_t find_bounded(std::string_view hay, std::string_view needle) {
    if (needle.empty()) return std::string_view::npos;
    std::size_t from = 0;
    while (true) {
        const std::size_t pos = hay.find(needle, from);
        if (pos == std::string_view::npos) return std::string_view::npos;
        const std::size_t end = pos + needle.size();
        const bool left_ok = pos == 0 || hay[pos - 1] == ' ';
        const bool right_ok = end == hay.size() || hay[end] == ' ';
        if (left_ok && right_ok) return pos;
        from = pos + 1;
    }
}

} // namespace

int accuracy_reward(std::string_view response, std::string_view correct_answer) {
    if (correct_answer.empty()) throw InputError("accuracy_reward: empty correct answer");
    const std::string needle = normalize_text(correct_answer);
    if (needle.empty()) return 0; // answer has no matchable content
    const std::string hay = normalize_text(response);
    return find_bounded(hay, needle) != std::string_view::npos ? 1 : 0;
}

MatchResult match_choice(std::string_view response, const std::array<std::string, 4>& choices) {
    std::array<std::string, 4> norm;
    for (int i = 0; i < 4; ++i) {
        norm[i] = normalize_text(choices[i]);
        if (norm[i].empty()) throw InputError("match_choice: choice " + std::to_string(i) + " is empty");
        for (int j = 0; j < i; ++j) {
            if (norm[i] == norm[j]) {
                throw InputError("match_choice: duplicate normalized choices: \"" + norm[i] + "\"");
            }
        }
    }

    const std::string hay = normalize_text(response);

    MatchResult result;
    int n_matched = 0;
    std::size_t best_len = 0;
    std::size_t best_pos = std::numeric_limits<std::size_t>::max();
    for (int i = 0; i < 4; ++i) {
        const std::size_t pos = find_bounded(hay, norm[i]);
        if (pos == std::string_view::npos) continue;
        ++n_matched;
        const std::size_t len = norm[i].size();
        if (len > best_len || (len == best_len && pos < best_pos)) {
            best_len = len;
            best_pos = pos;
            result.matched_index = i;
        }
    }
    if (result.matched_index) {
        result.matched_span = std::make_pair(best_pos, best_pos + best_len);
    }
    result.ambiguous = n_matched >= 2;
    return result;
}

} // namespace grpoqa
