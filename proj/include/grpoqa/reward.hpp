#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace grpoqa {

// Canonical text form used everywhere answers are compared: ASCII lowercase,
// punctuation collapsed to single spaces, no leading/trailing space.
// Idempotent. Non-alphanumeric bytes (including non-ASCII) are treated as
// separators; this is a declared convention, not Unicode handling.
std::string normalize_text(std::string_view s);

// 1 iff the normalized correct answer occurs in the normalized response as a
// whole-word-bounded substring, else 0. Binary accuracy is the only reward;
// no formatting or structure rewards exist.
int accuracy_reward(std::string_view response, std::string_view correct_answer);

struct MatchResult {
    std::optional<int> matched_index;                          // 0..3
    std::optional<std::pair<std::size_t, std::size_t>> matched_span; // [begin,end) in normalized response
    bool ambiguous = false;                                    // >= 2 distinct choices matched
};

// Finds every choice contained (word-bounded) in the normalized response and
// selects the longest normalized match; length ties go to the earliest
// occurrence. Duplicate normalized choices are a malformed benchmark.
MatchResult match_choice(std::string_view response, const std::array<std::string, 4>& choices);

} // namespace grpoqa
