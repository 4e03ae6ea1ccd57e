#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "ctricks/rng.hpp"

namespace ctricks {

enum class PromptVariant { Standard, Conflict };

std::string_view to_string(PromptVariant variant);
PromptVariant parse_variant(std::string_view text);

struct PromptInstance {
    std::string sample_id;
    PromptVariant variant = PromptVariant::Standard;
    std::string object_name;
    std::optional<int> false_count;
    std::string text;
};

// Number words one..thirty. Canonical forms are lowercase; 21-29 are hyphenated.
class NumberLexicon {
public:
    static constexpr int kMin = 1;
    static constexpr int kMax = 30;

    static const NumberLexicon& instance();

    // Exact lookup. Accepts "twenty one" as well as "twenty-one".
    // Throws Error(NotInLexicon) for anything else.
    int word_to_number(std::string_view word) const;
    std::optional<int> try_word_to_number(std::string_view word) const;
    // Throws Error(NotInLexicon) outside [1, 30].
    const std::string& number_to_word(int n) const;

    const std::array<std::string, kMax>& words() const { return words_; }

private:
    NumberLexicon();
    std::array<std::string, kMax> words_;
};

int word_to_number(std::string_view word);
std::string number_to_word(int n);

std::string standard_prompt(std::string_view object_name);

// delta must be one of -2, -1, +1, +2 and true_count + delta >= 1.
PromptInstance conflict_prompt(std::string sample_id, std::string_view object_name, int true_count, int delta);
int draw_conflict_delta(Rng& rng);

PromptInstance make_standard_instance(std::string sample_id, std::string_view object_name);

// One JSON-lines record: {sample_id, variant, object_name, false_count, text}.
std::string prompt_jsonl_line(const PromptInstance& prompt);

}  // namespace ctricks
