#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lvgpt {

// Word-level vocabulary. Ids 0 and 1 are reserved for padding and unknown
// words; every other token maps to exactly one id.
class Vocabulary {
public:
    static constexpr std::int64_t kPad = 0;
    static constexpr std::int64_t kUnk = 1;
    static constexpr std::string_view kPadToken = "<pad>";
    static constexpr std::string_view kUnkToken = "<unk>";

    Vocabulary();

    // Tokens with count >= min_count, ordered by frequency (desc) then
    // lexicographically. Throws ValueError on an empty corpus.
    static Vocabulary build(std::span<const std::string> corpus, std::size_t min_count);

    // Rebuilds a vocabulary from its id-ordered token list (reserved tokens first).
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    std::int64_t id(std::string_view word) const;
    const std::string& token(std::int64_t id) const;
    bool contains(std::string_view word) const;
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int64_t> ids_;
};

// Lowercases, drops punctuation and splits on whitespace.
std::vector<std::string> normalize_words(std::string_view text);

// Total: always returns exactly max_len ids (truncated or right-padded).
std::vector<std::int64_t> tokenize_question(std::string_view question, const Vocabulary& vocab,
                                            std::size_t max_len);

}  // namespace lvgpt
