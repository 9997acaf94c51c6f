#include "lvgpt/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "lvgpt/error.hpp"

namespace lvgpt {

Vocabulary::Vocabulary() : tokens_{std::string(kPadToken), std::string(kUnkToken)} {
    ids_.emplace(tokens_[kPad], kPad);
    ids_.emplace(tokens_[kUnk], kUnk);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 2 || tokens[kPad] != kPadToken || tokens[kUnk] != kUnkToken) {
        throw ValueError("vocabulary must start with the reserved <pad> and <unk> tokens");
    }
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.ids_.clear();
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.ids_.emplace(v.tokens_[i], static_cast<std::int64_t>(i)).second) {
            throw ValueError("duplicate vocabulary token '" + v.tokens_[i] + "'");
        }
    }
    return v;
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t min_count) {
    if (corpus.empty()) throw ValueError("build_vocab: empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const auto& q : corpus)
        for (auto& w : normalize_words(q)) ++counts[w];

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [w, c] : counts)
        if (c >= min_count) kept.emplace_back(w, c);
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken)};
    for (auto& [w, c] : kept) tokens.push_back(w);
    return from_tokens(std::move(tokens));
}

std::int64_t Vocabulary::id(std::string_view word) const {
    auto it = ids_.find(std::string(word));
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int64_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw ValueError("vocabulary id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view word) const { return ids_.count(std::string(word)) > 0; }

std::vector<std::string> normalize_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else if (!std::ispunct(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

std::vector<std::int64_t> tokenize_question(std::string_view question, const Vocabulary& vocab,
                                            std::size_t max_len) {
    std::vector<std::int64_t> ids(max_len, Vocabulary::kPad);
    const auto words = normalize_words(question);
    for (std::size_t i = 0; i < std::min(max_len, words.size()); ++i) ids[i] = vocab.id(words[i]);
    return ids;
}

}  // namespace lvgpt
