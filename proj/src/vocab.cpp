#include "egocap/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "egocap/errors.hpp"

namespace egocap {

namespace {

const char* const kReservedTokens[] = {"<pad>", "<bos>", "<eos>", "<unk>"};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::string detokenize(std::span<const std::string> tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

Vocabulary::Vocabulary() {
    tokens_.assign(std::begin(kReservedTokens), std::end(kReservedTokens));
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    Vocabulary v;
    const std::size_t skip = tokens.size() >= kReserved &&
                                     std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin())
                                 ? kReserved
                                 : 0;
    for (std::size_t i = skip; i < tokens.size(); ++i) v.tokens_.push_back(std::move(tokens[i]));
    v.index_.clear();
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], i).second) {
            throw DataError("vocabulary: duplicate token '" + v.tokens_[i] + "'");
        }
    }
    return v;
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t min_count) {
    if (corpus.empty()) throw DataError("build_vocab: empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const auto& caption : corpus)
        for (auto& t : tokenize(caption)) ++counts[t];

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, n] : counts) {
        if (n >= min_count) kept.emplace_back(tok, n);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> tokens;
    tokens.reserve(kept.size());
    for (auto& [tok, n] : kept) tokens.push_back(tok);
    return from_tokens(std::move(tokens));
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

std::size_t Vocabulary::id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
    if (id >= tokens_.size()) {
        throw IndexError("vocabulary: id " + std::to_string(id) + " out of range for size " +
                         std::to_string(tokens_.size()));
    }
    return tokens_[id];
}

std::vector<std::size_t> Vocabulary::encode(std::string_view caption) const {
    std::vector<std::size_t> ids;
    for (const auto& t : tokenize(caption)) ids.push_back(id(t));
    return ids;
}

std::vector<std::string> Vocabulary::words(std::span<const std::size_t> ids) const {
    std::vector<std::string> out;
    for (auto id : ids) {
        if (id == kEos) break;
        if (id == kPad || id == kBos) continue;
        out.push_back(token(id));
    }
    return out;
}

std::string Vocabulary::decode(std::span<const std::size_t> ids) const {
    const auto w = words(ids);
    return detokenize(w);
}

}  // namespace egocap
