#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace egocap {

// Lowercases ASCII and splits on whitespace and punctuation; never yields
// empty tokens.
std::vector<std::string> tokenize(std::string_view text);
std::string detokenize(std::span<const std::string> tokens);

class Vocabulary {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kBos = 1;
    static constexpr std::size_t kEos = 2;
    static constexpr std::size_t kUnk = 3;
    static constexpr std::size_t kReserved = 4;

    Vocabulary();

    // Tokens seen fewer than `min_count` times map to UNK. Ids are assigned
    // by descending frequency, ties broken lexicographically.
    static Vocabulary build(std::span<const std::string> corpus, std::size_t min_count = 1);
    // Rebuilds from an id-ordered token list (reserved entries first).
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    std::size_t size() const noexcept { return tokens_.size(); }
    bool contains(std::string_view token) const;
    std::size_t id(std::string_view token) const;  // kUnk when absent
    const std::string& token(std::size_t id) const;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    std::vector<std::size_t> encode(std::string_view caption) const;
    // Words of `ids`, stopping at EOS and skipping PAD / BOS.
    std::vector<std::string> words(std::span<const std::size_t> ids) const;
    std::string decode(std::span<const std::size_t> ids) const;

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace egocap
