#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "egocap/decoder.hpp"

namespace egocap {

using Words = std::vector<std::string>;

struct EvalPair {
    Words hypothesis;
    std::vector<Words> references;  // nonempty
};

// Corpus-level BLEU with uniform weights over n = 1..max_n, clipped counts
// and brevity penalty, scaled to [0, 100]. Unsmoothed: any n-gram order
// with zero matches gives 0. max_n in [1, 5].
double bleu(std::span<const EvalPair> pairs, std::size_t max_n);
std::array<double, 5> bleu_1_to_5(std::span<const EvalPair> pairs);

// CIDEr-D raw per-pair scores in [0, 10]: TF-IDF n-gram vectors for
// n = 1..4 with document frequency over the references, clipped cosine,
// Gaussian length penalty (sigma 6), averaged over n and references, x10.
// No stemming.
std::vector<double> cider_d_per_pair(std::span<const EvalPair> pairs);
// Corpus mean of the raw scores, x100.
double cider_d(std::span<const EvalPair> pairs);

// Closed-class tagging: first token verb, determiners and prepositions from
// fixed lists, a token right after a determiner is a noun, the rest other.
std::vector<std::string> tag_word_types(const Words& words);

inline constexpr const char* kWordTypes[] = {"verb", "noun", "determiner", "preposition", "other"};

struct AttnReport {
    // word type -> argmax-modality counts (V, S, V+S)
    std::map<std::string, std::array<std::size_t, kNumModalities>> by_type;
    // noun -> argmax-modality counts
    std::map<std::string, std::array<std::size_t, kNumModalities>> by_noun;
    std::array<std::size_t, kNumModalities> first_position{};

    // Share of `type` steps whose argmax was `modality`; 0 when there are none.
    double rate(const std::string& type, std::size_t modality) const;
    double first_position_rate(std::size_t modality) const;
    std::string render() const;
    nlohmann::json to_json() const;
};

// `captions[i]` are the words generated with `traces[i]`. A trace holds
// one step per word plus optionally the final EOS step, which is ignored.
AttnReport attn_report(std::span<const AttentionTrace> traces, std::span<const Words> captions);

}  // namespace egocap
