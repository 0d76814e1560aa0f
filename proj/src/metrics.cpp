#include "egocap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "egocap/errors.hpp"

namespace egocap {

namespace {

using NGram = std::vector<std::string>;
using Counts = std::map<NGram, std::size_t>;

Counts ngram_counts(const Words& w, std::size_t n) {
    Counts c;
    for (std::size_t i = 0; i + n <= w.size(); ++i) ++c[NGram(w.begin() + static_cast<std::ptrdiff_t>(i),
                                                            w.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return c;
}

void check_pairs(std::span<const EvalPair> pairs, const char* who) {
    if (pairs.empty()) throw DataError(std::string(who) + ": empty hypothesis set");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].references.empty()) {
            throw DataError(std::string(who) + ": pair " + std::to_string(i) + " has no references");
        }
    }
}

const std::set<std::string>& determiners() {
    static const std::set<std::string> s{"a", "an", "the", "this", "that", "these", "those", "some", "his", "her"};
    return s;
}

const std::set<std::string>& prepositions() {
    static const std::set<std::string> s{"from", "into", "in",   "on",   "onto", "to",     "with", "of",
                                         "off",  "at",   "over", "under", "out", "inside", "for",  "by"};
    return s;
}

}  // namespace

double bleu(std::span<const EvalPair> pairs, std::size_t max_n) {
    if (max_n < 1 || max_n > 5) throw ConfigError("bleu: max_n must be in [1, 5]");
    check_pairs(pairs, "bleu");

    std::vector<double> matched(max_n, 0.0), total(max_n, 0.0);
    double hyp_len = 0.0, ref_len = 0.0;
    for (const auto& p : pairs) {
        const auto c = static_cast<double>(p.hypothesis.size());
        hyp_len += c;
        // Closest reference length, shorter on ties.
        double best = static_cast<double>(p.references.front().size());
        for (const auto& r : p.references) {
            const auto l = static_cast<double>(r.size());
            if (std::abs(l - c) < std::abs(best - c) || (std::abs(l - c) == std::abs(best - c) && l < best)) best = l;
        }
        ref_len += best;

        for (std::size_t n = 1; n <= max_n; ++n) {
            const Counts hyp = ngram_counts(p.hypothesis, n);
            Counts max_ref;
            for (const auto& r : p.references)
                for (const auto& [g, k] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], k);
            for (const auto& [g, k] : hyp) {
                total[n - 1] += static_cast<double>(k);
                const auto it = max_ref.find(g);
                if (it != max_ref.end()) matched[n - 1] += static_cast<double>(std::min(k, it->second));
            }
        }
    }
    if (hyp_len == 0.0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 0; n < max_n; ++n) {
        if (matched[n] == 0.0) return 0.0;
        log_sum += std::log(matched[n] / total[n]);
    }
    const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
    return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

std::array<double, 5> bleu_1_to_5(std::span<const EvalPair> pairs) {
    std::array<double, 5> out{};
    for (std::size_t n = 1; n <= 5; ++n) out[n - 1] = bleu(pairs, n);
    return out;
}

std::vector<double> cider_d_per_pair(std::span<const EvalPair> pairs) {
    check_pairs(pairs, "cider_d");
    std::set<Words> distinct;
    for (const auto& p : pairs)
        for (const auto& r : p.references) distinct.insert(r);
    if (pairs.size() < 2 || distinct.size() < 2) {
        throw DataError("cider_d: need at least 2 pairs with distinct references for document frequencies");
    }

    constexpr std::size_t kMaxN = 4;
    constexpr double kSigma = 6.0;

    // Document frequency: number of pairs whose references contain the n-gram.
    std::map<NGram, double> df;
    for (const auto& p : pairs) {
        std::set<NGram> seen;
        for (const auto& r : p.references)
            for (std::size_t n = 1; n <= kMaxN; ++n)
                for (const auto& [g, k] : ngram_counts(r, n)) seen.insert(g);
        for (const auto& g : seen) df[g] += 1.0;
    }
    const double log_docs = std::log(static_cast<double>(pairs.size()));

    struct Vec {
        std::array<std::map<NGram, double>, kMaxN> w;
        std::array<double, kMaxN> norm{};
        double length = 0.0;
    };
    auto vectorize = [&](const Words& words) {
        Vec v;
        v.length = static_cast<double>(words.size());
        for (std::size_t n = 1; n <= kMaxN; ++n) {
            for (const auto& [g, k] : ngram_counts(words, n)) {
                const auto it = df.find(g);
                const double d = std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
                const double x = static_cast<double>(k) * (log_docs - d);
                v.w[n - 1][g] = x;
                v.norm[n - 1] += x * x;
            }
            v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
        }
        return v;
    };

    std::vector<double> scores;
    scores.reserve(pairs.size());
    for (const auto& p : pairs) {
        const Vec h = vectorize(p.hypothesis);
        std::array<double, kMaxN> acc{};
        for (const auto& ref : p.references) {
            const Vec r = vectorize(ref);
            const double delta = h.length - r.length;
            const double penalty = std::exp(-(delta * delta) / (2.0 * kSigma * kSigma));
            for (std::size_t n = 0; n < kMaxN; ++n) {
                double val = 0.0;
                for (const auto& [g, x] : h.w[n]) {
                    const auto it = r.w[n].find(g);
                    if (it != r.w[n].end()) val += std::min(x, it->second) * it->second;
                }
                if (h.norm[n] != 0.0 && r.norm[n] != 0.0) val /= h.norm[n] * r.norm[n];
                acc[n] += val * penalty;
            }
        }
        double mean = 0.0;
        for (double a : acc) mean += a;
        mean /= static_cast<double>(kMaxN);
        scores.push_back(10.0 * mean / static_cast<double>(p.references.size()));
    }
    return scores;
}

double cider_d(std::span<const EvalPair> pairs) {
    const auto s = cider_d_per_pair(pairs);
    double total = 0.0;
    for (double x : s) total += x;
    return 100.0 * total / static_cast<double>(s.size());
}

std::vector<std::string> tag_word_types(const Words& words) {
    std::vector<std::string> out(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i == 0) out[i] = "verb";
        else if (determiners().count(words[i])) out[i] = "determiner";
        else if (prepositions().count(words[i])) out[i] = "preposition";
        else if (out[i - 1] == "determiner") out[i] = "noun";
        else out[i] = "other";
    }
    return out;
}

double AttnReport::rate(const std::string& type, std::size_t modality) const {
    const auto it = by_type.find(type);
    if (it == by_type.end()) return 0.0;
    std::size_t total = 0;
    for (auto c : it->second) total += c;
    return total == 0 ? 0.0 : static_cast<double>(it->second[modality]) / static_cast<double>(total);
}

double AttnReport::first_position_rate(std::size_t modality) const {
    std::size_t total = 0;
    for (auto c : first_position) total += c;
    return total == 0 ? 0.0 : static_cast<double>(first_position[modality]) / static_cast<double>(total);
}

std::string AttnReport::render() const {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %8s %8s %8s %8s\n", "word-type", "V", "S", "V+S", "steps");
    out += line;
    for (const char* type : kWordTypes) {
        const auto it = by_type.find(type);
        if (it == by_type.end()) continue;
        std::size_t total = 0;
        for (auto c : it->second) total += c;
        std::snprintf(line, sizeof line, "%-12s %7.1f%% %7.1f%% %7.1f%% %8zu\n", type, 100.0 * rate(type, kVisual),
                      100.0 * rate(type, kSensor), 100.0 * rate(type, kFused), total);
        out += line;
    }
    if (!by_noun.empty()) {
        out += "\n";
        std::snprintf(line, sizeof line, "%-12s %8s %8s %8s %8s\n", "noun", "V", "S", "V+S", "steps");
        out += line;
        for (const auto& [noun, c] : by_noun) {
            const double total = static_cast<double>(c[0] + c[1] + c[2]);
            std::snprintf(line, sizeof line, "%-12s %7.1f%% %7.1f%% %7.1f%% %8.0f\n", noun.c_str(),
                          100.0 * static_cast<double>(c[0]) / total, 100.0 * static_cast<double>(c[1]) / total,
                          100.0 * static_cast<double>(c[2]) / total, total);
            out += line;
        }
    }
    return out;
}

nlohmann::json AttnReport::to_json() const {
    nlohmann::json types = nlohmann::json::object();
    for (const auto& [t, c] : by_type) types[t] = {{"V", c[0]}, {"S", c[1]}, {"V+S", c[2]}};
    nlohmann::json nouns = nlohmann::json::object();
    for (const auto& [t, c] : by_noun) nouns[t] = {{"V", c[0]}, {"S", c[1]}, {"V+S", c[2]}};
    return {{"by_type", types},
            {"by_noun", nouns},
            {"first_position", {{"V", first_position[0]}, {"S", first_position[1]}, {"V+S", first_position[2]}}}};
}

AttnReport attn_report(std::span<const AttentionTrace> traces, std::span<const Words> captions) {
    if (traces.size() != captions.size()) {
        throw DataError("attn_report: " + std::to_string(traces.size()) + " traces for " +
                        std::to_string(captions.size()) + " captions");
    }
    AttnReport report;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& steps = traces[i].steps;
        const auto& words = captions[i];
        if (steps.size() != words.size() && steps.size() != words.size() + 1) {
            throw DataError("attn_report: trace " + std::to_string(i) + " has " + std::to_string(steps.size()) +
                            " steps for " + std::to_string(words.size()) + " words");
        }
        const auto types = tag_word_types(words);
        for (std::size_t w = 0; w < words.size(); ++w) {
            const std::size_t m = steps[w].modality;
            if (m >= kNumModalities) throw DataError("attn_report: modality index out of range");
            ++report.by_type[types[w]][m];
            if (types[w] == "noun") ++report.by_noun[words[w]][m];
            if (w == 0) ++report.first_position[m];
        }
    }
    return report;
}

}  // namespace egocap
