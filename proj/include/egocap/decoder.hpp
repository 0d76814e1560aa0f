#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "egocap/dma.hpp"
#include "egocap/fusion.hpp"
#include "egocap/rng.hpp"
#include "egocap/tensor.hpp"

namespace egocap {

// Gate column order: reset, update, candidate.
struct GruParams {
    Tensor w_x;  // [input x 3H]
    Tensor b_x;  // [3H]
    Tensor w_h;  // [H x 3H]
    Tensor b_h;  // [3H]

    std::size_t hidden_size() const { return w_h.dim(0); }
};

struct DecoderParams {
    Tensor embedding;  // [vocab x E]
    GruParams gru;     // input width E + H_A
    Tensor w_out;      // [H_dec x vocab], logits = h W_out
    DmaParams dma;

    std::size_t vocab_size() const { return embedding.dim(0); }
};

GruParams init_gru(std::size_t input, std::size_t hidden, Rng& rng);
DecoderParams init_decoder(std::size_t vocab, std::size_t embedding_width, std::size_t decoder_hidden,
                           std::size_t attention_width, std::array<std::size_t, kNumModalities> rep_widths,
                           Rng& rng);

// Which representation feeds the decoder: the per-step DMA mixture, or one
// representation all the time (the ablation rows without DMA).
enum class RepresentationMode { Dynamic, FixedV, FixedS, FixedVS };

const char* representation_mode_name(RepresentationMode m) noexcept;
// dynamic | fixed-v | fixed-s | fixed-vs
RepresentationMode parse_representation_mode(const std::string& name);

struct DecoderConfig {
    DmaConfig dma;
    RepresentationMode representation = RepresentationMode::Dynamic;
};

// Per-batch state shared by every word step.
struct DecoderContext {
    EncodedRepresentations z;
    std::array<Tensor, kNumModalities> projected;  // W_k h_k; only what the mode needs
    std::size_t batch = 0;
};

DecoderContext make_decoder_context(const EncodedRepresentations& z, const DecoderParams& params,
                                    RepresentationMode mode);

Tensor gru_step(const Tensor& x, const Tensor& h, const GruParams& params);

struct StepOutput {
    Tensor logits;  // [B x vocab]
    Tensor hidden;  // [B x H_dec]
    Tensor zeta;    // [B x 3]
};

// One word step: GRU input is embed(prev) ⊕ dma_mix. Gumbel noise is drawn
// from `rng` only when `sample_noise` is set.
StepOutput decode_step(std::span<const std::size_t> prev_tokens, const Tensor& hidden,
                       const DecoderContext& ctx, const DecoderConfig& cfg, const DecoderParams& params,
                       Rng& rng, bool sample_noise);

Tensor initial_decoder_state(std::size_t batch, const DecoderParams& params);

struct TraceStep {
    std::array<double, kNumModalities> zeta{};
    std::size_t modality = 0;  // argmax of zeta
    std::size_t token = 0;
    std::string word_type;     // filled in by the analysis
};

// One entry per word step, including the step that emitted EOS.
struct AttentionTrace {
    std::vector<TraceStep> steps;
};

struct Generation {
    std::vector<std::size_t> tokens;  // without BOS / EOS
    AttentionTrace trace;
};

struct GenerateOptions {
    std::size_t max_len = 15;
    std::size_t beam = 1;
    // Generation uses g = 0 unless sampled noise is requested explicitly.
    bool sample_noise = false;
    std::uint64_t noise_seed = 0;
};

inline constexpr std::size_t kBosToken = 1;
inline constexpr std::size_t kEosToken = 2;

// Greedy (beam = 1) or beam-search captioning from BOS until EOS or max_len.
std::vector<Generation> generate(const DecoderContext& ctx, const DecoderConfig& cfg,
                                 const DecoderParams& params, const GenerateOptions& options = {});

}  // namespace egocap
