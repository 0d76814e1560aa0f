#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "egocap/fusion.hpp"
#include "egocap/rng.hpp"
#include "egocap/tensor.hpp"

namespace egocap {

// Index of each representation in ζ and in per-modality parameter arrays.
enum Modality : std::size_t { kVisual = 0, kSensor = 1, kFused = 2 };
inline constexpr std::size_t kNumModalities = 3;

const char* modality_name(std::size_t modality) noexcept;  // "V", "S", "V+S"

enum class DmaVariant { Softmax, Gumbel, StGumbel };

const char* dma_variant_name(DmaVariant v) noexcept;
// softmax | gumbel | st-gumbel
DmaVariant parse_dma_variant(const std::string& name);

struct DmaConfig {
    DmaVariant variant = DmaVariant::Gumbel;
    double tau = 0.05;
    // Modality preference (c_V, c_S, c_V+S).
    std::array<double, kNumModalities> preference{1.0, 1.0, 1.5};

    void validate() const;
};

// Per-modality projection W_k to the common width H_A and relevance head
// eta_k = sigmoid(W'_k [h_k ; dec_state] + b_k).
struct DmaParams {
    std::array<Tensor, kNumModalities> proj;   // [width_k x H_A]
    std::array<Tensor, kNumModalities> rel_w;  // [(width_k + H_dec) x 1]
    std::array<Tensor, kNumModalities> rel_b;  // [1]

    std::size_t attention_width() const { return proj[0].dim(1); }
};

DmaParams init_dma(std::array<std::size_t, kNumModalities> widths, std::size_t decoder_hidden,
                   std::size_t attention_width, Rng& rng);

// The three representations as a fixed-order array, [B x width_k] each.
std::array<Tensor, kNumModalities> as_array(const EncodedRepresentations& z);

// W_k h_k for every k; undefined entries of `z` stay undefined.
std::array<Tensor, kNumModalities> project_representations(const EncodedRepresentations& z,
                                                           const DmaParams& params);

// eta [B x 3] from the representations and the previous decoder state [B x H_dec].
Tensor dma_relevance(const EncodedRepresentations& z, const Tensor& dec_state, const DmaParams& params);

// ζ [B x 3] from relevance: rho = eta / sum(eta), pi = c rho / sum(c rho),
// ζ = softmax((g + log pi) / tau). `noise` holds g (undefined means g = 0).
// For StGumbel the forward value is one_hot(argmax ζ) and the gradient
// flows through the soft ζ.
Tensor dma_weights_from_relevance(const Tensor& eta, const DmaConfig& cfg, const Tensor& noise = Tensor());

// Standard Gumbel draws [rows x 3].
Tensor sample_gumbel_noise(std::size_t rows, Rng& rng);

// Full weight computation. Noise is drawn from `rng` only for the Gumbel
// variants and only when `sample_noise` is set.
Tensor dma_weights(const EncodedRepresentations& z, const Tensor& dec_state, const DmaConfig& cfg,
                   const DmaParams& params, Rng& rng, bool sample_noise = true);

// sum_k ζ_k W_k h_k from precomputed projections; [B x H_A].
Tensor dma_mix(const std::array<Tensor, kNumModalities>& projected, const Tensor& zeta);
Tensor dma_mix(const EncodedRepresentations& z, const Tensor& zeta, const DmaParams& params);

}  // namespace egocap
