#include "egocap/dma.hpp"

#include <cmath>

#include "egocap/errors.hpp"
#include "egocap/ops.hpp"

namespace egocap {

const char* modality_name(std::size_t modality) noexcept {
    switch (modality) {
        case kVisual: return "V";
        case kSensor: return "S";
        case kFused: return "V+S";
        default: return "?";
    }
}

const char* dma_variant_name(DmaVariant v) noexcept {
    switch (v) {
        case DmaVariant::Softmax: return "softmax";
        case DmaVariant::Gumbel: return "gumbel";
        case DmaVariant::StGumbel: return "st-gumbel";
    }
    return "?";
}

DmaVariant parse_dma_variant(const std::string& name) {
    if (name == "softmax") return DmaVariant::Softmax;
    if (name == "gumbel") return DmaVariant::Gumbel;
    if (name == "st-gumbel") return DmaVariant::StGumbel;
    throw ConfigError("unknown DMA variant '" + name + "' (expected softmax | gumbel | st-gumbel)");
}

void DmaConfig::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("DMA temperature must be positive");
    for (double c : preference) {
        if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("DMA modality preferences must be positive");
    }
}

DmaParams init_dma(std::array<std::size_t, kNumModalities> widths, std::size_t decoder_hidden,
                   std::size_t attention_width, Rng& rng) {
    DmaParams p;
    for (std::size_t k = 0; k < kNumModalities; ++k) {
        const double pb = 1.0 / std::sqrt(static_cast<double>(widths[k]));
        std::vector<double> w(widths[k] * attention_width);
        for (auto& x : w) x = rng.uniform(-pb, pb);
        p.proj[k] = Tensor({widths[k], attention_width}, std::move(w), true);

        const std::size_t rows = widths[k] + decoder_hidden;
        const double rb = 1.0 / std::sqrt(static_cast<double>(rows));
        std::vector<double> r(rows);
        for (auto& x : r) x = rng.uniform(-rb, rb);
        p.rel_w[k] = Tensor({rows, 1}, std::move(r), true);
        p.rel_b[k] = Tensor::zeros({1}, true);
    }
    return p;
}

std::array<Tensor, kNumModalities> as_array(const EncodedRepresentations& z) {
    return {z.h_v, z.h_s, z.h_vs};
}

std::array<Tensor, kNumModalities> project_representations(const EncodedRepresentations& z,
                                                           const DmaParams& params) {
    const auto reps = as_array(z);
    std::array<Tensor, kNumModalities> out;
    for (std::size_t k = 0; k < kNumModalities; ++k) {
        if (reps[k].defined()) out[k] = affine(reps[k], params.proj[k]);
    }
    return out;
}

Tensor dma_relevance(const EncodedRepresentations& z, const Tensor& dec_state, const DmaParams& params) {
    const auto reps = as_array(z);
    std::array<Tensor, kNumModalities> eta;
    for (std::size_t k = 0; k < kNumModalities; ++k) {
        if (!reps[k].defined()) {
            throw DimensionError(std::string("dma_relevance: representation ") + modality_name(k) + " missing");
        }
        eta[k] = sigmoid(affine(concat({reps[k], dec_state}), params.rel_w[k], params.rel_b[k]));
    }
    return concat(std::span<const Tensor>(eta));
}

Tensor dma_weights_from_relevance(const Tensor& eta, const DmaConfig& cfg, const Tensor& noise) {
    cfg.validate();
    if (eta.cols() != kNumModalities) {
        throw DimensionError("dma weights: relevance must have 3 columns, got " + shape_str(eta.shape()));
    }
    const std::size_t rows = eta.rows();
    std::vector<double> c(rows * kNumModalities);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < kNumModalities; ++k) c[r * kNumModalities + k] = cfg.preference[k];

    const Tensor rho = normalize_rows(eta);
    const Tensor pi = normalize_rows(mul(rho, Tensor(eta.shape(), std::move(c))));
    Tensor logits = log(pi);
    if (noise.defined()) {
        if (noise.shape() != eta.shape()) {
            throw DimensionError("dma weights: noise " + shape_str(noise.shape()) + " vs relevance " +
                                 shape_str(eta.shape()));
        }
        logits = add(logits, noise);
    }
    const Tensor zeta = softmax(logits, cfg.tau);
    for (double v : zeta.values()) {
        if (!std::isfinite(v)) throw NumericError("dma weights: non-finite attention");
    }
    if (cfg.variant == DmaVariant::StGumbel) return straight_through_one_hot(zeta);
    return zeta;
}

Tensor sample_gumbel_noise(std::size_t rows, Rng& rng) {
    std::vector<double> g(rows * kNumModalities);
    for (auto& x : g) x = rng.gumbel();
    return Tensor({rows, kNumModalities}, std::move(g));
}

Tensor dma_weights(const EncodedRepresentations& z, const Tensor& dec_state, const DmaConfig& cfg,
                   const DmaParams& params, Rng& rng, bool sample_noise) {
    const Tensor eta = dma_relevance(z, dec_state, params);
    Tensor noise;
    if (sample_noise && cfg.variant != DmaVariant::Softmax) {
        noise = reshape(sample_gumbel_noise(eta.rows(), rng), eta.shape()).detach();
    }
    return dma_weights_from_relevance(eta, cfg, noise);
}

Tensor dma_mix(const std::array<Tensor, kNumModalities>& projected, const Tensor& zeta) {
    if (zeta.cols() != kNumModalities) {
        throw DimensionError("dma_mix: weights must have 3 columns, got " + shape_str(zeta.shape()));
    }
    Tensor out;
    for (std::size_t k = 0; k < kNumModalities; ++k) {
        if (!projected[k].defined()) {
            throw DimensionError(std::string("dma_mix: representation ") + modality_name(k) + " missing");
        }
        if (projected[k].rows() != zeta.rows()) {
            throw DimensionError("dma_mix: " + shape_str(projected[k].shape()) + " vs weights " +
                                 shape_str(zeta.shape()));
        }
        const Tensor term = scale_rows(projected[k], slice(zeta, k, k + 1));
        out = out.defined() ? add(out, term) : term;
    }
    return out;
}

Tensor dma_mix(const EncodedRepresentations& z, const Tensor& zeta, const DmaParams& params) {
    return dma_mix(project_representations(z, params), zeta);
}

}  // namespace egocap
