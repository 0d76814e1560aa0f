#pragma once

#include <cstddef>
#include <string>

#include "egocap/tensor.hpp"

namespace egocap {

// Learnable affine maps applied before concatenation. Weights use the
// row-vector convention of affine(): y = x W + b, W stored [in x out].
// Both maps start as the identity so every fusion mode reduces to plain
// concatenation at initialization.
struct AmmtParams {
    Tensor w_c;  // [H_S x H_S], sensor branch
    Tensor b_c;  // [H_S]
    Tensor w_v;  // [H_V x H_V], visual branch (used by the symmetric / linear-on-V ablations)
    Tensor b_v;  // [H_V]
};

AmmtParams init_ammt(std::size_t visual_width, std::size_t sensor_width);

// The triple handed to the decoder: h_V and h_S unchanged plus the fused
// h_VS of width |h_V| + |h_S|. Each member is [B x width] or [width].
struct EncodedRepresentations {
    Tensor h_v;
    Tensor h_s;
    Tensor h_vs;
};

enum class FusionMode {
    Concat,     // h_V ⊕ h_S
    Symmetric,  // (W_v h_V + b_v) ⊕ (W_c h_S + b_c)
    LinearOnV,  // (W_v h_V + b_v) ⊕ h_S
    LinearOnS,  // h_V ⊕ (W_c h_S + b_c), the asymmetric transformation
};

const char* fusion_mode_name(FusionMode mode) noexcept;
// Accepts concat | symmetric | linear-on-V | linear-on-S; ConfigError otherwise.
FusionMode parse_fusion_mode(const std::string& name);

// h_VS = h_V ⊕ (W_c h_S + b_c).
EncodedRepresentations ammt_fuse(const Tensor& h_v, const Tensor& h_s, const AmmtParams& params);

EncodedRepresentations fuse_variant(const Tensor& h_v, const Tensor& h_s, FusionMode mode,
                                    const AmmtParams& params);

}  // namespace egocap
