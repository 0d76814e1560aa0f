#include "egocap/fusion.hpp"

#include "egocap/errors.hpp"
#include "egocap/ops.hpp"

namespace egocap {

namespace {

Tensor identity(std::size_t n) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    return Tensor({n, n}, std::move(v), true);
}

void require_width(const Tensor& h, const Tensor& w, const char* what) {
    if (h.cols() != w.dim(0)) {
        throw DimensionError(std::string("fusion: ") + what + " has shape " + shape_str(h.shape()) +
                             " but its transform expects width " + std::to_string(w.dim(0)));
    }
}

}  // namespace

AmmtParams init_ammt(std::size_t visual_width, std::size_t sensor_width) {
    return AmmtParams{identity(sensor_width), Tensor::zeros({sensor_width}, true), identity(visual_width),
                      Tensor::zeros({visual_width}, true)};
}

const char* fusion_mode_name(FusionMode mode) noexcept {
    switch (mode) {
        case FusionMode::Concat: return "concat";
        case FusionMode::Symmetric: return "symmetric";
        case FusionMode::LinearOnV: return "linear-on-V";
        case FusionMode::LinearOnS: return "linear-on-S";
    }
    return "?";
}

FusionMode parse_fusion_mode(const std::string& name) {
    if (name == "concat") return FusionMode::Concat;
    if (name == "symmetric") return FusionMode::Symmetric;
    if (name == "linear-on-V" || name == "linear-on-v") return FusionMode::LinearOnV;
    if (name == "linear-on-S" || name == "linear-on-s") return FusionMode::LinearOnS;
    throw ConfigError("unknown fusion mode '" + name + "'");
}

EncodedRepresentations ammt_fuse(const Tensor& h_v, const Tensor& h_s, const AmmtParams& params) {
    return fuse_variant(h_v, h_s, FusionMode::LinearOnS, params);
}

EncodedRepresentations fuse_variant(const Tensor& h_v, const Tensor& h_s, FusionMode mode,
                                    const AmmtParams& params) {
    if (h_v.rows() != h_s.rows() || h_v.rank() != h_s.rank()) {
        throw DimensionError("fusion: h_V " + shape_str(h_v.shape()) + " and h_S " + shape_str(h_s.shape()) +
                             " disagree on leading shape");
    }
    const bool on_v = mode == FusionMode::Symmetric || mode == FusionMode::LinearOnV;
    const bool on_s = mode == FusionMode::Symmetric || mode == FusionMode::LinearOnS;
    Tensor v_part = h_v;
    Tensor s_part = h_s;
    if (on_v) {
        require_width(h_v, params.w_v, "h_V");
        v_part = affine(h_v, params.w_v, params.b_v);
    }
    if (on_s) {
        require_width(h_s, params.w_c, "h_S");
        s_part = affine(h_s, params.w_c, params.b_c);
    }
    return EncodedRepresentations{h_v, h_s, concat({v_part, s_part})};
}

}  // namespace egocap
