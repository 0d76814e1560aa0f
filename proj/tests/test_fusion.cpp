#include <gtest/gtest.h>

#include "egocap/errors.hpp"
#include "egocap/fusion.hpp"
#include "egocap/ops.hpp"
#include "egocap/rng.hpp"

using namespace egocap;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool grad = false) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-3.0, 3.0);
    return Tensor(std::move(shape), std::move(v), grad);
}

AmmtParams random_ammt(std::size_t hv, std::size_t hs, Rng& rng) {
    return AmmtParams{random_tensor({hs, hs}, rng, true), random_tensor({hs}, rng, true),
                      random_tensor({hv, hv}, rng, true), random_tensor({hv}, rng, true)};
}

void expect_same(const Tensor& a, const Tensor& b) {
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.values()[i], b.values()[i]) << "index " << i;
}

}  // namespace

TEST(Ammt, InitIsIdentityAndZero) {
    const AmmtParams p = init_ammt(5, 3);
    ASSERT_EQ(p.w_c.shape(), (Shape{3, 3}));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(p.w_c.at(i, j), i == j ? 1.0 : 0.0);
    for (double v : p.b_c.values()) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(p.w_c.requires_grad());
}

TEST(Ammt, IdentityInitEqualsConcatenationBitExactly) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t hv = 1 + rng.index(8), hs = 1 + rng.index(8), b = 1 + rng.index(4);
        const AmmtParams p = init_ammt(hv, hs);
        const Tensor h_v = random_tensor({b, hv}, rng), h_s = random_tensor({b, hs}, rng);
        const auto z = ammt_fuse(h_v, h_s, p);
        ASSERT_EQ(z.h_vs.shape(), (Shape{b, hv + hs}));
        for (std::size_t r = 0; r < b; ++r) {
            for (std::size_t j = 0; j < hv; ++j) EXPECT_EQ(z.h_vs.at(r, j), h_v.at(r, j));
            for (std::size_t j = 0; j < hs; ++j) EXPECT_EQ(z.h_vs.at(r, hv + j), h_s.at(r, j));
        }
        EXPECT_TRUE(z.h_v.same_storage(h_v));
        EXPECT_TRUE(z.h_s.same_storage(h_s));
    }
}

TEST(Ammt, SingleVectorInputs) {
    const AmmtParams p = init_ammt(2, 3);
    const auto z = ammt_fuse(Tensor::vector({1, 2}), Tensor::vector({3, 4, 5}), p);
    ASSERT_EQ(z.h_vs.shape(), (Shape{5}));
    expect_same(z.h_vs, Tensor::vector({1, 2, 3, 4, 5}));
}

TEST(Ammt, ZeroSensorWithZeroBiasGivesZeroTail) {
    Rng rng(2);
    AmmtParams p = random_ammt(4, 3, rng);
    for (double& v : p.b_c.mutable_values()) v = 0.0;
    const Tensor h_v = random_tensor({2, 4}, rng);
    const auto z = ammt_fuse(h_v, Tensor::zeros({2, 3}), p);
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(z.h_vs.at(r, j), h_v.at(r, j));
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(z.h_vs.at(r, 4 + j), 0.0);
    }
}

TEST(Ammt, TailMatchesDirectMatrixVectorProduct) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t hv = 1 + rng.index(6), hs = 1 + rng.index(6);
        const AmmtParams p = random_ammt(hv, hs, rng);
        const Tensor h_v = random_tensor({hv}, rng), h_s = random_tensor({hs}, rng);
        const auto z = ammt_fuse(h_v, h_s, p);
        for (std::size_t k = 0; k < hs; ++k) {
            // row-vector convention: (h_S W_c)_k = sum_j h_S[j] W_c[j][k]
            long double acc = p.b_c.at(k);
            for (std::size_t j = 0; j < hs; ++j) acc += static_cast<long double>(h_s.at(j)) * p.w_c.at(j, k);
            EXPECT_NEAR(z.h_vs.at(hv + k), static_cast<double>(acc), 1e-12);
        }
        for (std::size_t j = 0; j < hv; ++j) EXPECT_EQ(z.h_vs.at(j), h_v.at(j));
    }
}

TEST(FuseVariant, ConcatEqualsAmmtAtIdentity) {
    Rng rng(4);
    const AmmtParams p = init_ammt(3, 4);
    const Tensor h_v = random_tensor({2, 3}, rng), h_s = random_tensor({2, 4}, rng);
    expect_same(fuse_variant(h_v, h_s, FusionMode::Concat, p).h_vs, ammt_fuse(h_v, h_s, p).h_vs);
    expect_same(fuse_variant(h_v, h_s, FusionMode::Symmetric, p).h_vs, ammt_fuse(h_v, h_s, p).h_vs);
    expect_same(fuse_variant(h_v, h_s, FusionMode::LinearOnV, p).h_vs, ammt_fuse(h_v, h_s, p).h_vs);
}

TEST(FuseVariant, LinearOnSEqualsAmmtForAnyParameters) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const AmmtParams p = random_ammt(3, 4, rng);
        const Tensor h_v = random_tensor({2, 3}, rng), h_s = random_tensor({2, 4}, rng);
        expect_same(fuse_variant(h_v, h_s, FusionMode::LinearOnS, p).h_vs, ammt_fuse(h_v, h_s, p).h_vs);
    }
}

TEST(FuseVariant, EachModeTransformsOnlyItsBranches) {
    Rng rng(6);
    const AmmtParams p = random_ammt(3, 2, rng);
    const Tensor h_v = random_tensor({1, 3}, rng), h_s = random_tensor({1, 2}, rng);
    const Tensor tv = affine(h_v, p.w_v, p.b_v), ts = affine(h_s, p.w_c, p.b_c);
    expect_same(fuse_variant(h_v, h_s, FusionMode::Concat, p).h_vs, concat({h_v, h_s}));
    expect_same(fuse_variant(h_v, h_s, FusionMode::Symmetric, p).h_vs, concat({tv, ts}));
    expect_same(fuse_variant(h_v, h_s, FusionMode::LinearOnV, p).h_vs, concat({tv, h_s}));
    expect_same(fuse_variant(h_v, h_s, FusionMode::LinearOnS, p).h_vs, concat({h_v, ts}));
}

TEST(FuseVariant, ParseModes) {
    EXPECT_EQ(parse_fusion_mode("concat"), FusionMode::Concat);
    EXPECT_EQ(parse_fusion_mode("symmetric"), FusionMode::Symmetric);
    EXPECT_EQ(parse_fusion_mode("linear-on-V"), FusionMode::LinearOnV);
    EXPECT_EQ(parse_fusion_mode("linear-on-S"), FusionMode::LinearOnS);
    EXPECT_THROW(parse_fusion_mode("gated"), ConfigError);
    for (FusionMode m : {FusionMode::Concat, FusionMode::Symmetric, FusionMode::LinearOnV, FusionMode::LinearOnS})
        EXPECT_EQ(parse_fusion_mode(fusion_mode_name(m)), m);
}

TEST(Ammt, ShapeMismatchIsDimensionError) {
    const AmmtParams p = init_ammt(3, 4);
    EXPECT_THROW(ammt_fuse(Tensor::zeros({2, 3}), Tensor::zeros({2, 5}), p), DimensionError);
    EXPECT_THROW(ammt_fuse(Tensor::zeros({2, 3}), Tensor::zeros({3, 4}), p), DimensionError);
}

TEST(Ammt, HeadOnVisualBranchGivesZeroAmmtGradient) {
    Rng rng(7);
    const AmmtParams p = random_ammt(3, 4, rng);
    const Tensor h_v = random_tensor({2, 3}, rng, true), h_s = random_tensor({2, 4}, rng, true);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        const auto z = ammt_fuse(h_v, h_s, p);
        loss = add(sum(mul(z.h_v, z.h_v)), sum(slice(z.h_vs, 0, 3)));
    }
    tape.backward(loss);
    for (const Tensor& t : {p.w_c, p.b_c, p.w_v, p.b_v})
        for (double g : t.grad()) EXPECT_EQ(g, 0.0);

    // the sensor tail does reach W_c and b_c
    Tape tape2;
    {
        TapeScope scope(tape2);
        loss = sum(slice(ammt_fuse(h_v, h_s, p).h_vs, 3, 7));
    }
    tape2.backward(loss);
    double norm = 0.0;
    for (double g : p.w_c.grad()) norm += g * g;
    EXPECT_GT(norm, 0.0);
    for (double g : p.b_c.grad()) EXPECT_EQ(g, 2.0);
}
