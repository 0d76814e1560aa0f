#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "egocap/errors.hpp"
#include "egocap/ops.hpp"
#include "egocap/rng.hpp"
#include "egocap/tensor.hpp"

using namespace egocap;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool grad = false) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    return Tensor(std::move(shape), std::move(v), grad);
}

void expect_values(const Tensor& t, std::vector<double> expected, double tol = 0.0) {
    ASSERT_EQ(t.numel(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.values()[i], expected[i], tol) << "index " << i;
}

}  // namespace

TEST(Tensor, ShapeInvariant) {
    EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
    Tensor t = Tensor::zeros({2, 3});
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_EQ(t.cols(), 3u);
    EXPECT_FALSE(t.has_grad());
}

TEST(Tensor, CopiesShareStorageCloneDoesNot) {
    Tensor a = Tensor::vector({1, 2, 3}, true);
    Tensor b = a;
    Tensor c = a.clone();
    EXPECT_TRUE(a.same_storage(b));
    EXPECT_FALSE(a.same_storage(c));
    c.mutable_values()[0] = 9;
    EXPECT_EQ(a.at(0), 1.0);
}

TEST(Matmul, IdentityCase) {
    const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
    const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
    expect_values(matmul(eye, m), {1, 2, 3, 4});
}

TEST(Matmul, Projector) {
    const Tensor p = Tensor::matrix(2, 2, {1, 0, 0, 0});
    const Tensor v = Tensor::matrix(2, 1, {5, 7});
    expect_values(matmul(p, v), {5, 0});
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    try {
        matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3] and [2x3]"), std::string::npos) << msg;
    }
}

TEST(Matmul, GradientOfSumMatchesHandDerivation) {
    // d sum(A B) / dA[i][k] = sum_j B[k][j]
    Rng rng(3);
    Tensor a = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({4, 2}, rng);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum(matmul(a, b));
    }
    tape.backward(loss);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 4; ++k)
            EXPECT_NEAR(a.grad()[i * 4 + k], b.at(k, 0) + b.at(k, 1), 1e-12);
}

TEST(Softmax, Symmetry) {
    expect_values(softmax(Tensor::vector({0, 0, 0})), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-15);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
    const Tensor y = softmax(Tensor::vector({1000, 0}));
    EXPECT_NEAR(y.at(0), 1.0, 1e-15);
    EXPECT_NEAR(y.at(1), 0.0, 1e-15);
    EXPECT_TRUE(std::isfinite(y.at(1)));
}

TEST(Softmax, HighPrecisionOracleAtHalfTemperature) {
    // exp(x / 0.5) / sum for x = (1, 2, 3), evaluated with 40-digit arithmetic.
    const Tensor y = softmax(Tensor::vector({1, 2, 3}), 0.5);
    expect_values(y, {0.01587623997646676632272159, 0.1173104278261983625329106, 0.8668133321973348711443678},
                  1e-15);
}

TEST(Softmax, RowsLieOnSimplex) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor x = random_tensor({4, 7}, rng);
        for (auto& v : x.mutable_values()) v *= 50.0;
        const Tensor y = softmax(x, rng.uniform(0.01, 3.0));
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < 7; ++c) {
                EXPECT_GE(y.at(r, c), 0.0);
                EXPECT_LE(y.at(r, c), 1.0);
                s += y.at(r, c);
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Softmax, Errors) {
    EXPECT_THROW(softmax(Tensor::vector({1.0, std::numeric_limits<double>::quiet_NaN()})), NumericError);
    EXPECT_THROW(softmax(Tensor::vector({1.0, std::numeric_limits<double>::infinity()})), NumericError);
    EXPECT_THROW(softmax(Tensor::vector({1.0, 2.0}), 0.0), ConfigError);
}

TEST(CrossEntropy, DominantTargetGivesNearZeroLoss) {
    EXPECT_NEAR(cross_entropy(Tensor::vector({0, 50, 0, 0}), 1).item(), 0.0, 1e-20);
}

TEST(CrossEntropy, UniformLogitsGiveLogVocab) {
    EXPECT_NEAR(cross_entropy(Tensor::vector({0.3, 0.3, 0.3, 0.3}), 2).item(), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
    Tensor logits = Tensor::vector({0.5, -1.0, 2.0}, true);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = cross_entropy(logits, 0);
    }
    tape.backward(loss);
    const Tensor p = softmax(Tensor::vector({0.5, -1.0, 2.0}));
    EXPECT_NEAR(logits.grad()[0], p.at(0) - 1.0, 1e-15);
    EXPECT_NEAR(logits.grad()[1], p.at(1), 1e-15);
    EXPECT_NEAR(logits.grad()[2], p.at(2), 1e-15);
}

TEST(CrossEntropy, TargetOutOfRange) {
    EXPECT_THROW(cross_entropy(Tensor::vector({1, 2, 3}), 3), IndexError);
}

TEST(CrossEntropy, ZeroWeightRowGetsExactlyZeroGradient) {
    Tensor logits = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}, true);
    const std::size_t targets[] = {1, 2};
    const double weights[] = {1.0, 0.0};
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = cross_entropy(logits, targets, weights);
    }
    tape.backward(loss);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(logits.grad()[3 + c], 0.0);
    EXPECT_NE(logits.grad()[0], 0.0);
}

TEST(ConcatSlice, RoundTripIsBitExact) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = 1 + rng.index(4), wa = 1 + rng.index(5), wb = 1 + rng.index(5);
        const Tensor a = random_tensor({rows, wa}, rng);
        const Tensor b = random_tensor({rows, wb}, rng);
        const Tensor c = concat({a, b});
        const Tensor a2 = slice(c, 0, wa);
        const Tensor b2 = slice(c, wa, wa + wb);
        ASSERT_EQ(a2.shape(), a.shape());
        ASSERT_EQ(b2.shape(), b.shape());
        for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a2.values()[i], a.values()[i]);
        for (std::size_t i = 0; i < b.numel(); ++i) EXPECT_EQ(b2.values()[i], b.values()[i]);
    }
}

TEST(ConcatSlice, Errors) {
    EXPECT_THROW(concat({Tensor::zeros({2, 3}), Tensor::zeros({3, 3})}), DimensionError);
    EXPECT_THROW(slice(Tensor::zeros({2, 3}), 2, 4), IndexError);
}

TEST(Broadcast, OnlyScalarOperandsBroadcast) {
    expect_values(mul(Tensor::vector({1, 2, 3}), Tensor::scalar(2.0)), {2, 4, 6});
    expect_values(add(Tensor::scalar(1.0), Tensor::vector({1, 2})), {2, 3});
    EXPECT_THROW(add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), DimensionError);
    EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3})), DimensionError);
}

TEST(Elementwise, KnownValues) {
    expect_values(sigmoid(Tensor::vector({0.0, -800.0, 800.0})), {0.5, 0.0, 1.0}, 1e-300);
    expect_values(tanh(Tensor::vector({0.0})), {0.0});
    expect_values(exp(Tensor::vector({0.0, 1.0})), {1.0, std::exp(1.0)}, 1e-15);
    expect_values(log(Tensor::vector({1.0, std::exp(2.0)})), {0.0, 2.0}, 1e-15);
    EXPECT_THROW(log(Tensor::vector({1.0, 0.0})), NumericError);
    EXPECT_DOUBLE_EQ(sum(Tensor::vector({1, 2, 3})).item(), 6.0);
    EXPECT_DOUBLE_EQ(mean(Tensor::vector({1, 2, 3})).item(), 2.0);
}

TEST(EmbeddingLookup, PicksRowsAndChecksRange) {
    const Tensor table = Tensor::matrix(3, 2, {0, 1, 10, 11, 20, 21});
    const std::size_t ids[] = {2, 0, 2};
    expect_values(embedding_lookup(table, ids), {20, 21, 0, 1, 20, 21});
    const std::size_t bad[] = {3};
    EXPECT_THROW(embedding_lookup(table, bad), IndexError);
}

TEST(EmbeddingLookup, RepeatedIdsAccumulateGradient) {
    Tensor table = Tensor::matrix(3, 2, {0, 1, 10, 11, 20, 21}, true);
    const std::size_t ids[] = {2, 0, 2};
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum(embedding_lookup(table, ids));
    }
    tape.backward(loss);
    expect_values(Tensor({3, 2}, std::vector<double>(table.grad().begin(), table.grad().end())), {1, 1, 0, 0, 2, 2});
}

TEST(ArgmaxOneHot, Basics) {
    const auto idx = argmax(Tensor::matrix(2, 3, {1, 5, 5, -1, -2, -0.5}));
    EXPECT_EQ(idx, (std::vector<std::size_t>{1, 2}));  // first index wins ties
    const std::size_t ids[] = {2, 0};
    expect_values(one_hot(ids, 3), {0, 0, 1, 1, 0, 0});
    const std::size_t bad[] = {3};
    EXPECT_THROW(one_hot(bad, 3), IndexError);
}

TEST(StraightThrough, ForwardHardBackwardIdentity) {
    Tensor soft = Tensor::matrix(1, 3, {0.2, 0.5, 0.3}, true);
    Tape tape;
    Tensor y, loss;
    {
        TapeScope scope(tape);
        y = straight_through_one_hot(soft);
        loss = sum(mul(y, Tensor::matrix(1, 3, {1, 2, 3})));
    }
    expect_values(y, {0, 1, 0});
    tape.backward(loss);
    expect_values(Tensor({3}, std::vector<double>(soft.grad().begin(), soft.grad().end())), {1, 2, 3});

    expect_values(straight_through_threshold(Tensor::vector({0.49, 0.5, 0.51}), 0.5), {0, 0, 1});
}

TEST(Tape, VisitsEachOpOnceInReverse) {
    // y = x * x + x reused through a shared intermediate; dy/dx = 2x + 1.
    Tensor x = Tensor::scalar(3.0, true);
    Tape tape;
    Tensor y;
    {
        TapeScope scope(tape);
        const Tensor sq = mul(x, x);
        y = add(sq, x);
    }
    EXPECT_EQ(tape.size(), 2u);
    tape.backward(y);
    EXPECT_EQ(tape.size(), 0u);
    EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Tape, NothingRecordedWithoutScopeOrGradInputs) {
    Tape tape;
    {
        TapeScope scope(tape);
        add(Tensor::scalar(1.0), Tensor::scalar(2.0));
        EXPECT_EQ(tape.size(), 0u);
        {
            NoGradScope off;
            add(Tensor::scalar(1.0, true), Tensor::scalar(2.0));
        }
        EXPECT_EQ(tape.size(), 0u);
        add(Tensor::scalar(1.0, true), Tensor::scalar(2.0));
        EXPECT_EQ(tape.size(), 1u);
    }
}

TEST(Determinism, ForwardIsRepeatable) {
    Rng r1(42), r2(42);
    const Tensor a = random_tensor({4, 4}, r1), b = random_tensor({4, 4}, r2);
    const Tensor y1 = softmax(matmul(a, a), 0.3), y2 = softmax(matmul(b, b), 0.3);
    for (std::size_t i = 0; i < y1.numel(); ++i) EXPECT_EQ(y1.values()[i], y2.values()[i]);
}

TEST(Rng, SplitAndRestore) {
    Rng a(9);
    Rng child = a.split();
    const std::string saved = a.state();
    const double u1 = a.uniform();
    Rng b(0);
    b.restore(saved);
    EXPECT_EQ(b.uniform(), u1);
    EXPECT_NE(child.next_u64(), Rng(9).next_u64());
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform_open();
        EXPECT_GT(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}
