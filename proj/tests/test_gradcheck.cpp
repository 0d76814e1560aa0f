#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "egocap/errors.hpp"
#include "egocap/gradcheck.hpp"
#include "egocap/gradcheck_suite.hpp"
#include "egocap/model.hpp"
#include "egocap/ops.hpp"
#include "egocap/synth.hpp"

using namespace egocap;

TEST(GradCheck, SumOfSquaresHasGradientTwoX) {
    Tensor x = Tensor::vector({1, 2, 3}, true);
    const ScalarFn f = [](std::span<const Tensor> in) { return sum(mul(in[0], in[0])); };
    const Tensor inputs[] = {x};
    const auto report = grad_check(f, inputs);
    EXPECT_TRUE(report.passed) << report.summary();
    EXPECT_EQ(report.coords_checked, 3u);

    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = f(inputs);
    }
    tape.backward(loss);
    EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
    EXPECT_DOUBLE_EQ(x.grad()[2], 6.0);
}

TEST(GradCheck, DetectsAWrongAdjoint) {
    // Forward x^2 with a backward that claims 3x.
    const ScalarFn f = [](std::span<const Tensor> in) {
        const Tensor& x = in[0];
        std::vector<double> v(x.numel());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.at(i) * x.at(i);
        const Tensor y = make_op_result(x.shape(), std::move(v), {&x}, [x](std::span<const double> g) {
            auto acc = x.grad_accumulator();
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i] * 3.0 * x.at(i);
        });
        return sum(y);
    };
    const Tensor inputs[] = {Tensor::vector({0.5, -1.0, 2.0}, true)};
    const auto report = grad_check(f, inputs);
    EXPECT_FALSE(report.passed);
    EXPECT_GT(report.max_rel_error, 0.1);
}

TEST(GradCheck, NondeterministicFunctionIsAContractViolation) {
    int calls = 0;
    const ScalarFn f = [&calls](std::span<const Tensor> in) {
        ++calls;
        return add(sum(in[0]), Tensor::scalar(static_cast<double>(calls)));
    };
    const Tensor inputs[] = {Tensor::vector({1.0}, true)};
    EXPECT_THROW(grad_check(f, inputs), ContractError);
}

TEST(GradCheck, InputsRestoredAfterCheck) {
    Tensor x = Tensor::vector({0.3, -0.7}, true);
    const Tensor inputs[] = {x};
    grad_check([](std::span<const Tensor> in) { return sum(tanh(in[0])); }, inputs);
    EXPECT_EQ(x.at(0), 0.3);
    EXPECT_EQ(x.at(1), -0.7);
}

TEST(GradCheck, EveryPrimitivePassesAtOneEMinusFour) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (const auto& c : primitive_grad_checks(seed, 1e-4)) {
            EXPECT_TRUE(c.report.passed) << "seed " << seed << " " << c.name << ": " << c.report.summary();
            EXPECT_GT(c.report.coords_checked, 0u);
        }
    }
}

TEST(GradCheck, EndToEndLossPassesAtOneEMinusThree) {
    const auto start = std::chrono::steady_clock::now();
    const auto c = end_to_end_grad_check(5, 1e-3);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_TRUE(c.report.passed) << c.report.summary();
    EXPECT_GT(c.report.coords_checked, 500u);
    EXPECT_LT(secs, 60.0);
}

TEST(GradCheck, LearnedBoundaryGateReceivesFiniteNonzeroGradient) {
    SynthSpec spec;
    spec.n_segments = 4;
    spec.feature_dim = 6;
    spec.sensor_channels = 9;
    spec.channel_group = 3;
    const auto segments = generate_synthetic(spec);

    ModelConfig cfg;
    cfg.feature_dim = 6;
    cfg.sensor_channels = 9;
    cfg.visual_hidden = 5;
    cfg.sensor_hidden = 4;
    cfg.decoder_hidden = 6;
    cfg.attention_width = 6;
    cfg.embedding_width = 4;
    cfg.k_frames = 8;
    cfg.t_sensor = 10;
    cfg.boundary = BoundaryMode::Learned;
    std::vector<std::string> corpus;
    for (const auto& s : segments) corpus.push_back(s.caption);
    const Vocabulary vocab = Vocabulary::build(corpus);
    const auto prepared = prepare_segments(segments, cfg, vocab);

    Rng init(3);
    ModelParams params = init_model(cfg, vocab.size(), init);
    Batch batch;
    for (const auto& p : prepared) batch.push_back(&p);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        Rng rng(1);
        LossOptions lo;
        lo.sample_noise = false;
        loss = caption_loss(batch, params, cfg, lo, rng).loss;
    }
    tape.backward(loss);
    double norm = 0.0;
    for (double g : params.visual.boundary.weight.grad()) {
        ASSERT_TRUE(std::isfinite(g));
        norm += g * g;
    }
    ASSERT_TRUE(params.visual.boundary.bias.has_grad());
    EXPECT_TRUE(std::isfinite(params.visual.boundary.bias.grad()[0]));
    EXPECT_GT(norm, 0.0);
}
