#include "egocap/gradcheck_suite.hpp"

#include "egocap/decoder.hpp"
#include "egocap/dma.hpp"
#include "egocap/encoders.hpp"
#include "egocap/fusion.hpp"
#include "egocap/model.hpp"
#include "egocap/ops.hpp"
#include "egocap/rng.hpp"
#include "egocap/synth.hpp"

namespace egocap {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0, bool grad = true) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v), grad);
}

// sum(y * w) for a fixed random w of y's shape.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
    Rng rng(seed);
    return sum(mul(y, random_tensor(y.shape(), rng, -1.0, 1.0, false)));
}

}  // namespace

std::vector<NamedGradCheck> primitive_grad_checks(std::uint64_t seed, double tolerance) {
    Rng rng(seed);
    GradCheckOptions opts;
    opts.tolerance = tolerance;
    std::vector<NamedGradCheck> out;
    std::uint64_t w_seed = seed * 7919 + 1;

    auto check = [&](std::string name, std::vector<Tensor> inputs, auto&& op) {
        const std::uint64_t ws = ++w_seed;
        const ScalarFn f = [&op, ws](std::span<const Tensor> in) {
            const Tensor y = op(in);
            return y.numel() == 1 ? y : weighted_sum(y, ws);
        };
        out.push_back({std::move(name), grad_check(f, inputs, opts)});
    };

    check("matmul", {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)},
          [](auto in) { return matmul(in[0], in[1]); });
    check("affine", {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)},
          [](auto in) { return affine(in[0], in[1], in[2]); });
    check("add", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, [](auto in) { return add(in[0], in[1]); });
    check("sub", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, [](auto in) { return sub(in[0], in[1]); });
    check("mul", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, [](auto in) { return mul(in[0], in[1]); });
    check("mul_scalar_broadcast", {random_tensor({2, 3}, rng), random_tensor({1}, rng)},
          [](auto in) { return mul(in[0], in[1]); });
    check("scale_shift", {random_tensor({2, 3}, rng)}, [](auto in) { return scale_shift(in[0], -1.5, 0.25); });
    check("scale_rows", {random_tensor({3, 4}, rng), random_tensor({3, 1}, rng)},
          [](auto in) { return scale_rows(in[0], in[1]); });
    check("normalize_rows", {random_tensor({3, 4}, rng, 0.2, 2.0)}, [](auto in) { return normalize_rows(in[0]); });
    check("concat", {random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)},
          [](auto in) { return concat({in[0], in[1]}); });
    check("slice", {random_tensor({2, 5}, rng)}, [](auto in) { return slice(in[0], 1, 4); });
    check("reshape", {random_tensor({2, 6}, rng)}, [](auto in) { return reshape(in[0], {3, 4}); });
    check("sigmoid", {random_tensor({2, 4}, rng)}, [](auto in) { return sigmoid(in[0]); });
    check("tanh", {random_tensor({2, 4}, rng)}, [](auto in) { return tanh(in[0]); });
    check("exp", {random_tensor({2, 4}, rng)}, [](auto in) { return exp(in[0]); });
    check("log", {random_tensor({2, 4}, rng, 0.2, 2.0)}, [](auto in) { return log(in[0]); });
    check("sum", {random_tensor({2, 4}, rng)}, [](auto in) { return sum(in[0]); });
    check("mean", {random_tensor({2, 4}, rng)}, [](auto in) { return mean(in[0]); });
    check("softmax", {random_tensor({3, 4}, rng)}, [](auto in) { return softmax(in[0], 1.0); });
    check("softmax_temperature", {random_tensor({3, 4}, rng)}, [](auto in) { return softmax(in[0], 0.5); });
    check("cross_entropy", {random_tensor({1, 6}, rng)}, [](auto in) { return cross_entropy(in[0], 4); });
    check("cross_entropy_weighted", {random_tensor({3, 5}, rng)}, [](auto in) {
        const std::size_t targets[] = {0, 3, 2};
        const double weights[] = {1.0, 0.0, 0.5};
        return cross_entropy(in[0], targets, weights);
    });
    check("embedding_lookup", {random_tensor({5, 3}, rng)}, [](auto in) {
        const std::size_t ids[] = {4, 0, 4, 2};
        return embedding_lookup(in[0], ids);
    });

    {
        Rng init(seed + 11);
        const LstmParams lstm = init_lstm(3, 4, init);
        check("lstm_step",
              {random_tensor({2, 3}, rng), random_tensor({2, 4}, rng), random_tensor({2, 4}, rng), lstm.weight,
               lstm.bias},
              [](auto in) {
                  const LstmState s = lstm_step(in[0], {in[1], in[2]}, LstmParams{in[3], in[4]});
                  return concat({s.hidden, s.cell});
              });
        const GruParams gru = init_gru(3, 4, init);
        check("gru_step",
              {random_tensor({2, 3}, rng), random_tensor({2, 4}, rng), gru.w_x, gru.b_x, gru.w_h, gru.b_h},
              [](auto in) { return gru_step(in[0], in[1], GruParams{in[2], in[3], in[4], in[5]}); });
    }
    {
        const AmmtParams a{random_tensor({3, 3}, rng), random_tensor({3}, rng), random_tensor({4, 4}, rng),
                           random_tensor({4}, rng)};
        for (FusionMode mode : {FusionMode::Concat, FusionMode::Symmetric, FusionMode::LinearOnV, FusionMode::LinearOnS}) {
            check(std::string("fusion_") + fusion_mode_name(mode),
                  {random_tensor({2, 4}, rng), random_tensor({2, 3}, rng), a.w_c, a.b_c, a.w_v, a.b_v},
                  [mode](auto in) {
                      return fuse_variant(in[0], in[1], mode, AmmtParams{in[2], in[3], in[4], in[5]}).h_vs;
                  });
        }
    }
    {
        const Tensor noise = random_tensor({3, kNumModalities}, rng, -1.0, 1.0, false);
        for (DmaVariant v : {DmaVariant::Softmax, DmaVariant::Gumbel}) {
            DmaConfig cfg;
            cfg.variant = v;
            cfg.tau = 0.5;
            check(std::string("dma_weights_") + dma_variant_name(v), {random_tensor({3, kNumModalities}, rng, 0.1, 0.95)},
                  [cfg, noise](auto in) { return dma_weights_from_relevance(in[0], cfg, noise); });
        }
    }
    return out;
}

NamedGradCheck end_to_end_grad_check(std::uint64_t seed, double tolerance) {
    SynthSpec spec;
    spec.n_segments = 2;
    spec.seed = seed;
    spec.feature_dim = 5;
    spec.sensor_channels = 6;
    spec.channel_group = 3;
    spec.min_duration_s = 1.0;
    spec.max_duration_s = 1.2;
    spec.second_object_rate = 1.0;
    const auto segments = generate_synthetic(spec);

    ModelConfig cfg;
    cfg.feature_dim = 5;
    cfg.sensor_channels = 6;
    cfg.visual_hidden = 4;
    cfg.sensor_hidden = 3;
    cfg.decoder_hidden = 4;
    cfg.attention_width = 4;
    cfg.embedding_width = 3;
    cfg.k_frames = 4;
    cfg.t_sensor = 5;
    cfg.boundary = BoundaryMode::Off;
    cfg.decoder.dma.variant = DmaVariant::Softmax;
    cfg.decoder.dma.tau = 0.5;

    std::vector<std::string> corpus;
    for (const auto& s : segments) corpus.push_back(s.caption);
    const Vocabulary vocab = Vocabulary::build(corpus);
    const auto prepared = prepare_segments(segments, cfg, vocab);

    Rng init(seed);
    const ModelParams params = init_model(cfg, vocab.size(), init);
    std::vector<Tensor> inputs;
    for (const auto& [name, t] : params.named())
        if (name.rfind("visual.boundary", 0) != 0) inputs.push_back(t);

    const ScalarFn f = [&](std::span<const Tensor>) {
        const Batch batch{&prepared[0], &prepared[1]};
        Rng unused(0);
        LossOptions lo;
        lo.sample_noise = false;
        return caption_loss(batch, params, cfg, lo, unused).loss;
    };
    GradCheckOptions opts;
    opts.tolerance = tolerance;
    return {"end_to_end_caption_loss", grad_check(f, inputs, opts)};
}

}  // namespace egocap
