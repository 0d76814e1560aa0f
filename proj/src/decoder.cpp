#include "egocap/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "egocap/errors.hpp"
#include "egocap/ops.hpp"

namespace egocap {

namespace {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
    const auto n = shape_numel(shape);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v), true);
}

Tensor constant_one_hot(std::size_t rows, std::size_t k) {
    std::vector<double> v(rows * kNumModalities, 0.0);
    for (std::size_t r = 0; r < rows; ++r) v[r * kNumModalities + k] = 1.0;
    return Tensor({rows, kNumModalities}, std::move(v));
}

std::size_t fixed_modality(RepresentationMode m) {
    switch (m) {
        case RepresentationMode::FixedV: return kVisual;
        case RepresentationMode::FixedS: return kSensor;
        case RepresentationMode::FixedVS: return kFused;
        case RepresentationMode::Dynamic: break;
    }
    return kFused;
}

Tensor select_row(const Tensor& t, std::size_t row) {
    if (!t.defined()) return t;
    const std::size_t c = t.cols();
    const auto v = t.values().subspan(row * c, c);
    return Tensor({1, c}, std::vector<double>(v.begin(), v.end()));
}

DecoderContext row_context(const DecoderContext& ctx, std::size_t row) {
    DecoderContext out;
    out.z = EncodedRepresentations{select_row(ctx.z.h_v, row), select_row(ctx.z.h_s, row),
                                   select_row(ctx.z.h_vs, row)};
    for (std::size_t k = 0; k < kNumModalities; ++k) out.projected[k] = select_row(ctx.projected[k], row);
    out.batch = 1;
    return out;
}

TraceStep trace_step(const Tensor& zeta, std::size_t row, std::size_t token) {
    TraceStep s;
    for (std::size_t k = 0; k < kNumModalities; ++k) s.zeta[k] = zeta.at(row, k);
    s.modality = static_cast<std::size_t>(std::max_element(s.zeta.begin(), s.zeta.end()) - s.zeta.begin());
    s.token = token;
    return s;
}

std::vector<double> log_softmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t c = logits.cols();
    const auto v = logits.values().subspan(row * c, c);
    const double m = *std::max_element(v.begin(), v.end());
    double total = 0.0;
    for (double x : v) total += std::exp(x - m);
    const double lse = m + std::log(total);
    std::vector<double> out(c);
    for (std::size_t j = 0; j < c; ++j) out[j] = v[j] - lse;
    return out;
}

Generation beam_search(const DecoderContext& ctx, const DecoderConfig& cfg, const DecoderParams& params,
                       const GenerateOptions& options, Rng& rng) {
    struct Hyp {
        std::vector<std::size_t> tokens;
        AttentionTrace trace;
        double logp = 0.0;
        Tensor hidden;
        bool finished = false;
    };
    std::vector<Hyp> beams(1);
    beams[0].hidden = initial_decoder_state(1, params);
    std::vector<Hyp> finished;

    for (std::size_t step = 0; step < options.max_len && !beams.empty(); ++step) {
        std::vector<Hyp> candidates;
        for (const auto& hyp : beams) {
            const std::size_t prev[1] = {hyp.tokens.empty() ? kBosToken : hyp.tokens.back()};
            const StepOutput out = decode_step(prev, hyp.hidden, ctx, cfg, params, rng, options.sample_noise);
            const auto lp = log_softmax_row(out.logits, 0);
            std::vector<std::size_t> order(lp.size());
            for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
            const std::size_t keep = std::min(options.beam, order.size());
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                              [&](std::size_t a, std::size_t b) { return lp[a] > lp[b] || (lp[a] == lp[b] && a < b); });
            for (std::size_t r = 0; r < keep; ++r) {
                Hyp next = hyp;
                const std::size_t tok = order[r];
                next.logp += lp[tok];
                next.hidden = out.hidden;
                next.trace.steps.push_back(trace_step(out.zeta, 0, tok));
                if (tok == kEosToken) {
                    next.finished = true;
                } else {
                    next.tokens.push_back(tok);
                }
                candidates.push_back(std::move(next));
            }
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Hyp& a, const Hyp& b) { return a.logp > b.logp; });
        beams.clear();
        for (auto& c : candidates) {
            if (beams.size() + finished.size() >= options.beam) break;
            if (c.finished) {
                finished.push_back(std::move(c));
            } else {
                beams.push_back(std::move(c));
            }
        }
        if (finished.size() >= options.beam) break;
    }
    for (auto& b : beams) finished.push_back(std::move(b));
    const auto best = std::max_element(finished.begin(), finished.end(),
                                       [](const Hyp& a, const Hyp& b) { return a.logp < b.logp; });
    return Generation{best->tokens, best->trace};
}

}  // namespace

GruParams init_gru(std::size_t input, std::size_t hidden, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    GruParams p;
    p.w_x = uniform_param({input, 3 * hidden}, bound, rng);
    p.b_x = Tensor::zeros({3 * hidden}, true);
    p.w_h = uniform_param({hidden, 3 * hidden}, bound, rng);
    p.b_h = Tensor::zeros({3 * hidden}, true);
    return p;
}

DecoderParams init_decoder(std::size_t vocab, std::size_t embedding_width, std::size_t decoder_hidden,
                           std::size_t attention_width, std::array<std::size_t, kNumModalities> rep_widths,
                           Rng& rng) {
    DecoderParams p;
    p.embedding = uniform_param({vocab, embedding_width}, 0.1, rng);
    p.gru = init_gru(embedding_width + attention_width, decoder_hidden, rng);
    p.w_out = uniform_param({decoder_hidden, vocab}, 1.0 / std::sqrt(static_cast<double>(decoder_hidden)), rng);
    p.dma = init_dma(rep_widths, decoder_hidden, attention_width, rng);
    return p;
}

const char* representation_mode_name(RepresentationMode m) noexcept {
    switch (m) {
        case RepresentationMode::Dynamic: return "dynamic";
        case RepresentationMode::FixedV: return "fixed-v";
        case RepresentationMode::FixedS: return "fixed-s";
        case RepresentationMode::FixedVS: return "fixed-vs";
    }
    return "?";
}

RepresentationMode parse_representation_mode(const std::string& name) {
    if (name == "dynamic") return RepresentationMode::Dynamic;
    if (name == "fixed-v") return RepresentationMode::FixedV;
    if (name == "fixed-s") return RepresentationMode::FixedS;
    if (name == "fixed-vs") return RepresentationMode::FixedVS;
    throw ConfigError("unknown representation mode '" + name + "' (expected dynamic | fixed-v | fixed-s | fixed-vs)");
}

DecoderContext make_decoder_context(const EncodedRepresentations& z, const DecoderParams& params,
                                    RepresentationMode mode) {
    DecoderContext ctx;
    ctx.z = z;
    if (mode == RepresentationMode::Dynamic) {
        ctx.projected = project_representations(z, params.dma);
    } else {
        const std::size_t k = fixed_modality(mode);
        const Tensor rep = as_array(z)[k];
        if (!rep.defined()) {
            throw DimensionError(std::string("decoder: representation ") + modality_name(k) + " missing");
        }
        ctx.projected[k] = affine(rep, params.dma.proj[k]);
    }
    for (const auto& p : ctx.projected) {
        if (p.defined()) {
            ctx.batch = p.rows();
            break;
        }
    }
    return ctx;
}

Tensor initial_decoder_state(std::size_t batch, const DecoderParams& params) {
    return Tensor::zeros({batch, params.gru.hidden_size()});
}

Tensor gru_step(const Tensor& x, const Tensor& h, const GruParams& params) {
    const std::size_t n = params.hidden_size();
    const Tensor gx = affine(x, params.w_x, params.b_x);
    const Tensor gh = affine(h, params.w_h, params.b_h);
    const Tensor r = sigmoid(add(slice(gx, 0, n), slice(gh, 0, n)));
    const Tensor z = sigmoid(add(slice(gx, n, 2 * n), slice(gh, n, 2 * n)));
    const Tensor cand = tanh(add(slice(gx, 2 * n, 3 * n), mul(r, slice(gh, 2 * n, 3 * n))));
    return add(cand, mul(z, sub(h, cand)));
}

StepOutput decode_step(std::span<const std::size_t> prev_tokens, const Tensor& hidden,
                       const DecoderContext& ctx, const DecoderConfig& cfg, const DecoderParams& params,
                       Rng& rng, bool sample_noise) {
    if (prev_tokens.size() != ctx.batch || hidden.rows() != ctx.batch) {
        throw DimensionError("decode_step: batch of " + std::to_string(ctx.batch) + " but " +
                             std::to_string(prev_tokens.size()) + " tokens / state " + shape_str(hidden.shape()));
    }
    Tensor zeta;
    Tensor mix;
    if (cfg.representation == RepresentationMode::Dynamic) {
        const Tensor eta = dma_relevance(ctx.z, hidden, params.dma);
        Tensor noise;
        if (sample_noise && cfg.dma.variant != DmaVariant::Softmax) noise = sample_gumbel_noise(ctx.batch, rng);
        zeta = dma_weights_from_relevance(eta, cfg.dma, noise);
        mix = dma_mix(ctx.projected, zeta);
    } else {
        const std::size_t k = fixed_modality(cfg.representation);
        zeta = constant_one_hot(ctx.batch, k);
        mix = ctx.projected[k];
    }
    const Tensor emb = embedding_lookup(params.embedding, prev_tokens);
    const Tensor next = gru_step(concat({emb, mix}), hidden, params.gru);
    return StepOutput{affine(next, params.w_out), next, zeta};
}

std::vector<Generation> generate(const DecoderContext& ctx, const DecoderConfig& cfg,
                                 const DecoderParams& params, const GenerateOptions& options) {
    if (options.max_len == 0) throw ConfigError("generate: max_len must be at least 1");
    if (options.beam == 0) throw ConfigError("generate: beam must be at least 1");
    NoGradScope no_grad;
    Rng rng(options.noise_seed);
    std::vector<Generation> out(ctx.batch);

    if (options.beam > 1) {
        for (std::size_t b = 0; b < ctx.batch; ++b) out[b] = beam_search(row_context(ctx, b), cfg, params, options, rng);
        return out;
    }

    std::vector<std::size_t> prev(ctx.batch, kBosToken);
    std::vector<bool> done(ctx.batch, false);
    Tensor hidden = initial_decoder_state(ctx.batch, params);
    for (std::size_t step = 0; step < options.max_len; ++step) {
        const StepOutput s = decode_step(prev, hidden, ctx, cfg, params, rng, options.sample_noise);
        const auto picked = argmax(s.logits);
        bool all_done = true;
        for (std::size_t b = 0; b < ctx.batch; ++b) {
            if (done[b]) continue;
            out[b].trace.steps.push_back(trace_step(s.zeta, b, picked[b]));
            if (picked[b] == kEosToken) {
                done[b] = true;
            } else {
                out[b].tokens.push_back(picked[b]);
                all_done = false;
            }
        }
        if (all_done) break;
        prev = picked;
        hidden = s.hidden;
    }
    return out;
}

}  // namespace egocap
