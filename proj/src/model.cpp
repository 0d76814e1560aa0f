#include "egocap/model.hpp"

#include "egocap/errors.hpp"
#include "egocap/ops.hpp"

namespace egocap {

using nlohmann::json;

namespace {

const char* boundary_mode_name(BoundaryMode m) {
    switch (m) {
        case BoundaryMode::Learned: return "learned";
        case BoundaryMode::AlwaysOn: return "always-on";
        case BoundaryMode::Off: return "off";
    }
    return "?";
}

BoundaryMode parse_boundary_mode(const std::string& s) {
    if (s == "learned") return BoundaryMode::Learned;
    if (s == "always-on") return BoundaryMode::AlwaysOn;
    if (s == "off") return BoundaryMode::Off;
    throw ConfigError("unknown boundary mode '" + s + "' (expected learned | always-on | off)");
}

const char* summary_name(VisualSummary s) {
    return s == VisualSummary::FinalState ? "final-state" : "boundary-mean";
}

VisualSummary parse_summary(const std::string& s) {
    if (s == "final-state") return VisualSummary::FinalState;
    if (s == "boundary-mean") return VisualSummary::BoundaryMean;
    throw ConfigError("unknown visual summary '" + s + "' (expected final-state | boundary-mean)");
}

const char* const kModalityKeys[kNumModalities] = {"v", "s", "vs"};

bool needs_visual(RepresentationMode m) { return m != RepresentationMode::FixedS; }
bool needs_sensor(RepresentationMode m) { return m != RepresentationMode::FixedV; }

}  // namespace

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
    };
    positive(feature_dim, "feature_dim");
    positive(sensor_channels, "sensor_channels");
    positive(visual_hidden, "visual_hidden");
    positive(sensor_hidden, "sensor_hidden");
    positive(decoder_hidden, "decoder_hidden");
    positive(attention_width, "attention_width");
    positive(embedding_width, "embedding_width");
    positive(k_frames, "k_frames");
    positive(t_sensor, "t_sensor");
    positive(max_words, "max_words");
    if (!(sensor_hz > 0.0)) throw ConfigError("model config: sensor_hz must be positive");
    decoder.dma.validate();
}

ModelConfig model_preset(const std::string& name) {
    ModelConfig c;
    if (name == "desk") return c;
    if (name == "paper") {
        c.preset = "paper";
        c.visual_hidden = 500;
        c.sensor_hidden = 120;
        c.decoder_hidden = 512;
        c.attention_width = 512;
        c.embedding_width = 256;
        c.k_frames = 80;
        c.t_sensor = 240;
        return c;
    }
    throw ConfigError("unknown preset '" + name + "' (expected desk | paper)");
}

json model_config_to_json(const ModelConfig& c) {
    const auto& p = c.decoder.dma.preference;
    return json{{"preset", c.preset},
                {"feature_dim", c.feature_dim},
                {"sensor_channels", c.sensor_channels},
                {"visual_hidden", c.visual_hidden},
                {"sensor_hidden", c.sensor_hidden},
                {"decoder_hidden", c.decoder_hidden},
                {"attention_width", c.attention_width},
                {"embedding_width", c.embedding_width},
                {"k_frames", c.k_frames},
                {"t_sensor", c.t_sensor},
                {"sensor_hz", c.sensor_hz},
                {"max_words", c.max_words},
                {"fusion", fusion_mode_name(c.fusion)},
                {"boundary", boundary_mode_name(c.boundary)},
                {"summary", summary_name(c.summary)},
                {"representation", representation_mode_name(c.decoder.representation)},
                {"dma_variant", dma_variant_name(c.decoder.dma.variant)},
                {"tau", c.decoder.dma.tau},
                {"preference", {p[0], p[1], p[2]}}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    try {
        c.preset = j.at("preset").get<std::string>();
        c.feature_dim = j.at("feature_dim").get<std::size_t>();
        c.sensor_channels = j.at("sensor_channels").get<std::size_t>();
        c.visual_hidden = j.at("visual_hidden").get<std::size_t>();
        c.sensor_hidden = j.at("sensor_hidden").get<std::size_t>();
        c.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
        c.attention_width = j.at("attention_width").get<std::size_t>();
        c.embedding_width = j.at("embedding_width").get<std::size_t>();
        c.k_frames = j.at("k_frames").get<std::size_t>();
        c.t_sensor = j.at("t_sensor").get<std::size_t>();
        c.sensor_hz = j.at("sensor_hz").get<double>();
        c.max_words = j.at("max_words").get<std::size_t>();
        c.fusion = parse_fusion_mode(j.at("fusion").get<std::string>());
        c.boundary = parse_boundary_mode(j.at("boundary").get<std::string>());
        c.summary = parse_summary(j.at("summary").get<std::string>());
        c.decoder.representation = parse_representation_mode(j.at("representation").get<std::string>());
        c.decoder.dma.variant = parse_dma_variant(j.at("dma_variant").get<std::string>());
        c.decoder.dma.tau = j.at("tau").get<double>();
        const auto pref = j.at("preference").get<std::vector<double>>();
        if (pref.size() != kNumModalities) throw ConfigError("model config: preference needs 3 entries");
        for (std::size_t k = 0; k < kNumModalities; ++k) c.decoder.dma.preference[k] = pref[k];
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out{
        {"visual.lstm.weight", visual.lstm.weight},
        {"visual.lstm.bias", visual.lstm.bias},
        {"visual.boundary.weight", visual.boundary.weight},
        {"visual.boundary.bias", visual.boundary.bias},
        {"sensor.lstm.weight", sensor.lstm.weight},
        {"sensor.lstm.bias", sensor.lstm.bias},
        {"ammt.w_c", ammt.w_c},
        {"ammt.b_c", ammt.b_c},
        {"ammt.w_v", ammt.w_v},
        {"ammt.b_v", ammt.b_v},
        {"decoder.embedding", decoder.embedding},
        {"decoder.gru.w_x", decoder.gru.w_x},
        {"decoder.gru.b_x", decoder.gru.b_x},
        {"decoder.gru.w_h", decoder.gru.w_h},
        {"decoder.gru.b_h", decoder.gru.b_h},
        {"decoder.w_out", decoder.w_out},
    };
    for (std::size_t k = 0; k < kNumModalities; ++k) {
        out.emplace_back(std::string("decoder.dma.proj.") + kModalityKeys[k], decoder.dma.proj[k]);
        out.emplace_back(std::string("decoder.dma.rel_w.") + kModalityKeys[k], decoder.dma.rel_w[k]);
        out.emplace_back(std::string("decoder.dma.rel_b.") + kModalityKeys[k], decoder.dma.rel_b[k]);
    }
    return out;
}

std::vector<Tensor> ModelParams::tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
}

ModelParams ModelParams::clone() const {
    ModelParams p = *this;
    auto c = [](Tensor& t) { t = t.clone(); };
    c(p.visual.lstm.weight);
    c(p.visual.lstm.bias);
    c(p.visual.boundary.weight);
    c(p.visual.boundary.bias);
    c(p.sensor.lstm.weight);
    c(p.sensor.lstm.bias);
    c(p.ammt.w_c);
    c(p.ammt.b_c);
    c(p.ammt.w_v);
    c(p.ammt.b_v);
    c(p.decoder.embedding);
    c(p.decoder.gru.w_x);
    c(p.decoder.gru.b_x);
    c(p.decoder.gru.w_h);
    c(p.decoder.gru.b_h);
    c(p.decoder.w_out);
    for (std::size_t k = 0; k < kNumModalities; ++k) {
        c(p.decoder.dma.proj[k]);
        c(p.decoder.dma.rel_w[k]);
        c(p.decoder.dma.rel_b[k]);
    }
    return p;
}

void copy_params(const ModelParams& src, ModelParams& dst) {
    const auto s = src.named();
    const auto d = dst.named();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i].second.shape() != d[i].second.shape()) {
            throw DimensionError("copy_params: " + s[i].first + " shape " + shape_str(s[i].second.shape()) +
                                 " vs " + shape_str(d[i].second.shape()));
        }
        Tensor target = d[i].second;
        const auto from = s[i].second.values();
        std::copy(from.begin(), from.end(), target.mutable_values().begin());
    }
}

ModelParams init_model(const ModelConfig& cfg, std::size_t vocab_size, Rng& rng) {
    cfg.validate();
    Rng visual_rng = rng.split();
    Rng sensor_rng = rng.split();
    Rng decoder_rng = rng.split();
    ModelParams p;
    p.visual = init_visual_encoder(cfg.feature_dim, cfg.visual_hidden, visual_rng);
    p.sensor = init_sensor_encoder(cfg.sensor_channels, cfg.sensor_hidden, sensor_rng);
    p.ammt = init_ammt(cfg.visual_hidden, cfg.sensor_hidden);
    p.decoder = init_decoder(vocab_size, cfg.embedding_width, cfg.decoder_hidden, cfg.attention_width,
                             {cfg.visual_hidden, cfg.sensor_hidden, cfg.visual_hidden + cfg.sensor_hidden},
                             decoder_rng);
    return p;
}

PreparedSegment prepare_segment(const Segment& segment, const ModelConfig& cfg, const Vocabulary& vocab) {
    PreparedSegment p;
    p.id = segment.id;
    p.caption = segment.caption;
    try {
        p.frames = sample_frames(segment.frames, cfg.k_frames);
        p.sensors = resample_sensor(segment.sensors, cfg.sensor_hz, cfg.t_sensor);
    } catch (const Error& e) {
        throw DataError("segment '" + segment.id + "': " + e.what());
    }
    if (p.frames.cols() != cfg.feature_dim) {
        throw DimensionError("segment '" + segment.id + "': frame features have width " +
                             std::to_string(p.frames.cols()) + ", model expects " + std::to_string(cfg.feature_dim));
    }
    if (p.sensors.cols() != cfg.sensor_channels) {
        throw DimensionError("segment '" + segment.id + "': sensors have " + std::to_string(p.sensors.cols()) +
                             " channels, model expects " + std::to_string(cfg.sensor_channels));
    }
    p.tokens = vocab.encode(segment.caption);
    return p;
}

std::vector<PreparedSegment> prepare_segments(std::span<const Segment> segments, const ModelConfig& cfg,
                                              const Vocabulary& vocab) {
    std::vector<PreparedSegment> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(prepare_segment(s, cfg, vocab));
    return out;
}

EncodedRepresentations encode_batch(const Batch& batch, const ModelParams& params, const ModelConfig& cfg) {
    if (batch.empty()) throw DataError("encode_batch: empty batch");
    const auto mode = cfg.decoder.representation;
    EncodedRepresentations z;
    if (needs_visual(mode)) {
        std::vector<Tensor> seqs;
        for (const auto* s : batch) seqs.push_back(s->frames);
        const auto steps = time_major(seqs);
        VisualEncoderOptions opts;
        opts.boundary = cfg.boundary;
        opts.summary = cfg.summary;
        z.h_v = encode_visual(steps, params.visual, opts);
    }
    if (needs_sensor(mode)) {
        std::vector<Tensor> seqs;
        for (const auto* s : batch) seqs.push_back(s->sensors);
        const auto steps = time_major(seqs);
        z.h_s = encode_sensor(steps, params.sensor);
    }
    if (z.h_v.defined() && z.h_s.defined()) z = fuse_variant(z.h_v, z.h_s, cfg.fusion, params.ammt);
    return z;
}

LossResult caption_loss(const Batch& batch, const ModelParams& params, const ModelConfig& cfg,
                        const LossOptions& options, Rng& rng) {
    if (!(options.teacher_forcing >= 0.0 && options.teacher_forcing <= 1.0)) {
        throw ConfigError("caption_loss: teacher forcing probability outside [0, 1]");
    }
    const std::size_t n = batch.size();
    std::size_t steps = 0;
    for (const auto* s : batch) steps = std::max(steps, s->tokens.size() + 1);

    const DecoderContext ctx =
        make_decoder_context(encode_batch(batch, params, cfg), params.decoder, cfg.decoder.representation);
    Tensor hidden = initial_decoder_state(n, params.decoder);
    std::vector<std::size_t> prev(n, kBosToken);
    std::vector<std::size_t> targets(n);
    std::vector<double> weights(n);

    LossResult result;
    Tensor total;
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t b = 0; b < n; ++b) {
            const auto& tok = batch[b]->tokens;
            targets[b] = t < tok.size() ? tok[t] : t == tok.size() ? kEosToken : Vocabulary::kPad;
            weights[b] = t <= tok.size() ? 1.0 : 0.0;
        }
        const StepOutput out = decode_step(prev, hidden, ctx, cfg.decoder, params.decoder, rng, options.sample_noise);
        const Tensor ce = cross_entropy(out.logits, targets, weights);
        total = total.defined() ? add(total, ce) : ce;

        const auto predicted = argmax(out.logits);
        for (std::size_t b = 0; b < n; ++b) {
            if (weights[b] == 0.0) continue;
            ++result.tokens;
            if (predicted[b] == targets[b]) ++result.correct;
        }
        for (std::size_t b = 0; b < n; ++b) {
            prev[b] = targets[b];
            if (options.teacher_forcing < 1.0 && weights[b] != 0.0 && !rng.bernoulli(options.teacher_forcing)) {
                prev[b] = predicted[b];
            }
        }
        hidden = out.hidden;
    }
    result.loss = scale(total, 1.0 / static_cast<double>(result.tokens));
    return result;
}

std::vector<Generation> caption_batch(const Batch& batch, const ModelParams& params, const ModelConfig& cfg,
                                      const GenerateOptions& options) {
    NoGradScope no_grad;
    const DecoderContext ctx =
        make_decoder_context(encode_batch(batch, params, cfg), params.decoder, cfg.decoder.representation);
    return generate(ctx, cfg.decoder, params.decoder, options);
}

}  // namespace egocap
