#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "egocap/decoder.hpp"
#include "egocap/encoders.hpp"
#include "egocap/fusion.hpp"
#include "egocap/rng.hpp"
#include "egocap/segment.hpp"
#include "egocap/vocab.hpp"

namespace egocap {

struct ModelConfig {
    std::string preset = "desk";

    // Input widths; overwritten from the dataset when training starts.
    std::size_t feature_dim = 32;
    std::size_t sensor_channels = 63;

    std::size_t visual_hidden = 64;
    std::size_t sensor_hidden = 32;
    std::size_t decoder_hidden = 64;
    std::size_t attention_width = 64;
    std::size_t embedding_width = 64;

    std::size_t k_frames = 40;
    std::size_t t_sensor = 120;
    double sensor_hz = 30.0;
    std::size_t max_words = 15;

    FusionMode fusion = FusionMode::LinearOnS;
    BoundaryMode boundary = BoundaryMode::Learned;
    VisualSummary summary = VisualSummary::FinalState;
    DecoderConfig decoder;

    void validate() const;
};

// "desk" (small, the default) or "paper" (full-size dimensions).
ModelConfig model_preset(const std::string& name);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct ModelParams {
    VisualEncoderParams visual;
    SensorEncoderParams sensor;
    AmmtParams ammt;
    DecoderParams decoder;

    // Every trainable tensor under a stable name, in a fixed order.
    std::vector<std::pair<std::string, Tensor>> named() const;
    std::vector<Tensor> tensors() const;
    ModelParams clone() const;
};

ModelParams init_model(const ModelConfig& cfg, std::size_t vocab_size, Rng& rng);

// Copies values from `src` into `dst` in place (shapes must match).
void copy_params(const ModelParams& src, ModelParams& dst);

// Segment resampled to the model's fixed lengths, caption encoded.
struct PreparedSegment {
    std::string id;
    Tensor frames;                    // [K x feature_dim]
    Tensor sensors;                   // [T x sensor_channels]
    std::vector<std::size_t> tokens;  // caption ids without BOS / EOS
    std::string caption;
};

PreparedSegment prepare_segment(const Segment& segment, const ModelConfig& cfg, const Vocabulary& vocab);
std::vector<PreparedSegment> prepare_segments(std::span<const Segment> segments, const ModelConfig& cfg,
                                              const Vocabulary& vocab);

using Batch = std::vector<const PreparedSegment*>;

// Encoders plus fusion for a batch. Only the representations the decoder
// configuration reads are computed.
EncodedRepresentations encode_batch(const Batch& batch, const ModelParams& params, const ModelConfig& cfg);

struct LossOptions {
    // Probability of feeding the gold previous token; below 1 the model's
    // own prediction is fed instead with probability 1 - p_tf per position.
    double teacher_forcing = 1.0;
    bool sample_noise = true;  // Gumbel noise in the attention weights
};

struct LossResult {
    Tensor loss;             // mean cross-entropy over unmasked positions
    std::size_t tokens = 0;  // unmasked positions, EOS included
    std::size_t correct = 0; // argmax hits at those positions
};

// Teacher-forced caption loss. Positions after each caption's EOS carry
// zero weight.
LossResult caption_loss(const Batch& batch, const ModelParams& params, const ModelConfig& cfg,
                        const LossOptions& options, Rng& rng);

std::vector<Generation> caption_batch(const Batch& batch, const ModelParams& params, const ModelConfig& cfg,
                                      const GenerateOptions& options);

}  // namespace egocap
