#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "egocap/rng.hpp"
#include "egocap/segment.hpp"
#include "egocap/tensor.hpp"

namespace egocap {

// ---------------------------------------------------------------------------
// Input preparation
// ---------------------------------------------------------------------------

// Source row picked for each of `target_len` output rows. Down-sampling
// takes round(j * source_len / target_len); up-sampling repeats rows via
// floor(j * source_len / target_len); equal lengths map to the identity.
std::vector<std::size_t> resample_indices(std::size_t source_len, std::size_t target_len);

// Piecewise-linear interpolation onto a uniform `target_hz` grid spanning
// [first, last] timestamp, then index-space resampling to exactly
// `target_len` rows. Returns [target_len x channels].
Tensor resample_sensor(const SensorSeq& seq, double target_hz, std::size_t target_len);

// [target_len x D_feat]
Tensor sample_frames(const FrameFeatureSeq& seq, std::size_t target_len);

// B sequences of shape [steps x width] -> `steps` tensors of shape [B x width].
std::vector<Tensor> time_major(std::span<const Tensor> sequences);

// ---------------------------------------------------------------------------
// Recurrent encoders
// ---------------------------------------------------------------------------

// Single LSTM layer over the stacked input [x; h]. Gate column order is
// input, forget, cell, output.
struct LstmParams {
    Tensor weight;  // [(input + hidden) x 4*hidden]
    Tensor bias;    // [4*hidden]

    std::size_t input_size() const { return weight.dim(0) - hidden_size(); }
    std::size_t hidden_size() const { return bias.dim(0) / 4; }
};

struct BoundaryGateParams {
    Tensor weight;  // [(input + hidden) x 1]
    Tensor bias;    // [1]
};

struct VisualEncoderParams {
    LstmParams lstm;
    BoundaryGateParams boundary;
};

struct SensorEncoderParams {
    LstmParams lstm;
};

LstmParams init_lstm(std::size_t input, std::size_t hidden, Rng& rng);
VisualEncoderParams init_visual_encoder(std::size_t input, std::size_t hidden, Rng& rng);
SensorEncoderParams init_sensor_encoder(std::size_t input, std::size_t hidden, Rng& rng);

enum class BoundaryMode {
    Learned,   // gate sigmoid(w.[x; h] + b), binarized at 0.5 with a straight-through gradient
    AlwaysOn,  // test hook: reset before every step
    Off,
};

enum class VisualSummary {
    FinalState,    // h_V is the last hidden state
    BoundaryMean,  // mean of the states emitted at boundaries and the last state
};

struct LstmState {
    Tensor hidden;  // [B x H]
    Tensor cell;    // [B x H]
};

struct VisualEncoderOptions {
    BoundaryMode boundary = BoundaryMode::Learned;
    VisualSummary summary = VisualSummary::FinalState;
    // Called once per step with the binarized gate [B x 1] (all ones for
    // AlwaysOn, zeros for Off) and the state the cell is about to consume.
    std::function<void(std::size_t step, const Tensor& fired, const LstmState& entering)> observer;
};

// One LSTM update from `state` on input x[B x in].
LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& params);

// Batched: each step is [B x D_feat]; returns h_V [B x H_V].
Tensor encode_visual(std::span<const Tensor> steps, const VisualEncoderParams& params,
                     const VisualEncoderOptions& options = {});
// Single clip: frames [K x D_feat]; returns h_V [H_V].
Tensor encode_visual(const Tensor& frames, const VisualEncoderParams& params,
                     const VisualEncoderOptions& options = {});

// Plain recurrence without boundary detection; returns h_S [B x H_S].
Tensor encode_sensor(std::span<const Tensor> steps, const SensorEncoderParams& params);
// Single clip: signals [T x channels]; returns h_S [H_S].
Tensor encode_sensor(const Tensor& signals, const SensorEncoderParams& params);

}  // namespace egocap
