#include "egocap/encoders.hpp"

#include <cmath>
#include <string>

#include "egocap/errors.hpp"
#include "egocap/ops.hpp"

namespace egocap {

std::vector<std::size_t> resample_indices(std::size_t source_len, std::size_t target_len) {
    if (source_len == 0 || target_len == 0) throw DataError("resample: empty sequence");
    std::vector<std::size_t> idx(target_len);
    for (std::size_t j = 0; j < target_len; ++j) {
        std::size_t i;
        if (source_len > target_len) {
            // round(j * S / T), half up, in exact integer arithmetic
            i = (2 * j * source_len + target_len) / (2 * target_len);
        } else {
            i = (j * source_len) / target_len;
        }
        idx[j] = std::min(i, source_len - 1);
    }
    return idx;
}

Tensor resample_sensor(const SensorSeq& seq, double target_hz, std::size_t target_len) {
    if (seq.samples.empty()) throw DataError("resample_sensor: empty sensor sequence");
    if (seq.timestamps.size() != seq.samples.size()) {
        throw DataError("resample_sensor: " + std::to_string(seq.samples.size()) + " samples but " +
                        std::to_string(seq.timestamps.size()) + " timestamps");
    }
    if (!(target_hz > 0.0)) throw ConfigError("resample_sensor: target rate must be positive");
    if (target_len == 0) throw ConfigError("resample_sensor: target length must be positive");
    const std::size_t channels = seq.samples.front().size();
    if (channels == 0) throw DataError("resample_sensor: samples have no channels");
    for (std::size_t i = 0; i < seq.samples.size(); ++i) {
        if (seq.samples[i].size() != channels) {
            throw DataError("resample_sensor: sample " + std::to_string(i) + " has " +
                            std::to_string(seq.samples[i].size()) + " channels, expected " +
                            std::to_string(channels));
        }
        if (i > 0 && !(seq.timestamps[i] > seq.timestamps[i - 1])) {
            throw DataError("resample_sensor: timestamps not strictly increasing at sample " +
                            std::to_string(i));
        }
    }

    const double t0 = seq.timestamps.front();
    const double t1 = seq.timestamps.back();
    const auto grid_len = static_cast<std::size_t>(std::floor((t1 - t0) * target_hz + 1e-9)) + 1;

    std::vector<double> grid(grid_len * channels);
    std::size_t k = 0;
    for (std::size_t j = 0; j < grid_len; ++j) {
        const double t = std::min(t0 + static_cast<double>(j) / target_hz, t1);
        while (k + 1 < seq.timestamps.size() && seq.timestamps[k + 1] <= t) ++k;
        double* out = grid.data() + j * channels;
        const auto& a = seq.samples[k];
        if (k + 1 == seq.timestamps.size() || t == seq.timestamps[k]) {
            std::copy(a.begin(), a.end(), out);
            continue;
        }
        const auto& b = seq.samples[k + 1];
        const double w = (t - seq.timestamps[k]) / (seq.timestamps[k + 1] - seq.timestamps[k]);
        for (std::size_t c = 0; c < channels; ++c) out[c] = a[c] + w * (b[c] - a[c]);
    }

    const auto idx = resample_indices(grid_len, target_len);
    std::vector<double> values(target_len * channels);
    for (std::size_t j = 0; j < target_len; ++j)
        std::copy_n(grid.data() + idx[j] * channels, channels, values.data() + j * channels);
    return Tensor({target_len, channels}, std::move(values));
}

Tensor sample_frames(const FrameFeatureSeq& seq, std::size_t target_len) {
    if (seq.features.empty()) throw DataError("sample_frames: empty frame sequence");
    const std::size_t width = seq.features.front().size();
    if (width == 0) throw DataError("sample_frames: frame features have no width");
    for (std::size_t i = 0; i < seq.features.size(); ++i) {
        if (seq.features[i].size() != width) {
            throw DataError("sample_frames: frame " + std::to_string(i) + " has width " +
                            std::to_string(seq.features[i].size()) + ", expected " +
                            std::to_string(width));
        }
    }
    const auto idx = resample_indices(seq.features.size(), target_len);
    std::vector<double> values(target_len * width);
    for (std::size_t j = 0; j < target_len; ++j) {
        const auto& row = seq.features[idx[j]];
        std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(j * width));
    }
    return Tensor({target_len, width}, std::move(values));
}

std::vector<Tensor> time_major(std::span<const Tensor> sequences) {
    if (sequences.empty()) throw DimensionError("time_major: no sequences");
    const std::size_t steps = sequences[0].dim(0);
    const std::size_t width = sequences[0].cols();
    for (const auto& s : sequences) {
        if (s.rank() != 2 || s.dim(0) != steps || s.cols() != width) {
            throw DimensionError("time_major: sequences disagree, " + shape_str(sequences[0].shape()) +
                                 " vs " + shape_str(s.shape()));
        }
    }
    const std::size_t batch = sequences.size();
    std::vector<Tensor> out;
    out.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> v(batch * width);
        for (std::size_t b = 0; b < batch; ++b)
            std::copy_n(sequences[b].values().data() + t * width, width, v.data() + b * width);
        out.emplace_back(Shape{batch, width}, std::move(v));
    }
    return out;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
    const auto n = shape_numel(shape);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v), true);
}

void require_steps(std::span<const Tensor> steps, std::size_t input, const char* who) {
    if (steps.empty()) throw DimensionError(std::string(who) + ": empty input sequence");
    for (const auto& x : steps) {
        if (x.rank() != 2 || x.cols() != input || x.dim(0) != steps[0].dim(0)) {
            throw DimensionError(std::string(who) + ": step shape " + shape_str(x.shape()) +
                                 " does not match input width " + std::to_string(input));
        }
    }
}

std::vector<Tensor> rows_as_steps(const Tensor& seq) {
    if (seq.rank() != 2) throw DimensionError("expected a [steps x width] sequence, got " + shape_str(seq.shape()));
    // Differentiable row views so gradients reach the clip itself.
    const std::size_t k = seq.dim(0), d = seq.dim(1);
    const Tensor flat = reshape(seq, {1, k * d});
    std::vector<Tensor> steps;
    steps.reserve(k);
    for (std::size_t t = 0; t < k; ++t) steps.push_back(slice(flat, t * d, (t + 1) * d));
    return steps;
}

}  // namespace

LstmParams init_lstm(std::size_t input, std::size_t hidden, Rng& rng) {
    const std::size_t rows = input + hidden;
    std::vector<double> w(rows * 4 * hidden);
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(input));
    const double rec_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::size_t r = 0; r < rows; ++r) {
        const double bound = r < input ? in_bound : rec_bound;
        for (std::size_t c = 0; c < 4 * hidden; ++c) w[r * 4 * hidden + c] = rng.uniform(-bound, bound);
    }
    std::vector<double> b(4 * hidden, 0.0);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;  // forget gate
    return LstmParams{Tensor({rows, 4 * hidden}, std::move(w), true), Tensor({4 * hidden}, std::move(b), true)};
}

VisualEncoderParams init_visual_encoder(std::size_t input, std::size_t hidden, Rng& rng) {
    VisualEncoderParams p;
    p.lstm = init_lstm(input, hidden, rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(input + hidden));
    p.boundary.weight = uniform_tensor({input + hidden, 1}, bound, rng);
    p.boundary.bias = Tensor({1}, {-2.0}, true);  // boundaries start rare
    return p;
}

SensorEncoderParams init_sensor_encoder(std::size_t input, std::size_t hidden, Rng& rng) {
    return SensorEncoderParams{init_lstm(input, hidden, rng)};
}

LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& params) {
    const std::size_t h = params.hidden_size();
    const Tensor gates = affine(concat({x, state.hidden}), params.weight, params.bias);
    const Tensor i = sigmoid(slice(gates, 0, h));
    const Tensor f = sigmoid(slice(gates, h, 2 * h));
    const Tensor g = tanh(slice(gates, 2 * h, 3 * h));
    const Tensor o = sigmoid(slice(gates, 3 * h, 4 * h));
    LstmState next;
    next.cell = add(mul(f, state.cell), mul(i, g));
    next.hidden = mul(o, tanh(next.cell));
    return next;
}

Tensor encode_visual(std::span<const Tensor> steps, const VisualEncoderParams& params,
                     const VisualEncoderOptions& options) {
    const auto& lstm = params.lstm;
    require_steps(steps, lstm.input_size(), "encode_visual");
    const std::size_t batch = steps[0].dim(0), h = lstm.hidden_size();

    LstmState state{Tensor::zeros({batch, h}), Tensor::zeros({batch, h})};
    const bool mean_summary = options.summary == VisualSummary::BoundaryMean;
    Tensor emitted;                               // sum of states emitted at boundaries
    std::vector<double> emitted_count(batch, 0.0);

    for (std::size_t t = 0; t < steps.size(); ++t) {
        const Tensor& x = steps[t];
        Tensor fired;
        switch (options.boundary) {
            case BoundaryMode::Learned: {
                const Tensor gate = sigmoid(
                    affine(concat({x, state.hidden}), params.boundary.weight, params.boundary.bias));
                fired = straight_through_threshold(gate, 0.5);
                break;
            }
            case BoundaryMode::AlwaysOn: fired = Tensor::filled({batch, 1}, 1.0); break;
            case BoundaryMode::Off: fired = Tensor::zeros({batch, 1}); break;
        }
        if (options.boundary != BoundaryMode::Off) {
            if (mean_summary && t > 0) {
                const Tensor out = scale_rows(state.hidden, fired);
                emitted = emitted.defined() ? add(emitted, out) : out;
                const auto fv = fired.values();
                for (std::size_t b = 0; b < batch; ++b) emitted_count[b] += fv[b];
            }
            const Tensor keep = one_minus(fired);
            state.hidden = scale_rows(state.hidden, keep);
            state.cell = scale_rows(state.cell, keep);
        }
        if (options.observer) options.observer(t, fired, state);
        state = lstm_step(x, state, lstm);
    }

    if (!mean_summary) return state.hidden;
    std::vector<double> inv(batch);
    for (std::size_t b = 0; b < batch; ++b) inv[b] = 1.0 / (emitted_count[b] + 1.0);
    const Tensor total = emitted.defined() ? add(emitted, state.hidden) : state.hidden;
    return scale_rows(total, Tensor({batch, 1}, std::move(inv)));
}

Tensor encode_visual(const Tensor& frames, const VisualEncoderParams& params,
                     const VisualEncoderOptions& options) {
    const auto steps = rows_as_steps(frames);
    const Tensor h = encode_visual(steps, params, options);
    return reshape(h, {h.cols()});
}

Tensor encode_sensor(std::span<const Tensor> steps, const SensorEncoderParams& params) {
    const auto& lstm = params.lstm;
    require_steps(steps, lstm.input_size(), "encode_sensor");
    const std::size_t batch = steps[0].dim(0), h = lstm.hidden_size();
    LstmState state{Tensor::zeros({batch, h}), Tensor::zeros({batch, h})};
    for (const auto& x : steps) state = lstm_step(x, state, lstm);
    return state.hidden;
}

Tensor encode_sensor(const Tensor& signals, const SensorEncoderParams& params) {
    const auto steps = rows_as_steps(signals);
    const Tensor h = encode_sensor(steps, params);
    return reshape(h, {h.cols()});
}

}  // namespace egocap
