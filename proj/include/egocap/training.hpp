#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "egocap/metrics.hpp"
#include "egocap/model.hpp"
#include "egocap/rng.hpp"
#include "egocap/vocab.hpp"

namespace egocap {

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;
};

AdamState adam_init(std::span<const Tensor> params);

// One bias-corrected Adam update from each parameter's accumulated
// gradient. A parameter that received no gradient is treated as having
// gradient zero.
void adam_step(std::span<const Tensor> params, AdamState& state, double lr, const AdamConfig& cfg = {});

double global_grad_norm(std::span<const Tensor> params);
// Rescales all gradients so their global norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(std::span<const Tensor> params, double max_norm);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct LrStep {
    std::size_t from_epoch = 0;
    double lr = 0.0;
};

struct TrainConfig {
    std::size_t batch_size = 10;
    std::size_t epochs = 200;
    std::vector<LrStep> lr_schedule{{0, 3e-3}, {120, 1e-3}, {170, 5e-4}};
    // Teacher-forcing probability decays linearly over the run.
    double p_tf_start = 1.0;
    double p_tf_end = 0.75;
    double grad_clip = 5.0;  // 0 disables clipping
    std::uint64_t seed = 7;
    // Early stopping on validation CIDEr-D; 0 disables. Counted in epochs.
    std::size_t patience = 30;
    std::size_t eval_every = 5;

    void validate() const;
    double lr_at(std::size_t epoch) const;
    double p_tf_at(std::size_t epoch) const;
};

// "desk" or "paper" optimizer settings.
TrainConfig train_preset(const std::string& name);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Everything that determines a training run.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string data_path;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    // FNV-1a 64 of the canonical JSON, as 16 hex digits.
    std::string hash() const;
};

std::string fnv1a_hex(const std::string& bytes);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainState {
    RunConfig config;
    Vocabulary vocab;
    ModelParams params;
    AdamState adam;
    Rng rng;
    std::size_t epoch = 0;  // completed epochs

    // Early stopping.
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;
    bool stopped = false;
    std::optional<ModelParams> best_params;
};

TrainState init_training(const RunConfig& config, const Vocabulary& vocab);

// Copies the frame and sensor widths of `segments` into `cfg`.
ModelConfig with_data_dims(ModelConfig cfg, std::span<const Segment> segments);
// Vocabulary over the captions of the train split.
Vocabulary vocab_from_segments(std::span<const Segment> segments);

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;
    double token_accuracy = 0.0;
    double lr = 0.0;
    double p_tf = 1.0;
    double grad_norm = 0.0;  // mean pre-clip norm over batches
    std::optional<double> val_cider;
    std::optional<double> val_bleu4;
};

// One pass over `train` in a seeded shuffled order with one Adam update
// per batch. Throws NumericError naming the batch and parameter norms on a
// non-finite loss.
EpochMetrics train_epoch(TrainState& state, std::span<const PreparedSegment> train);

struct EvalResult {
    double loss = 0.0;
    double token_accuracy = 0.0;  // teacher-forced, no attention noise
    std::array<double, 5> bleu{};
    std::optional<double> cider;  // unset when the corpus is degenerate
    double verb_accuracy = 0.0;   // first generated word equals the first gold word
    std::vector<Generation> generations;
    std::vector<Words> hypotheses;
    std::vector<Words> references;
};

// Generation defaults to greedy decoding capped at cfg.max_words.
EvalResult evaluate(const ModelParams& params, const ModelConfig& cfg, const Vocabulary& vocab,
                    std::span<const PreparedSegment> data, std::size_t batch_size,
                    std::optional<GenerateOptions> options = std::nullopt);

struct TrainOutputs {
    std::filesystem::path checkpoint;  // rewritten atomically after every epoch when set
    std::filesystem::path log;         // one JSON line appended per epoch when set
    std::function<void(const EpochMetrics&)> on_epoch;
};

// Continues `state` until the configured epoch count or early stop. When
// early stopping ran, the best parameters are restored at the end.
void run_training(TrainState& state, std::span<const PreparedSegment> train, std::span<const PreparedSegment> val,
                  const TrainOutputs& outputs = {});

std::string epoch_log_line(const EpochMetrics& m, const std::string& config_hash);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

// A JSON header line (schema, config and its hash, vocabulary, epoch, RNG
// and optimizer state, tensor names and shapes) followed by little-endian
// float64 blocks: parameters, Adam first moments, second moments, and the
// best parameters when early stopping has recorded them.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct ExperimentRow {
    std::string label;
    RunConfig config;
    EvalResult result;
};

struct ExperimentReport {
    std::string id;
    std::vector<ExperimentRow> rows;

    std::string render() const;
    nlohmann::json to_json() const;
};

inline constexpr const char* kExperimentIds[] = {"fusion-ablation", "ammt-ablation", "dma-variant", "tau-sweep",
                                                 "cvs-sweep"};

// Cells of an experiment grid as labelled run configurations derived from
// `base`. ConfigError for an unknown id.
std::vector<std::pair<std::string, RunConfig>> experiment_grid(const std::string& id, const RunConfig& base);

// Trains every cell on the train split (early stopping on val) and
// evaluates on the test split.
ExperimentReport run_experiment(const std::string& id, const RunConfig& base, std::span<const Segment> segments,
                                const std::function<void(const std::string&)>& progress = {});

}  // namespace egocap
