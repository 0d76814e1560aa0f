// egocap: data generation, training, captioning, evaluation, gradient
// checking and attention analysis from one executable.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "egocap/dataset.hpp"
#include "egocap/errors.hpp"
#include "egocap/gradcheck_suite.hpp"
#include "egocap/metrics.hpp"
#include "egocap/synth.hpp"
#include "egocap/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace egocap;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

std::uint64_t default_seed() {
    if (const char* env = std::getenv("EGOCAP_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("EGOCAP_SEED is not an unsigned integer: '") + env + "'");
        }
    }
    return 7;
}

// Flags that override the preset; unset ones keep the preset value.
struct Overrides {
    std::string preset = "desk";
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> tau;
    std::optional<double> c_vs;
    std::optional<std::size_t> max_words;
    std::optional<std::size_t> k_frames;
    std::optional<std::size_t> t_sensor;
    std::optional<std::string> dma_variant;
    std::optional<std::string> fusion;
    std::optional<std::string> representation;
    std::optional<std::string> boundary;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> patience;

    void add_to(CLI::App* app) {
        app->add_option("--preset", preset, "Dimension preset: desk | paper")->check(CLI::IsMember({"desk", "paper"}));
        app->add_option("--config", config_path, "Run config JSON (as written next to checkpoints)");
        app->add_option("--seed", seed, "Seed (default: $EGOCAP_SEED or 7)");
        app->add_option("--tau", tau, "Attention temperature");
        app->add_option("--c-vs", c_vs, "Preference for the fused representation");
        app->add_option("--max-words", max_words, "Generation length cap");
        app->add_option("--k-frames", k_frames, "Frames per segment after resampling");
        app->add_option("--t-sensor", t_sensor, "Sensor steps per segment after resampling");
        app->add_option("--dma-variant", dma_variant, "softmax | gumbel | st-gumbel");
        app->add_option("--fusion", fusion, "concat | symmetric | linear-on-V | linear-on-S");
        app->add_option("--representation", representation, "dynamic | fixed-v | fixed-s | fixed-vs");
        app->add_option("--boundary", boundary, "learned | always-on | off");
        app->add_option("--epochs", epochs, "Training epochs");
        app->add_option("--batch-size", batch_size, "Segments per batch");
        app->add_option("--patience", patience, "Early-stopping patience in epochs (0 disables)");
    }

    void apply_model(ModelConfig& m) const {
        if (tau) m.decoder.dma.tau = *tau;
        if (c_vs) m.decoder.dma.preference[kFused] = *c_vs;
        if (max_words) m.max_words = *max_words;
        if (k_frames) m.k_frames = *k_frames;
        if (t_sensor) m.t_sensor = *t_sensor;
        if (dma_variant) m.decoder.dma.variant = parse_dma_variant(*dma_variant);
        if (fusion) m.fusion = parse_fusion_mode(*fusion);
        if (representation) m.decoder.representation = parse_representation_mode(*representation);
        if (boundary) {
            json j = model_config_to_json(m);
            j["boundary"] = *boundary;
            m = model_config_from_json(j);
        }
        m.validate();
    }

    RunConfig build(const std::string& data_path) const {
        RunConfig r;
        if (!config_path.empty()) {
            json j;
            try {
                j = json::parse(read_file(config_path));
            } catch (const json::parse_error& e) {
                throw ConfigError("config " + config_path + ": " + e.what());
            }
            r = RunConfig::from_json(j);
        } else {
            r.model = model_preset(preset);
            r.train = train_preset(preset);
        }
        r.data_path = data_path;
        r.train.seed = seed ? *seed : (config_path.empty() ? default_seed() : r.train.seed);
        if (epochs) r.train.epochs = *epochs;
        if (batch_size) r.train.batch_size = *batch_size;
        if (patience) r.train.patience = *patience;
        apply_model(r.model);
        r.train.validate();
        return r;
    }
};

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_file_atomic(path, text);
    }
}

std::vector<Segment> load_split(const std::string& data, const std::string& split) {
    const auto all = load_dataset(data);
    if (split == "all") return all;
    auto out = filter_split(all, parse_split(split));
    if (out.empty()) throw DataError("dataset " + data + " has no '" + split + "' segments");
    return out;
}

json trace_json(const Generation& g, const Vocabulary& vocab) {
    json steps = json::array();
    for (const auto& s : g.trace.steps) {
        steps.push_back({{"token", vocab.token(s.token)},
                         {"zeta", {s.zeta[0], s.zeta[1], s.zeta[2]}},
                         {"modality", modality_name(s.modality)}});
    }
    return steps;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& spec_path, const std::string& out, std::optional<std::uint64_t> seed,
                 std::optional<std::size_t> n) {
    SynthSpec spec;
    if (!spec_path.empty()) {
        try {
            spec = synth_spec_from_json(json::parse(read_file(spec_path)));
        } catch (const json::parse_error& e) {
            throw ConfigError("spec " + spec_path + ": " + e.what());
        }
    }
    if (seed) spec.seed = *seed;
    if (n) spec.n_segments = *n;
    const auto segments = generate_synthetic(spec);
    save_dataset(segments, out);
    const auto c = split_counts(segments);
    std::cerr << "wrote " << segments.size() << " segments (train " << c[0] << ", val " << c[1] << ", test " << c[2]
              << ") to " << out << "\n";
    return kOk;
}

int cmd_train(const Overrides& ov, const std::string& data, const std::string& out_dir, bool resume,
              std::optional<std::size_t> subset, bool quiet) {
    const fs::path dir(out_dir);
    const fs::path ckpt = dir / "checkpoint.bin";
    const fs::path log = dir / "train_log.jsonl";
    const bool resuming = resume && fs::exists(ckpt);
    // Reject bad flags before touching the data.
    std::optional<RunConfig> fresh;
    if (!resuming) fresh = ov.build(data);
    const auto segments = load_dataset(data);

    TrainState state;
    if (resuming) {
        state = load_checkpoint(ckpt);
    } else {
        RunConfig cfg = *fresh;
        cfg.model = with_data_dims(cfg.model, segments);
        state = init_training(cfg, vocab_from_segments(segments));
        fs::create_directories(dir);
        fs::remove(log);
    }
    write_file_atomic(dir / "run_config.json", state.config.to_json().dump(2) + "\n");

    auto train_segs = filter_split(segments, Split::Train);
    if (subset && *subset < train_segs.size()) train_segs.resize(*subset);
    const auto val_segs = subset ? std::vector<Segment>{} : filter_split(segments, Split::Val);
    const auto train = prepare_segments(train_segs, state.config.model, state.vocab);
    const auto val = prepare_segments(val_segs, state.config.model, state.vocab);

    TrainOutputs outputs;
    outputs.checkpoint = ckpt;
    outputs.log = log;
    if (!quiet) {
        outputs.on_epoch = [](const EpochMetrics& m) { std::cerr << epoch_log_line(m, "") << "\n"; };
    }
    run_training(state, train, val, outputs);
    if (!fs::exists(ckpt)) save_checkpoint(state, ckpt);

    const EvalResult ev = evaluate(state.params, state.config.model, state.vocab, train, state.config.train.batch_size);
    json summary{{"config_hash", state.config.hash()},
                 {"epochs", state.epoch},
                 {"train_token_accuracy", ev.token_accuracy},
                 {"train_bleu1", ev.bleu[0]},
                 {"checkpoint", ckpt.string()}};
    std::cout << summary.dump() << "\n";
    return kOk;
}

int cmd_caption(const std::string& ckpt, const std::string& data, const std::string& split,
                std::optional<std::string> variant, std::optional<double> tau, std::size_t beam, bool sample_noise,
                std::optional<std::size_t> max_words, const std::string& out) {
    TrainState state = load_checkpoint(ckpt);
    ModelConfig cfg = state.config.model;
    if (variant) cfg.decoder.dma.variant = parse_dma_variant(*variant);
    if (tau) cfg.decoder.dma.tau = *tau;
    if (max_words) cfg.max_words = *max_words;
    cfg.validate();
    const auto segs = load_split(data, split);
    const auto prepared = prepare_segments(segs, cfg, state.vocab);

    GenerateOptions gen;
    gen.max_len = cfg.max_words;
    gen.beam = beam;
    gen.sample_noise = sample_noise;
    gen.noise_seed = state.config.train.seed;
    std::string text;
    for (std::size_t i = 0; i < prepared.size(); i += state.config.train.batch_size) {
        Batch batch;
        for (std::size_t j = i; j < std::min(prepared.size(), i + state.config.train.batch_size); ++j)
            batch.push_back(&prepared[j]);
        const auto gens = caption_batch(batch, state.params, cfg, gen);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            json line{{"id", batch[b]->id},
                      {"caption", state.vocab.decode(gens[b].tokens)},
                      {"reference", batch[b]->caption},
                      {"config_hash", state.config.hash()},
                      {"trace", trace_json(gens[b], state.vocab)}};
            text += line.dump() + "\n";
        }
    }
    write_output(out, text);
    return kOk;
}

int cmd_evaluate(const std::string& ckpt, const std::string& data, const std::string& split, std::size_t beam,
                 const std::string& out) {
    TrainState state = load_checkpoint(ckpt);
    const auto segs = load_split(data, split);
    const auto prepared = prepare_segments(segs, state.config.model, state.vocab);
    GenerateOptions gen;
    gen.max_len = state.config.model.max_words;
    gen.beam = beam;
    const EvalResult ev =
        evaluate(state.params, state.config.model, state.vocab, prepared, state.config.train.batch_size, gen);
    for (std::size_t n = 0; n < 5; ++n) std::printf("BLEU-%zu   %8.2f\n", n + 1, ev.bleu[n]);
    if (ev.cider) std::printf("CIDEr-D  %8.2f\n", *ev.cider);
    else std::printf("CIDEr-D       n/a\n");
    std::printf("verb-acc %8.2f\n", 100.0 * ev.verb_accuracy);
    if (!out.empty()) {
        json j{{"config_hash", state.config.hash()},
               {"split", split},
               {"bleu", ev.bleu},
               {"cider_d", ev.cider ? json(*ev.cider) : json(nullptr)},
               {"verb_accuracy", ev.verb_accuracy},
               {"token_accuracy", ev.token_accuracy}};
        write_file_atomic(out, j.dump(2) + "\n");
    }
    return kOk;
}

int cmd_gradcheck(std::uint64_t seed, double tol_primitive, double tol_e2e, bool skip_e2e) {
    bool ok = true;
    auto report = [&](const NamedGradCheck& c) {
        std::printf("%-28s %s\n", c.name.c_str(), c.report.summary().c_str());
        ok = ok && c.report.passed;
    };
    for (const auto& c : primitive_grad_checks(seed, tol_primitive)) report(c);
    if (!skip_e2e) report(end_to_end_grad_check(seed, tol_e2e));
    if (!ok) throw NumericError("gradient check failed");
    return kOk;
}

int cmd_attn_report(const std::string& ckpt, const std::string& data, const std::string& split,
                    std::optional<std::string> variant, const std::string& out) {
    TrainState state = load_checkpoint(ckpt);
    ModelConfig cfg = state.config.model;
    if (variant) cfg.decoder.dma.variant = parse_dma_variant(*variant);
    const auto segs = load_split(data, split);
    const auto prepared = prepare_segments(segs, cfg, state.vocab);
    const EvalResult ev = evaluate(state.params, cfg, state.vocab, prepared, state.config.train.batch_size);
    std::vector<AttentionTrace> traces;
    for (const auto& g : ev.generations) traces.push_back(g.trace);
    const AttnReport r = attn_report(traces, ev.hypotheses);
    std::cout << r.render();
    if (!out.empty()) {
        json j = r.to_json();
        j["config_hash"] = state.config.hash();
        write_file_atomic(out, j.dump(2) + "\n");
    }
    return kOk;
}

int cmd_experiment(const Overrides& ov, const std::string& id, const std::string& data, const std::string& out) {
    const auto segments = load_dataset(data);
    const RunConfig base = ov.build(data);
    const auto report = run_experiment(id, base, segments, [](const std::string& label) {
        std::cerr << "training " << label << "\n";
    });
    std::cout << report.render();
    if (!out.empty()) write_file_atomic(out, report.to_json().dump(2) + "\n");
    return kOk;
}

int fail(const char* kind, const std::string& msg, int code) {
    std::string flat = msg;
    for (auto& c : flat)
        if (c == '\n') c = ' ';
    std::cerr << "error: kind=" << kind << " msg=" << flat << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sensor-augmented egocentric video captioning"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset");
    std::string spec_path, gen_out;
    std::optional<std::uint64_t> gen_seed;
    std::optional<std::size_t> gen_n;
    gen->add_option("--spec", spec_path, "Synthetic spec JSON (defaults when omitted)");
    gen->add_option("--out", gen_out, "Dataset path (JSONL)")->required();
    gen->add_option("--seed", gen_seed, "Override the synthetic spec seed");
    gen->add_option("--n-segments", gen_n, "Override the segment count");

    // train
    auto* train = app.add_subcommand("train", "Train a captioning model");
    Overrides train_ov;
    train_ov.add_to(train);
    std::string train_data, train_out;
    bool resume = false, quiet = false;
    std::optional<std::size_t> subset;
    train->add_option("--data", train_data, "Dataset path")->required();
    train->add_option("--out", train_out, "Output directory for checkpoint and log")->required();
    train->add_flag("--resume", resume, "Continue from OUT/checkpoint.bin when present");
    train->add_option("--subset", subset, "Train on the first N train segments only (no validation)");
    train->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

    // caption
    auto* caption = app.add_subcommand("caption", "Caption a split and emit attention traces");
    std::string cap_ckpt, cap_data, cap_split = "test", cap_out;
    std::optional<std::string> cap_variant;
    std::optional<double> cap_tau;
    std::optional<std::size_t> cap_max_words;
    std::size_t cap_beam = 1;
    bool cap_noise = false;
    caption->add_option("--checkpoint", cap_ckpt, "Checkpoint path")->required();
    caption->add_option("--data", cap_data, "Dataset path")->required();
    caption->add_option("--split", cap_split, "train | val | test | all");
    caption->add_option("--dma-variant", cap_variant, "Override the attention variant");
    caption->add_option("--tau", cap_tau, "Override the attention temperature");
    caption->add_option("--max-words", cap_max_words, "Generation length cap");
    caption->add_option("--beam", cap_beam, "Beam width (1 = greedy)")->check(CLI::PositiveNumber);
    caption->add_flag("--sample-noise", cap_noise, "Sample Gumbel noise while generating");
    caption->add_option("--out", cap_out, "Output JSONL (default stdout)");

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "BLEU-1..5 and CIDEr-D on a split");
    std::string ev_ckpt, ev_data, ev_split = "test", ev_out;
    std::size_t ev_beam = 1;
    evaluate_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required();
    evaluate_cmd->add_option("--data", ev_data, "Dataset path")->required();
    evaluate_cmd->add_option("--split", ev_split, "train | val | test | all");
    evaluate_cmd->add_option("--beam", ev_beam, "Beam width")->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--out", ev_out, "Results JSON");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    std::optional<std::uint64_t> gc_seed;
    double gc_tol = 1e-4, gc_tol_e2e = 1e-3;
    bool gc_skip_e2e = false;
    gradcheck->add_option("--seed", gc_seed, "Seed");
    gradcheck->add_option("--tolerance", gc_tol, "Relative tolerance for primitives");
    gradcheck->add_option("--tolerance-e2e", gc_tol_e2e, "Relative tolerance for the end-to-end loss");
    gradcheck->add_flag("--primitives-only", gc_skip_e2e, "Skip the end-to-end check");

    // attn-report
    auto* attn = app.add_subcommand("attn-report", "Word-type by modality attention table");
    std::string at_ckpt, at_data, at_split = "test", at_out;
    std::optional<std::string> at_variant;
    attn->add_option("--checkpoint", at_ckpt, "Checkpoint path")->required();
    attn->add_option("--data", at_data, "Dataset path")->required();
    attn->add_option("--split", at_split, "train | val | test | all");
    attn->add_option("--dma-variant", at_variant, "Override the attention variant");
    attn->add_option("--out", at_out, "Report JSON");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Run an ablation or sweep grid");
    Overrides ex_ov;
    ex_ov.add_to(experiment);
    std::string ex_id, ex_data, ex_out;
    experiment->add_option("--id", ex_id, "fusion-ablation | ammt-ablation | dma-variant | tau-sweep | cvs-sweep")
        ->required();
    experiment->add_option("--data", ex_data, "Dataset path")->required();
    experiment->add_option("--out", ex_out, "Results JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), kUsage);
    }

    try {
        if (*gen) return cmd_gen_data(spec_path, gen_out, gen_seed, gen_n);
        if (*train) return cmd_train(train_ov, train_data, train_out, resume, subset, quiet);
        if (*caption)
            return cmd_caption(cap_ckpt, cap_data, cap_split, cap_variant, cap_tau, cap_beam, cap_noise, cap_max_words,
                               cap_out);
        if (*evaluate_cmd) return cmd_evaluate(ev_ckpt, ev_data, ev_split, ev_beam, ev_out);
        if (*gradcheck) return cmd_gradcheck(gc_seed ? *gc_seed : default_seed(), gc_tol, gc_tol_e2e, gc_skip_e2e);
        if (*attn) return cmd_attn_report(at_ckpt, at_data, at_split, at_variant, at_out);
        if (*experiment) return cmd_experiment(ex_ov, ex_id, ex_data, ex_out);
    } catch (const ConfigError& e) {
        return fail("config", e.what(), kUsage);
    } catch (const NumericError& e) {
        return fail("numeric", e.what(), kNumeric);
    } catch (const ContractError& e) {
        return fail("contract", e.what(), kNumeric);
    } catch (const Error& e) {
        return fail(error_kind_name(e.kind()), e.what(), kData);
    } catch (const fs::filesystem_error& e) {
        return fail("data", e.what(), kData);
    }
    return kUsage;
}
