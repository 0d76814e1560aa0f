// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "egocap/dataset.hpp"
#include "egocap/dma.hpp"
#include "egocap/encoders.hpp"
#include "egocap/gradcheck_suite.hpp"
#include "egocap/metrics.hpp"
#include "egocap/model.hpp"
#include "egocap/synth.hpp"
#include "egocap/training.hpp"
#include "metric_oracles.hpp"

using namespace egocap;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kPrimitiveTol = 1e-4;
constexpr double kEndToEndTol = 1e-3;
constexpr double kGradSeconds = 60.0;
constexpr std::size_t kAmmtSegments = 100;
constexpr std::size_t kDmaDraws = 10000;
constexpr double kSimplexTol = 1e-9;
constexpr double kMonotoneSlack = 1e-12;
constexpr std::size_t kOverfitSegments = 50;
constexpr std::size_t kOverfitEpochs = 200;
constexpr double kOverfitTokenAcc = 0.95;
constexpr double kOverfitBleu1 = 90.0;
constexpr double kOverfitSeconds = 300.0;
constexpr double kVerbMarginPoints = 10.0;
constexpr std::size_t kFusionEpochs = 60;
constexpr double kMetricTol = 1e-9;
constexpr double kAffineTol = 1e-12;
constexpr double kSineTol = 0.01;
constexpr double kFirstPositionRate = 0.9;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

RunConfig desk_run(std::span<const Segment> segments) {
    RunConfig rc;
    rc.model = with_data_dims(model_preset("desk"), segments);
    rc.train = train_preset("desk");
    return rc;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    std::size_t failed = 0, total = 0;
    double worst = 0.0;
    for (const auto& c : primitive_grad_checks(1, kPrimitiveTol)) {
        ++total;
        failed += !c.report.passed;
        worst = std::max(worst, c.report.max_rel_error);
    }
    const auto e2e = end_to_end_grad_check(1, kEndToEndTol);
    const double secs = seconds_since(t0);
    const bool ok = failed == 0 && e2e.report.passed && secs < kGradSeconds;
    return {ok, fmt("%zu/%zu primitives ok (worst rel %.2e), e2e rel %.2e over %zu coords, %.1f s", total - failed,
                    total, worst, e2e.report.max_rel_error, e2e.report.coords_checked, secs)};
}

Outcome ammt_identity() {
    SynthSpec spec;
    spec.n_segments = kAmmtSegments;
    spec.seed = 11;
    auto segments = generate_synthetic(spec);
    for (auto& s : segments) s.split = Split::Train;
    const Vocabulary vocab = vocab_from_segments(segments);
    ModelConfig asym = desk_run(segments).model;
    asym.fusion = FusionMode::LinearOnS;
    asym.decoder.dma.variant = DmaVariant::Softmax;
    ModelConfig concat = asym;
    concat.fusion = FusionMode::Concat;
    Rng init_rng(5);
    const ModelParams params = init_model(asym, vocab.size(), init_rng);
    const auto prepared = prepare_segments(segments, asym, vocab);

    std::size_t mismatched = 0;
    for (std::size_t begin = 0; begin < prepared.size(); begin += 10) {
        Batch batch;
        for (std::size_t i = begin; i < std::min(begin + 10, prepared.size()); ++i) batch.push_back(&prepared[i]);
        const EncodedRepresentations z = encode_batch(batch, params, asym);
        const std::size_t hv = z.h_v.cols(), hs = z.h_s.cols();
        for (std::size_t r = 0; r < batch.size(); ++r) {
            std::vector<double> baseline;
            for (std::size_t c = 0; c < hv; ++c) baseline.push_back(z.h_v.at(r, c));
            for (std::size_t c = 0; c < hs; ++c) baseline.push_back(z.h_s.at(r, c));
            for (std::size_t c = 0; c < hv + hs; ++c) mismatched += z.h_vs.at(r, c) != baseline[c];
        }

        Rng ra(1), rb(1);
        const LossOptions lo{.teacher_forcing = 1.0, .sample_noise = false};
        const double la = caption_loss(batch, params, asym, lo, ra).loss.at(0);
        const double lb = caption_loss(batch, params, concat, lo, rb).loss.at(0);
        mismatched += la != lb;

        GenerateOptions go;
        go.max_len = asym.max_words;
        const auto ga = caption_batch(batch, params, asym, go);
        const auto gb = caption_batch(batch, params, concat, go);
        for (std::size_t i = 0; i < ga.size(); ++i) {
            mismatched += ga[i].tokens != gb[i].tokens;
            mismatched += ga[i].trace.steps.size() != gb[i].trace.steps.size();
            for (std::size_t s = 0; s < std::min(ga[i].trace.steps.size(), gb[i].trace.steps.size()); ++s)
                mismatched += ga[i].trace.steps[s].zeta != gb[i].trace.steps[s].zeta;
        }
    }
    return {mismatched == 0, fmt("%zu segments, %zu mismatches against the concatenation baseline", prepared.size(),
                                 mismatched)};
}

Outcome dma_contracts() {
    Rng rng(21);
    Tensor eta = Tensor::zeros({kDmaDraws, kNumModalities});
    for (double& x : eta.mutable_values()) x = rng.uniform(1e-3, 1.0);
    const Tensor noise = sample_gumbel_noise(kDmaDraws, rng);
    const double taus[] = {1.0, 0.5, 0.1, 0.05, 0.01};
    const double cvs_grid[] = {0.25, 0.5, 1.0, 1.5, 2.0, 4.0};

    std::size_t simplex_bad = 0, onehot_bad = 0, tau_bad = 0, cvs_bad = 0;
    double worst_sum = 0.0;
    for (DmaVariant v : {DmaVariant::Softmax, DmaVariant::Gumbel, DmaVariant::StGumbel}) {
        const Tensor g = v == DmaVariant::Softmax ? Tensor() : noise;
        std::vector<double> prev_max(kDmaDraws, 0.0);
        for (double tau : taus) {
            DmaConfig cfg;
            cfg.variant = v;
            cfg.tau = tau;
            const Tensor zeta = dma_weights_from_relevance(eta, cfg, g);
            for (std::size_t r = 0; r < kDmaDraws; ++r) {
                double s = 0.0, mx = 0.0;
                std::size_t ones = 0, zeros = 0;
                for (std::size_t k = 0; k < kNumModalities; ++k) {
                    const double z = zeta.at(r, k);
                    s += z;
                    mx = std::max(mx, z);
                    ones += z == 1.0;
                    zeros += z == 0.0;
                }
                worst_sum = std::max(worst_sum, std::abs(s - 1.0));
                simplex_bad += std::abs(s - 1.0) > kSimplexTol;
                if (v == DmaVariant::StGumbel) onehot_bad += !(ones == 1 && zeros == kNumModalities - 1);
                tau_bad += mx < prev_max[r] - kMonotoneSlack;
                prev_max[r] = mx;
            }
        }
        std::vector<double> prev_vs(kDmaDraws, 0.0);
        for (double cvs : cvs_grid) {
            DmaConfig cfg;
            cfg.variant = v;
            cfg.tau = 0.5;
            cfg.preference[kFused] = cvs;
            const Tensor zeta = dma_weights_from_relevance(eta, cfg, g);
            for (std::size_t r = 0; r < kDmaDraws; ++r) {
                cvs_bad += zeta.at(r, kFused) < prev_vs[r] - kMonotoneSlack;
                prev_vs[r] = zeta.at(r, kFused);
            }
        }
    }
    const bool ok = simplex_bad == 0 && onehot_bad == 0 && tau_bad == 0 && cvs_bad == 0;
    return {ok, fmt("%zu draws x 3 variants: max |sum-1| %.1e, simplex %zu, one-hot %zu, tau %zu, c_VS %zu violations",
                    kDmaDraws, worst_sum, simplex_bad, onehot_bad, tau_bad, cvs_bad)};
}

struct OverfitRun {
    EvalResult result;
    double seconds = 0.0;
    std::size_t epochs = 0;
};

OverfitRun overfit_run() {
    SynthSpec spec;
    spec.n_segments = kOverfitSegments;
    spec.seed = 2;
    auto segments = generate_synthetic(spec);
    for (auto& s : segments) s.split = Split::Train;
    RunConfig rc = desk_run(segments);
    rc.train.epochs = kOverfitEpochs;
    const Vocabulary vocab = vocab_from_segments(segments);
    const auto prepared = prepare_segments(segments, rc.model, vocab);
    TrainState state = init_training(rc, vocab);
    const auto t0 = Clock::now();
    run_training(state, prepared, {});
    OverfitRun run;
    run.result = evaluate(state.params, rc.model, vocab, prepared, rc.train.batch_size);
    run.seconds = seconds_since(t0);
    run.epochs = state.epoch;
    return run;
}

Outcome overfit(const OverfitRun& run) {
    const bool ok = run.result.token_accuracy >= kOverfitTokenAcc && run.result.bleu[0] >= kOverfitBleu1 &&
                    run.epochs <= kOverfitEpochs && run.seconds < kOverfitSeconds;
    return {ok, fmt("token accuracy %.3f, BLEU-1 %.1f after %zu epochs in %.1f s", run.result.token_accuracy,
                    run.result.bleu[0], run.epochs, run.seconds)};
}

Outcome attention(const OverfitRun& run) {
    std::vector<AttentionTrace> traces;
    for (const auto& g : run.result.generations) traces.push_back(g.trace);
    const AttnReport r = attn_report(traces, run.result.hypotheses);
    const double rate = r.first_position_rate(kFused);
    return {rate >= kFirstPositionRate,
            fmt("first-position V+S rate %.3f, verb V+S rate %.3f", rate, r.rate("verb", kFused))};
}

Outcome fusion_helps_verbs() {
    // Rows (i) V only, (ii) V+S concatenation, (v) AMMT + DMA of the fusion ablation.
    const std::size_t rows[] = {0, 1, 4};
    std::vector<double> verb[3], cider[3];
    for (std::uint64_t seed : {1, 2, 3}) {
        SynthSpec spec;
        spec.seed = seed;
        spec.verb_leakage = 0.0;
        spec.sensor_noise_rate = 0.1;
        const auto segments = generate_synthetic(spec);
        RunConfig base = desk_run(segments);
        base.train.seed = seed;
        base.train.epochs = kFusionEpochs;
        const Vocabulary vocab = vocab_from_segments(segments);
        const auto train = prepare_segments(filter_split(segments, Split::Train), base.model, vocab);
        const auto val = prepare_segments(filter_split(segments, Split::Val), base.model, vocab);
        const auto test = prepare_segments(filter_split(segments, Split::Test), base.model, vocab);
        const auto grid = experiment_grid("fusion-ablation", base);
        for (std::size_t i = 0; i < 3; ++i) {
            const RunConfig& cfg = grid[rows[i]].second;
            TrainState state = init_training(cfg, vocab);
            run_training(state, train, val);
            const EvalResult r = evaluate(state.params, cfg.model, vocab, test, cfg.train.batch_size);
            verb[i].push_back(100.0 * r.verb_accuracy);
            cider[i].push_back(r.cider.value_or(0.0));
            std::cerr << fmt("  seed %llu %-26s verb %.1f CIDEr-D %.1f\n", static_cast<unsigned long long>(seed),
                             grid[rows[i]].first.c_str(), verb[i].back(), cider[i].back());
        }
    }
    const double v1 = median3(verb[0]), v2 = median3(verb[1]);
    const double c2 = median3(cider[1]), c5 = median3(cider[2]);
    const bool ok = v2 >= v1 + kVerbMarginPoints && c5 >= c2;
    return {ok, fmt("median verb acc (i) %.1f, (ii) %.1f; median CIDEr-D (ii) %.1f, (v) %.1f", v1, v2, c2, c5)};
}

Outcome metric_oracles() {
    const auto corpus = oracle::ten_pair_corpus();
    double worst = 0.0;
    const auto b = bleu_1_to_5(corpus);
    for (std::size_t n = 1; n <= 5; ++n) worst = std::max(worst, std::abs(b[n - 1] - oracle::oracle_bleu(corpus, n)));
    const auto got = cider_d_per_pair(corpus);
    const auto want = oracle::oracle_cider_raw(corpus);
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));

    // Identity hypotheses: distinct references of at least four words so that
    // every n-gram order up to 4 is present.
    std::vector<EvalPair> same;
    std::set<Words> seen;
    for (const auto& p : corpus)
        if (p.references[0].size() >= 4 && seen.insert(p.references[0]).second)
            same.push_back(EvalPair{p.references[0], p.references});
    double id_bleu = 100.0, id_cider_dev = 0.0;
    for (double x : bleu_1_to_5(same)) id_bleu = std::min(id_bleu, x);
    for (double x : cider_d_per_pair(same)) id_cider_dev = std::max(id_cider_dev, std::abs(x - 10.0));
    const bool ok = got.size() == want.size() && worst <= kMetricTol && std::abs(id_bleu - 100.0) <= kMetricTol &&
                    id_cider_dev <= kMetricTol && same.size() >= 3;
    return {ok, fmt("max oracle deviation %.1e; identity min BLEU %.9f, max |CIDEr-D - 10| %.1e on %zu pairs", worst,
                    id_bleu, id_cider_dev, same.size())};
}

Outcome resampling() {
    Rng rng(8);
    double affine_err = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5);
        SensorSeq s;
        s.sample_rate_hz = 100.0;
        double t = rng.uniform(0.0, 1.0);
        for (int i = 0; i < 300; ++i) {
            s.timestamps.push_back(t);
            s.samples.push_back({a * t + b});
            t += rng.uniform(0.002, 0.02);
        }
        const double t0 = s.timestamps.front();
        const auto len = static_cast<std::size_t>(std::floor((s.timestamps.back() - t0) * 30.0 + 1e-9)) + 1;
        const Tensor y = resample_sensor(s, 30.0, len);
        for (std::size_t j = 0; j < len; ++j)
            affine_err = std::max(affine_err, std::abs(y.at(j, 0) - (a * (t0 + j / 30.0) + b)));
    }

    double sine_err = 0.0;
    for (double f : {1.0, 2.0, 3.0}) {
        SensorSeq s;
        s.sample_rate_hz = 125.0;
        for (int i = 0; i <= 1000; ++i) {
            const double t = i / 125.0;
            s.timestamps.push_back(t);
            s.samples.push_back({std::sin(2.0 * std::numbers::pi * f * t)});
        }
        const Tensor y = resample_sensor(s, 30.0, 241);
        for (std::size_t j = 0; j < 241; ++j)
            sine_err = std::max(sine_err, std::abs(y.at(j, 0) - std::sin(2.0 * std::numbers::pi * f * (j / 30.0))));
    }
    return {affine_err <= kAffineTol && sine_err < kSineTol,
            fmt("affine max error %.1e, sine (1-3 Hz, 125 -> 30 Hz) max error %.2e", affine_err, sine_err)};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(EGOCAP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "egocap_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "spec.json") << R"({"n_segments": 60, "seed": 4})";
    const std::string data = (dir / "data.jsonl").string();
    if (run_cli("gen-data --spec " + (dir / "spec.json").string() + " --out " + data) != 0)
        return {false, "gen-data failed"};
    const std::string flags = " --seed 7 --epochs 6 --quiet --data " + data + " --out ";
    const fs::path a = dir / "a", b = dir / "b";
    if (run_cli("train" + flags + a.string()) != 0 || run_cli("train" + flags + b.string()) != 0)
        return {false, "train failed"};
    const bool ckpt = read_file(a / "checkpoint.bin") == read_file(b / "checkpoint.bin");
    const bool log = read_file(a / "train_log.jsonl") == read_file(b / "train_log.jsonl");
    const bool cfg = read_file(a / "run_config.json") == read_file(b / "run_config.json");
    return {ckpt && log && cfg, fmt("checkpoint %s, log %s, run config %s", ckpt ? "identical" : "DIFFERS",
                                    log ? "identical" : "DIFFERS", cfg ? "identical" : "DIFFERS")};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](const char* name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    };

    report("gradient-correctness", gradient_correctness);
    report("ammt-identity", ammt_identity);
    report("dma-contracts", dma_contracts);
    OverfitRun run;
    std::string overfit_error;
    try {
        run = overfit_run();
    } catch (const std::exception& e) {
        overfit_error = e.what();
    }
    report("overfit", [&]() -> Outcome {
        if (!overfit_error.empty()) return {false, "exception: " + overfit_error};
        return overfit(run);
    });
    report("fusion-helps-verbs", fusion_helps_verbs);
    report("metric-oracles", metric_oracles);
    report("resampling", resampling);
    report("determinism", determinism);
    report("attention-analysis", [&]() -> Outcome {
        if (!overfit_error.empty()) return {false, "exception: " + overfit_error};
        return attention(run);
    });
    std::cout << (failures == 0 ? "all acceptance criteria passed" : fmt("%d criteria failed", failures)) << std::endl;
    return failures == 0 ? 0 : 1;
}
