#include "egocap/training.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "egocap/dataset.hpp"
#include "egocap/errors.hpp"
#include "egocap/ops.hpp"

namespace egocap {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

AdamState adam_init(std::span<const Tensor> params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.numel(), 0.0);
        s.v.emplace_back(p.numel(), 0.0);
    }
    return s;
}

void adam_step(std::span<const Tensor> params, AdamState& state, double lr, const AdamConfig& cfg) {
    if (state.m.size() != params.size()) {
        throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                             std::to_string(params.size()));
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != p.numel()) throw DimensionError("adam_step: moment size mismatch at tensor " + std::to_string(i));
        const auto g = p.grad();
        auto w = p.mutable_values();
        for (std::size_t j = 0; j < m.size(); ++j) {
            const double gj = g.empty() ? 0.0 : g[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.epsilon);
        }
    }
}

double global_grad_norm(std::span<const Tensor> params) {
    double total = 0.0;
    for (const auto& p : params)
        for (double g : p.grad()) total += g * g;
    return std::sqrt(total);
}

double clip_grad_norm(std::span<const Tensor> params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (max_norm > 0.0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (const auto& p : params) {
            if (!p.has_grad()) continue;
            for (double& g : p.grad_accumulator()) g *= f;
        }
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train config: batch_size must be positive");
    if (epochs == 0) throw ConfigError("train config: epochs must be positive");
    if (lr_schedule.empty() || lr_schedule.front().from_epoch != 0) {
        throw ConfigError("train config: lr schedule must start at epoch 0");
    }
    for (std::size_t i = 0; i < lr_schedule.size(); ++i) {
        if (!(lr_schedule[i].lr > 0.0)) throw ConfigError("train config: learning rates must be positive");
        if (i > 0 && lr_schedule[i].from_epoch <= lr_schedule[i - 1].from_epoch) {
            throw ConfigError("train config: lr schedule epochs must increase");
        }
    }
    if (!(p_tf_start >= 0.0 && p_tf_start <= 1.0 && p_tf_end >= 0.0 && p_tf_end <= 1.0)) {
        throw ConfigError("train config: teacher forcing probabilities must lie in [0, 1]");
    }
    if (p_tf_end > p_tf_start) throw ConfigError("train config: teacher forcing probability must not increase");
    if (grad_clip < 0.0) throw ConfigError("train config: grad_clip must be non-negative");
    if (eval_every == 0) throw ConfigError("train config: eval_every must be positive");
}

double TrainConfig::lr_at(std::size_t epoch) const {
    double lr = lr_schedule.front().lr;
    for (const auto& s : lr_schedule)
        if (epoch >= s.from_epoch) lr = s.lr;
    return lr;
}

double TrainConfig::p_tf_at(std::size_t epoch) const {
    if (epochs <= 1) return p_tf_start;
    const double f = std::min(1.0, static_cast<double>(epoch) / static_cast<double>(epochs - 1));
    return p_tf_start + (p_tf_end - p_tf_start) * f;
}

TrainConfig train_preset(const std::string& name) {
    TrainConfig c;
    if (name == "desk") return c;
    if (name == "paper") {
        c.batch_size = 100;
        c.epochs = 450;
        c.lr_schedule = {{0, 3e-4}, {300, 1e-4}, {400, 5e-5}};
        return c;
    }
    throw ConfigError("unknown preset '" + name + "' (expected desk | paper)");
}

json train_config_to_json(const TrainConfig& c) {
    json schedule = json::array();
    for (const auto& s : c.lr_schedule) schedule.push_back({{"from_epoch", s.from_epoch}, {"lr", s.lr}});
    return json{{"batch_size", c.batch_size}, {"epochs", c.epochs},         {"lr_schedule", schedule},
                {"p_tf_start", c.p_tf_start}, {"p_tf_end", c.p_tf_end},     {"grad_clip", c.grad_clip},
                {"seed", c.seed},             {"patience", c.patience},     {"eval_every", c.eval_every}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    try {
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.epochs = j.at("epochs").get<std::size_t>();
        c.lr_schedule.clear();
        for (const auto& s : j.at("lr_schedule")) {
            c.lr_schedule.push_back({s.at("from_epoch").get<std::size_t>(), s.at("lr").get<double>()});
        }
        c.p_tf_start = j.at("p_tf_start").get<double>();
        c.p_tf_end = j.at("p_tf_end").get<double>();
        c.grad_clip = j.at("grad_clip").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.patience = j.at("patience").get<std::size_t>();
        c.eval_every = j.at("eval_every").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

json RunConfig::to_json() const {
    return json{{"model", model_config_to_json(model)}, {"train", train_config_to_json(train)}, {"data", data_path}};
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig r;
    try {
        r.model = model_config_from_json(j.at("model"));
        r.train = train_config_from_json(j.at("train"));
        r.data_path = j.at("data").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    return r;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string RunConfig::hash() const { return fnv1a_hex(to_json().dump()); }

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainState init_training(const RunConfig& config, const Vocabulary& vocab) {
    config.model.validate();
    config.train.validate();
    TrainState s;
    s.config = config;
    s.vocab = vocab;
    Rng root(config.train.seed);
    Rng init_rng = root.split();
    s.params = init_model(config.model, vocab.size(), init_rng);
    s.adam = adam_init(s.params.tensors());
    s.rng = root.split();
    return s;
}

ModelConfig with_data_dims(ModelConfig cfg, std::span<const Segment> segments) {
    if (segments.empty()) throw DataError("dataset is empty");
    const auto& s = segments.front();
    cfg.feature_dim = s.frames.features.front().size();
    cfg.sensor_channels = s.sensors.samples.front().size();
    if (cfg.preset == "paper" && cfg.sensor_channels != 63) {
        throw DimensionError("paper preset expects 63 sensor channels, dataset has " +
                             std::to_string(cfg.sensor_channels));
    }
    return cfg;
}

Vocabulary vocab_from_segments(std::span<const Segment> segments) {
    std::vector<std::string> corpus;
    for (const auto& s : segments)
        if (s.split == Split::Train) corpus.push_back(s.caption);
    if (corpus.empty()) throw DataError("no train split captions to build a vocabulary from");
    return Vocabulary::build(corpus);
}

namespace {

std::vector<Batch> make_batches(std::span<const PreparedSegment> data, std::span<const std::size_t> order,
                                std::size_t batch_size) {
    std::vector<Batch> out;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        Batch b;
        for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) b.push_back(&data[order[j]]);
        out.push_back(std::move(b));
    }
    return out;
}

std::string param_norms(const ModelParams& p) {
    std::string out;
    for (const auto& [name, t] : p.named()) {
        double n = 0.0;
        for (double x : t.values()) n += x * x;
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s%s=%.6g", out.empty() ? "" : ", ", name.c_str(), std::sqrt(n));
        out += buf;
    }
    return out;
}

void append_line(const std::filesystem::path& path, const std::string& line) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw DataError("cannot append to " + path.string());
    out << line << '\n';
}

}  // namespace

EpochMetrics train_epoch(TrainState& state, std::span<const PreparedSegment> train) {
    if (train.empty()) throw DataError("train_epoch: empty training split");
    const auto& cfg = state.config;
    EpochMetrics m;
    m.epoch = state.epoch + 1;
    m.lr = cfg.train.lr_at(state.epoch);
    m.p_tf = cfg.train.p_tf_at(state.epoch);

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    state.rng.shuffle(order);
    const auto batches = make_batches(train, order, cfg.train.batch_size);

    const auto params = state.params.tensors();
    double loss_sum = 0.0, norm_sum = 0.0;
    std::size_t tokens = 0, correct = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        for (auto p : params) p.zero_grad();
        Tape tape;
        LossResult r;
        {
            TapeScope scope(tape);
            LossOptions opts;
            opts.teacher_forcing = m.p_tf;
            r = caption_loss(batches[b], state.params, cfg.model, opts, state.rng);
        }
        const double loss = r.loss.item();
        if (!std::isfinite(loss)) {
            throw NumericError("epoch " + std::to_string(m.epoch) + " batch " + std::to_string(b) +
                               ": non-finite loss; parameter norms: " + param_norms(state.params));
        }
        tape.backward(r.loss);
        norm_sum += clip_grad_norm(params, cfg.train.grad_clip);
        adam_step(params, state.adam, m.lr);
        loss_sum += loss * static_cast<double>(r.tokens);
        tokens += r.tokens;
        correct += r.correct;
    }
    for (auto p : params) p.zero_grad();
    m.loss = loss_sum / static_cast<double>(tokens);
    m.token_accuracy = static_cast<double>(correct) / static_cast<double>(tokens);
    m.grad_norm = norm_sum / static_cast<double>(batches.size());
    ++state.epoch;
    return m;
}

EvalResult evaluate(const ModelParams& params, const ModelConfig& cfg, const Vocabulary& vocab,
                    std::span<const PreparedSegment> data, std::size_t batch_size,
                    std::optional<GenerateOptions> options) {
    if (data.empty()) throw DataError("evaluate: empty split");
    if (batch_size == 0) throw ConfigError("evaluate: batch_size must be positive");
    GenerateOptions gen;
    gen.max_len = cfg.max_words;
    if (options) gen = *options;

    NoGradScope no_grad;
    EvalResult r;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng unused(0);
    double loss_sum = 0.0;
    std::size_t tokens = 0, correct = 0, verbs_right = 0;
    for (const auto& batch : make_batches(data, order, batch_size)) {
        LossOptions lo;
        lo.sample_noise = false;
        const LossResult l = caption_loss(batch, params, cfg, lo, unused);
        loss_sum += l.loss.item() * static_cast<double>(l.tokens);
        tokens += l.tokens;
        correct += l.correct;
        for (auto& g : caption_batch(batch, params, cfg, gen)) r.generations.push_back(std::move(g));
    }
    std::vector<EvalPair> pairs;
    for (std::size_t i = 0; i < data.size(); ++i) {
        Words hyp = vocab.words(r.generations[i].tokens);
        Words ref = tokenize(data[i].caption);
        if (!hyp.empty() && !ref.empty() && hyp.front() == ref.front()) ++verbs_right;
        pairs.push_back(EvalPair{hyp, {ref}});
        r.hypotheses.push_back(std::move(hyp));
        r.references.push_back(std::move(ref));
    }
    r.loss = loss_sum / static_cast<double>(tokens);
    r.token_accuracy = static_cast<double>(correct) / static_cast<double>(tokens);
    r.verb_accuracy = static_cast<double>(verbs_right) / static_cast<double>(data.size());
    r.bleu = bleu_1_to_5(pairs);
    try {
        r.cider = cider_d(pairs);
    } catch (const DataError&) {
        r.cider.reset();
    }
    return r;
}

std::string epoch_log_line(const EpochMetrics& m, const std::string& config_hash) {
    json j{{"epoch", m.epoch},     {"loss", m.loss},           {"token_accuracy", m.token_accuracy},
           {"lr", m.lr},           {"p_tf", m.p_tf},           {"grad_norm", m.grad_norm},
           {"config_hash", config_hash}};
    j["val_cider"] = m.val_cider ? json(*m.val_cider) : json(nullptr);
    j["val_bleu4"] = m.val_bleu4 ? json(*m.val_bleu4) : json(nullptr);
    return j.dump();
}

void run_training(TrainState& state, std::span<const PreparedSegment> train, std::span<const PreparedSegment> val,
                  const TrainOutputs& outputs) {
    const auto& tc = state.config.train;
    const std::string hash = state.config.hash();
    const bool early_stopping = tc.patience > 0 && !val.empty();
    while (state.epoch < tc.epochs && !state.stopped) {
        EpochMetrics m = train_epoch(state, train);
        if (early_stopping && (state.epoch % tc.eval_every == 0 || state.epoch == tc.epochs)) {
            const EvalResult ev = evaluate(state.params, state.config.model, state.vocab, val, tc.batch_size);
            m.val_cider = ev.cider;
            m.val_bleu4 = ev.bleu[3];
            const double score = ev.cider.value_or(ev.bleu[3]);
            if (score > state.best_score) {
                state.best_score = score;
                state.best_epoch = state.epoch;
                state.best_params = state.params.clone();
            }
            state.since_best = state.epoch - state.best_epoch;
            if (state.since_best >= tc.patience) state.stopped = true;
        }
        if (!outputs.log.empty()) append_line(outputs.log, epoch_log_line(m, hash));
        if (!outputs.checkpoint.empty()) save_checkpoint(state, outputs.checkpoint);
        if (outputs.on_epoch) outputs.on_epoch(m);
    }
    if (state.best_params) {
        copy_params(*state.best_params, state.params);
        if (!outputs.checkpoint.empty()) save_checkpoint(state, outputs.checkpoint);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointSchema = "egocap-checkpoint/1";

void append_doubles(std::string& out, std::span<const double> v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");
    const auto* p = reinterpret_cast<const char*>(v.data());
    out.append(p, v.size() * sizeof(double));
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
    const auto named = state.params.named();
    json tensors = json::array();
    for (const auto& [name, t] : named) tensors.push_back({{"name", name}, {"shape", t.shape()}});
    json sections = {"params", "adam_m", "adam_v"};
    if (state.best_params) sections.push_back("best");

    json header{{"schema", kCheckpointSchema},
                {"config_hash", state.config.hash()},
                {"config", state.config.to_json()},
                {"vocab", state.vocab.tokens()},
                {"epoch", state.epoch},
                {"rng", state.rng.state()},
                {"adam_step", state.adam.step},
                {"early_stop",
                 {{"best_score", state.best_params ? json(state.best_score) : json(nullptr)},
                  {"best_epoch", state.best_epoch},
                  {"since_best", state.since_best},
                  {"stopped", state.stopped}}},
                {"tensors", tensors},
                {"sections", sections}};

    std::string out = header.dump();
    out.push_back('\n');
    for (const auto& [name, t] : named) append_doubles(out, t.values());
    for (const auto& m : state.adam.m) append_doubles(out, m);
    for (const auto& v : state.adam.v) append_doubles(out, v);
    if (state.best_params)
        for (const auto& [name, t] : state.best_params->named()) append_doubles(out, t.values());
    write_file_atomic(path, out);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw DataError("checkpoint " + path.string() + ": missing header line");
    json header;
    try {
        header = json::parse(bytes.substr(0, nl));
    } catch (const json::parse_error& e) {
        throw DataError("checkpoint " + path.string() + ": malformed header (" + e.what() + ")");
    }
    TrainState s;
    try {
        if (header.at("schema").get<std::string>() != kCheckpointSchema) {
            throw DataError("checkpoint " + path.string() + ": unsupported schema " + header.at("schema").dump());
        }
        const RunConfig cfg = RunConfig::from_json(header.at("config"));
        if (cfg.hash() != header.at("config_hash").get<std::string>()) {
            throw DataError("checkpoint " + path.string() + ": config hash mismatch");
        }
        s = init_training(cfg, Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>()));
        s.epoch = header.at("epoch").get<std::size_t>();
        s.rng.restore(header.at("rng").get<std::string>());
        s.adam.step = header.at("adam_step").get<std::uint64_t>();
        const auto& es = header.at("early_stop");
        s.best_epoch = es.at("best_epoch").get<std::size_t>();
        s.since_best = es.at("since_best").get<std::size_t>();
        s.stopped = es.at("stopped").get<bool>();
        const auto sections = header.at("sections").get<std::vector<std::string>>();
        const bool has_best = std::find(sections.begin(), sections.end(), "best") != sections.end();
        if (has_best) {
            s.best_score = es.at("best_score").get<double>();
            s.best_params = s.params.clone();
        }

        const auto named = s.params.named();
        const auto& listed = header.at("tensors");
        if (listed.size() != named.size()) throw DataError("checkpoint " + path.string() + ": tensor count mismatch");
        std::size_t total = 0;
        for (std::size_t i = 0; i < named.size(); ++i) {
            if (listed[i].at("name").get<std::string>() != named[i].first ||
                listed[i].at("shape").get<Shape>() != named[i].second.shape()) {
                throw DataError("checkpoint " + path.string() + ": tensor '" + named[i].first +
                                "' does not match the configured model");
            }
            total += named[i].second.numel();
        }
        const std::size_t blocks = has_best ? 4 : 3;
        if (bytes.size() - nl - 1 != blocks * total * sizeof(double)) {
            throw DataError("checkpoint " + path.string() + ": payload size does not match header");
        }
        const char* cursor = bytes.data() + nl + 1;
        auto read_into = [&](std::span<double> dst) {
            std::memcpy(dst.data(), cursor, dst.size() * sizeof(double));
            cursor += dst.size() * sizeof(double);
        };
        for (const auto& [name, t] : named) {
            Tensor target = t;
            read_into(target.mutable_values());
        }
        for (auto& m : s.adam.m) read_into(m);
        for (auto& v : s.adam.v) read_into(v);
        if (has_best) {
            for (const auto& [name, t] : s.best_params->named()) {
                Tensor target = t;
                read_into(target.mutable_values());
            }
        }
    } catch (const json::exception& e) {
        throw DataError("checkpoint " + path.string() + ": " + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, RunConfig>> experiment_grid(const std::string& id, const RunConfig& base) {
    std::vector<std::pair<std::string, RunConfig>> cells;
    auto cell = [&](std::string label, auto&& edit) {
        RunConfig c = base;
        edit(c);
        cells.emplace_back(std::move(label), std::move(c));
    };
    using RM = RepresentationMode;
    using FM = FusionMode;
    auto set = [](RM rep, FM fusion) {
        return [=](RunConfig& c) {
            c.model.decoder.representation = rep;
            c.model.fusion = fusion;
        };
    };
    if (id == "fusion-ablation") {
        cell("(i) vision", set(RM::FixedV, FM::Concat));
        cell("(ii) vision+sensor", set(RM::FixedVS, FM::Concat));
        cell("(iii) asymmetric fusion", set(RM::FixedVS, FM::LinearOnS));
        cell("(iv) dynamic attention", set(RM::Dynamic, FM::Concat));
        cell("(v) full", set(RM::Dynamic, FM::LinearOnS));
    } else if (id == "ammt-ablation") {
        cell("linear: none", set(RM::Dynamic, FM::Concat));
        cell("linear: h_V and h_S", set(RM::Dynamic, FM::Symmetric));
        cell("linear: h_V", set(RM::Dynamic, FM::LinearOnV));
        cell("linear: h_S", set(RM::Dynamic, FM::LinearOnS));
    } else if (id == "dma-variant") {
        for (auto v : {DmaVariant::Softmax, DmaVariant::StGumbel, DmaVariant::Gumbel}) {
            cell(dma_variant_name(v), [v](RunConfig& c) { c.model.decoder.dma.variant = v; });
        }
    } else if (id == "tau-sweep") {
        for (double tau : {1.0, 0.5, 0.1, 0.05, 0.01, 0.001}) {
            char label[32];
            std::snprintf(label, sizeof label, "tau=%g", tau);
            cell(label, [tau](RunConfig& c) { c.model.decoder.dma.tau = tau; });
        }
    } else if (id == "cvs-sweep") {
        for (double cvs : {0.5, 1.0, 1.5, 2.0, 2.5}) {
            char label[32];
            std::snprintf(label, sizeof label, "c_VS=%g", cvs);
            cell(label, [cvs](RunConfig& c) { c.model.decoder.dma.preference[kFused] = cvs; });
        }
    } else {
        throw ConfigError("unknown experiment '" + id +
                          "' (expected fusion-ablation | ammt-ablation | dma-variant | tau-sweep | cvs-sweep)");
    }
    return cells;
}

ExperimentReport run_experiment(const std::string& id, const RunConfig& base, std::span<const Segment> segments,
                                const std::function<void(const std::string&)>& progress) {
    auto cells = experiment_grid(id, base);
    const auto train_segs = filter_split(segments, Split::Train);
    const auto val_segs = filter_split(segments, Split::Val);
    const auto test_segs = filter_split(segments, Split::Test);
    if (train_segs.empty() || test_segs.empty()) throw DataError("experiment needs nonempty train and test splits");
    const Vocabulary vocab = vocab_from_segments(segments);
    const ModelConfig dims = with_data_dims(base.model, segments);
    const auto train = prepare_segments(train_segs, dims, vocab);
    const auto val = prepare_segments(val_segs, dims, vocab);
    const auto test = prepare_segments(test_segs, dims, vocab);

    ExperimentReport report;
    report.id = id;
    for (auto& [label, cfg] : cells) {
        cfg.model.feature_dim = dims.feature_dim;
        cfg.model.sensor_channels = dims.sensor_channels;
        if (progress) progress(label);
        TrainState state = init_training(cfg, vocab);
        run_training(state, train, val);
        report.rows.push_back({label, cfg, evaluate(state.params, cfg.model, vocab, test, cfg.train.batch_size)});
    }
    return report;
}

std::string ExperimentReport::render() const {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-26s %6s %6s %6s %6s %6s %8s %8s\n", id.c_str(), "B-1", "B-2", "B-3", "B-4",
                  "B-5", "CIDEr-D", "verb%");
    out += line;
    for (const auto& r : rows) {
        const auto& b = r.result.bleu;
        const double c = r.result.cider.value_or(std::nan(""));
        std::snprintf(line, sizeof line, "%-26s %6.1f %6.1f %6.1f %6.1f %6.1f %8.1f %8.1f\n", r.label.c_str(), b[0],
                      b[1], b[2], b[3], b[4], c, 100.0 * r.result.verb_accuracy);
        out += line;
    }
    return out;
}

json ExperimentReport::to_json() const {
    json rows_j = json::array();
    for (const auto& r : rows) {
        rows_j.push_back({{"label", r.label},
                          {"config_hash", r.config.hash()},
                          {"config", r.config.to_json()},
                          {"bleu", r.result.bleu},
                          {"cider_d", r.result.cider ? json(*r.result.cider) : json(nullptr)},
                          {"verb_accuracy", r.result.verb_accuracy},
                          {"token_accuracy", r.result.token_accuracy},
                          {"loss", r.result.loss}});
    }
    return {{"experiment", id}, {"rows", rows_j}};
}

}  // namespace egocap
