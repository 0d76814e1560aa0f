#include "egocap/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "egocap/errors.hpp"
#include "egocap/rng.hpp"
#include "egocap/vocab.hpp"

namespace egocap {

using nlohmann::json;

namespace {

void check_rate(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError(std::string("synth spec: ") + name + " = " + std::to_string(v) + " outside [0, 1]");
    }
}

double quantize(double x) { return std::round(x * 1e4) / 1e4; }

struct VerbSignature {
    std::size_t primary_group = 0;
    std::size_t secondary_group = 0;
    double amplitude = 1.0;
    double frequency_hz = 1.0;
    std::vector<double> offset;    // per channel
    std::vector<double> visual;    // leakage prototype, feature_dim
};

struct Prototypes {
    std::vector<VerbSignature> verbs;
    std::vector<std::vector<double>> objects;
    std::vector<std::vector<double>> places;
};

Prototypes draw_prototypes(const SynthSpec& spec, Rng& rng) {
    Prototypes p;
    const std::size_t groups = (spec.sensor_channels + spec.channel_group - 1) / spec.channel_group;
    for (std::size_t v = 0; v < spec.verbs.size(); ++v) {
        VerbSignature s;
        s.primary_group = v % groups;
        s.secondary_group = groups > 1 ? (s.primary_group + 1 + (v / groups) + v % 3) % groups : 0;
        if (groups > 1 && s.secondary_group == s.primary_group) s.secondary_group = (s.primary_group + 1) % groups;
        s.amplitude = rng.uniform(1.0, 2.0);
        s.frequency_hz = 0.6 + 0.4 * static_cast<double>(v) + rng.uniform(0.0, 0.2);
        s.offset.resize(spec.sensor_channels);
        for (auto& o : s.offset) o = rng.normal(0.0, 0.6);
        s.visual.resize(spec.feature_dim);
        for (auto& x : s.visual) x = rng.normal();
        p.verbs.push_back(std::move(s));
    }
    auto proto = [&] {
        std::vector<double> x(spec.feature_dim);
        for (auto& e : x) e = rng.normal();
        return x;
    };
    for (std::size_t i = 0; i < spec.objects.size(); ++i) p.objects.push_back(proto());
    for (std::size_t i = 0; i < spec.places.size(); ++i) p.places.push_back(proto());
    return p;
}

SensorSeq render_sensors(const SynthSpec& spec, const VerbSignature& sig, double duration, Rng& rng) {
    SensorSeq seq;
    seq.sample_rate_hz = spec.sensor_rate_hz;
    const auto n = static_cast<std::size_t>(std::floor(duration * spec.sensor_rate_hz)) + 1;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    bool burst = rng.bernoulli(spec.sensor_noise_rate);
    std::size_t burst_begin = 0, burst_end = 0, burst_group = 0;
    if (burst) {
        const auto len = static_cast<std::size_t>(0.5 * spec.sensor_rate_hz);
        burst_begin = rng.index(n);
        burst_end = std::min(n, burst_begin + len);
        burst_group = rng.index((spec.sensor_channels + spec.channel_group - 1) / spec.channel_group);
    }

    seq.timestamps.resize(n);
    seq.samples.assign(n, std::vector<double>(spec.sensor_channels));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / spec.sensor_rate_hz;
        seq.timestamps[i] = quantize(t);
        for (std::size_t ch = 0; ch < spec.sensor_channels; ++ch) {
            const std::size_t g = ch / spec.channel_group;
            double amp = 0.0;
            if (g == sig.primary_group) amp = sig.amplitude;
            else if (g == sig.secondary_group) amp = 0.5 * sig.amplitude;
            const double wave =
                std::sin(2.0 * std::numbers::pi * sig.frequency_hz * t + phase + 0.4 * static_cast<double>(ch % spec.channel_group));
            double x = sig.offset[ch] + amp * wave + rng.normal(0.0, spec.sensor_noise_std);
            if (burst && i >= burst_begin && i < burst_end && g == burst_group) x += rng.normal(0.0, spec.burst_std);
            seq.samples[i][ch] = quantize(x);
        }
    }
    return seq;
}

FrameFeatureSeq render_frames(const SynthSpec& spec, const Prototypes& protos, std::size_t verb, std::size_t object,
                              int place, double duration, Rng& rng) {
    FrameFeatureSeq seq;
    const auto n = static_cast<std::size_t>(std::floor(duration * spec.frame_rate_hz)) + 1;
    const auto switch_at = static_cast<std::size_t>(0.6 * static_cast<double>(n));
    seq.timestamps.resize(n);
    seq.features.assign(n, std::vector<double>(spec.feature_dim));
    for (std::size_t i = 0; i < n; ++i) {
        seq.timestamps[i] = quantize(static_cast<double>(i) / spec.frame_rate_hz);
        const auto& proto = place >= 0 && i >= switch_at ? protos.places[static_cast<std::size_t>(place)]
                                                          : protos.objects[object];
        const bool blurred = rng.bernoulli(spec.visual_blur_rate);
        for (std::size_t d = 0; d < spec.feature_dim; ++d) {
            double x = proto[d] + spec.verb_leakage * protos.verbs[verb].visual[d] +
                       rng.normal(0.0, spec.visual_noise_std);
            if (blurred) x = 0.3 * x + rng.normal();
            seq.features[i][d] = quantize(x);
        }
    }
    return seq;
}

}  // namespace

void SynthSpec::validate() const {
    if (n_segments == 0) throw ConfigError("synth spec: n_segments must be positive");
    if (verbs.empty()) throw ConfigError("synth spec: verb inventory is empty");
    if (objects.empty()) throw ConfigError("synth spec: object inventory is empty");
    if (feature_dim == 0 || sensor_channels == 0 || channel_group == 0) {
        throw ConfigError("synth spec: feature_dim, sensor_channels and channel_group must be positive");
    }
    if (!(sensor_rate_hz > 0.0) || !(frame_rate_hz > 0.0)) throw ConfigError("synth spec: rates must be positive");
    if (!(min_duration_s > 0.0) || !(max_duration_s >= min_duration_s)) {
        throw ConfigError("synth spec: need 0 < min_duration_s <= max_duration_s");
    }
    if (sensor_noise_std < 0.0 || visual_noise_std < 0.0 || burst_std < 0.0 || verb_leakage < 0.0) {
        throw ConfigError("synth spec: noise scales must be non-negative");
    }
    check_rate(sensor_noise_rate, "sensor_noise_rate");
    check_rate(visual_blur_rate, "visual_blur_rate");
    check_rate(second_object_rate, "second_object_rate");
    for (const auto& w : verbs)
        if (tokenize(w).size() != 1) throw ConfigError("synth spec: verb '" + w + "' is not a single token");
    for (const auto& w : objects)
        if (tokenize(w).size() != 1) throw ConfigError("synth spec: object '" + w + "' is not a single token");
    for (const auto& p : places) {
        if (tokenize(p.noun).size() != 1 || tokenize(p.preposition).size() != 1) {
            throw ConfigError("synth spec: place '" + p.preposition + " " + p.noun + "' is not two tokens");
        }
    }
}

json synth_spec_to_json(const SynthSpec& s) {
    json places = json::array();
    for (const auto& p : s.places) places.push_back({{"noun", p.noun}, {"preposition", p.preposition}});
    return json{{"n_segments", s.n_segments},
                {"seed", s.seed},
                {"verbs", s.verbs},
                {"objects", s.objects},
                {"places", places},
                {"feature_dim", s.feature_dim},
                {"sensor_channels", s.sensor_channels},
                {"channel_group", s.channel_group},
                {"sensor_rate_hz", s.sensor_rate_hz},
                {"frame_rate_hz", s.frame_rate_hz},
                {"min_duration_s", s.min_duration_s},
                {"max_duration_s", s.max_duration_s},
                {"sensor_noise_std", s.sensor_noise_std},
                {"sensor_noise_rate", s.sensor_noise_rate},
                {"burst_std", s.burst_std},
                {"visual_noise_std", s.visual_noise_std},
                {"visual_blur_rate", s.visual_blur_rate},
                {"verb_leakage", s.verb_leakage},
                {"second_object_rate", s.second_object_rate}};
}

SynthSpec synth_spec_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("synth spec: expected a JSON object");
    SynthSpec s;
    const json defaults = synth_spec_to_json(s);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!defaults.contains(it.key())) throw ConfigError("synth spec: unknown key '" + it.key() + "'");
    }
    try {
        auto get = [&](const char* key, auto& out) {
            if (j.contains(key)) j.at(key).get_to(out);
        };
        get("n_segments", s.n_segments);
        get("seed", s.seed);
        get("verbs", s.verbs);
        get("objects", s.objects);
        if (j.contains("places")) {
            s.places.clear();
            for (const auto& p : j.at("places")) {
                s.places.push_back({p.at("noun").get<std::string>(), p.at("preposition").get<std::string>()});
            }
        }
        get("feature_dim", s.feature_dim);
        get("sensor_channels", s.sensor_channels);
        get("channel_group", s.channel_group);
        get("sensor_rate_hz", s.sensor_rate_hz);
        get("frame_rate_hz", s.frame_rate_hz);
        get("min_duration_s", s.min_duration_s);
        get("max_duration_s", s.max_duration_s);
        get("sensor_noise_std", s.sensor_noise_std);
        get("sensor_noise_rate", s.sensor_noise_rate);
        get("burst_std", s.burst_std);
        get("visual_noise_std", s.visual_noise_std);
        get("visual_blur_rate", s.visual_blur_rate);
        get("verb_leakage", s.verb_leakage);
        get("second_object_rate", s.second_object_rate);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::vector<Segment> generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    Rng root(spec.seed);
    Rng proto_rng = root.split();
    Rng seg_rng = root.split();
    Rng split_rng = root.split();
    const Prototypes protos = draw_prototypes(spec, proto_rng);

    std::vector<Segment> out;
    out.reserve(spec.n_segments);
    for (std::size_t i = 0; i < spec.n_segments; ++i) {
        Rng rng = seg_rng.split();
        const std::size_t verb = rng.index(spec.verbs.size());
        const std::size_t object = rng.index(spec.objects.size());
        int place = -1;
        if (!spec.places.empty() && rng.bernoulli(spec.second_object_rate)) {
            place = static_cast<int>(rng.index(spec.places.size()));
        }
        const double duration = rng.uniform(spec.min_duration_s, spec.max_duration_s);

        Segment s;
        char id[32];
        std::snprintf(id, sizeof id, "seg-%05zu", i + 1);
        s.id = id;
        s.caption = spec.verbs[verb] + " a " + spec.objects[object];
        if (place >= 0) {
            const auto& p = spec.places[static_cast<std::size_t>(place)];
            s.caption += " " + p.preposition + " the " + p.noun;
        }
        s.sensors = render_sensors(spec, protos.verbs[verb], duration, rng);
        s.frames = render_frames(spec, protos, verb, object, place, duration, rng);
        out.push_back(std::move(s));
    }

    std::vector<std::size_t> order(out.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    split_rng.shuffle(order);
    const std::size_t n_train = out.size() * 60 / 100;
    const std::size_t n_val = out.size() * 15 / 100;
    for (std::size_t r = 0; r < order.size(); ++r) {
        out[order[r]].split = r < n_train ? Split::Train : r < n_train + n_val ? Split::Val : Split::Test;
    }
    return out;
}

std::size_t synth_verb_index(const SynthSpec& spec, const std::string& caption) {
    const auto words = tokenize(caption);
    for (std::size_t v = 0; !words.empty() && v < spec.verbs.size(); ++v)
        if (spec.verbs[v] == words.front()) return v;
    throw DataError("caption '" + caption + "' does not start with a known verb");
}

}  // namespace egocap
