#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "egocap/segment.hpp"

namespace egocap {

// A second noun phrase location, e.g. {"drawer", "from"} renders "from the drawer".
struct SynthPlace {
    std::string noun;
    std::string preposition;

    bool operator==(const SynthPlace&) const = default;
};

struct SynthSpec {
    std::size_t n_segments = 600;
    std::uint64_t seed = 1;

    std::vector<std::string> verbs{"taking", "opening", "stirring", "cutting",
                                   "pouring", "shaking", "putting",  "turning"};
    std::vector<std::string> objects{"fork", "knife", "spoon", "egg", "cup",
                                     "plate", "oil", "bag", "lid", "box"};
    std::vector<SynthPlace> places{{"drawer", "from"}, {"bowl", "into"}, {"pan", "into"},
                                   {"counter", "on"},  {"fridge", "from"}};

    std::size_t feature_dim = 32;
    std::size_t sensor_channels = 63;
    std::size_t channel_group = 9;  // channels per simulated body location
    double sensor_rate_hz = 50.0;
    double frame_rate_hz = 10.0;
    double min_duration_s = 3.0;
    double max_duration_s = 5.0;

    double sensor_noise_std = 0.3;
    double sensor_noise_rate = 0.1;  // per-segment probability of a spurious burst
    double burst_std = 3.0;
    double visual_noise_std = 0.3;
    double visual_blur_rate = 0.0;   // per-frame probability of corruption
    double verb_leakage = 0.0;       // scale of the verb prototype mixed into frames
    double second_object_rate = 0.5;

    // ConfigError on rates outside [0, 1], empty verb / object inventories
    // or non-positive sizes.
    void validate() const;

    bool operator==(const SynthSpec&) const = default;
};

nlohmann::json synth_spec_to_json(const SynthSpec& spec);
// Missing keys keep their defaults; unknown keys are a ConfigError.
SynthSpec synth_spec_from_json(const nlohmann::json& j);

// Captions read "verb a object" optionally followed by "preposition the place".
// Verbs are only identifiable from the sensor stream unless verb_leakage > 0;
// nouns only from the frame features. Pure function of `spec`.
std::vector<Segment> generate_synthetic(const SynthSpec& spec);

// Index of the verb / object named in a caption produced by generate_synthetic.
std::size_t synth_verb_index(const SynthSpec& spec, const std::string& caption);

}  // namespace egocap
