#pragma once

#include <string>
#include <vector>

namespace egocap {

// Precomputed per-frame descriptors of one clip.
struct FrameFeatureSeq {
    std::vector<std::vector<double>> features;  // K' rows of width D_feat
    std::vector<double> timestamps;             // seconds, non-decreasing

    bool operator==(const FrameFeatureSeq&) const = default;
};

// Raw IMU stream: one row per sample, 63 channels (9 axes x 7 body
// locations) under the paper preset.
struct SensorSeq {
    std::vector<std::vector<double>> samples;
    std::vector<double> timestamps;  // seconds, strictly increasing
    double sample_rate_hz = 0.0;

    bool operator==(const SensorSeq&) const = default;
};

enum class Split { Train, Val, Test };

const char* split_name(Split split) noexcept;
Split parse_split(const std::string& name);

// One annotated activity clip.
struct Segment {
    std::string id;
    FrameFeatureSeq frames;
    SensorSeq sensors;
    std::string caption;
    Split split = Split::Train;

    bool operator==(const Segment&) const = default;
};

}  // namespace egocap
