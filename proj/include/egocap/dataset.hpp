#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "egocap/segment.hpp"

namespace egocap {

// Longest caption accepted, in words.
inline constexpr std::size_t kMaxCaptionWords = 14;

// Checks a segment's invariants; throws DataError naming the segment and field.
void validate_segment(const Segment& segment);

// One JSON object per line:
//   {"id", "split", "caption",
//    "frames":  {"timestamps": [...], "features": [[...], ...]},
//    "sensors": {"sample_rate_hz": r, "timestamps": [...], "samples": [[...], ...]}}
// Numbers are written in shortest round-trip decimal form.
void save_dataset(std::span<const Segment> segments, const std::filesystem::path& path);
std::vector<Segment> load_dataset(const std::filesystem::path& path);

std::string segment_to_json_line(const Segment& segment);
// `line_no` is only used in error messages.
Segment segment_from_json_line(const std::string& line, std::size_t line_no);

std::array<std::size_t, 3> split_counts(std::span<const Segment> segments);  // train, val, test
std::vector<Segment> filter_split(std::span<const Segment> segments, Split split);

// Writes `contents` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace egocap
