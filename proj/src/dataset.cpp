#include "egocap/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "egocap/errors.hpp"
#include "egocap/vocab.hpp"

namespace egocap {

using nlohmann::json;

const char* split_name(Split split) noexcept {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw DataError("unknown split '" + name + "' (expected train | val | test)");
}

void validate_segment(const Segment& s) {
    const std::string who = "segment '" + s.id + "'";
    if (s.id.empty()) throw DataError("segment with empty id");
    const auto words = tokenize(s.caption);
    if (words.empty()) throw DataError(who + ": field 'caption' is empty");
    if (words.size() > kMaxCaptionWords) {
        throw DataError(who + ": field 'caption' has " + std::to_string(words.size()) + " words (max " +
                        std::to_string(kMaxCaptionWords) + ")");
    }

    const auto& f = s.frames;
    if (f.features.empty()) throw DataError(who + ": field 'frames.features' is empty");
    if (f.timestamps.size() != f.features.size()) {
        throw DataError(who + ": field 'frames.timestamps' has " + std::to_string(f.timestamps.size()) +
                        " entries for " + std::to_string(f.features.size()) + " frames");
    }
    const std::size_t width = f.features.front().size();
    for (std::size_t i = 0; i < f.features.size(); ++i) {
        if (f.features[i].size() != width || width == 0) {
            throw DataError(who + ": field 'frames.features' row " + std::to_string(i) + " has inconsistent width");
        }
        if (i > 0 && f.timestamps[i] < f.timestamps[i - 1]) {
            throw DataError(who + ": field 'frames.timestamps' decreases at " + std::to_string(i));
        }
    }

    const auto& z = s.sensors;
    if (z.samples.empty()) throw DataError(who + ": field 'sensors.samples' is empty");
    if (!(z.sample_rate_hz > 0.0)) throw DataError(who + ": field 'sensors.sample_rate_hz' must be positive");
    if (z.timestamps.size() != z.samples.size()) {
        throw DataError(who + ": field 'sensors.timestamps' has " + std::to_string(z.timestamps.size()) +
                        " entries for " + std::to_string(z.samples.size()) + " samples");
    }
    const std::size_t channels = z.samples.front().size();
    for (std::size_t i = 0; i < z.samples.size(); ++i) {
        if (z.samples[i].size() != channels || channels == 0) {
            throw DataError(who + ": field 'sensors.samples' row " + std::to_string(i) + " has inconsistent width");
        }
        if (i > 0 && !(z.timestamps[i] > z.timestamps[i - 1])) {
            throw DataError(who + ": field 'sensors.timestamps' not strictly increasing at " + std::to_string(i));
        }
    }
}

std::string segment_to_json_line(const Segment& s) {
    json j;
    j["id"] = s.id;
    j["split"] = split_name(s.split);
    j["caption"] = s.caption;
    j["frames"] = {{"timestamps", s.frames.timestamps}, {"features", s.frames.features}};
    j["sensors"] = {{"sample_rate_hz", s.sensors.sample_rate_hz},
                    {"timestamps", s.sensors.timestamps},
                    {"samples", s.sensors.samples}};
    return j.dump();
}

namespace {

const json& field(const json& obj, const char* name, const std::string& who) {
    const auto it = obj.find(name);
    if (it == obj.end()) throw DataError(who + ": missing field '" + name + "'");
    return *it;
}

template <typename T>
T typed(const json& value, const std::string& who, const char* name) {
    try {
        return value.get<T>();
    } catch (const json::exception&) {
        throw DataError(who + ": field '" + name + "' has the wrong type");
    }
}

}  // namespace

Segment segment_from_json_line(const std::string& line, std::size_t line_no) {
    const std::string where = "line " + std::to_string(line_no);
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError(where + ": malformed record (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(where + ": record is not an object");

    Segment s;
    s.id = typed<std::string>(field(j, "id", where), where, "id");
    const std::string who = where + " (segment '" + s.id + "')";
    s.split = parse_split(typed<std::string>(field(j, "split", who), who, "split"));
    s.caption = typed<std::string>(field(j, "caption", who), who, "caption");

    const json& frames = field(j, "frames", who);
    s.frames.timestamps = typed<std::vector<double>>(field(frames, "timestamps", who), who, "frames.timestamps");
    s.frames.features =
        typed<std::vector<std::vector<double>>>(field(frames, "features", who), who, "frames.features");

    const json& sensors = field(j, "sensors", who);
    s.sensors.sample_rate_hz = typed<double>(field(sensors, "sample_rate_hz", who), who, "sensors.sample_rate_hz");
    s.sensors.timestamps = typed<std::vector<double>>(field(sensors, "timestamps", who), who, "sensors.timestamps");
    s.sensors.samples =
        typed<std::vector<std::vector<double>>>(field(sensors, "samples", who), who, "sensors.samples");

    try {
        validate_segment(s);
    } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
    }
    return s;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_dataset(std::span<const Segment> segments, const std::filesystem::path& path) {
    std::string out;
    for (const auto& s : segments) {
        validate_segment(s);
        out += segment_to_json_line(s);
        out.push_back('\n');
    }
    write_file_atomic(path, out);
}

std::vector<Segment> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read dataset " + path.string());
    std::vector<Segment> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(segment_from_json_line(line, line_no));
    }
    if (out.empty()) throw DataError("dataset " + path.string() + " has no records");
    return out;
}

std::array<std::size_t, 3> split_counts(std::span<const Segment> segments) {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (const auto& s : segments) ++c[static_cast<std::size_t>(s.split)];
    return c;
}

std::vector<Segment> filter_split(std::span<const Segment> segments, Split split) {
    std::vector<Segment> out;
    for (const auto& s : segments)
        if (s.split == split) out.push_back(s);
    return out;
}

}  // namespace egocap
