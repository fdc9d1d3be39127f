#include "pointfuse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "pointfuse/errors.hpp"

namespace pointfuse::data {

using nlohmann::json;

const char* to_string(Modality m) {
    switch (m) {
    case Modality::eye: return "eye";
    case Modality::head: return "head";
    case Modality::finger: return "finger";
    }
    return "?";
}

const char* to_string(Hand h) {
    switch (h) {
    case Hand::left: return "left";
    case Hand::right: return "right";
    case Hand::unknown: return "unknown";
    }
    return "?";
}

Hand hand_from_string(const std::string& s) {
    if (s == "left") return Hand::left;
    if (s == "right") return Hand::right;
    if (s == "unknown") return Hand::unknown;
    throw DataError("unknown hand value '" + s + "'");
}

bool Frame::valid(Modality m) const {
    switch (m) {
    case Modality::eye: return valid_eye;
    case Modality::head: return valid_head;
    case Modality::finger: return valid_finger;
    }
    return false;
}

void Frame::set_valid(Modality m, bool v) {
    switch (m) {
    case Modality::eye: valid_eye = v; break;
    case Modality::head: valid_head = v; break;
    case Modality::finger: valid_finger = v; break;
    }
}

std::vector<std::string> Dataset::driver_ids() const {
    std::vector<std::string> out;
    for (const Sample& s : samples)
        if (std::find(out.begin(), out.end(), s.driver_id) == out.end())
            out.push_back(s.driver_id);
    return out;
}

std::vector<std::size_t> Dataset::samples_of(const std::string& driver_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].driver_id == driver_id) out.push_back(i);
    return out;
}

void Dataset::validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        if (!aois.contains(s.aoi_id))
            throw DataError("sample " + std::to_string(i) + " (driver " + s.driver_id
                            + "): unknown aoi_id " + std::to_string(s.aoi_id));
        for (int f = 1; f < kFramesPerSample; ++f)
            if (!(s.frames[f].timestamp > s.frames[f - 1].timestamp))
                throw DataError("sample " + std::to_string(i)
                                + ": timestamps not strictly increasing");
        if (!(s.frames[kTriggerFrameIndex].timestamp <= s.trigger_time
              && s.trigger_time < s.frames[kTriggerFrameIndex + 1].timestamp))
            throw DataError("sample " + std::to_string(i)
                            + ": trigger_time not between frames 3 and 4");
    }
}

// --- preprocessing ---------------------------------------------------------

namespace {

double wrap_degrees(double a) {
    a = std::fmod(a + 180.0, 360.0);
    if (a < 0.0) a += 360.0;
    return a - 180.0;
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

geom::Vec3 lerp(const geom::Vec3& a, const geom::Vec3& b, double t) {
    return {lerp(a.x, b.x, t), lerp(a.y, b.y, t), lerp(a.z, b.z, t)};
}

// shortest-arc interpolation per Euler component, avoids 359 -> 1 artifacts
double lerp_angle(double a, double b, double t) {
    return wrap_degrees(a + wrap_degrees(b - a) * t);
}

void check_monotonic(const std::vector<Frame>& frames) {
    for (std::size_t i = 1; i < frames.size(); ++i)
        if (!(frames[i].timestamp > frames[i - 1].timestamp))
            throw DataError("recording timestamps not strictly increasing");
}

void fill_modality(std::vector<Frame>& frames, Modality m) {
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (frames[i].valid(m)) valid.push_back(i);
    if (valid.empty()) throw AllMissingError(to_string(m));

    auto assign = [&](Frame& dst, const Frame& a, const Frame& b, double t) {
        switch (m) {
        case Modality::eye:
            dst.eye_pos = lerp(a.eye_pos, b.eye_pos, t);
            dst.eye_dir = geom::normalize(lerp(a.eye_dir, b.eye_dir, t));
            break;
        case Modality::head:
            dst.head_pos = lerp(a.head_pos, b.head_pos, t);
            dst.head_rot.yaw = lerp_angle(a.head_rot.yaw, b.head_rot.yaw, t);
            dst.head_rot.pitch = lerp_angle(a.head_rot.pitch, b.head_rot.pitch, t);
            dst.head_rot.roll = lerp_angle(a.head_rot.roll, b.head_rot.roll, t);
            break;
        case Modality::finger:
            dst.finger_pos = lerp(a.finger_pos, b.finger_pos, t);
            dst.finger_dir = geom::normalize(lerp(a.finger_dir, b.finger_dir, t));
            break;
        }
        dst.set_valid(m, true);
    };

    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].valid(m)) continue;
        const auto next = std::lower_bound(valid.begin(), valid.end(), i);
        if (next == valid.begin()) {
            assign(frames[i], frames[*next], frames[*next], 0.0); // leading gap: hold
        } else if (next == valid.end()) {
            const Frame& prev = frames[*(next - 1)];
            assign(frames[i], prev, prev, 0.0); // trailing gap: hold
        } else {
            const Frame& a = frames[*(next - 1)];
            const Frame& b = frames[*next];
            const double t = (frames[i].timestamp - a.timestamp) / (b.timestamp - a.timestamp);
            assign(frames[i], a, b, t);
        }
    }
}

} // namespace

std::vector<Frame> interpolate_missing(std::vector<Frame> frames) {
    if (frames.empty()) return frames;
    check_monotonic(frames);
    fill_modality(frames, Modality::eye);
    fill_modality(frames, Modality::head);
    fill_modality(frames, Modality::finger);
    return frames;
}

std::array<Frame, kFramesPerSample> extract_window(const std::vector<Frame>& recording,
                                                   double trigger_time) {
    check_monotonic(recording);
    const auto after = std::upper_bound(
        recording.begin(), recording.end(), trigger_time,
        [](double t, const Frame& f) { return t < f.timestamp; });
    const std::size_t n_before = static_cast<std::size_t>(after - recording.begin());
    const std::size_t n_after = recording.size() - n_before;
    if (n_before < kFramesBeforeTrigger) throw InsufficientFramesError("before");
    if (n_after < kFramesPerSample - kFramesBeforeTrigger)
        throw InsufficientFramesError("after");

    std::array<Frame, kFramesPerSample> out;
    for (int i = 0; i < kFramesPerSample; ++i)
        out[i] = recording[n_before - kFramesBeforeTrigger + i];
    return out;
}

Sample preprocess(const Recording& recording, const geom::Vec3& seat_origin) {
    std::vector<Frame> frames = interpolate_missing(recording.frames);
    for (Frame& f : frames) {
        f.eye_dir = geom::normalize(f.eye_dir);
        f.finger_dir = geom::normalize(f.finger_dir);
        f.eye_pos = geom::translate_origin(f.eye_pos, seat_origin);
        f.head_pos = geom::translate_origin(f.head_pos, seat_origin);
        f.finger_pos = geom::translate_origin(f.finger_pos, seat_origin);
    }
    Sample s;
    s.driver_id = recording.driver_id;
    s.aoi_id = recording.aoi_id;
    s.trigger_time = recording.trigger_time;
    s.hand = recording.hand;
    s.frames = extract_window(frames, recording.trigger_time);
    return s;
}

// --- line-record I/O -------------------------------------------------------

namespace {

json vec_to_json(const geom::Vec3& v) { return json::array({v.x, v.y, v.z}); }
json euler_to_json(const geom::EulerAngles& e) { return json::array({e.yaw, e.pitch, e.roll}); }

geom::Vec3 vec_from_json(const json& j, const std::string& path, std::size_t line) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number())
        throw ParseError(path, line, "expected [x,y,z] triple");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json frame_to_json(const Frame& f) {
    json j;
    j["t"] = f.timestamp;
    // invalid modalities serialize as nulls, never as sentinel zeros
    j["eye_pos"] = f.valid_eye ? vec_to_json(f.eye_pos) : json(nullptr);
    j["eye_dir"] = f.valid_eye ? vec_to_json(f.eye_dir) : json(nullptr);
    j["head_pos"] = f.valid_head ? vec_to_json(f.head_pos) : json(nullptr);
    j["head_rot"] = f.valid_head ? euler_to_json(f.head_rot) : json(nullptr);
    j["finger_pos"] = f.valid_finger ? vec_to_json(f.finger_pos) : json(nullptr);
    j["finger_dir"] = f.valid_finger ? vec_to_json(f.finger_dir) : json(nullptr);
    return j;
}

Frame frame_from_json(const json& j, const std::string& path, std::size_t line) {
    Frame f;
    if (!j.contains("t") || !j["t"].is_number()) throw ParseError(path, line, "frame missing 't'");
    f.timestamp = j["t"].get<double>();

    auto modality = [&](const char* pos_key, const char* dir_key, bool& valid_flag,
                        geom::Vec3& pos, auto set_dir) {
        const bool has_pos = j.contains(pos_key) && !j[pos_key].is_null();
        const bool has_dir = j.contains(dir_key) && !j[dir_key].is_null();
        if (has_pos != has_dir)
            throw ParseError(path, line,
                             std::string(pos_key) + "/" + dir_key + " must be both set or both null");
        valid_flag = has_pos;
        if (has_pos) {
            pos = vec_from_json(j[pos_key], path, line);
            set_dir(j[dir_key]);
        }
    };

    modality("eye_pos", "eye_dir", f.valid_eye, f.eye_pos,
             [&](const json& d) { f.eye_dir = vec_from_json(d, path, line); });
    modality("head_pos", "head_rot", f.valid_head, f.head_pos, [&](const json& d) {
        const geom::Vec3 v = vec_from_json(d, path, line);
        f.head_rot = {v.x, v.y, v.z};
    });
    modality("finger_pos", "finger_dir", f.valid_finger, f.finger_pos,
             [&](const json& d) { f.finger_dir = vec_from_json(d, path, line); });
    return f;
}

json event_to_json(const std::string& driver_id, int aoi_id, double trigger_time, Hand hand) {
    json j;
    j["driver"] = driver_id;
    j["aoi_id"] = aoi_id;
    j["trigger_time"] = trigger_time;
    j["hand"] = to_string(hand);
    return j;
}

void event_from_json(const json& j, const std::string& path, std::size_t line,
                     std::string& driver_id, int& aoi_id, double& trigger_time, Hand& hand) {
    if (!j.contains("driver") || !j["driver"].is_string())
        throw ParseError(path, line, "missing 'driver'");
    if (!j.contains("aoi_id") || !j["aoi_id"].is_number_integer())
        throw ParseError(path, line, "missing 'aoi_id'");
    if (!j.contains("trigger_time") || !j["trigger_time"].is_number())
        throw ParseError(path, line, "missing 'trigger_time'");
    driver_id = j["driver"].get<std::string>();
    aoi_id = j["aoi_id"].get<int>();
    trigger_time = j["trigger_time"].get<double>();
    hand = j.contains("hand") ? hand_from_string(j["hand"].get<std::string>()) : Hand::unknown;
}

json aoi_to_json(const geom::Aoi& a) {
    json corners = json::array();
    for (const geom::Vec3& c : a.corner_points) corners.push_back(vec_to_json(c));
    return json{{"aoi", {{"id", a.id}, {"corners", corners}}}};
}

geom::Aoi aoi_from_json(const json& j, const std::string& path, std::size_t line) {
    if (!j.contains("id") || !j.contains("corners"))
        throw ParseError(path, line, "aoi record needs 'id' and 'corners'");
    std::vector<geom::Vec3> corners;
    for (const json& c : j["corners"]) corners.push_back(vec_from_json(c, path, line));
    return geom::build_aoi(j["id"].get<int>(), std::move(corners));
}

struct HeaderFields {
    geom::Vec3 seat_origin;
    double fps_nominal = 45.0;
};

json header_to_json(const geom::Vec3& seat_origin, double fps, const std::string& provenance) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["seat_origin"] = vec_to_json(seat_origin);
    j["fps_nominal"] = fps;
    if (!provenance.empty()) j["provenance"] = json::parse(provenance);
    return j;
}

HeaderFields parse_header(const json& j, const std::string& path) {
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
        throw ParseError(path, 1, "header missing schema_version");
    const int v = j["schema_version"].get<int>();
    if (v != kSchemaVersion) throw SchemaVersionError(v, kSchemaVersion);
    HeaderFields h;
    h.seat_origin = vec_from_json(j.at("seat_origin"), path, 1);
    if (j.contains("fps_nominal")) h.fps_nominal = j["fps_nominal"].get<double>();
    return h;
}

json parse_line(const std::string& text, const std::string& path, std::size_t line) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError(path, line, "invalid JSON record");
    return j;
}

// Shared scanner for dataset and recording files.
template <typename OnSample, typename OnRecording>
HeaderFields scan_file(const std::filesystem::path& p, std::vector<geom::Aoi>& aois,
                       OnSample on_sample, OnRecording on_recording) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open " + p.string());
    const std::string path = p.string();

    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    HeaderFields header;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        const json j = parse_line(text, path, line);
        if (!have_header) {
            header = parse_header(j, path);
            have_header = true;
        } else if (j.contains("aoi")) {
            aois.push_back(aoi_from_json(j["aoi"], path, line));
        } else if (j.contains("recording")) {
            on_recording(j["recording"], path, line);
        } else {
            on_sample(j, path, line);
        }
    }
    if (!have_header) throw ParseError(path, 1, "missing header line");
    return header;
}

} // namespace

Dataset load_dataset(const std::filesystem::path& p) {
    Dataset ds;
    std::vector<geom::Aoi> aois;
    const HeaderFields header = scan_file(
        p, aois,
        [&](const json& j, const std::string& path, std::size_t line) {
            Sample s;
            event_from_json(j, path, line, s.driver_id, s.aoi_id, s.trigger_time, s.hand);
            if (!j.contains("frames") || !j["frames"].is_array()
                || j["frames"].size() != kFramesPerSample)
                throw ParseError(path, line,
                                 "sample (driver " + s.driver_id + ", aoi "
                                     + std::to_string(s.aoi_id) + ") must have exactly "
                                     + std::to_string(kFramesPerSample) + " frames");
            for (int i = 0; i < kFramesPerSample; ++i)
                s.frames[i] = frame_from_json(j["frames"][i], path, line);
            ds.samples.push_back(std::move(s));
        },
        [&](const json&, const std::string& path, std::size_t line) {
            throw ParseError(path, line, "recording record in a dataset file");
        });
    ds.seat_origin = header.seat_origin;
    ds.fps_nominal = header.fps_nominal;
    ds.aois = geom::AoiSet(std::move(aois));
    ds.validate();
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& p,
                  const std::string& provenance_json) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot write " + p.string());
    out << header_to_json(ds.seat_origin, ds.fps_nominal, provenance_json).dump() << '\n';
    for (const geom::Aoi& a : ds.aois.all()) out << aoi_to_json(a).dump() << '\n';
    for (const Sample& s : ds.samples) {
        json j = event_to_json(s.driver_id, s.aoi_id, s.trigger_time, s.hand);
        json frames = json::array();
        for (const Frame& f : s.frames) frames.push_back(frame_to_json(f));
        j["frames"] = std::move(frames);
        out << j.dump() << '\n';
    }
}

RecordingFile load_recordings(const std::filesystem::path& p) {
    RecordingFile rf;
    std::vector<geom::Aoi> aois;
    const HeaderFields header = scan_file(
        p, aois,
        [&](const json&, const std::string& path, std::size_t line) {
            throw ParseError(path, line, "sample record in a recordings file");
        },
        [&](const json& j, const std::string& path, std::size_t line) {
            Recording r;
            event_from_json(j, path, line, r.driver_id, r.aoi_id, r.trigger_time, r.hand);
            if (!j.contains("frames") || !j["frames"].is_array())
                throw ParseError(path, line, "recording missing 'frames'");
            for (const json& fj : j["frames"])
                r.frames.push_back(frame_from_json(fj, path, line));
            rf.recordings.push_back(std::move(r));
        });
    rf.seat_origin = header.seat_origin;
    rf.fps_nominal = header.fps_nominal;
    rf.aois = geom::AoiSet(std::move(aois));
    return rf;
}

void save_recordings(const RecordingFile& rf, const std::filesystem::path& p,
                     const std::string& provenance_json) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot write " + p.string());
    out << header_to_json(rf.seat_origin, rf.fps_nominal, provenance_json).dump() << '\n';
    for (const geom::Aoi& a : rf.aois.all()) out << aoi_to_json(a).dump() << '\n';
    for (const Recording& r : rf.recordings) {
        json j = event_to_json(r.driver_id, r.aoi_id, r.trigger_time, r.hand);
        json frames = json::array();
        for (const Frame& f : r.frames) frames.push_back(frame_to_json(f));
        json rec = json{{"recording", nullptr}};
        j["frames"] = std::move(frames);
        rec["recording"] = std::move(j);
        out << rec.dump() << '\n';
    }
}

} // namespace pointfuse::data
