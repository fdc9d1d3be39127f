#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "pointfuse/geometry.hpp"

namespace pointfuse::data {

inline constexpr int kFramesPerSample = 8;
inline constexpr int kFramesBeforeTrigger = 4;
inline constexpr int kTriggerFrameIndex = 3; // last frame at or before the trigger
inline constexpr int kSchemaVersion = 1;

enum class Modality { eye, head, finger };
enum class Hand { left, right, unknown };

const char* to_string(Modality m);
const char* to_string(Hand h);
Hand hand_from_string(const std::string& s);

// One time-stamped sensor reading. When a validity flag is false the
// corresponding fields hold sentinel zeros and must be ignored.
struct Frame {
    double timestamp = 0.0; // seconds
    geom::Vec3 eye_pos;     // cyclops eye, meters
    geom::Vec3 eye_dir;
    geom::Vec3 head_pos; // head center, meters
    geom::EulerAngles head_rot;
    geom::Vec3 finger_pos; // fingertip, meters
    geom::Vec3 finger_dir; // tip-outward pointing direction
    bool valid_eye = true;
    bool valid_head = true;
    bool valid_finger = true;

    bool valid(Modality m) const;
    void set_valid(Modality m, bool v);
};

// One pointing event: 8 consecutive frames centered on the trigger,
// 4 before (frames[3].timestamp <= trigger_time) and 4 after.
struct Sample {
    std::string driver_id;
    int aoi_id = 0;
    double trigger_time = 0.0;
    Hand hand = Hand::unknown;
    std::array<Frame, kFramesPerSample> frames;
};

// A raw capture around one trigger, arbitrary length, possibly with gaps.
struct Recording {
    std::string driver_id;
    int aoi_id = 0;
    double trigger_time = 0.0;
    Hand hand = Hand::unknown;
    std::vector<Frame> frames;
};

struct Dataset {
    geom::Vec3 seat_origin;
    double fps_nominal = 45.0;
    geom::AoiSet aois;
    std::vector<Sample> samples;

    // unique driver ids in first-seen order
    std::vector<std::string> driver_ids() const;
    // indices into samples for one driver
    std::vector<std::size_t> samples_of(const std::string& driver_id) const;
    void validate() const; // every aoi_id known, frame ordering, 8-frame windows
};

// Fills invalid fields by linear interpolation (by timestamp) between the
// nearest valid frames on each side; leading/trailing gaps hold the nearest
// valid value. Direction vectors are re-normalized, head Euler components
// interpolate along the shortest arc across +-180. Idempotent.
// Throws AllMissingError when a modality has no valid frame at all.
std::vector<Frame> interpolate_missing(std::vector<Frame> frames);

// The 4 frames with largest timestamps <= trigger_time plus the 4 with
// smallest timestamps > trigger_time, in time order.
// Throws InsufficientFramesError naming the short side.
std::array<Frame, kFramesPerSample> extract_window(const std::vector<Frame>& recording,
                                                   double trigger_time);

// interpolation -> unit-normalization of eye/finger directions ->
// position translation by seat_origin -> window extraction
Sample preprocess(const Recording& recording, const geom::Vec3& seat_origin);

// Line-record dataset files (see README for the format).
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  const std::string& provenance_json = "");

// Raw recording files share the header/AOI records; events are stored as
// "recording" lines with arbitrary frame counts and null gaps.
struct RecordingFile {
    geom::Vec3 seat_origin;
    double fps_nominal = 45.0;
    geom::AoiSet aois;
    std::vector<Recording> recordings;
};

RecordingFile load_recordings(const std::filesystem::path& path);
void save_recordings(const RecordingFile& rf, const std::filesystem::path& path,
                     const std::string& provenance_json = "");

} // namespace pointfuse::data
