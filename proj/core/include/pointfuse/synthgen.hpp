#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pointfuse/dataset.hpp"
#include "pointfuse/geometry.hpp"
#include "pointfuse/rng.hpp"

namespace pointfuse::synth {

// Gaussian error statistics for one (AOI, modality) pair, degrees.
// Means are stored as magnitudes; the generator applies them signed toward
// the driver's rest direction (azimuth 0, elevation 0), which reproduces
// the "head barely moves" and "gaze stuck high when occluded" systematics.
struct ErrorCell {
    double az_mean = 0.0;
    double az_sd = 0.0;
    double el_mean = 0.0;
    double el_sd = 0.0;
};

class ErrorModel {
public:
    // Per-AOI error table measured in-vehicle for 12 cockpit targets,
    // plus the observed missing-gaze concentration (about half on AOIs 1-3,
    // a quarter on AOIs 10-11, ~25% of all samples overall).
    static ErrorModel in_vehicle_defaults();
    static ErrorModel all_zero(const std::vector<int>& aoi_ids);

    const ErrorCell& cell(int aoi_id, data::Modality m) const;
    void set_cell(int aoi_id, data::Modality m, ErrorCell c);
    double missing_probability(int aoi_id, data::Modality m) const; // 0 if unset
    void set_missing_probability(int aoi_id, data::Modality m, double p);

    std::vector<int> aoi_ids() const;

    void save(const std::filesystem::path& path) const;
    static ErrorModel load(const std::filesystem::path& path);

private:
    std::map<std::pair<int, int>, ErrorCell> cells_;
    std::map<std::pair<int, int>, double> missing_;
};

struct DriverProfile {
    std::string driver_id;
    geom::AngularError eye_bias;
    geom::AngularError head_bias;
    geom::AngularError finger_bias;
    double right_hand_probability = 0.85;
    double skill = 1.0; // error multiplier, clamped to [0.25, 4]
};

// Spread of randomly drawn driver profiles. Eye calibration and seat-pose
// dependent head estimates vary across people, the fingertip ray least.
struct DriverVariation {
    double eye_bias_sd = 4.0;
    double head_bias_sd = 3.5;
    double finger_bias_sd = 2.0;
    double skill_log_sd = 0.2;
    double right_hand_probability = 0.85;
};

struct GeneratorConfig {
    int n_drivers = 22;
    int samples_per_aoi = 10;
    std::optional<geom::AoiSet> aois; // default cockpit fixture when unset
    std::optional<ErrorModel> error_model;
    std::uint64_t seed = 1;
    double noise_scale = 1.0;            // scales all sampled errors and jitter
    double missing_scale = 1.0;          // scales missing probabilities
    double driver_variation_scale = 1.0; // scales profile biases and skill spread
    DriverVariation variation;
    // within-window frame jitter, as a fraction of the modality's sd
    double frame_jitter_fraction = 0.1;
    double fps = 45.0;
    // when set, used instead of randomly drawn profiles (e.g. planted outliers)
    std::vector<DriverProfile> explicit_profiles;
};

// The 12-target cockpit fixture used when GeneratorConfig.aois is unset.
// Plausible seat-frame coordinates; configuration, not measured truth.
geom::AoiSet default_aoi_set();

// Mean error applied with its modality sign for this AOI's direction: head
// and gaze biases pull toward the rest pose (limited head motion, eyelid
// occlusion when looking down); the finger ray overshoots in azimuth while
// its elevation still pulls toward rest.
geom::AngularError signed_bias(const ErrorCell& cell, const geom::Aoi& aoi, data::Modality m);

std::vector<DriverProfile> make_driver_profiles(const GeneratorConfig& cfg);

// Deterministic given the seed; per-driver streams are split independently
// so drivers may be generated concurrently.
data::Dataset generate_dataset(const GeneratorConfig& cfg);

// Longer captures around each trigger for exercising the preprocessing
// pipeline: context_frames extra frames on each side, and interior frames
// knocked out (per modality) with gap_probability for interpolation to fill.
data::RecordingFile generate_recordings(const GeneratorConfig& cfg, int context_frames,
                                        double gap_probability);

struct CellStats {
    double az_mean = 0.0;
    double az_sd = 0.0;
    double el_mean = 0.0;
    double el_sd = 0.0;
    std::size_t n = 0;
    bool degenerate = false; // n < 2, sd reported as 0
};

struct ErrorStats {
    std::map<std::pair<int, int>, CellStats> cells; // (aoi_id, modality)
    std::map<int, std::size_t> missing_by_aoi;      // gaze-missing trigger frames
    std::size_t total_samples = 0;
    std::size_t missing_eye_total = 0;

    const CellStats& cell(int aoi_id, data::Modality m) const;
    double missing_eye_fraction() const;
};

// Trigger-frame direction error of each modality against the AOI ground
// truth; samples whose modality is invalid at the trigger are counted as
// missing, not measured.
ErrorStats empirical_error_stats(const data::Dataset& ds);

} // namespace pointfuse::synth
