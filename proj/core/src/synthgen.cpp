#include "pointfuse/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "pointfuse/errors.hpp"

namespace pointfuse::synth {

using data::Modality;
using geom::Vec3;
using nlohmann::json;

namespace {

constexpr int kModalityCount = 3;
const Modality kModalities[kModalityCount] = {Modality::eye, Modality::head, Modality::finger};

std::pair<int, int> key(int aoi_id, Modality m) { return {aoi_id, static_cast<int>(m)}; }

double wrap_degrees(double a) {
    a = std::fmod(a + 180.0, 360.0);
    if (a < 0.0) a += 360.0;
    return a - 180.0;
}

} // namespace

// --- ErrorModel -------------------------------------------------------------

ErrorModel ErrorModel::in_vehicle_defaults() {
    // az_mean, az_sd, el_mean, el_sd per AOI 1..12
    static const double kEye[12][4] = {
        {26, 18, 13, 11}, {23, 17, 11, 11}, {25, 16, 19, 13}, {2, 5, 1, 4},
        {1, 4, 1, 5},     {5, 5, 3, 2},     {1, 3, 1, 2},     {3, 6, 3, 6},
        {2, 4, 3, 6},     {12, 13, 4, 7},   {25, 14, 9, 11},  {17, 18, 4, 5}};
    static const double kHead[12][4] = {
        {5, 7, 37, 10},   {4, 6, 36, 10},   {3, 8, 46, 11},   {2, 5, 23, 8},
        {1, 4, 22, 8},    {7, 8, 21, 8},    {3, 7, 10, 7},    {5, 5, 32, 11},
        {21, 12, 33, 14}, {34, 14, 36, 14}, {45, 14, 31, 13}, {11, 14, 15, 7}};
    static const double kFinger[12][4] = {
        {17, 35, 15, 17}, {11, 22, 7, 14},  {15, 30, 17, 17}, {1, 7, 4, 8},
        {1, 5, 5, 8},     {9, 16, 8, 11},   {1, 6, 1, 5},     {3, 10, 4, 8},
        {9, 19, 6, 11},   {29, 29, 26, 23}, {27, 28, 25, 24}, {10, 26, 6, 11}};

    ErrorModel m;
    for (int aoi = 1; aoi <= 12; ++aoi) {
        const int i = aoi - 1;
        m.set_cell(aoi, Modality::eye, {kEye[i][0], kEye[i][1], kEye[i][2], kEye[i][3]});
        m.set_cell(aoi, Modality::head, {kHead[i][0], kHead[i][1], kHead[i][2], kHead[i][3]});
        m.set_cell(aoi, Modality::finger,
                   {kFinger[i][0], kFinger[i][1], kFinger[i][2], kFinger[i][3]});
        // gaze dropouts: half on AOIs 1-3, a quarter on 10-11, ~25% overall
        double p = 0.1075;
        if (aoi <= 3) p = 0.50;
        if (aoi == 10 || aoi == 11) p = 0.375;
        m.set_missing_probability(aoi, Modality::eye, p);
    }
    return m;
}

ErrorModel ErrorModel::all_zero(const std::vector<int>& aoi_ids) {
    ErrorModel m;
    for (const int aoi : aoi_ids)
        for (const Modality mod : kModalities) m.set_cell(aoi, mod, {});
    return m;
}

const ErrorCell& ErrorModel::cell(int aoi_id, Modality m) const {
    const auto it = cells_.find(key(aoi_id, m));
    if (it == cells_.end())
        throw ConfigError("error model has no cell for AOI " + std::to_string(aoi_id)
                          + ", modality " + data::to_string(m));
    return it->second;
}

void ErrorModel::set_cell(int aoi_id, Modality m, ErrorCell c) {
    if (c.az_sd < 0 || c.el_sd < 0) throw ConfigError("negative sd in error model");
    cells_[key(aoi_id, m)] = c;
}

double ErrorModel::missing_probability(int aoi_id, Modality m) const {
    const auto it = missing_.find(key(aoi_id, m));
    return it == missing_.end() ? 0.0 : it->second;
}

void ErrorModel::set_missing_probability(int aoi_id, Modality m, double p) {
    if (p < 0.0 || p > 1.0) throw ConfigError("missing probability outside [0,1]");
    missing_[key(aoi_id, m)] = p;
}

std::vector<int> ErrorModel::aoi_ids() const {
    std::vector<int> out;
    for (const auto& [k, _] : cells_)
        if (out.empty() || out.back() != k.first) out.push_back(k.first);
    return out;
}

void ErrorModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << json{{"schema_version", data::kSchemaVersion}, {"kind", "error_model"}}.dump()
        << '\n';
    for (const auto& [k, c] : cells_) {
        const Modality m = static_cast<Modality>(k.second);
        json j{{"cell",
                {{"aoi", k.first},
                 {"modality", data::to_string(m)},
                 {"az_mean", c.az_mean},
                 {"az_sd", c.az_sd},
                 {"el_mean", c.el_mean},
                 {"el_sd", c.el_sd},
                 {"missing", missing_probability(k.first, m)}}}};
        out << j.dump() << '\n';
    }
}

ErrorModel ErrorModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    ErrorModel m;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) throw ParseError(path.string(), line, "invalid JSON record");
        if (!have_header) {
            if (!j.contains("schema_version"))
                throw ParseError(path.string(), line, "missing header");
            const int v = j["schema_version"].get<int>();
            if (v != data::kSchemaVersion) throw SchemaVersionError(v, data::kSchemaVersion);
            have_header = true;
            continue;
        }
        if (!j.contains("cell")) throw ParseError(path.string(), line, "expected cell record");
        const json& c = j["cell"];
        Modality mod;
        const std::string ms = c.at("modality").get<std::string>();
        if (ms == "eye") mod = Modality::eye;
        else if (ms == "head") mod = Modality::head;
        else if (ms == "finger") mod = Modality::finger;
        else throw ParseError(path.string(), line, "unknown modality " + ms);
        const int aoi = c.at("aoi").get<int>();
        m.set_cell(aoi, mod,
                   {c.at("az_mean").get<double>(), c.at("az_sd").get<double>(),
                    c.at("el_mean").get<double>(), c.at("el_sd").get<double>()});
        if (c.contains("missing"))
            m.set_missing_probability(aoi, mod, c["missing"].get<double>());
    }
    if (!have_header) throw ParseError(path.string(), 1, "missing header line");
    return m;
}

// --- default AOI fixture ----------------------------------------------------

namespace {

struct FixtureEntry {
    int id;
    double az, el, range; // degrees, degrees, meters from the seat reference
    const char* role;
};

// Azimuth positive to the driver's left. Elevations are relative to the seat
// reference point at shoulder height, so most targets sit below it.
const FixtureEntry kFixture[12] = {
    {1, -40, -29, 0.55, "gear selector"},
    {2, -47, -28, 0.50, "rotary controller"},
    {3, -53, -37, 0.45, "console storage"},
    {4, -13, -15, 0.80, "center display, left half"},
    {5, -25, -14, 0.75, "center display, right half"},
    {6, -36, -13, 0.70, "climate strip"},
    {7, 0, -2, 0.70, "instrument cluster"},
    {8, 14, -24, 0.55, "light switch panel"},
    {9, 27, -25, 0.50, "mirror adjustment"},
    {10, 39, -28, 0.45, "window lifters"},
    {11, 47, -23, 0.42, "door handle area"},
    {12, -8, -7, 0.90, "windshield base"},
};

} // namespace

geom::AoiSet default_aoi_set() {
    std::vector<geom::Aoi> aois;
    for (const FixtureEntry& e : kFixture) {
        const Vec3 dir = geom::from_azimuth_elevation(e.az, e.el);
        const Vec3 mean = dir * e.range;
        // two tangents spanning the target's face; symmetric corners keep the
        // corner mean exactly on the designed direction
        Vec3 t1{-dir.y, dir.x, 0};
        t1 = geom::normalize(t1);
        const Vec3 t2 = geom::normalize(
            Vec3{dir.y * t1.z - dir.z * t1.y, dir.z * t1.x - dir.x * t1.z,
                 dir.x * t1.y - dir.y * t1.x});
        const double w = 0.05, h = 0.035;
        std::vector<Vec3> corners{mean + t1 * w + t2 * h, mean + t1 * w - t2 * h,
                                  mean - t1 * w + t2 * h, mean - t1 * w - t2 * h};
        aois.push_back(geom::build_aoi(e.id, std::move(corners)));
    }
    return geom::AoiSet(std::move(aois));
}

geom::AngularError signed_bias(const ErrorCell& cell, const geom::Aoi& aoi, Modality m) {
    const geom::AngularError dir = geom::to_azimuth_elevation(aoi.ground_truth);
    geom::AngularError out;
    out.azimuth = dir.azimuth >= 0.0 ? -cell.az_mean : cell.az_mean;
    out.elevation = dir.elevation >= 0.0 ? -cell.el_mean : cell.el_mean;
    // finger azimuth overshoots away from the rest pose; its elevation still
    // pulls up toward rest (the forearm pitches down reluctantly), which also
    // keeps the drawn elevations clear of the -90 degree pole
    if (m == Modality::finger) out.azimuth = -out.azimuth;
    return out;
}

// --- generation --------------------------------------------------------------

std::vector<DriverProfile> make_driver_profiles(const GeneratorConfig& cfg) {
    if (!cfg.explicit_profiles.empty()) {
        if (static_cast<int>(cfg.explicit_profiles.size()) != cfg.n_drivers)
            throw ConfigError("explicit_profiles count differs from n_drivers");
        return cfg.explicit_profiles;
    }
    std::vector<DriverProfile> out;
    const Rng base = Rng(cfg.seed).split("profiles");
    const double scale = cfg.driver_variation_scale;
    for (int i = 0; i < cfg.n_drivers; ++i) {
        Rng rng = base.split(static_cast<std::uint64_t>(i));
        DriverProfile p;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "d%02d", i + 1);
        p.driver_id = buf;
        const DriverVariation& v = cfg.variation;
        p.eye_bias = {scale * rng.normal(0, v.eye_bias_sd), scale * rng.normal(0, v.eye_bias_sd)};
        p.head_bias = {scale * rng.normal(0, v.head_bias_sd),
                       scale * rng.normal(0, v.head_bias_sd)};
        p.finger_bias = {scale * rng.normal(0, v.finger_bias_sd),
                         scale * rng.normal(0, v.finger_bias_sd)};
        p.right_hand_probability = v.right_hand_probability;
        p.skill = std::clamp(std::exp(scale * rng.normal(0, v.skill_log_sd)), 0.25, 4.0);
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

struct ResolvedConfig {
    geom::AoiSet aois;
    ErrorModel model;
    std::vector<DriverProfile> profiles;
};

ResolvedConfig resolve(const GeneratorConfig& cfg) {
    if (cfg.n_drivers <= 0) throw ConfigError("n_drivers must be positive");
    if (cfg.samples_per_aoi <= 0) throw ConfigError("samples_per_aoi must be positive");
    ResolvedConfig r;
    r.aois = cfg.aois.value_or(default_aoi_set());
    if (r.aois.empty()) throw ConfigError("empty AOI set");
    r.model = cfg.error_model.value_or(ErrorModel::in_vehicle_defaults());
    r.profiles = make_driver_profiles(cfg);
    return r;
}

const geom::AngularError& bias_of(const DriverProfile& p, Modality m) {
    switch (m) {
    case Modality::eye: return p.eye_bias;
    case Modality::head: return p.head_bias;
    case Modality::finger: return p.finger_bias;
    }
    return p.eye_bias;
}

struct SampleDraw {
    geom::AngularError angles[kModalityCount]; // observed direction per modality
    bool missing[kModalityCount] = {false, false, false};
    data::Hand hand = data::Hand::right;
};

SampleDraw draw_sample(Rng& rng, const ResolvedConfig& rc, const GeneratorConfig& cfg,
                       const DriverProfile& prof, const geom::Aoi& aoi) {
    SampleDraw out;
    const geom::AngularError gt = geom::to_azimuth_elevation(aoi.ground_truth);
    for (int mi = 0; mi < kModalityCount; ++mi) {
        const Modality m = kModalities[mi];
        const ErrorCell& cell = rc.model.cell(aoi.id, m);
        const geom::AngularError mean = signed_bias(cell, aoi, m);
        const geom::AngularError& bias = bias_of(prof, m);
        const double err_az =
            cfg.noise_scale * prof.skill * (mean.azimuth + cell.az_sd * rng.normal())
            + bias.azimuth;
        const double err_el =
            cfg.noise_scale * prof.skill * (mean.elevation + cell.el_sd * rng.normal())
            + bias.elevation;
        out.angles[mi].azimuth = wrap_degrees(gt.azimuth + err_az);
        out.angles[mi].elevation = std::clamp(gt.elevation + err_el, -89.0, 89.0);
        out.missing[mi] =
            rng.uniform() < cfg.missing_scale * rc.model.missing_probability(aoi.id, m);
    }
    out.hand = rng.uniform() < prof.right_hand_probability ? data::Hand::right
                                                           : data::Hand::left;
    return out;
}

// nominal sensor origins in the seat frame (meters)
const Vec3 kEyeNominal{0.10, -0.02, 0.28};
const Vec3 kHeadNominal{0.06, 0.00, 0.22};
const Vec3 kFingerNominalRight{0.35, -0.18, -0.02};
const Vec3 kFingerNominalLeft{0.35, 0.14, -0.02};

data::Frame make_frame(Rng& rng, const GeneratorConfig& cfg, const ResolvedConfig& rc,
                       const geom::Aoi& aoi, const SampleDraw& draw, const Vec3& pos_offset,
                       double timestamp, bool at_trigger) {
    data::Frame f;
    f.timestamp = timestamp;
    const double pos_noise = 0.004 * cfg.noise_scale;

    auto jittered = [&](int mi) {
        const Modality m = kModalities[mi];
        const ErrorCell& cell = rc.model.cell(aoi.id, m);
        geom::AngularError a = draw.angles[mi];
        if (!at_trigger) {
            const double jf = cfg.frame_jitter_fraction * cfg.noise_scale;
            a.azimuth = wrap_degrees(a.azimuth + jf * cell.az_sd * rng.normal());
            a.elevation = std::clamp(a.elevation + jf * cell.el_sd * rng.normal(), -89.0, 89.0);
        }
        return a;
    };

    auto noise3 = [&]() {
        return Vec3{pos_noise * rng.normal(), pos_noise * rng.normal(),
                    pos_noise * rng.normal()};
    };

    const geom::AngularError eye = jittered(0);
    f.eye_pos = kEyeNominal + pos_offset + noise3();
    f.eye_dir = geom::from_azimuth_elevation(eye.azimuth, eye.elevation);

    const geom::AngularError head = jittered(1);
    f.head_pos = kHeadNominal + pos_offset + noise3();
    f.head_rot = {head.azimuth, head.elevation, 2.0 * cfg.noise_scale * rng.normal()};

    const geom::AngularError fing = jittered(2);
    f.finger_pos = (draw.hand == data::Hand::right ? kFingerNominalRight : kFingerNominalLeft)
                   + pos_offset + noise3();
    f.finger_dir = geom::from_azimuth_elevation(fing.azimuth, fing.elevation);

    // missing modalities keep sentinel zeros
    for (int mi = 0; mi < kModalityCount; ++mi) {
        if (!draw.missing[mi]) continue;
        switch (kModalities[mi]) {
        case Modality::eye:
            f.eye_pos = {};
            f.eye_dir = {};
            f.valid_eye = false;
            break;
        case Modality::head:
            f.head_pos = {};
            f.head_rot = {};
            f.valid_head = false;
            break;
        case Modality::finger:
            f.finger_pos = {};
            f.finger_dir = {};
            f.valid_finger = false;
            break;
        }
    }
    return f;
}

} // namespace

data::Dataset generate_dataset(const GeneratorConfig& cfg) {
    const ResolvedConfig rc = resolve(cfg);
    data::Dataset ds;
    ds.seat_origin = {0, 0, 0}; // generated data is already in the seat frame
    ds.fps_nominal = cfg.fps;
    ds.aois = rc.aois;

    const Rng base = Rng(cfg.seed).split("samples");
    const double dt = 1.0 / cfg.fps;
    std::size_t sample_index = 0;
    for (int di = 0; di < cfg.n_drivers; ++di) {
        const DriverProfile& prof = rc.profiles[static_cast<std::size_t>(di)];
        const Rng driver_rng = base.split(static_cast<std::uint64_t>(di));
        Rng anatomy = driver_rng.split("anatomy");
        const Vec3 pos_offset{0.03 * cfg.driver_variation_scale * anatomy.normal(),
                              0.03 * cfg.driver_variation_scale * anatomy.normal(),
                              0.04 * cfg.driver_variation_scale * anatomy.normal()};
        for (const geom::Aoi& aoi : rc.aois.all()) {
            for (int rep = 0; rep < cfg.samples_per_aoi; ++rep) {
                Rng rng = driver_rng.split(static_cast<std::uint64_t>(aoi.id) * 1000
                                           + static_cast<std::uint64_t>(rep));
                const SampleDraw draw = draw_sample(rng, rc, cfg, prof, aoi);
                data::Sample s;
                s.driver_id = prof.driver_id;
                s.aoi_id = aoi.id;
                s.hand = draw.hand;
                const double t0 = 10.0 * static_cast<double>(sample_index);
                s.trigger_time =
                    t0 + data::kTriggerFrameIndex * dt + rng.uniform() * dt * 0.98;
                for (int fi = 0; fi < data::kFramesPerSample; ++fi)
                    s.frames[static_cast<std::size_t>(fi)] =
                        make_frame(rng, cfg, rc, aoi, draw, pos_offset, t0 + fi * dt,
                                   fi == data::kTriggerFrameIndex);
                ds.samples.push_back(std::move(s));
                ++sample_index;
            }
        }
    }
    ds.validate();
    return ds;
}

data::RecordingFile generate_recordings(const GeneratorConfig& cfg, int context_frames,
                                        double gap_probability) {
    if (context_frames < 0 || gap_probability < 0.0 || gap_probability > 1.0)
        throw ConfigError("bad recordings parameters");
    const ResolvedConfig rc = resolve(cfg);
    data::RecordingFile rf;
    rf.seat_origin = {0, 0, 0};
    rf.fps_nominal = cfg.fps;
    rf.aois = rc.aois;

    const Rng base = Rng(cfg.seed).split("recordings");
    const double dt = 1.0 / cfg.fps;
    const int total = data::kFramesPerSample + 2 * context_frames;
    std::size_t sample_index = 0;
    for (int di = 0; di < cfg.n_drivers; ++di) {
        const DriverProfile& prof = rc.profiles[static_cast<std::size_t>(di)];
        const Rng driver_rng = base.split(static_cast<std::uint64_t>(di));
        for (const geom::Aoi& aoi : rc.aois.all()) {
            for (int rep = 0; rep < cfg.samples_per_aoi; ++rep) {
                Rng rng = driver_rng.split(static_cast<std::uint64_t>(aoi.id) * 1000
                                           + static_cast<std::uint64_t>(rep));
                SampleDraw draw = draw_sample(rng, rc, cfg, prof, aoi);
                // recordings model gaps frame-by-frame below, not whole events
                draw.missing[0] = draw.missing[1] = draw.missing[2] = false;
                data::Recording r;
                r.driver_id = prof.driver_id;
                r.aoi_id = aoi.id;
                r.hand = draw.hand;
                const double t0 = 10.0 * static_cast<double>(sample_index);
                const int trigger_idx = context_frames + data::kTriggerFrameIndex;
                r.trigger_time = t0 + trigger_idx * dt + rng.uniform() * dt * 0.98;
                for (int fi = 0; fi < total; ++fi)
                    r.frames.push_back(make_frame(rng, cfg, rc, aoi, draw, {}, t0 + fi * dt,
                                                  fi == trigger_idx));
                // knock out interior frames, never the first or last
                for (int fi = 1; fi + 1 < total; ++fi) {
                    for (const Modality m : kModalities) {
                        if (rng.uniform() >= gap_probability) continue;
                        data::Frame& f = r.frames[static_cast<std::size_t>(fi)];
                        f.set_valid(m, false);
                        switch (m) {
                        case Modality::eye: f.eye_pos = {}; f.eye_dir = {}; break;
                        case Modality::head: f.head_pos = {}; f.head_rot = {}; break;
                        case Modality::finger: f.finger_pos = {}; f.finger_dir = {}; break;
                        }
                    }
                }
                rf.recordings.push_back(std::move(r));
                ++sample_index;
            }
        }
    }
    return rf;
}

// --- empirical statistics -----------------------------------------------------

const CellStats& ErrorStats::cell(int aoi_id, Modality m) const {
    const auto it = cells.find(key(aoi_id, m));
    if (it == cells.end())
        throw DataError("no stats for AOI " + std::to_string(aoi_id) + ", modality "
                        + data::to_string(m));
    return it->second;
}

double ErrorStats::missing_eye_fraction() const {
    return total_samples == 0 ? 0.0
                              : static_cast<double>(missing_eye_total)
                                    / static_cast<double>(total_samples);
}

ErrorStats empirical_error_stats(const data::Dataset& ds) {
    if (ds.samples.empty()) throw DataError("empty dataset");

    struct Acc {
        std::vector<double> az, el;
    };
    std::map<std::pair<int, int>, Acc> acc;
    ErrorStats out;
    out.total_samples = ds.samples.size();

    for (const data::Sample& s : ds.samples) {
        const geom::Aoi& aoi = ds.aois.by_id(s.aoi_id);
        const geom::AngularError gt = geom::to_azimuth_elevation(aoi.ground_truth);
        const data::Frame& f = s.frames[data::kTriggerFrameIndex];
        for (const Modality m : kModalities) {
            if (!f.valid(m)) {
                if (m == Modality::eye) {
                    ++out.missing_eye_total;
                    ++out.missing_by_aoi[s.aoi_id];
                }
                continue;
            }
            geom::AngularError dir;
            switch (m) {
            case Modality::eye: dir = geom::to_azimuth_elevation(geom::normalize(f.eye_dir)); break;
            case Modality::head: dir = {f.head_rot.yaw, f.head_rot.pitch}; break;
            case Modality::finger:
                dir = geom::to_azimuth_elevation(geom::normalize(f.finger_dir));
                break;
            }
            Acc& a = acc[key(s.aoi_id, m)];
            a.az.push_back(wrap_degrees(dir.azimuth - gt.azimuth));
            a.el.push_back(dir.elevation - gt.elevation);
        }
    }

    auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = 0.0;
        for (const double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        if (v.size() < 2) {
            sd = 0.0;
            return;
        }
        double ss = 0.0;
        for (const double x : v) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    };

    for (const auto& [k, a] : acc) {
        CellStats c;
        c.n = a.az.size();
        c.degenerate = c.n < 2;
        mean_sd(a.az, c.az_mean, c.az_sd);
        mean_sd(a.el, c.el_mean, c.el_sd);
        out.cells[k] = c;
    }
    return out;
}

} // namespace pointfuse::synth
