// pointfuse - multimodal in-vehicle pointing fusion toolkit
//
// Subcommands: generate, preprocess, train, eval, ablate, bench, match, report.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pointfuse/dataset.hpp"
#include "pointfuse/errors.hpp"
#include "pointfuse/evaluation.hpp"
#include "pointfuse/matching.hpp"
#include "pointfuse/models.hpp"
#include "pointfuse/report.hpp"
#include "pointfuse/rng.hpp"
#include "pointfuse/synthgen.hpp"
#include "pointfuse/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pointfuse;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read input file " + p.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return hex64(h);
}

fs::path default_outdir() {
    const char* env = std::getenv("POINTFUSE_OUT");
    return env && *env ? fs::path(env) : fs::path("out");
}

void require_input(const fs::path& p, const std::string& flag) {
    if (p.empty()) throw ConfigError("missing required option " + flag);
    if (!fs::exists(p)) throw ConfigError(flag + ": no such file " + p.string());
}

fs::path ensure_outdir(fs::path dir) {
    if (dir.empty()) dir = default_outdir();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string());
    return dir;
}

// Manifest: settings hash, input hashes, seeds, tool version. No timestamps,
// so identical runs write identical manifests.
void write_manifest(const fs::path& outdir, const std::string& subcommand, const json& settings,
                    const std::vector<fs::path>& inputs, const std::vector<std::string>& outputs) {
    json m;
    m["tool"] = "pointfuse";
    m["version"] = kVersion;
    m["subcommand"] = subcommand;
    m["settings"] = settings;
    m["config_hash"] = hex64(Rng::fnv1a64(settings.dump()));
    json ins = json::array();
    for (const fs::path& p : inputs)
        ins.push_back({{"path", p.string()}, {"fnv1a64", file_hash(p)}});
    m["inputs"] = ins;
    m["outputs"] = outputs;

    std::ofstream out(outdir / (subcommand + ".manifest.jsonl"));
    if (!out) throw DataError("cannot write manifest");
    out << json{{"schema_version", data::kSchemaVersion}, {"kind", "manifest"}}.dump() << '\n';
    out << json{{"manifest", m}}.dump() << '\n';
}

std::vector<int> parse_class_list(const std::string& text) {
    // "1-12", "4-9,12", "1,2,3"
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string part = text.substr(pos, comma - pos);
        const std::size_t dash = part.find('-');
        try {
            if (dash == std::string::npos) {
                out.push_back(std::stoi(part));
            } else {
                const int lo = std::stoi(part.substr(0, dash));
                const int hi = std::stoi(part.substr(dash + 1));
                for (int i = lo; i <= hi; ++i) out.push_back(i);
            }
        } catch (const std::exception&) {
            throw ConfigError("bad class list '" + text + "'");
        }
        pos = comma + 1;
    }
    if (out.empty()) throw ConfigError("empty class list");
    return out;
}

// --- shared model/eval option block -----------------------------------------

struct ModelOptions {
    std::string family = "cnn";
    std::string head = "regression";
    std::string modalities = "all";
    std::string classes = "1-12";
    std::uint64_t seed = 1;
    int epochs = 100;
    int batch = 8;
    double lr = 0.001;
    int val_drivers = 2;
    int jobs = 1;
};

void add_model_options(CLI::App* cmd, ModelOptions& mo, bool with_jobs = true) {
    cmd->add_option("--family", mo.family, "cnn|rnn|fcnn|svr|rf")->capture_default_str();
    cmd->add_option("--head", mo.head, "regression|classification")->capture_default_str();
    cmd->add_option("--modalities", mo.modalities, "subset like finger+gaze, or all")
        ->capture_default_str();
    cmd->add_option("--classes", mo.classes, "AOI ids, e.g. 1-12 or 4-9,12")
        ->capture_default_str();
    cmd->add_option("--seed", mo.seed, "random seed")->capture_default_str();
    cmd->add_option("--epochs", mo.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--batch", mo.batch, "batch size")->capture_default_str();
    cmd->add_option("--lr", mo.lr, "learning rate")->capture_default_str();
    cmd->add_option("--val-drivers", mo.val_drivers, "validation drivers per fold")
        ->capture_default_str();
    if (with_jobs)
        cmd->add_option("--jobs", mo.jobs, "concurrent folds")->capture_default_str();
}

ml::ModelSpec spec_from(const ModelOptions& mo) {
    ml::ModelSpec spec;
    spec.family = ml::family_from_string(mo.family);
    spec.head = ml::head_from_string(mo.head);
    spec.class_ids = parse_class_list(mo.classes);
    spec.seed = mo.seed;
    return spec;
}

ml::TrainConfig train_config_from(const ModelOptions& mo) {
    ml::TrainConfig tc;
    tc.epochs = mo.epochs;
    tc.batch_size = mo.batch;
    tc.learning_rate = mo.lr;
    return tc;
}

json settings_from(const ModelOptions& mo) {
    return json{{"family", mo.family}, {"head", mo.head},     {"modalities", mo.modalities},
                {"classes", mo.classes}, {"seed", mo.seed},   {"epochs", mo.epochs},
                {"batch", mo.batch},     {"lr", mo.lr},       {"val_drivers", mo.val_drivers}};
}

// --- subcommands --------------------------------------------------------------

struct GenerateArgs {
    std::string out;
    std::string emit = "samples";
    std::uint64_t seed = 1;
    int drivers = 22;
    int samples_per_aoi = 10;
    std::string error_model_path;
    std::string aois_path;
    double noise_scale = 1.0;
    double missing_scale = 1.0;
    double driver_variation = 1.0;
    int context_frames = 6;
    double gap_probability = 0.05;
    fs::path outdir;
};

int cmd_generate(const GenerateArgs& a) {
    synth::GeneratorConfig cfg;
    cfg.seed = a.seed;
    cfg.n_drivers = a.drivers;
    cfg.samples_per_aoi = a.samples_per_aoi;
    cfg.noise_scale = a.noise_scale;
    cfg.missing_scale = a.missing_scale;
    cfg.driver_variation_scale = a.driver_variation;

    std::vector<fs::path> inputs;
    if (!a.error_model_path.empty()) {
        require_input(a.error_model_path, "--error-model");
        cfg.error_model = synth::ErrorModel::load(a.error_model_path);
        inputs.push_back(a.error_model_path);
    }
    if (!a.aois_path.empty()) {
        require_input(a.aois_path, "--aois");
        cfg.aois = data::load_dataset(a.aois_path).aois;
        inputs.push_back(a.aois_path);
    }

    const fs::path outdir = ensure_outdir(a.outdir);
    const fs::path out = a.out.empty() ? outdir / ("dataset." + a.emit + ".jsonl")
                                       : fs::path(a.out);

    const json settings{{"emit", a.emit},
                        {"seed", a.seed},
                        {"drivers", a.drivers},
                        {"samples_per_aoi", a.samples_per_aoi},
                        {"noise_scale", a.noise_scale},
                        {"missing_scale", a.missing_scale},
                        {"driver_variation", a.driver_variation}};
    const std::string provenance =
        json{{"seed", a.seed}, {"config_hash", hex64(Rng::fnv1a64(settings.dump()))}}.dump();

    if (a.emit == "samples") {
        const data::Dataset ds = synth::generate_dataset(cfg);
        data::save_dataset(ds, out, provenance);
        std::printf("wrote %zu samples (%d drivers x %zu AOIs) to %s\n", ds.samples.size(),
                    a.drivers, ds.aois.size(), out.string().c_str());
    } else if (a.emit == "recordings") {
        const data::RecordingFile rf =
            synth::generate_recordings(cfg, a.context_frames, a.gap_probability);
        data::save_recordings(rf, out, provenance);
        std::printf("wrote %zu recordings to %s\n", rf.recordings.size(), out.string().c_str());
    } else if (a.emit == "aois") {
        data::Dataset ds;
        ds.aois = cfg.aois.value_or(synth::default_aoi_set());
        ds.seat_origin = {0, 0, 0};
        data::save_dataset(ds, out, provenance);
        std::printf("wrote %zu AOIs to %s\n", ds.aois.size(), out.string().c_str());
    } else {
        throw ConfigError("--emit must be samples, recordings or aois");
    }
    write_manifest(outdir, "generate", settings, inputs, {out.string()});
    return 0;
}

struct PreprocessArgs {
    std::string in;
    std::string out;
    fs::path outdir;
};

int cmd_preprocess(const PreprocessArgs& a) {
    require_input(a.in, "--in");
    const fs::path outdir = ensure_outdir(a.outdir);
    const fs::path out = a.out.empty() ? outdir / "dataset.jsonl" : fs::path(a.out);

    const data::RecordingFile rf = data::load_recordings(a.in);
    data::Dataset ds;
    ds.seat_origin = {0, 0, 0}; // samples are emitted in the seat frame
    ds.fps_nominal = rf.fps_nominal;
    ds.aois = rf.aois;
    for (const data::Recording& r : rf.recordings)
        ds.samples.push_back(data::preprocess(r, rf.seat_origin));
    ds.validate();
    data::save_dataset(ds, out);

    std::printf("preprocessed %zu recordings -> %s\n", rf.recordings.size(),
                out.string().c_str());
    write_manifest(outdir, "preprocess", json{{"in", a.in}}, {a.in}, {out.string()});
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out;
    ModelOptions mo;
    fs::path outdir;
};

int cmd_train(const TrainArgs& a) {
    require_input(a.data, "--data");
    const ml::ModelSpec spec = spec_from(a.mo);
    const ml::ModalityMask mask = ml::ModalityMask::from_string(a.mo.modalities);
    const fs::path outdir = ensure_outdir(a.outdir);
    const fs::path out = a.out.empty() ? outdir / "model.jsonl" : fs::path(a.out);

    const data::Dataset ds = data::load_dataset(a.data);

    // deterministic driver-level split: the last --val-drivers shuffled drivers validate
    std::vector<std::string> drivers = ds.driver_ids();
    if (static_cast<int>(drivers.size()) <= a.mo.val_drivers)
        throw DataError("not enough drivers for the validation split");
    Rng rng = Rng(spec.seed).split("train-split");
    rng.shuffle(drivers);
    const std::vector<std::string> val(drivers.end() - a.mo.val_drivers, drivers.end());
    const std::vector<std::string> train(drivers.begin(), drivers.end() - a.mo.val_drivers);

    auto indices = [&](const std::vector<std::string>& who) {
        std::vector<std::size_t> out_idx;
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            const data::Sample& s = ds.samples[i];
            if (std::find(who.begin(), who.end(), s.driver_id) == who.end()) continue;
            if (std::find(spec.class_ids.begin(), spec.class_ids.end(), s.aoi_id)
                == spec.class_ids.end())
                continue;
            out_idx.push_back(i);
        }
        return out_idx;
    };

    const ml::ModelData train_set =
        ml::make_model_data(ds, indices(train), spec.class_ids, mask);
    const ml::ModelData val_set = ml::make_model_data(ds, indices(val), spec.class_ids, mask);

    std::unique_ptr<ml::Predictor> model = ml::build_model(spec);
    const ml::TrainHistory hist = model->train(train_set, val_set, train_config_from(a.mo));
    model->save(out);

    const fs::path hist_path = outdir / "history.jsonl";
    std::ofstream hout(hist_path);
    hout << json{{"schema_version", data::kSchemaVersion}, {"kind", "history"}}.dump() << '\n';
    for (const ml::EpochStats& e : hist.epochs)
        hout << json{{"epoch",
                      {{"n", e.epoch},
                       {"train_objective", e.train_objective},
                       {"val_accuracy", e.val_accuracy},
                       {"val_mad", std::isnan(e.val_mad) ? -1.0 : e.val_mad}}}}
                    .dump()
             << '\n';
    if (hist.zero_epochs_warning)
        std::fprintf(stderr, "warning: 0 epochs requested, saved initial weights\n");

    std::printf("trained %s/%s on %zu samples (val %zu), best epoch %d -> %s\n",
                a.mo.family.c_str(), a.mo.head.c_str(), train_set.size(), val_set.size(),
                hist.best_epoch, out.string().c_str());
    write_manifest(outdir, "train", settings_from(a.mo), {a.data},
                   {out.string(), hist_path.string()});
    return 0;
}

struct EvalArgs {
    std::string data;
    ModelOptions mo;
    fs::path outdir;
};

int cmd_eval(const EvalArgs& a) {
    require_input(a.data, "--data");
    const ml::ModelSpec spec = spec_from(a.mo);
    const fs::path outdir = ensure_outdir(a.outdir);

    const data::Dataset ds = data::load_dataset(a.data);
    eval::EvalOptions opt;
    opt.mask = ml::ModalityMask::from_string(a.mo.modalities);
    opt.class_ids = spec.class_ids;
    opt.jobs = a.mo.jobs;
    opt.train = train_config_from(a.mo);

    const eval::CvPlan plan = eval::make_cv_plan(ds, a.mo.val_drivers, spec.seed);
    const eval::EvalReport report = eval::run_cv(ds, spec, plan, opt);

    const json settings = settings_from(a.mo);
    const std::string provenance =
        json{{"seed", a.mo.seed}, {"config_hash", hex64(Rng::fnv1a64(settings.dump()))}}.dump();
    eval::save_report(report, outdir / "report.jsonl", provenance);
    eval::write_metrics_csv(report, outdir / "metrics.csv");

    std::printf("%zu-fold CV  %s/%s  modalities=%s  accuracy %.1f%%  MAD %.1f deg\n",
                report.folds.size(), report.family.c_str(), report.head.c_str(),
                report.modalities.c_str(), report.accuracy, report.mad);
    write_manifest(outdir, "eval", settings, {a.data},
                   {(outdir / "report.jsonl").string(), (outdir / "metrics.csv").string()});
    return 0;
}

struct AblateArgs {
    std::string data;
    std::string modality_list = "head,gaze,finger,gaze+head,finger+head,finger+gaze,all";
    std::string class_sets = "12,9,7";
    ModelOptions mo;
    fs::path outdir;
};

int cmd_ablate(const AblateArgs& a) {
    require_input(a.data, "--data");
    const ml::ModelSpec spec = spec_from(a.mo);
    const fs::path outdir = ensure_outdir(a.outdir);
    const data::Dataset ds = data::load_dataset(a.data);

    std::vector<ml::ModalityMask> masks;
    {
        std::size_t pos = 0;
        const std::string& t = a.modality_list;
        while (pos <= t.size()) {
            const std::size_t comma = std::min(t.find(',', pos), t.size());
            const std::string part = t.substr(pos, comma - pos);
            if (!part.empty()) masks.push_back(ml::ModalityMask::from_string(part));
            pos = comma + 1;
        }
    }

    std::vector<std::pair<std::string, std::vector<int>>> class_sets;
    for (const auto& [name, ids] : eval::standard_class_subsets())
        if (a.class_sets.find(name) != std::string::npos) class_sets.emplace_back(name, ids);
    if (class_sets.empty()) throw ConfigError("--class-sets selected nothing (use 12,9,7)");

    eval::EvalOptions base;
    base.jobs = a.mo.jobs;
    base.train = train_config_from(a.mo);

    const eval::AblationTable table = eval::ablation_suite(ds, spec, base, masks, class_sets);
    eval::write_ablation_csv(table, outdir / "ablation.csv");
    for (const eval::AblationCell& c : table.cells)
        std::printf("%-4s classes  %-18s  accuracy %5.1f%%  MAD %5.1f deg\n",
                    c.class_set.c_str(), c.modalities.c_str(), c.accuracy, c.mad);

    json settings = settings_from(a.mo);
    settings["modality_list"] = a.modality_list;
    settings["class_sets"] = a.class_sets;
    write_manifest(outdir, "ablate", settings, {a.data}, {(outdir / "ablation.csv").string()});
    return 0;
}

struct PredictArgs {
    std::string model;
    std::string data;
    std::string out;
    std::string modalities = "all"; // must match what the model was trained with
    fs::path outdir;
};

int cmd_predict(const PredictArgs& a) {
    require_input(a.model, "--model");
    require_input(a.data, "--data");
    const ml::ModalityMask mask = ml::ModalityMask::from_string(a.modalities);
    const fs::path outdir = ensure_outdir(a.outdir);
    const fs::path out = a.out.empty() ? outdir / "predictions.csv" : fs::path(a.out);

    const std::unique_ptr<ml::Predictor> model = ml::load_model(a.model);
    const data::Dataset ds = data::load_dataset(a.data);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (std::find(model->spec().class_ids.begin(), model->spec().class_ids.end(),
                      ds.samples[i].aoi_id)
            != model->spec().class_ids.end())
            idx.push_back(i);
    const ml::ModelData md = ml::make_model_data(ds, idx, model->spec().class_ids, mask);
    const std::vector<ml::Prediction> preds = model->predict(md.inputs);
    const std::vector<int> cls = ml::predicted_class_indices(preds, md, model->spec().head);

    std::ofstream csv(out);
    if (!csv) throw DataError("cannot write " + out.string());
    csv << "driver,true_aoi,predicted_aoi,correct";
    if (model->spec().head == ml::Head::regression) csv << ",deviation_deg";
    csv << '\n';
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int pred_aoi = md.class_ids[static_cast<std::size_t>(cls[i])];
        const bool ok = cls[i] == md.labels[i];
        if (ok) ++correct;
        csv << md.driver_ids[i] << ',' << md.aoi_ids[i] << ',' << pred_aoi << ',' << (ok ? 1 : 0);
        if (model->spec().head == ml::Head::regression)
            csv << ',' << geom::angular_deviation_deg(preds[i].direction, md.target_dirs[i]);
        csv << '\n';
    }
    std::printf("predicted %zu samples, accuracy %.1f%% -> %s\n", preds.size(),
                100.0 * static_cast<double>(correct) / static_cast<double>(preds.size()),
                out.string().c_str());
    write_manifest(outdir, "predict",
                   json{{"model", a.model}, {"data", a.data}, {"modalities", a.modalities}},
                   {a.model, a.data}, {out.string()});
    return 0;
}

struct BenchArgs {
    std::vector<std::string> models;
    std::string data;
    int n = 300;
    fs::path outdir;
};

int cmd_bench(const BenchArgs& a) {
    if (a.models.empty()) throw ConfigError("--model required (repeatable)");
    require_input(a.data, "--data");
    const fs::path outdir = ensure_outdir(a.outdir);

    const data::Dataset ds = data::load_dataset(a.data);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < std::min<std::size_t>(ds.samples.size(), 64); ++i)
        idx.push_back(i);

    const fs::path out = outdir / "bench.csv";
    std::ofstream csv(out);
    csv << "model,family,ms_per_sample,frames_per_second\n";
    std::vector<fs::path> inputs{a.data};
    for (const std::string& mpath : a.models) {
        require_input(mpath, "--model");
        inputs.push_back(mpath);
        const std::unique_ptr<ml::Predictor> model = ml::load_model(mpath);
        const ml::ModelData md = ml::make_model_data(ds, idx, model->spec().class_ids,
                                                     ml::ModalityMask::all());
        const eval::SpeedStats s = eval::speed_bench(*model, md.inputs, a.n);
        std::printf("%-24s %-5s  %8.3f ms/sample  %9.0f frames/s\n", mpath.c_str(),
                    ml::to_string(model->spec().family), s.ms_per_sample,
                    s.frames_per_second);
        csv << mpath << ',' << ml::to_string(model->spec().family) << ',' << s.ms_per_sample
            << ',' << s.frames_per_second << '\n';
    }
    write_manifest(outdir, "bench", json{{"n", a.n}}, inputs, {out.string()});
    return 0;
}

struct MatchArgs {
    std::string aois;
    std::vector<double> vec;
    fs::path outdir;
};

int cmd_match(const MatchArgs& a) {
    require_input(a.aois, "--aois");
    if (a.vec.size() != 3) throw ConfigError("--vector needs x y z");
    const data::Dataset ds = data::load_dataset(a.aois);
    const MatchResult r = match_aoi({a.vec[0], a.vec[1], a.vec[2]}, ds.aois);
    std::printf("best: aoi %d (cosine %.5f, deviation %.2f deg)\n", r.aoi_id, r.score,
                r.deviation_deg);
    std::printf("%-6s %-10s %s\n", "aoi", "cosine", "deviation");
    for (const auto& [id, score] : r.ranked)
        std::printf("%-6d %-10.5f %.2f\n", id, score,
                    geom::kDegPerRad * std::acos(std::clamp(score, -1.0, 1.0)));
    const fs::path outdir = ensure_outdir(a.outdir);
    write_manifest(outdir, "match",
                   json{{"vector", a.vec}, {"aois", a.aois}}, {a.aois}, {});
    return 0;
}

struct ReportArgs {
    std::string report;
    std::string ablation;
    fs::path outdir;
};

int cmd_report(const ReportArgs& a) {
    require_input(a.report, "--report");
    const fs::path outdir = ensure_outdir(a.outdir);
    const eval::EvalReport r = eval::load_report(a.report);
    eval::write_confusion_csv(r, outdir / "confusion.csv");
    eval::write_confusion_svg(r, outdir / "confusion.svg");
    eval::write_driver_scatter_svg(r, outdir / "drivers.svg");
    std::vector<std::string> outputs{(outdir / "confusion.csv").string(),
                                     (outdir / "confusion.svg").string(),
                                     (outdir / "drivers.svg").string()};
    std::vector<fs::path> inputs{a.report};
    if (!a.ablation.empty()) {
        require_input(a.ablation, "--ablation");
        inputs.push_back(a.ablation);
        // pass the ablation table through next to the plots
        std::error_code ec;
        fs::copy_file(a.ablation, outdir / "ablation.csv",
                      fs::copy_options::overwrite_existing, ec);
        if (ec) throw DataError("cannot copy ablation table: " + ec.message());
        outputs.push_back((outdir / "ablation.csv").string());
    }
    std::printf("rendered %zu-class confusion matrix and per-driver scatter to %s\n",
                r.class_ids.size(), outdir.string().c_str());
    write_manifest(outdir, "report", json{{"report", a.report}}, inputs, outputs);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal in-vehicle pointing fusion toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read defaults from a config file; flags win");
    app.set_version_flag("--version", std::string("pointfuse ") + kVersion);

    GenerateArgs ga;
    CLI::App* gen = app.add_subcommand("generate", "emit a synthetic dataset");
    gen->add_option("--out", ga.out, "output file");
    gen->add_option("--emit", ga.emit, "samples|recordings|aois")->capture_default_str();
    gen->add_option("--seed", ga.seed)->capture_default_str();
    gen->add_option("--drivers", ga.drivers)->capture_default_str();
    gen->add_option("--samples-per-aoi", ga.samples_per_aoi)->capture_default_str();
    gen->add_option("--error-model", ga.error_model_path, "error model record file");
    gen->add_option("--aois", ga.aois_path, "AOI set record file");
    gen->add_option("--noise-scale", ga.noise_scale)->capture_default_str();
    gen->add_option("--missing-scale", ga.missing_scale)->capture_default_str();
    gen->add_option("--driver-variation", ga.driver_variation)->capture_default_str();
    gen->add_option("--context-frames", ga.context_frames)->capture_default_str();
    gen->add_option("--gap-probability", ga.gap_probability)->capture_default_str();
    gen->add_option("--outdir", ga.outdir, "output directory (or $POINTFUSE_OUT)");

    PreprocessArgs pa;
    CLI::App* pre = app.add_subcommand("preprocess", "recordings -> 8-frame samples");
    pre->add_option("--in", pa.in, "recordings file");
    pre->add_option("--out", pa.out, "output dataset file");
    pre->add_option("--outdir", pa.outdir);

    TrainArgs ta;
    CLI::App* tr = app.add_subcommand("train", "train one model on a driver split");
    tr->add_option("--data", ta.data, "dataset file");
    tr->add_option("--out", ta.out, "model output file");
    tr->add_option("--outdir", ta.outdir);
    add_model_options(tr, ta.mo, false);

    EvalArgs ea;
    CLI::App* ev = app.add_subcommand("eval", "leave-one-driver-out cross-validation");
    ev->add_option("--data", ea.data, "dataset file");
    ev->add_option("--outdir", ea.outdir);
    add_model_options(ev, ea.mo);

    AblateArgs aa;
    CLI::App* ab = app.add_subcommand("ablate", "modality and class-subset study");
    ab->add_option("--data", aa.data, "dataset file");
    ab->add_option("--modality-list", aa.modality_list)->capture_default_str();
    ab->add_option("--class-sets", aa.class_sets, "subset names from 12,9,7")
        ->capture_default_str();
    ab->add_option("--outdir", aa.outdir);
    add_model_options(ab, aa.mo);

    PredictArgs pda;
    CLI::App* pd = app.add_subcommand("predict", "run a trained model over a dataset");
    pd->add_option("--model", pda.model, "trained model file");
    pd->add_option("--data", pda.data, "dataset file");
    pd->add_option("--out", pda.out, "predictions csv");
    pd->add_option("--modalities", pda.modalities, "mask used at training time")
        ->capture_default_str();
    pd->add_option("--outdir", pda.outdir);

    BenchArgs ba;
    CLI::App* be = app.add_subcommand("bench", "single-sample inference timing");
    be->add_option("--model", ba.models, "trained model file (repeatable)");
    be->add_option("--data", ba.data, "dataset file for the input pool");
    be->add_option("--n", ba.n)->capture_default_str();
    be->add_option("--outdir", ba.outdir);

    MatchArgs ma;
    CLI::App* mt = app.add_subcommand("match", "rank AOIs for a direction vector");
    mt->add_option("--aois", ma.aois, "AOI set record file");
    mt->add_option("--vector", ma.vec, "direction x y z")->expected(3);
    mt->add_option("--outdir", ma.outdir);

    ReportArgs ra;
    CLI::App* re = app.add_subcommand("report", "render plots and tables from a report");
    re->add_option("--report", ra.report, "report.jsonl from eval");
    re->add_option("--ablation", ra.ablation, "ablation.csv from ablate");
    re->add_option("--outdir", ra.outdir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(ga);
        if (pre->parsed()) return cmd_preprocess(pa);
        if (tr->parsed()) return cmd_train(ta);
        if (pd->parsed()) return cmd_predict(pda);
        if (ev->parsed()) return cmd_eval(ea);
        if (ab->parsed()) return cmd_ablate(aa);
        if (be->parsed()) return cmd_bench(ba);
        if (mt->parsed()) return cmd_match(ma);
        if (re->parsed()) return cmd_report(ra);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return 0;
}
