// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. The heavy cross-validation criteria share one set of runs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "pointfuse/dataset.hpp"
#include "pointfuse/evaluation.hpp"
#include "pointfuse/layers.hpp"
#include "pointfuse/matching.hpp"
#include "pointfuse/models.hpp"
#include "pointfuse/rng.hpp"
#include "pointfuse/synthgen.hpp"

namespace fs = std::filesystem;
using namespace pointfuse;

namespace {

struct Checker {
    int failures = 0;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            ++failures;
            notes.push_back(what);
        }
    }
};

int g_criteria_failed = 0;

void criterion(int number, const std::string& name, const std::function<void(Checker&)>& body) {
    Checker c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %-28s (%.1f s)\n", c.failures == 0 ? "PASS" : "FAIL",
                number, name.c_str(), secs);
    for (const std::string& n : c.notes) std::printf("       - %s\n", n.c_str());
    std::fflush(stdout);
    if (c.failures > 0) ++g_criteria_failed;
}

std::vector<double> random_coeffs(std::size_t n, Rng& rng) {
    std::vector<double> c(n);
    for (double& v : c) v = rng.uniform(-1.0, 1.0);
    return c;
}

void randomize(nn::Tensor& t, Rng& rng) {
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
}

std::vector<int> classes_1_12() {
    std::vector<int> ids;
    for (int i = 1; i <= 12; ++i) ids.push_back(i);
    return ids;
}

// ---- criterion 1: gradient correctness ------------------------------------

void check_gradients(Checker& c) {
    const double tol = 1e-4;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);

        { // conv2d
            nn::Conv2d conv("c", 3, 4, 3, 1, rng);
            nn::Tensor x({2, 3, 4, 6});
            randomize(x, rng);
            const std::vector<double> coeffs = random_coeffs(2 * 4 * 4 * 6, rng);
            for (nn::Param* p : conv.params()) p->zero_grad();
            conv.forward(x);
            const nn::Tensor dx = conv.backward(nn::Tensor({2, 4, 4, 6}, coeffs));
            auto loss = [&]() { return gradcheck::project(conv.forward(x), coeffs); };
            for (nn::Param* p : conv.params())
                c.expect(gradcheck::max_rel_error(loss, p->value.data, p->grad.data) < tol,
                         "conv2d param gradient, seed " + std::to_string(seed));
            c.expect(gradcheck::max_rel_error(loss, x.data, dx.data) < tol,
                     "conv2d input gradient, seed " + std::to_string(seed));
        }
        { // dense
            nn::Dense d("d", 6, 4, nn::Dense::Init::he, rng);
            nn::Tensor x({3, 6});
            randomize(x, rng);
            const std::vector<double> coeffs = random_coeffs(12, rng);
            for (nn::Param* p : d.params()) p->zero_grad();
            d.forward(x);
            const nn::Tensor dx = d.backward(nn::Tensor({3, 4}, coeffs));
            auto loss = [&]() { return gradcheck::project(d.forward(x), coeffs); };
            for (nn::Param* p : d.params())
                c.expect(gradcheck::max_rel_error(loss, p->value.data, p->grad.data) < tol,
                         "dense param gradient, seed " + std::to_string(seed));
            c.expect(gradcheck::max_rel_error(loss, x.data, dx.data) < tol,
                     "dense input gradient, seed " + std::to_string(seed));
        }
        { // lstm over 8 steps
            nn::Lstm l("l", 3, 4, rng);
            nn::Tensor x({2, 8, 3});
            randomize(x, rng);
            const std::vector<double> coeffs = random_coeffs(8, rng);
            for (nn::Param* p : l.params()) p->zero_grad();
            l.forward(x);
            const nn::Tensor dx = l.backward_from_final(nn::Tensor({2, 4}, coeffs));
            auto loss = [&]() {
                l.forward(x);
                return gradcheck::project(l.final_hidden(), coeffs);
            };
            for (nn::Param* p : l.params())
                c.expect(gradcheck::max_rel_error(loss, p->value.data, p->grad.data) < tol,
                         "lstm param gradient, seed " + std::to_string(seed));
            c.expect(gradcheck::max_rel_error(loss, x.data, dx.data) < tol,
                     "lstm input gradient, seed " + std::to_string(seed));
        }
        { // cosine loss
            nn::Tensor p({4, 3}), t({4, 3});
            randomize(p, rng);
            randomize(t, rng);
            for (int i = 0; i < 4; ++i) {
                p.at(i, 0) += p.at(i, 0) < 0 ? -0.5 : 0.5;
                t.at(i, 0) += t.at(i, 0) < 0 ? -0.5 : 0.5;
            }
            const nn::LossValue lv = nn::cosine_loss(p, t);
            auto loss = [&]() { return nn::cosine_loss(p, t).objective; };
            c.expect(gradcheck::max_rel_error(loss, p.data, lv.grad.data) < tol,
                     "cosine loss gradient, seed " + std::to_string(seed));
        }
        { // softmax cross entropy
            nn::Tensor logits({3, 6});
            randomize(logits, rng);
            const std::vector<int> labels{1, 5, 0};
            const nn::LossValue lv = nn::softmax_cross_entropy(logits, labels);
            auto loss = [&]() { return nn::softmax_cross_entropy(logits, labels).value; };
            c.expect(gradcheck::max_rel_error(loss, logits.data, lv.grad.data) < tol,
                     "softmax loss gradient, seed " + std::to_string(seed));
        }
    }
}

// ---- criterion 2: matching oracle ------------------------------------------

void check_matching_oracle(Checker& c) {
    Rng rng(20250808);
    auto random_unit = [&]() {
        for (;;) {
            const geom::Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            const double n = v.norm();
            if (n > 0.1 && n <= 1.0) return v / n;
        }
    };
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<geom::Aoi> aois;
        for (int id = 1; id <= 12; ++id)
            aois.push_back(geom::build_aoi(id, {random_unit() * rng.uniform(0.3, 1.5)}));
        const geom::AoiSet set(std::move(aois));
        const geom::Vec3 pred = random_unit();

        int best_id = -1;
        double best_angle = 1e18;
        for (const geom::Aoi& a : set.all()) {
            const double ang = geom::angular_deviation_deg(pred, a.ground_truth);
            if (ang < best_angle || (ang == best_angle && a.id < best_id)) {
                best_angle = ang;
                best_id = a.id;
            }
        }
        if (match_aoi(pred, set).aoi_id != best_id) ++mismatches;
    }
    c.expect(mismatches == 0,
             "matching disagreed with brute force on " + std::to_string(mismatches)
                 + " of 10000 trials");
}

// ---- criterion 3: pipeline identity ------------------------------------------

void check_pipeline_identity(Checker& c) {
    synth::GeneratorConfig cfg;
    cfg.n_drivers = 4;
    cfg.samples_per_aoi = 3;
    cfg.noise_scale = 0.0;
    cfg.missing_scale = 0.0;
    cfg.driver_variation_scale = 0.0;
    cfg.seed = 77;
    const data::RecordingFile rf = synth::generate_recordings(cfg, 6, 0.15);

    std::vector<int> pred_ids, true_ids;
    std::vector<geom::Vec3> pred_dirs, true_dirs;
    for (const data::Recording& rec : rf.recordings) {
        const data::Sample s = data::preprocess(rec, rf.seat_origin);
        // oracle predictor: emits the sample's true AOI ground-truth vector
        const geom::Vec3 oracle = rf.aois.by_id(s.aoi_id).ground_truth;
        const MatchResult m = match_aoi(oracle, rf.aois);
        pred_ids.push_back(m.aoi_id);
        true_ids.push_back(s.aoi_id);
        pred_dirs.push_back(oracle);
        true_dirs.push_back(rf.aois.by_id(s.aoi_id).ground_truth);
    }
    const double acc = eval::accuracy_percent(pred_ids, true_ids);
    const double mad = eval::mean_angular_deviation_deg(pred_dirs, true_dirs);
    c.expect(std::abs(acc - 100.0) <= 1e-9, "accuracy " + std::to_string(acc) + " != 100");
    c.expect(mad <= 1e-9, "MAD " + std::to_string(mad) + " > 1e-9");
}

// ---- criterion 4: generator fidelity ------------------------------------------

void check_generator_fidelity(Checker& c) {
    synth::GeneratorConfig cfg;
    cfg.n_drivers = 10;
    cfg.samples_per_aoi = 1000; // 10,000 samples per (AOI, modality) cell
    cfg.driver_variation_scale = 0.0;
    cfg.seed = 424242;
    const data::Dataset ds = synth::generate_dataset(cfg);
    const synth::ErrorStats stats = synth::empirical_error_stats(ds);
    const synth::ErrorModel model = synth::ErrorModel::in_vehicle_defaults();

    int cells_checked = 0;
    for (int aoi = 1; aoi <= 12; ++aoi) {
        for (const data::Modality m :
             {data::Modality::eye, data::Modality::head, data::Modality::finger}) {
            const synth::ErrorCell& want = model.cell(aoi, m);
            const geom::AngularError mean =
                synth::signed_bias(want, ds.aois.by_id(aoi), m);
            const synth::CellStats& got = stats.cell(aoi, m);
            const double n = static_cast<double>(got.n);
            const auto near = [&](double have, double want_v, double sd, double se_scale,
                                  const char* what) {
                const double se = sd / std::sqrt(se_scale * n);
                // exact-zero spread cells pass trivially
                const bool ok = sd == 0.0 ? std::abs(have - want_v) < 1e-9
                                          : std::abs(have - want_v) <= 3.0 * se;
                c.expect(ok, "aoi " + std::to_string(aoi) + " " + data::to_string(m) + " "
                                 + what + ": have " + std::to_string(have) + ", want "
                                 + std::to_string(want_v) + " within "
                                 + std::to_string(3.0 * se));
            };
            near(got.az_mean, mean.azimuth, want.az_sd, 1.0, "az mean");
            near(got.el_mean, mean.elevation, want.el_sd, 1.0, "el mean");
            near(got.az_sd, want.az_sd, want.az_sd, 2.0, "az sd");
            near(got.el_sd, want.el_sd, want.el_sd, 2.0, "el sd");
            ++cells_checked;
        }
    }
    c.expect(cells_checked == 36, "expected 36 cells");
    const double missing = stats.missing_eye_fraction();
    c.expect(std::abs(missing - 0.25) <= 0.02,
             "missing-gaze fraction " + std::to_string(missing) + " outside 25% +- 2 points");
}

// ---- criteria 5/6/7: trend reproduction on the default synthetic set ----------

struct CvOutcome {
    double head = 0, gaze = 0, finger = 0, all = 0;
    double gaze9 = 0;
    double seconds_5_6 = 0;
};

CvOutcome run_trend_cv() {
    synth::GeneratorConfig gen;
    gen.n_drivers = 22;
    gen.samples_per_aoi = 10;
    gen.seed = 42;
    const data::Dataset ds = synth::generate_dataset(gen);

    ml::ModelSpec spec;
    spec.family = ml::Family::cnn;
    spec.head = ml::Head::regression;
    spec.class_ids = classes_1_12();
    spec.seed = 7;

    const eval::CvPlan plan = eval::make_cv_plan(ds, 2, spec.seed);
    eval::EvalOptions opt;
    opt.jobs = 2;
    opt.train.epochs = 18;
    opt.train.batch_size = 8;
    opt.train.learning_rate = 0.001;

    CvOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    auto run_mask = [&](ml::ModalityMask mask) {
        eval::EvalOptions o = opt;
        o.mask = mask;
        const eval::EvalReport r = eval::run_cv(ds, spec, plan, o);
        std::printf("       cv %-18s accuracy %5.1f%%  MAD %5.2f deg\n", mask.str().c_str(),
                    r.accuracy, r.mad);
        std::fflush(stdout);
        return r.accuracy;
    };
    out.head = run_mask({false, true, false});
    out.gaze = run_mask({true, false, false});
    out.finger = run_mask({false, false, true});
    out.all = run_mask({true, true, true});
    out.seconds_5_6 =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // gaze-only with the difficult classes 1-3 removed
    eval::EvalOptions o9 = opt;
    o9.mask = {true, false, false};
    o9.class_ids = {4, 5, 6, 7, 8, 9, 10, 11, 12};
    const eval::EvalReport r9 = eval::run_cv(ds, spec, plan, o9);
    std::printf("       cv gaze, classes 4-12    accuracy %5.1f%%  MAD %5.2f deg\n", r9.accuracy,
                r9.mad);
    out.gaze9 = r9.accuracy;
    return out;
}

// ---- criterion 8: model comparison on a fixed split ----------------------------

void check_model_comparison(Checker& c) {
    synth::GeneratorConfig gen;
    gen.n_drivers = 12;
    gen.samples_per_aoi = 10;
    gen.seed = 1337;
    const data::Dataset ds = synth::generate_dataset(gen);

    // fixed driver split: 8 train / 2 val / 2 test
    const std::vector<std::string> drivers = ds.driver_ids();
    std::vector<std::string> train(drivers.begin(), drivers.begin() + 8);
    std::vector<std::string> val(drivers.begin() + 8, drivers.begin() + 10);
    std::vector<std::string> test(drivers.begin() + 10, drivers.end());

    auto indices = [&](const std::vector<std::string>& who) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.samples.size(); ++i)
            for (const std::string& d : who)
                if (ds.samples[i].driver_id == d) idx.push_back(i);
        return idx;
    };
    const std::vector<int> classes = classes_1_12();
    const ml::ModalityMask mask = ml::ModalityMask::all();
    const ml::ModelData tr = ml::make_model_data(ds, indices(train), classes, mask);
    const ml::ModelData va = ml::make_model_data(ds, indices(val), classes, mask);
    const ml::ModelData te = ml::make_model_data(ds, indices(test), classes, mask);

    std::map<ml::Family, double> acc;
    for (const ml::Family fam :
         {ml::Family::cnn, ml::Family::rnn, ml::Family::fcnn, ml::Family::svr, ml::Family::rf}) {
        ml::ModelSpec spec;
        spec.family = fam;
        spec.head = ml::Head::regression;
        spec.class_ids = classes;
        spec.seed = 5;
        ml::TrainConfig tc;
        tc.epochs = 20;
        std::unique_ptr<ml::Predictor> m = ml::build_model(spec);
        m->train(tr, va, tc);
        const std::vector<int> cls =
            ml::predicted_class_indices(m->predict(te.inputs), te, ml::Head::regression);
        std::size_t ok = 0;
        for (std::size_t i = 0; i < cls.size(); ++i)
            if (cls[i] == te.labels[i]) ++ok;
        acc[fam] = 100.0 * static_cast<double>(ok) / static_cast<double>(cls.size());
        std::printf("       split %-5s accuracy %5.1f%%\n", ml::to_string(fam), acc[fam]);
        std::fflush(stdout);
    }
    const double baseline = 100.0 / 12.0;
    for (const auto& [fam, a] : acc)
        c.expect(a > baseline, std::string(ml::to_string(fam)) + " does not beat the 1/12 baseline");
    c.expect(acc[ml::Family::svr] < acc[ml::Family::cnn],
             "SVR regression does not trail the CNN");
}

// ---- criterion 9: noiseless learnability ----------------------------------------

void check_noiseless_learnability(Checker& c) {
    synth::GeneratorConfig gen;
    gen.n_drivers = 6;
    gen.samples_per_aoi = 4;
    gen.noise_scale = 0.0;
    gen.missing_scale = 0.0;
    gen.driver_variation_scale = 0.0;
    gen.seed = 99;
    const data::Dataset ds = synth::generate_dataset(gen);

    ml::ModelSpec spec;
    spec.family = ml::Family::cnn;
    spec.head = ml::Head::regression;
    spec.class_ids = classes_1_12();
    spec.seed = 3;

    const eval::CvPlan plan = eval::make_cv_plan(ds, 1, 3);
    eval::EvalOptions opt;
    opt.jobs = 2;
    opt.train.epochs = 100;
    opt.train.learning_rate = 0.003;
    opt.train.early_stop_val_accuracy = 100.0;
    opt.train.early_stop_val_mad = 0.8;
    const eval::EvalReport r = eval::run_cv(ds, spec, plan, opt);
    std::printf("       noiseless cv accuracy %5.1f%%  MAD %5.3f deg\n", r.accuracy, r.mad);
    c.expect(r.accuracy == 100.0, "accuracy " + std::to_string(r.accuracy) + " != 100");
    c.expect(r.mad < 2.0, "MAD " + std::to_string(r.mad) + " >= 2 degrees");
}

// ---- criterion 10: throughput ------------------------------------------------------

void check_throughput(Checker& c) {
    synth::GeneratorConfig gen;
    gen.n_drivers = 3;
    gen.samples_per_aoi = 2;
    gen.seed = 10;
    const data::Dataset ds = synth::generate_dataset(gen);
    std::vector<std::size_t> idx(ds.samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const ml::ModelData md =
        ml::make_model_data(ds, idx, classes_1_12(), ml::ModalityMask::all());
    ml::TrainConfig tc;
    tc.epochs = 1;

    auto bench = [&](ml::Family fam) {
        ml::ModelSpec spec;
        spec.family = fam;
        spec.head = ml::Head::regression;
        spec.class_ids = classes_1_12();
        spec.seed = 2;
        std::unique_ptr<ml::Predictor> m = ml::build_model(spec);
        m->train(md, md, tc);
        const eval::SpeedStats s = eval::speed_bench(*m, md.inputs, 400);
        std::printf("       %-4s %7.3f ms/sample  %8.0f frames/s\n", ml::to_string(fam),
                    s.ms_per_sample, s.frames_per_second);
        return s;
    };
    const eval::SpeedStats cnn = bench(ml::Family::cnn);
    const eval::SpeedStats rnn = bench(ml::Family::rnn);
    c.expect(cnn.ms_per_sample < 10.0, "CNN single-sample inference >= 10 ms");
    c.expect(cnn.ms_per_sample < rnn.ms_per_sample, "CNN not faster than RNN per sample");
    c.expect(std::abs(cnn.frames_per_second - 8000.0 / cnn.ms_per_sample)
                 <= 0.01 * cnn.frames_per_second,
             "fps inconsistent with ms/sample");
}

// ---- criterion 11: CLI reproducibility ---------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_reproducibility(Checker& c) {
    const fs::path dir = fs::temp_directory_path() / "pf_acceptance_repro";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string bin = POINTFUSE_BIN;
    auto run = [&](const std::string& args) {
        const int status =
            std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
        return WEXITSTATUS(status);
    };
    const std::string data = (dir / "ds.jsonl").string();
    c.expect(run("generate --drivers 4 --samples-per-aoi 2 --seed 8 --outdir " + dir.string()
                 + " --out " + data)
                 == 0,
             "generate failed");
    const std::string eval_args = "eval --data " + data
                                  + " --epochs 3 --val-drivers 1 --seed 9 --outdir "
                                  + (dir / "r1").string();
    c.expect(run(eval_args) == 0, "first eval failed");
    const std::string metrics_first = slurp(dir / "r1" / "metrics.csv");
    const std::string manifest_first = slurp(dir / "r1" / "eval.manifest.jsonl");
    c.expect(run(eval_args) == 0, "second eval failed");
    c.expect(slurp(dir / "r1" / "metrics.csv") == metrics_first,
             "metric values differ between identical runs");
    c.expect(slurp(dir / "r1" / "eval.manifest.jsonl") == manifest_first,
             "manifests differ between identical runs");
    fs::remove_all(dir);
}

} // namespace

int main() {
    std::printf("pointfuse acceptance suite\n");

    criterion(1, "gradient correctness", [](Checker& c) {
        const auto t0 = std::chrono::steady_clock::now();
        check_gradients(c);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        c.expect(secs < 60.0, "gradient checks exceeded 1 minute");
    });

    criterion(2, "matching oracle", [](Checker& c) {
        const auto t0 = std::chrono::steady_clock::now();
        check_matching_oracle(c);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        c.expect(secs < 5.0, "matching oracle exceeded 5 seconds");
    });

    criterion(3, "pipeline identity", check_pipeline_identity);
    criterion(4, "generator fidelity", check_generator_fidelity);

    CvOutcome trend;
    criterion(5, "monomodal ordering", [&trend](Checker& c) {
        trend = run_trend_cv();
        c.expect(trend.finger > trend.gaze, "finger does not beat gaze");
        c.expect(trend.gaze > trend.head, "gaze does not beat head");
        const double floor = 3.0 * 100.0 / 12.0;
        c.expect(trend.head >= floor, "head below 3x random baseline");
        c.expect(trend.gaze >= floor, "gaze below 3x random baseline");
        c.expect(trend.finger >= floor, "finger below 3x random baseline");
        c.expect(trend.seconds_5_6 < 900.0, "CV runs exceeded 15 minutes");
    });

    criterion(6, "fusion dominance", [&trend](Checker& c) {
        const double best_single = std::max({trend.head, trend.gaze, trend.finger});
        c.expect(trend.all >= best_single + 2.0,
                 "fusion " + std::to_string(trend.all) + " < best single "
                     + std::to_string(best_single) + " + 2");
    });

    criterion(7, "difficult-class ablation", [&trend](Checker& c) {
        c.expect(trend.gaze9 >= trend.gaze + 5.0,
                 "gaze 9-class " + std::to_string(trend.gaze9) + " < gaze 12-class "
                     + std::to_string(trend.gaze) + " + 5");
    });

    criterion(8, "model comparison sanity", check_model_comparison);
    criterion(9, "noiseless learnability", check_noiseless_learnability);
    criterion(10, "throughput ordering/floor", check_throughput);
    criterion(11, "reproducibility", check_reproducibility);

    if (g_criteria_failed > 0) {
        std::printf("%d criterion(s) FAILED\n", g_criteria_failed);
        return 1;
    }
    std::printf("all 11 criteria passed\n");
    return 0;
}
