#include "pointfuse/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include "pointfuse/errors.hpp"
#include "pointfuse/matching.hpp"
#include "pointfuse/rng.hpp"

namespace pointfuse::eval {

void CvPlan::validate(const std::vector<std::string>& all_drivers) const {
    const std::set<std::string> everyone(all_drivers.begin(), all_drivers.end());
    std::set<std::string> tested;
    for (const CvFold& f : folds) {
        std::set<std::string> seen{f.test_driver};
        for (const std::string& d : f.val_drivers)
            if (!seen.insert(d).second) throw DataError("driver " + d + " in two fold roles");
        for (const std::string& d : f.train_drivers)
            if (!seen.insert(d).second) throw DataError("driver " + d + " in two fold roles");
        if (seen != everyone)
            throw DataError("fold for " + f.test_driver + " does not partition the drivers");
        if (!tested.insert(f.test_driver).second)
            throw DataError("driver " + f.test_driver + " tested twice");
    }
    if (tested != everyone) throw DataError("some driver is never tested");
}

CvPlan make_cv_plan(const data::Dataset& ds, int n_val_drivers, std::uint64_t seed) {
    const std::vector<std::string> drivers = ds.driver_ids();
    if (drivers.size() < 3) throw DataError("leave-one-driver-out needs at least 3 drivers");
    if (n_val_drivers < 1) throw ConfigError("need at least one validation driver");

    CvPlan plan;
    const Rng base = Rng(seed).split("cv-plan");
    for (std::size_t i = 0; i < drivers.size(); ++i) {
        CvFold fold;
        fold.test_driver = drivers[i];
        std::vector<std::string> rest;
        for (std::size_t j = 0; j < drivers.size(); ++j)
            if (j != i) rest.push_back(drivers[j]);
        Rng rng = base.split(static_cast<std::uint64_t>(i));
        rng.shuffle(rest);
        // leave at least one training driver
        const std::size_t n_val = std::min(static_cast<std::size_t>(n_val_drivers),
                                           rest.size() - 1);
        fold.val_drivers.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
        fold.train_drivers.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
        std::sort(fold.val_drivers.begin(), fold.val_drivers.end());
        std::sort(fold.train_drivers.begin(), fold.train_drivers.end());
        plan.folds.push_back(std::move(fold));
    }
    plan.validate(drivers);
    return plan;
}

double accuracy_percent(const std::vector<int>& preds, const std::vector<int>& truth) {
    if (preds.size() != truth.size()) throw DataError("accuracy: length mismatch");
    if (preds.empty()) throw DataError("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == truth[i]) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
}

double mean_angular_deviation_deg(const std::vector<geom::Vec3>& preds,
                                  const std::vector<geom::Vec3>& truth) {
    if (preds.size() != truth.size()) throw DataError("mad: length mismatch");
    if (preds.empty()) throw DataError("mad: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        sum += geom::angular_deviation_deg(preds[i], truth[i]);
    return sum / static_cast<double>(preds.size());
}

namespace {

std::vector<std::size_t> samples_for(const data::Dataset& ds,
                                     const std::vector<std::string>& drivers,
                                     const std::vector<int>& class_ids) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const data::Sample& s = ds.samples[i];
        if (std::find(drivers.begin(), drivers.end(), s.driver_id) == drivers.end()) continue;
        if (std::find(class_ids.begin(), class_ids.end(), s.aoi_id) == class_ids.end())
            continue;
        out.push_back(i);
    }
    return out;
}

FoldResult run_fold(const data::Dataset& ds, const ml::ModelSpec& spec, const CvFold& fold,
                    const EvalOptions& opt, const std::vector<int>& class_ids,
                    std::size_t fold_index) {
    ml::ModelSpec fold_spec = spec;
    fold_spec.class_ids = class_ids;
    fold_spec.seed = Rng(spec.seed).split("fold").split(fold_index).seed();

    const ml::ModelData train_set =
        ml::make_model_data(ds, samples_for(ds, fold.train_drivers, class_ids), class_ids,
                            opt.mask);
    const ml::ModelData val_set = ml::make_model_data(
        ds, samples_for(ds, fold.val_drivers, class_ids), class_ids, opt.mask);
    const ml::ModelData test_set = ml::make_model_data(
        ds, samples_for(ds, {fold.test_driver}, class_ids), class_ids, opt.mask);
    if (test_set.size() == 0) throw DataError("no test samples for " + fold.test_driver);

    const auto t0 = std::chrono::steady_clock::now();
    std::unique_ptr<ml::Predictor> model = ml::build_model(fold_spec);
    model->train(train_set, val_set, opt.train);
    const auto t1 = std::chrono::steady_clock::now();

    const std::vector<ml::Prediction> preds = model->predict(test_set.inputs);
    const auto t2 = std::chrono::steady_clock::now();
    const std::vector<int> pred_cls = ml::predicted_class_indices(preds, test_set, spec.head);

    FoldResult r;
    r.test_driver = fold.test_driver;
    r.accuracy = accuracy_percent(pred_cls, test_set.labels);
    r.train_seconds = std::chrono::duration<double>(t1 - t0).count();
    r.predict_seconds = std::chrono::duration<double>(t2 - t1).count();
    const std::size_t k = class_ids.size();
    r.confusion.assign(k, std::vector<std::int64_t>(k, 0));
    for (std::size_t i = 0; i < pred_cls.size(); ++i)
        ++r.confusion[static_cast<std::size_t>(test_set.labels[i])]
                     [static_cast<std::size_t>(pred_cls[i])];
    if (spec.head == ml::Head::regression) {
        std::vector<geom::Vec3> dirs;
        for (const ml::Prediction& p : preds) dirs.push_back(p.direction);
        r.mad = mean_angular_deviation_deg(dirs, test_set.target_dirs);
    } else {
        r.mad = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

} // namespace

EvalReport run_cv(const data::Dataset& ds, const ml::ModelSpec& spec, const CvPlan& plan,
                  const EvalOptions& opt) {
    plan.validate(ds.driver_ids());
    std::vector<int> class_ids = opt.class_ids.empty() ? ds.aois.ids() : opt.class_ids;
    std::sort(class_ids.begin(), class_ids.end());
    for (const int id : class_ids)
        if (!ds.aois.contains(id)) throw DataError("unknown class id " + std::to_string(id));

    EvalReport report;
    report.family = ml::to_string(spec.family);
    report.head = ml::to_string(spec.head);
    report.modalities = opt.mask.str();
    report.class_ids = class_ids;
    report.seed = spec.seed;
    report.folds.resize(plan.folds.size());

    const int jobs = std::max(1, opt.jobs);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    auto worker = [&](int wi) {
        try {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= plan.folds.size()) break;
                report.folds[i] = run_fold(ds, spec, plan.folds[i], opt, class_ids, i);
            }
        } catch (...) {
            errors[static_cast<std::size_t>(wi)] = std::current_exception();
        }
    };
    if (jobs == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
        for (std::thread& t : pool) t.join();
    }
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);

    const std::size_t k = class_ids.size();
    report.confusion.assign(k, std::vector<std::int64_t>(k, 0));
    double acc_sum = 0.0, mad_sum = 0.0;
    std::int64_t correct = 0, total = 0;
    for (const FoldResult& f : report.folds) {
        acc_sum += f.accuracy;
        mad_sum += f.mad;
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                report.confusion[i][j] += f.confusion[i][j];
                total += f.confusion[i][j];
                if (i == j) correct += f.confusion[i][j];
            }
        report.per_driver.push_back({f.test_driver, f.accuracy, f.mad, false});
    }
    report.accuracy = acc_sum / static_cast<double>(report.folds.size());
    report.mad = mad_sum / static_cast<double>(report.folds.size());
    report.pooled_accuracy = total > 0 ? 100.0 * static_cast<double>(correct)
                                             / static_cast<double>(total)
                                       : 0.0;
    double predict_seconds = 0.0;
    for (const FoldResult& f : report.folds) predict_seconds += f.predict_seconds;
    if (total > 0 && predict_seconds > 0.0) {
        report.ms_per_sample = 1000.0 * predict_seconds / static_cast<double>(total);
        report.samples_per_second = static_cast<double>(total) / predict_seconds;
    }
    for (DriverScore& d : report.per_driver)
        d.flagged = d.accuracy < 50.0 || (!std::isnan(d.mad) && d.mad > 8.0);
    return report;
}

std::vector<ml::ModalityMask> standard_modality_masks() {
    using M = ml::ModalityMask;
    return {
        M{false, true, false},  // head
        M{true, false, false},  // gaze
        M{false, false, true},  // finger
        M{true, true, false},   // gaze+head
        M{false, true, true},   // finger+head
        M{true, false, true},   // finger+gaze
        M{true, true, true},    // all three
    };
}

std::vector<std::pair<std::string, std::vector<int>>> standard_class_subsets() {
    std::vector<int> all, no_console, no_console_no_door;
    for (int i = 1; i <= 12; ++i) all.push_back(i);
    for (int i = 4; i <= 12; ++i) no_console.push_back(i);
    for (int i = 4; i <= 9; ++i) no_console_no_door.push_back(i);
    no_console_no_door.push_back(12);
    return {{"12", all}, {"9", no_console}, {"7", no_console_no_door}};
}

const AblationCell& AblationTable::cell(const std::string& modalities,
                                        const std::string& class_set) const {
    for (const AblationCell& c : cells)
        if (c.modalities == modalities && c.class_set == class_set) return c;
    throw DataError("no ablation cell " + modalities + "/" + class_set);
}

AblationTable ablation_suite(
    const data::Dataset& ds, const ml::ModelSpec& spec, const EvalOptions& base,
    const std::vector<ml::ModalityMask>& masks,
    const std::vector<std::pair<std::string, std::vector<int>>>& classes) {
    AblationTable table;
    const CvPlan plan = make_cv_plan(ds, 2, spec.seed);
    for (const auto& [set_name, class_ids] : classes) {
        for (const ml::ModalityMask& mask : masks) {
            EvalOptions opt = base;
            opt.mask = mask;
            opt.class_ids = class_ids;
            const EvalReport r = run_cv(ds, spec, plan, opt);
            table.cells.push_back({mask.str(), set_name, class_ids, r.accuracy, r.mad});
        }
    }
    return table;
}

std::vector<DriverScore> per_driver_report(const EvalReport& report, double accuracy_floor,
                                           double mad_ceiling) {
    std::vector<DriverScore> out = report.per_driver;
    for (DriverScore& d : out)
        d.flagged = d.accuracy < accuracy_floor || (!std::isnan(d.mad) && d.mad > mad_ceiling);
    return out;
}

SpeedStats speed_bench(const ml::Predictor& model, const nn::Tensor& sample_pool, int n) {
    if (sample_pool.rank() != 4 || sample_pool.dim(0) < 1)
        throw ShapeError("speed_bench: expected a non-empty [n,8,6,3] pool");
    const int pool = sample_pool.dim(0);
    const std::size_t stride = sample_pool.size() / static_cast<std::size_t>(pool);
    std::vector<int> one_shape = sample_pool.shape;
    one_shape[0] = 1;

    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(n));
    nn::Tensor one(one_shape);
    for (int i = 0; i < n; ++i) {
        std::copy(sample_pool.ptr() + static_cast<std::size_t>(i % pool) * stride,
                  sample_pool.ptr() + static_cast<std::size_t>(i % pool + 1) * stride,
                  one.ptr());
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<ml::Prediction> p = model.predict(one);
        const auto t1 = std::chrono::steady_clock::now();
        (void)p;
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    SpeedStats s;
    s.n_samples = n;
    s.ms_per_sample = times[times.size() / 2];
    s.frames_per_second = 8000.0 / s.ms_per_sample;
    return s;
}

} // namespace pointfuse::eval
