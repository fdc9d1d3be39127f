#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointfuse/dataset.hpp"
#include "pointfuse/models.hpp"

namespace pointfuse::eval {

struct CvFold {
    std::string test_driver;
    std::vector<std::string> val_drivers;
    std::vector<std::string> train_drivers;
};

// Leave-one-driver-out plan: one fold per driver, the fold's three driver
// sets partition all drivers.
struct CvPlan {
    std::vector<CvFold> folds;
    void validate(const std::vector<std::string>& all_drivers) const;
};

CvPlan make_cv_plan(const data::Dataset& ds, int n_val_drivers = 2, std::uint64_t seed = 1);

double accuracy_percent(const std::vector<int>& preds, const std::vector<int>& truth);
double mean_angular_deviation_deg(const std::vector<geom::Vec3>& preds,
                                  const std::vector<geom::Vec3>& truth);

struct DriverScore {
    std::string driver_id;
    double accuracy = 0.0;
    double mad = 0.0;
    bool flagged = false; // accuracy < 50% or MAD > 8 degrees
};

struct FoldResult {
    std::string test_driver;
    double accuracy = 0.0;
    double mad = 0.0;
    std::vector<std::vector<std::int64_t>> confusion; // [true][pred]
    int best_epoch = -1;
    double train_seconds = 0.0;
    double predict_seconds = 0.0;
};

struct EvalReport {
    std::string family;
    std::string head;
    std::string modalities;
    std::vector<int> class_ids;
    std::uint64_t seed = 0;

    std::vector<FoldResult> folds;
    double accuracy = 0.0; // unweighted mean over folds
    double mad = 0.0;      // unweighted mean over folds, NaN for classification
    double pooled_accuracy = 0.0;
    std::vector<std::vector<std::int64_t>> confusion; // summed over folds
    std::vector<DriverScore> per_driver;

    // informational, excluded from the reproducibility guarantee
    double ms_per_sample = 0.0;
    double samples_per_second = 0.0;
};

struct EvalOptions {
    ml::ModalityMask mask = ml::ModalityMask::all();
    std::vector<int> class_ids; // empty = every AOI in the dataset
    int jobs = 1;
    ml::TrainConfig train;
};

// Trains one model per fold (training sees train+val only), tests on the
// held-out driver, averages over folds. Deterministic given spec.seed.
EvalReport run_cv(const data::Dataset& ds, const ml::ModelSpec& spec, const CvPlan& plan,
                  const EvalOptions& opt);

struct AblationCell {
    std::string modalities;
    std::string class_set;
    std::vector<int> class_ids;
    double accuracy = 0.0;
    double mad = 0.0;
};

struct AblationTable {
    std::vector<AblationCell> cells;
    const AblationCell& cell(const std::string& modalities, const std::string& class_set) const;
};

std::vector<ml::ModalityMask> standard_modality_masks(); // single, pairs, all
// the three studied class subsets: 1-12, 4-12, 4-9 plus 12
std::vector<std::pair<std::string, std::vector<int>>> standard_class_subsets();

AblationTable ablation_suite(const data::Dataset& ds, const ml::ModelSpec& spec,
                             const EvalOptions& base,
                             const std::vector<ml::ModalityMask>& masks,
                             const std::vector<std::pair<std::string, std::vector<int>>>& classes);

std::vector<DriverScore> per_driver_report(const EvalReport& report,
                                           double accuracy_floor = 50.0,
                                           double mad_ceiling = 8.0);

struct SpeedStats {
    double ms_per_sample = 0.0;
    double frames_per_second = 0.0; // 8 frames per sample
    int n_samples = 0;
};

// Median wall-clock over n single-sample predictions.
SpeedStats speed_bench(const ml::Predictor& model, const nn::Tensor& sample_pool, int n);

} // namespace pointfuse::eval
