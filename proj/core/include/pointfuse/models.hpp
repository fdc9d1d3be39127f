#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "pointfuse/dataset.hpp"
#include "pointfuse/geometry.hpp"
#include "pointfuse/tensor.hpp"

namespace pointfuse::ml {

enum class Family { cnn, rnn, fcnn, svr, rf };
enum class Head { regression, classification };

const char* to_string(Family f);
const char* to_string(Head h);
Family family_from_string(const std::string& s);
Head head_from_string(const std::string& s);

struct ModalityMask {
    bool eye = true;
    bool head = true;
    bool finger = true;

    static ModalityMask all() { return {}; }
    bool none() const { return !eye && !head && !finger; }
    std::string str() const;
    static ModalityMask from_string(const std::string& s); // e.g. "finger+gaze"
};

// Every architecture detail the source experiments left open lives here,
// with overridable defaults sized to the 8x6x3 input.
struct Hyperparams {
    int conv_channels1 = 16;
    int conv_channels2 = 32;
    int conv_kernel = 3;
    int fc_hidden1 = 128;
    int fc_hidden2 = 64;
    int lstm_hidden = 64;
    double svr_c = 10.0;
    double svr_epsilon = 0.01;
    double svr_tol = 1e-3;
    int svr_degree = 2;
    int rf_trees = 100;
    int rf_min_leaf = 2;
    int rf_max_depth = 0;
};

struct ModelSpec {
    Family family = Family::cnn;
    Head head = Head::regression;
    std::vector<int> class_ids; // ordered AOI ids the model addresses
    Hyperparams hp;
    std::uint64_t seed = 1;
    // CNN layout: the conv grid is frames x attributes with xyz as input channels
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 8;
    double learning_rate = 0.001;
    // stop after the epoch where validation accuracy reaches the first bound
    // and validation MAD falls under the second (both disabled by default)
    double early_stop_val_accuracy = std::numeric_limits<double>::infinity();
    double early_stop_val_mad = std::numeric_limits<double>::infinity();
    bool verbose = false;
};

struct EpochStats {
    int epoch = 0;
    double train_objective = 0.0;
    double val_accuracy = 0.0;
    double val_mad = 0.0; // NaN for classification heads
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1; // -1 when training was skipped
    bool zero_epochs_warning = false;
};

inline constexpr int kAttributeCount = 6; // eye_pos, eye_dir, head_pos, head_rot, finger_pos, finger_dir
inline constexpr int kAttributeDim = 3;
inline constexpr int kFlatFeatures = data::kFramesPerSample * kAttributeCount * kAttributeDim;

// Model-ready arrays for a set of samples. Inputs are [n, 8, 6, 3] with the
// fixed attribute order above; head_rot is (yaw,pitch,roll)/180, invalid
// frames contribute zeros for their modality.
struct ModelData {
    nn::Tensor inputs;
    std::vector<geom::Vec3> target_dirs;
    std::vector<int> labels; // indices into class_ids
    std::vector<int> aoi_ids;
    std::vector<std::string> driver_ids;
    std::vector<int> class_ids;
    std::vector<geom::Vec3> class_dirs; // AOI ground truth per class

    std::size_t size() const { return target_dirs.size(); }
    geom::AoiSet class_aoi_set() const;
};

ModelData make_model_data(const data::Dataset& ds,
                          const std::vector<std::size_t>& sample_indices,
                          const std::vector<int>& class_ids, const ModalityMask& mask);

// One sample's input block, [8,6,3]
nn::Tensor make_fusion_input(const data::Sample& s, const ModalityMask& mask);

// Zeroes the attribute planes of dropped modalities in a [n,8,6,3] batch.
void apply_modality_mask(nn::Tensor& batch, const ModalityMask& mask);

struct Prediction {
    geom::Vec3 direction;              // unit norm (regression head)
    std::vector<double> probabilities; // sums to 1 (classification head)
};

class Predictor {
public:
    virtual ~Predictor() = default;

    const ModelSpec& spec() const { return spec_; }

    virtual TrainHistory train(const ModelData& train_set, const ModelData& val_set,
                               const TrainConfig& cfg) = 0;

    // deterministic and safe to call concurrently once trained
    virtual std::vector<Prediction> predict(const nn::Tensor& inputs) const = 0;
    Prediction predict_one(const nn::Tensor& input) const;

    // trainable parameter count (0 for SVR/RF)
    virtual std::size_t parameter_count() const { return 0; }

    virtual void save(const std::filesystem::path& path) const = 0;

protected:
    explicit Predictor(ModelSpec spec) : spec_(std::move(spec)) {}
    ModelSpec spec_;
};

std::unique_ptr<Predictor> build_model(const ModelSpec& spec);
std::unique_ptr<Predictor> load_model(const std::filesystem::path& path);

// accuracy of predictions against labels, via ranked matching for the
// regression head and argmax for classification
std::vector<int> predicted_class_indices(const std::vector<Prediction>& preds,
                                         const ModelData& md, Head head);

} // namespace pointfuse::ml
