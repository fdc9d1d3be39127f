#include "pointfuse/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "json.hpp"

#include "pointfuse/errors.hpp"
#include "pointfuse/forest.hpp"
#include "pointfuse/layers.hpp"
#include "pointfuse/matching.hpp"
#include "pointfuse/optim.hpp"
#include "pointfuse/rng.hpp"
#include "pointfuse/svr.hpp"

namespace pointfuse::ml {

using nlohmann::json;

const char* to_string(Family f) {
    switch (f) {
    case Family::cnn: return "cnn";
    case Family::rnn: return "rnn";
    case Family::fcnn: return "fcnn";
    case Family::svr: return "svr";
    case Family::rf: return "rf";
    }
    return "?";
}

const char* to_string(Head h) { return h == Head::regression ? "regression" : "classification"; }

Family family_from_string(const std::string& s) {
    if (s == "cnn") return Family::cnn;
    if (s == "rnn") return Family::rnn;
    if (s == "fcnn") return Family::fcnn;
    if (s == "svr") return Family::svr;
    if (s == "rf") return Family::rf;
    throw ConfigError("unknown model family '" + s + "'");
}

Head head_from_string(const std::string& s) {
    if (s == "regression") return Head::regression;
    if (s == "classification") return Head::classification;
    throw ConfigError("unknown head '" + s + "'");
}

std::string ModalityMask::str() const {
    std::string out;
    auto add = [&](const char* name) {
        if (!out.empty()) out += '+';
        out += name;
    };
    if (finger) add("finger");
    if (eye) add("gaze");
    if (head) add("head");
    return out.empty() ? "none" : out;
}

ModalityMask ModalityMask::from_string(const std::string& s) {
    if (s == "all") return all();
    ModalityMask m{false, false, false};
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t end = std::min(s.find('+', start), s.size());
        const std::string part = s.substr(start, end - start);
        if (part == "gaze" || part == "eye") m.eye = true;
        else if (part == "head") m.head = true;
        else if (part == "finger") m.finger = true;
        else if (!part.empty()) throw ConfigError("unknown modality '" + part + "'");
        start = end + 1;
    }
    if (m.none()) throw ConfigError("empty modality mask");
    return m;
}

// --- input building ----------------------------------------------------------

namespace {

// attribute rows in the fixed order
enum Attribute { kEyePos = 0, kEyeDir, kHeadPos, kHeadRot, kFingerPos, kFingerDir };

void write_attr(nn::Tensor& t, std::size_t base, int frame, Attribute a, const geom::Vec3& v) {
    const std::size_t off =
        base + (static_cast<std::size_t>(frame) * kAttributeCount + a) * kAttributeDim;
    t.data[off] = v.x;
    t.data[off + 1] = v.y;
    t.data[off + 2] = v.z;
}

void fill_sample(nn::Tensor& t, std::size_t base, const data::Sample& s,
                 const ModalityMask& mask) {
    for (int fi = 0; fi < data::kFramesPerSample; ++fi) {
        const data::Frame& f = s.frames[static_cast<std::size_t>(fi)];
        if (mask.eye && f.valid_eye) {
            write_attr(t, base, fi, kEyePos, f.eye_pos);
            write_attr(t, base, fi, kEyeDir, f.eye_dir);
        }
        if (mask.head && f.valid_head) {
            write_attr(t, base, fi, kHeadPos, f.head_pos);
            write_attr(t, base, fi, kHeadRot,
                       {f.head_rot.yaw / 180.0, f.head_rot.pitch / 180.0,
                        f.head_rot.roll / 180.0});
        }
        if (mask.finger && f.valid_finger) {
            write_attr(t, base, fi, kFingerPos, f.finger_pos);
            write_attr(t, base, fi, kFingerDir, f.finger_dir);
        }
    }
}

} // namespace

nn::Tensor make_fusion_input(const data::Sample& s, const ModalityMask& mask) {
    if (mask.none()) throw ConfigError("empty modality mask");
    nn::Tensor t({data::kFramesPerSample, kAttributeCount, kAttributeDim});
    fill_sample(t, 0, s, mask);
    return t;
}

void apply_modality_mask(nn::Tensor& batch, const ModalityMask& mask) {
    if (mask.none()) throw ConfigError("empty modality mask");
    if (batch.rank() != 4) throw ShapeError("apply_modality_mask: expected [n,8,6,3]");
    const int n = batch.dim(0);
    auto zero_attr = [&](Attribute a) {
        for (int i = 0; i < n; ++i)
            for (int fi = 0; fi < data::kFramesPerSample; ++fi) {
                const std::size_t off =
                    ((static_cast<std::size_t>(i) * data::kFramesPerSample + fi)
                         * kAttributeCount
                     + a)
                    * kAttributeDim;
                batch.data[off] = batch.data[off + 1] = batch.data[off + 2] = 0.0;
            }
    };
    if (!mask.eye) {
        zero_attr(kEyePos);
        zero_attr(kEyeDir);
    }
    if (!mask.head) {
        zero_attr(kHeadPos);
        zero_attr(kHeadRot);
    }
    if (!mask.finger) {
        zero_attr(kFingerPos);
        zero_attr(kFingerDir);
    }
}

geom::AoiSet ModelData::class_aoi_set() const {
    std::vector<geom::Aoi> aois;
    for (std::size_t i = 0; i < class_ids.size(); ++i)
        aois.push_back(geom::build_aoi(class_ids[i], {class_dirs[i]}));
    return geom::AoiSet(std::move(aois));
}

ModelData make_model_data(const data::Dataset& ds,
                          const std::vector<std::size_t>& sample_indices,
                          const std::vector<int>& class_ids, const ModalityMask& mask) {
    if (mask.none()) throw ConfigError("empty modality mask");
    ModelData md;
    md.class_ids = class_ids;
    std::sort(md.class_ids.begin(), md.class_ids.end());
    for (const int id : md.class_ids) md.class_dirs.push_back(ds.aois.by_id(id).ground_truth);

    md.inputs = nn::Tensor({static_cast<int>(sample_indices.size()), data::kFramesPerSample,
                            kAttributeCount, kAttributeDim});
    const std::size_t stride =
        static_cast<std::size_t>(data::kFramesPerSample) * kAttributeCount * kAttributeDim;
    std::size_t row = 0;
    for (const std::size_t si : sample_indices) {
        const data::Sample& s = ds.samples[si];
        const auto cls = std::find(md.class_ids.begin(), md.class_ids.end(), s.aoi_id);
        if (cls == md.class_ids.end())
            throw DataError("sample aoi_id " + std::to_string(s.aoi_id)
                            + " not in the class set");
        fill_sample(md.inputs, row * stride, s, mask);
        md.labels.push_back(static_cast<int>(cls - md.class_ids.begin()));
        md.aoi_ids.push_back(s.aoi_id);
        md.driver_ids.push_back(s.driver_id);
        md.target_dirs.push_back(ds.aois.by_id(s.aoi_id).ground_truth);
        ++row;
    }
    return md;
}

std::vector<int> predicted_class_indices(const std::vector<Prediction>& preds,
                                         const ModelData& md, Head head) {
    std::vector<int> out;
    out.reserve(preds.size());
    for (const Prediction& p : preds) {
        if (head == Head::classification) {
            int best = 0;
            for (std::size_t k = 1; k < p.probabilities.size(); ++k)
                if (p.probabilities[k] > p.probabilities[best]) best = static_cast<int>(k);
            out.push_back(best);
        } else {
            int best = 0;
            double best_cos = -2.0;
            for (std::size_t k = 0; k < md.class_dirs.size(); ++k) {
                const double c = geom::cosine_similarity(p.direction, md.class_dirs[k]);
                if (c > best_cos) {
                    best_cos = c;
                    best = static_cast<int>(k);
                }
            }
            out.push_back(best);
        }
    }
    return out;
}

Prediction Predictor::predict_one(const nn::Tensor& input) const {
    nn::Tensor batch = input;
    if (batch.rank() == 3)
        batch = batch.reshaped(
            {1, data::kFramesPerSample, kAttributeCount, kAttributeDim});
    return predict(batch).front();
}

// --- neural cores -------------------------------------------------------------

namespace {

int output_size(const ModelSpec& spec) {
    return spec.head == Head::regression ? 3 : static_cast<int>(spec.class_ids.size());
}

void check_batch_shape(const nn::Tensor& batch) {
    if (batch.rank() != 4 || batch.dim(1) != data::kFramesPerSample
        || batch.dim(2) != kAttributeCount || batch.dim(3) != kAttributeDim)
        throw ShapeError("expected input [n,8,6,3], got " + batch.shape_str());
}

class NeuralCore {
public:
    virtual ~NeuralCore() = default;
    virtual nn::Tensor shape_input(const nn::Tensor& batch) const = 0;
    virtual nn::Tensor forward(const nn::Tensor& x) = 0;
    virtual nn::Tensor backward(const nn::Tensor& dy) = 0;
    virtual nn::Tensor infer(const nn::Tensor& x) const = 0;
    virtual std::vector<nn::Param*> params() = 0;
};

// two conv layers over the frames x attributes grid, xyz as channels
class CnnCore : public NeuralCore {
public:
    CnnCore(const ModelSpec& spec, Rng& rng)
        : c1_("conv1", kAttributeDim, spec.hp.conv_channels1, spec.hp.conv_kernel,
              spec.hp.conv_kernel / 2, rng),
          c2_("conv2", spec.hp.conv_channels1, spec.hp.conv_channels2, spec.hp.conv_kernel,
              spec.hp.conv_kernel / 2, rng),
          out_("out",
               spec.hp.conv_channels2 * data::kFramesPerSample * kAttributeCount,
               output_size(spec), nn::Dense::Init::xavier, rng) {}

    nn::Tensor shape_input(const nn::Tensor& batch) const override {
        check_batch_shape(batch);
        const int n = batch.dim(0);
        nn::Tensor x({n, kAttributeDim, data::kFramesPerSample, kAttributeCount});
        for (int i = 0; i < n; ++i)
            for (int f = 0; f < data::kFramesPerSample; ++f)
                for (int a = 0; a < kAttributeCount; ++a)
                    for (int d = 0; d < kAttributeDim; ++d)
                        x.data[((static_cast<std::size_t>(i) * kAttributeDim + d)
                                    * data::kFramesPerSample
                                + f)
                                   * kAttributeCount
                               + a] =
                            batch.data[((static_cast<std::size_t>(i) * data::kFramesPerSample
                                         + f)
                                            * kAttributeCount
                                        + a)
                                           * kAttributeDim
                                       + d];
        return x;
    }

    nn::Tensor forward(const nn::Tensor& x) override {
        const int n = x.dim(0);
        nn::Tensor h = r2_.forward(c2_.forward(r1_.forward(c1_.forward(x))));
        flat_shape_ = h.shape;
        return out_.forward(h.reshaped({n, static_cast<int>(h.size()) / n}));
    }

    nn::Tensor backward(const nn::Tensor& dy) override {
        nn::Tensor d = out_.backward(dy);
        d = c1_.backward(r1_.backward(c2_.backward(r2_.backward(d.reshaped(flat_shape_)))));
        return d;
    }

    nn::Tensor infer(const nn::Tensor& x) const override {
        const int n = x.dim(0);
        nn::Tensor h = nn::conv2d_infer(x, c1_.weights(), c1_.bias(), c1_.pad());
        nn::relu_inplace(h);
        h = nn::conv2d_infer(h, c2_.weights(), c2_.bias(), c2_.pad());
        nn::relu_inplace(h);
        return nn::dense_infer(h.reshaped({n, static_cast<int>(h.size()) / n}), out_.weights(),
                               out_.bias());
    }

    std::vector<nn::Param*> params() override {
        std::vector<nn::Param*> out;
        for (auto* p : c1_.params()) out.push_back(p);
        for (auto* p : c2_.params()) out.push_back(p);
        for (auto* p : out_.params()) out.push_back(p);
        return out;
    }

private:
    nn::Conv2d c1_, c2_;
    nn::Relu r1_, r2_;
    nn::Dense out_;
    std::vector<int> flat_shape_;
};

class FcnnCore : public NeuralCore {
public:
    FcnnCore(const ModelSpec& spec, Rng& rng)
        : d1_("fc1", kFlatFeatures, spec.hp.fc_hidden1, nn::Dense::Init::he, rng),
          d2_("fc2", spec.hp.fc_hidden1, spec.hp.fc_hidden2, nn::Dense::Init::he, rng),
          out_("out", spec.hp.fc_hidden2, output_size(spec), nn::Dense::Init::xavier, rng) {}

    nn::Tensor shape_input(const nn::Tensor& batch) const override {
        check_batch_shape(batch);
        return batch.reshaped({batch.dim(0), kFlatFeatures});
    }

    nn::Tensor forward(const nn::Tensor& x) override {
        return out_.forward(r2_.forward(d2_.forward(r1_.forward(d1_.forward(x)))));
    }

    nn::Tensor backward(const nn::Tensor& dy) override {
        return d1_.backward(r1_.backward(d2_.backward(r2_.backward(out_.backward(dy)))));
    }

    nn::Tensor infer(const nn::Tensor& x) const override {
        nn::Tensor h = nn::dense_infer(x, d1_.weights(), d1_.bias());
        nn::relu_inplace(h);
        h = nn::dense_infer(h, d2_.weights(), d2_.bias());
        nn::relu_inplace(h);
        return nn::dense_infer(h, out_.weights(), out_.bias());
    }

    std::vector<nn::Param*> params() override {
        std::vector<nn::Param*> out;
        for (auto* p : d1_.params()) out.push_back(p);
        for (auto* p : d2_.params()) out.push_back(p);
        for (auto* p : out_.params()) out.push_back(p);
        return out;
    }

private:
    nn::Dense d1_, d2_;
    nn::Relu r1_, r2_;
    nn::Dense out_;
};

// two stacked LSTMs over the per-frame 18-feature sequence
class RnnCore : public NeuralCore {
public:
    RnnCore(const ModelSpec& spec, Rng& rng)
        : l1_("lstm1", kAttributeCount * kAttributeDim, spec.hp.lstm_hidden, rng),
          l2_("lstm2", spec.hp.lstm_hidden, spec.hp.lstm_hidden, rng),
          out_("out", spec.hp.lstm_hidden, output_size(spec), nn::Dense::Init::xavier, rng) {}

    nn::Tensor shape_input(const nn::Tensor& batch) const override {
        check_batch_shape(batch);
        return batch.reshaped(
            {batch.dim(0), data::kFramesPerSample, kAttributeCount * kAttributeDim});
    }

    nn::Tensor forward(const nn::Tensor& x) override {
        const nn::Tensor h1 = l1_.forward(x);
        l2_.forward(h1);
        return out_.forward(l2_.final_hidden());
    }

    nn::Tensor backward(const nn::Tensor& dy) override {
        const nn::Tensor dh = out_.backward(dy);
        const nn::Tensor dseq = l2_.backward_from_final(dh);
        return l1_.backward(dseq);
    }

    nn::Tensor infer(const nn::Tensor& x) const override {
        const nn::Tensor h1 = nn::lstm_infer(x, l1_.wx(), l1_.wh(), l1_.bias_values(),
                                             l1_.hidden_size(), true);
        const nn::Tensor h2 = nn::lstm_infer(h1, l2_.wx(), l2_.wh(), l2_.bias_values(),
                                             l2_.hidden_size(), false);
        return nn::dense_infer(h2, out_.weights(), out_.bias());
    }

    std::vector<nn::Param*> params() override {
        std::vector<nn::Param*> out;
        for (auto* p : l1_.params()) out.push_back(p);
        for (auto* p : l2_.params()) out.push_back(p);
        for (auto* p : out_.params()) out.push_back(p);
        return out;
    }

private:
    nn::Lstm l1_, l2_;
    nn::Dense out_;
};

// --- shared neural predictor ---------------------------------------------------

nn::Tensor gather_rows(const nn::Tensor& batch, const std::vector<std::size_t>& rows) {
    const std::size_t stride = batch.size() / static_cast<std::size_t>(batch.dim(0));
    std::vector<int> shape = batch.shape;
    shape[0] = static_cast<int>(rows.size());
    nn::Tensor out(shape);
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(batch.ptr() + rows[r] * stride, batch.ptr() + (rows[r] + 1) * stride,
                  out.ptr() + r * stride);
    return out;
}

struct ValScore {
    double accuracy = 0.0;
    double mad = std::numeric_limits<double>::quiet_NaN();
};

class NeuralPredictor : public Predictor {
public:
    NeuralPredictor(ModelSpec spec, std::unique_ptr<NeuralCore> core)
        : Predictor(std::move(spec)), core_(std::move(core)) {}

    TrainHistory train(const ModelData& tr, const ModelData& val,
                       const TrainConfig& cfg) override {
        if (tr.size() == 0) throw DataError("empty training split");
        TrainHistory hist;
        if (cfg.epochs == 0) {
            hist.zero_epochs_warning = true;
            return hist;
        }
        if (val.size() == 0) throw DataError("empty validation split");

        Rng rng = Rng(spec_.seed).split("train");
        nn::Adam adam(core_->params(), {cfg.learning_rate});

        std::vector<nn::Tensor> best;
        double best_acc = -1.0, best_mad = std::numeric_limits<double>::infinity();

        std::vector<std::size_t> order(tr.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
            rng.shuffle(order);
            double objective_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(),
                                                 start + static_cast<std::size_t>(cfg.batch_size));
                const std::vector<std::size_t> rows(order.begin() + start, order.begin() + end);
                const nn::Tensor x = core_->shape_input(gather_rows(tr.inputs, rows));
                const nn::Tensor out = core_->forward(x);

                nn::LossValue loss;
                if (spec_.head == Head::regression) {
                    nn::Tensor target({static_cast<int>(rows.size()), 3});
                    for (std::size_t r = 0; r < rows.size(); ++r) {
                        const geom::Vec3& t = tr.target_dirs[rows[r]];
                        target.at(static_cast<int>(r), 0) = t.x;
                        target.at(static_cast<int>(r), 1) = t.y;
                        target.at(static_cast<int>(r), 2) = t.z;
                    }
                    loss = nn::cosine_loss(out, target);
                } else {
                    std::vector<int> labels;
                    for (const std::size_t r : rows) labels.push_back(tr.labels[r]);
                    loss = nn::softmax_cross_entropy(out, labels);
                }
                adam.zero_grad();
                core_->backward(loss.grad);
                adam.step();
                objective_sum += loss.objective;
                ++batches;
            }

            const ValScore score = evaluate(val);
            const bool better =
                score.accuracy > best_acc
                || (score.accuracy == best_acc
                    && (std::isnan(best_mad) ? false : score.mad < best_mad));
            if (better || best.empty()) {
                best.clear();
                for (nn::Param* p : core_->params()) best.push_back(p->value);
                best_acc = score.accuracy;
                best_mad = score.mad;
                hist.best_epoch = epoch;
            }
            hist.epochs.push_back(
                {epoch, objective_sum / static_cast<double>(batches), score.accuracy, score.mad});
            if (cfg.verbose)
                std::fprintf(stderr, "epoch %3d  objective %.4f  val acc %.1f%%\n", epoch,
                             objective_sum / static_cast<double>(batches), score.accuracy);
            // NaN MAD (classification) satisfies the MAD gate
            if (score.accuracy >= cfg.early_stop_val_accuracy
                && !(score.mad > cfg.early_stop_val_mad))
                break;
        }

        const std::vector<nn::Param*> ps = core_->params();
        for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = best[i];
        return hist;
    }

    std::vector<Prediction> predict(const nn::Tensor& inputs) const override {
        const nn::Tensor out = core_->infer(core_->shape_input(inputs));
        return package(out);
    }

    std::size_t parameter_count() const override {
        std::size_t n = 0;
        for (nn::Param* p : const_cast<NeuralPredictor*>(this)->core_->params())
            n += p->value.size();
        return n;
    }

    void save(const std::filesystem::path& path) const override;

    void restore_params(const std::map<std::string, nn::Tensor>& values) {
        for (nn::Param* p : core_->params()) {
            const auto it = values.find(p->name);
            if (it == values.end()) throw DataError("model file missing param " + p->name);
            nn::require_shape(it->second, p->value.shape, p->name);
            p->value = it->second;
        }
    }

private:
    ValScore evaluate(const ModelData& md) const {
        ValScore score;
        const std::vector<Prediction> preds = predict_all(md);
        const std::vector<int> cls = predicted_class_indices(preds, md, spec_.head);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < cls.size(); ++i)
            if (cls[i] == md.labels[i]) ++correct;
        score.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(md.size());
        if (spec_.head == Head::regression) {
            double sum = 0.0;
            for (std::size_t i = 0; i < preds.size(); ++i)
                sum += geom::angular_deviation_deg(preds[i].direction, md.target_dirs[i]);
            score.mad = sum / static_cast<double>(preds.size());
        }
        return score;
    }

    std::vector<Prediction> predict_all(const ModelData& md) const {
        // bounded batches keep the activation footprint small
        std::vector<Prediction> out;
        const std::size_t n = md.size();
        for (std::size_t start = 0; start < n; start += 256) {
            std::vector<std::size_t> rows;
            for (std::size_t i = start; i < std::min(n, start + 256); ++i) rows.push_back(i);
            const std::vector<Prediction> part = predict(gather_rows(md.inputs, rows));
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }

    std::vector<Prediction> package(const nn::Tensor& out) const {
        std::vector<Prediction> preds;
        const int n = out.dim(0);
        if (spec_.head == Head::regression) {
            for (int i = 0; i < n; ++i) {
                Prediction p;
                p.direction =
                    geom::normalize({out.at(i, 0), out.at(i, 1), out.at(i, 2)});
                preds.push_back(std::move(p));
            }
        } else {
            const nn::Tensor probs = nn::softmax(out);
            const int k = out.dim(1);
            for (int i = 0; i < n; ++i) {
                Prediction p;
                p.probabilities.assign(probs.ptr() + static_cast<std::size_t>(i) * k,
                                       probs.ptr() + static_cast<std::size_t>(i + 1) * k);
                preds.push_back(std::move(p));
            }
        }
        return preds;
    }

    std::unique_ptr<NeuralCore> core_;
};

// --- SVR predictor ---------------------------------------------------------------

nn::Tensor flatten_inputs(const nn::Tensor& inputs) {
    check_batch_shape(inputs);
    return inputs.reshaped({inputs.dim(0), kFlatFeatures});
}

class SvrPredictor : public Predictor {
public:
    explicit SvrPredictor(ModelSpec spec) : Predictor(std::move(spec)) {}

    TrainHistory train(const ModelData& tr, const ModelData& val,
                       const TrainConfig& cfg) override {
        if (tr.size() == 0) throw DataError("empty training split");
        const nn::Tensor x = flatten_inputs(tr.inputs);
        const PolyKernel kernel{spec_.hp.svr_degree, 1.0, 1.0};

        if (spec_.head == Head::regression) {
            machines_.clear();
            for (int d = 0; d < 3; ++d) {
                std::vector<double> y(tr.size());
                for (std::size_t i = 0; i < tr.size(); ++i) {
                    const geom::Vec3& t = tr.target_dirs[i];
                    y[i] = d == 0 ? t.x : (d == 1 ? t.y : t.z);
                }
                EpsilonSvr m(kernel, spec_.hp.svr_c, spec_.hp.svr_epsilon, spec_.hp.svr_tol);
                m.fit(x, y);
                machines_.push_back(std::move(m));
            }
        } else {
            classifiers_.clear();
            const int k = static_cast<int>(spec_.class_ids.size());
            for (int c = 0; c < k; ++c) {
                std::vector<double> y(tr.size());
                for (std::size_t i = 0; i < tr.size(); ++i)
                    y[i] = tr.labels[i] == c ? 1.0 : -1.0;
                BinarySvc m(kernel, spec_.hp.svr_c, spec_.hp.svr_tol);
                m.fit(x, y);
                classifiers_.push_back(std::move(m));
            }
        }
        return report_only_history(tr, val, cfg);
    }

    std::vector<Prediction> predict(const nn::Tensor& inputs) const override {
        const nn::Tensor x = flatten_inputs(inputs);
        std::vector<Prediction> out;
        for (int i = 0; i < x.dim(0); ++i) {
            const double* row = x.ptr() + static_cast<std::size_t>(i) * kFlatFeatures;
            Prediction p;
            if (spec_.head == Head::regression) {
                p.direction = geom::normalize({machines_[0].predict(row),
                                               machines_[1].predict(row),
                                               machines_[2].predict(row)});
            } else {
                // softmax over the one-vs-rest margins
                nn::Tensor dec({1, static_cast<int>(classifiers_.size())});
                for (std::size_t c = 0; c < classifiers_.size(); ++c)
                    dec.at(0, static_cast<int>(c)) = classifiers_[c].decision(row);
                const nn::Tensor probs = nn::softmax(dec);
                p.probabilities.assign(probs.data.begin(), probs.data.end());
            }
            out.push_back(std::move(p));
        }
        return out;
    }

    void save(const std::filesystem::path& path) const override;

    std::vector<EpsilonSvr> machines_;   // regression, one per output dim
    std::vector<BinarySvc> classifiers_; // one-vs-rest

private:
    TrainHistory report_only_history(const ModelData& tr, const ModelData& val,
                                     const TrainConfig&) {
        TrainHistory hist;
        hist.best_epoch = 0;
        if (val.size() == 0) return hist;
        const std::vector<Prediction> preds = predict(val.inputs);
        const std::vector<int> cls = predicted_class_indices(preds, val, spec_.head);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < cls.size(); ++i)
            if (cls[i] == val.labels[i]) ++correct;
        EpochStats s;
        s.epoch = 0;
        s.val_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(val.size());
        s.val_mad = std::numeric_limits<double>::quiet_NaN();
        if (spec_.head == Head::regression) {
            double sum = 0.0;
            for (std::size_t i = 0; i < preds.size(); ++i)
                sum += geom::angular_deviation_deg(preds[i].direction, val.target_dirs[i]);
            s.val_mad = sum / static_cast<double>(preds.size());
        }
        hist.epochs.push_back(s);
        (void)tr;
        return hist;
    }
};

// --- RF predictor ----------------------------------------------------------------

class RfPredictor : public Predictor {
public:
    explicit RfPredictor(ModelSpec spec) : Predictor(std::move(spec)) {}

    TrainHistory train(const ModelData& tr, const ModelData& val,
                       const TrainConfig& cfg) override {
        if (tr.size() == 0) throw DataError("empty training split");
        const nn::Tensor x = flatten_inputs(tr.inputs);
        const ForestConfig fc{spec_.hp.rf_trees, spec_.hp.rf_min_leaf, spec_.hp.rf_max_depth,
                              0};
        if (spec_.head == Head::regression) {
            std::vector<double> targets;
            targets.reserve(tr.size() * 3);
            for (const geom::Vec3& t : tr.target_dirs) {
                targets.push_back(t.x);
                targets.push_back(t.y);
                targets.push_back(t.z);
            }
            forest_.fit_regression(x, targets, 3, fc, spec_.seed);
        } else {
            forest_.fit_classification(x, tr.labels,
                                       static_cast<int>(spec_.class_ids.size()), fc,
                                       spec_.seed);
        }
        return report_history(val, cfg);
    }

    std::vector<Prediction> predict(const nn::Tensor& inputs) const override {
        const nn::Tensor x = flatten_inputs(inputs);
        std::vector<Prediction> out;
        for (int i = 0; i < x.dim(0); ++i) {
            const std::vector<double> v =
                forest_.predict(x.ptr() + static_cast<std::size_t>(i) * kFlatFeatures);
            Prediction p;
            if (spec_.head == Head::regression)
                p.direction = geom::normalize({v[0], v[1], v[2]});
            else
                p.probabilities = v;
            out.push_back(std::move(p));
        }
        return out;
    }

    void save(const std::filesystem::path& path) const override;

    RandomForest forest_;

private:
    TrainHistory report_history(const ModelData& val, const TrainConfig&) {
        TrainHistory hist;
        hist.best_epoch = 0;
        if (val.size() == 0) return hist;
        const std::vector<Prediction> preds = predict(val.inputs);
        const std::vector<int> cls = predicted_class_indices(preds, val, spec_.head);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < cls.size(); ++i)
            if (cls[i] == val.labels[i]) ++correct;
        EpochStats s;
        s.val_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(val.size());
        s.val_mad = std::numeric_limits<double>::quiet_NaN();
        if (spec_.head == Head::regression) {
            double sum = 0.0;
            for (std::size_t i = 0; i < preds.size(); ++i)
                sum += geom::angular_deviation_deg(preds[i].direction, val.target_dirs[i]);
            s.val_mad = sum / static_cast<double>(preds.size());
        }
        hist.epochs.push_back(s);
        return hist;
    }
};

std::unique_ptr<NeuralCore> make_core(const ModelSpec& spec, Rng& rng) {
    switch (spec.family) {
    case Family::cnn: return std::make_unique<CnnCore>(spec, rng);
    case Family::fcnn: return std::make_unique<FcnnCore>(spec, rng);
    case Family::rnn: return std::make_unique<RnnCore>(spec, rng);
    default: return nullptr;
    }
}

void validate_spec(const ModelSpec& spec) {
    if (spec.class_ids.empty()) throw ConfigError("model spec has no class ids");
    for (std::size_t i = 1; i < spec.class_ids.size(); ++i)
        if (spec.class_ids[i] <= spec.class_ids[i - 1])
            throw ConfigError("class ids must be strictly increasing");
    const Hyperparams& hp = spec.hp;
    if (hp.conv_channels1 <= 0 || hp.conv_channels2 <= 0 || hp.conv_kernel <= 0
        || hp.fc_hidden1 <= 0 || hp.fc_hidden2 <= 0 || hp.lstm_hidden <= 0 || hp.svr_c <= 0
        || hp.svr_epsilon < 0 || hp.svr_degree <= 0 || hp.rf_trees <= 0 || hp.rf_min_leaf <= 0)
        throw ConfigError("invalid hyperparameters");
    if (spec.head == Head::classification && spec.class_ids.size() < 2)
        throw ConfigError("classification needs at least 2 classes");
}

} // namespace

std::unique_ptr<Predictor> build_model(const ModelSpec& spec) {
    validate_spec(spec);
    Rng rng = Rng(spec.seed).split("init");
    switch (spec.family) {
    case Family::cnn:
    case Family::fcnn:
    case Family::rnn:
        return std::make_unique<NeuralPredictor>(spec, make_core(spec, rng));
    case Family::svr: return std::make_unique<SvrPredictor>(spec);
    case Family::rf: return std::make_unique<RfPredictor>(spec);
    }
    throw ConfigError("unknown family");
}

// --- serialization -----------------------------------------------------------------

namespace {

json spec_to_json(const ModelSpec& s) {
    return json{{"family", to_string(s.family)},
                {"head", to_string(s.head)},
                {"class_ids", s.class_ids},
                {"seed", s.seed},
                {"hp",
                 {{"conv_channels1", s.hp.conv_channels1},
                  {"conv_channels2", s.hp.conv_channels2},
                  {"conv_kernel", s.hp.conv_kernel},
                  {"fc_hidden1", s.hp.fc_hidden1},
                  {"fc_hidden2", s.hp.fc_hidden2},
                  {"lstm_hidden", s.hp.lstm_hidden},
                  {"svr_c", s.hp.svr_c},
                  {"svr_epsilon", s.hp.svr_epsilon},
                  {"svr_tol", s.hp.svr_tol},
                  {"svr_degree", s.hp.svr_degree},
                  {"rf_trees", s.hp.rf_trees},
                  {"rf_min_leaf", s.hp.rf_min_leaf},
                  {"rf_max_depth", s.hp.rf_max_depth}}}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.family = family_from_string(j.at("family").get<std::string>());
    s.head = head_from_string(j.at("head").get<std::string>());
    s.class_ids = j.at("class_ids").get<std::vector<int>>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const json& hp = j.at("hp");
    s.hp.conv_channels1 = hp.at("conv_channels1").get<int>();
    s.hp.conv_channels2 = hp.at("conv_channels2").get<int>();
    s.hp.conv_kernel = hp.at("conv_kernel").get<int>();
    s.hp.fc_hidden1 = hp.at("fc_hidden1").get<int>();
    s.hp.fc_hidden2 = hp.at("fc_hidden2").get<int>();
    s.hp.lstm_hidden = hp.at("lstm_hidden").get<int>();
    s.hp.svr_c = hp.at("svr_c").get<double>();
    s.hp.svr_epsilon = hp.at("svr_epsilon").get<double>();
    s.hp.svr_tol = hp.at("svr_tol").get<double>();
    s.hp.svr_degree = hp.at("svr_degree").get<int>();
    s.hp.rf_trees = hp.at("rf_trees").get<int>();
    s.hp.rf_min_leaf = hp.at("rf_min_leaf").get<int>();
    s.hp.rf_max_depth = hp.at("rf_max_depth").get<int>();
    return s;
}

std::ofstream open_model_file(const std::filesystem::path& path, const ModelSpec& spec) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << json{{"schema_version", data::kSchemaVersion}, {"kind", "model"}}.dump() << '\n';
    out << json{{"spec", spec_to_json(spec)}}.dump() << '\n';
    return out;
}

} // namespace

void NeuralPredictor::save(const std::filesystem::path& path) const {
    std::ofstream out = open_model_file(path, spec_);
    for (nn::Param* p : const_cast<NeuralPredictor*>(this)->core_->params())
        out << json{{"param",
                     {{"name", p->name}, {"shape", p->value.shape}, {"values", p->value.data}}}}
                   .dump()
            << '\n';
}

void SvrPredictor::save(const std::filesystem::path& path) const {
    std::ofstream out = open_model_file(path, spec_);
    auto dump_machine = [&](int index, int p, const std::vector<double>& sv,
                            const std::vector<double>& coeff, double rho) {
        out << json{{"svm",
                     {{"index", index},
                      {"p", p},
                      {"rho", rho},
                      {"coeffs", coeff},
                      {"svs", sv}}}}
                   .dump()
            << '\n';
    };
    for (std::size_t i = 0; i < machines_.size(); ++i)
        dump_machine(static_cast<int>(i), machines_[i].feature_count(),
                     machines_[i].sv_values(), machines_[i].sv_coeffs(), machines_[i].rho());
    for (std::size_t i = 0; i < classifiers_.size(); ++i)
        dump_machine(static_cast<int>(i), classifiers_[i].feature_count(),
                     classifiers_[i].sv_values(), classifiers_[i].sv_coeffs(),
                     classifiers_[i].rho());
}

void RfPredictor::save(const std::filesystem::path& path) const {
    std::ofstream out = open_model_file(path, spec_);
    const std::vector<DecisionTree>& trees = forest_.trees();
    for (std::size_t t = 0; t < trees.size(); ++t) {
        json nodes = json::array();
        for (const TreeNode& n : trees[t].nodes())
            nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value}));
        out << json{{"tree",
                     {{"index", t}, {"out_dim", forest_.output_dim()}, {"nodes", nodes}}}}
                   .dump()
            << '\n';
    }
}

std::unique_ptr<Predictor> load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string text;
    std::size_t line = 0;
    ModelSpec spec;
    bool have_header = false, have_spec = false;

    std::map<std::string, nn::Tensor> params;
    struct SvmRecord {
        int index, p;
        double rho;
        std::vector<double> coeffs, svs;
    };
    std::vector<SvmRecord> svms;
    std::vector<DecisionTree> trees;
    int rf_out_dim = 0;

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
        } else if (j.contains("spec")) {
            spec = spec_from_json(j["spec"]);
            have_spec = true;
        } else if (j.contains("param")) {
            const json& p = j["param"];
            params.emplace(p.at("name").get<std::string>(),
                           nn::Tensor(p.at("shape").get<std::vector<int>>(),
                                      p.at("values").get<std::vector<double>>()));
        } else if (j.contains("svm")) {
            const json& s = j["svm"];
            svms.push_back({s.at("index").get<int>(), s.at("p").get<int>(),
                            s.at("rho").get<double>(),
                            s.at("coeffs").get<std::vector<double>>(),
                            s.at("svs").get<std::vector<double>>()});
        } else if (j.contains("tree")) {
            const json& t = j["tree"];
            rf_out_dim = t.at("out_dim").get<int>();
            std::vector<TreeNode> nodes;
            for (const json& nj : t.at("nodes")) {
                TreeNode n;
                n.feature = nj[0].get<int>();
                n.threshold = nj[1].get<double>();
                n.left = nj[2].get<int>();
                n.right = nj[3].get<int>();
                n.value = nj[4].get<std::vector<double>>();
                nodes.push_back(std::move(n));
            }
            DecisionTree tree;
            tree.restore(std::move(nodes));
            trees.push_back(std::move(tree));
        } else {
            throw ParseError(path.string(), line, "unknown record in model file");
        }
    }
    if (!have_spec) throw ParseError(path.string(), 1, "model file has no spec record");

    std::unique_ptr<Predictor> model = build_model(spec);
    const PolyKernel kernel{spec.hp.svr_degree, 1.0, 1.0};
    switch (spec.family) {
    case Family::cnn:
    case Family::fcnn:
    case Family::rnn:
        static_cast<NeuralPredictor&>(*model).restore_params(params);
        break;
    case Family::svr: {
        auto& svr = static_cast<SvrPredictor&>(*model);
        std::sort(svms.begin(), svms.end(),
                  [](const SvmRecord& a, const SvmRecord& b) { return a.index < b.index; });
        if (spec.head == Head::regression) {
            if (svms.size() != 3)
                throw DataError("svr regression model needs 3 machines");
            svr.machines_.assign(3, EpsilonSvr(kernel, spec.hp.svr_c, spec.hp.svr_epsilon,
                                               spec.hp.svr_tol));
            for (std::size_t i = 0; i < 3; ++i)
                svr.machines_[i].restore(kernel, svms[i].p, std::move(svms[i].svs),
                                         std::move(svms[i].coeffs), svms[i].rho);
        } else {
            svr.classifiers_.assign(svms.size(),
                                    BinarySvc(kernel, spec.hp.svr_c, spec.hp.svr_tol));
            for (std::size_t i = 0; i < svms.size(); ++i)
                svr.classifiers_[i].restore(kernel, svms[i].p, std::move(svms[i].svs),
                                            std::move(svms[i].coeffs), svms[i].rho);
        }
        break;
    }
    case Family::rf:
        static_cast<RfPredictor&>(*model).forest_.restore(std::move(trees), rf_out_dim);
        break;
    }
    return model;
}

} // namespace pointfuse::ml
