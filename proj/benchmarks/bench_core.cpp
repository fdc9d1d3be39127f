#include <benchmark/benchmark.h>

#include "pointfuse/layers.hpp"
#include "pointfuse/matching.hpp"
#include "pointfuse/models.hpp"
#include "pointfuse/rng.hpp"
#include "pointfuse/synthgen.hpp"

using namespace pointfuse;

namespace {

nn::Tensor random_tensor(std::vector<int> shape, std::uint64_t seed) {
    nn::Tensor t(std::move(shape));
    Rng rng(seed);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(1);
    nn::Conv2d conv("c", 3, 16, 3, 1, rng);
    const nn::Tensor x = random_tensor({8, 3, 8, 6}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
}
BENCHMARK(BM_Conv2dForward);

void BM_Conv2dBackward(benchmark::State& state) {
    Rng rng(1);
    nn::Conv2d conv("c", 3, 16, 3, 1, rng);
    const nn::Tensor x = random_tensor({8, 3, 8, 6}, 2);
    const nn::Tensor dy = random_tensor({8, 16, 8, 6}, 3);
    conv.forward(x);
    for (auto _ : state) benchmark::DoNotOptimize(conv.backward(dy));
}
BENCHMARK(BM_Conv2dBackward);

void BM_DenseForward(benchmark::State& state) {
    Rng rng(1);
    nn::Dense dense("d", 1536, 3, nn::Dense::Init::xavier, rng);
    const nn::Tensor x = random_tensor({8, 1536}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(dense.forward(x));
}
BENCHMARK(BM_DenseForward);

void BM_LstmForward(benchmark::State& state) {
    Rng rng(1);
    nn::Lstm lstm("l", 18, 64, rng);
    const nn::Tensor x = random_tensor({8, 8, 18}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(lstm.forward(x));
}
BENCHMARK(BM_LstmForward);

void BM_CosineLoss(benchmark::State& state) {
    const nn::Tensor pred = random_tensor({64, 3}, 2);
    const nn::Tensor target = random_tensor({64, 3}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(nn::cosine_loss(pred, target));
}
BENCHMARK(BM_CosineLoss);

void BM_MatchAoi(benchmark::State& state) {
    const geom::AoiSet aois = synth::default_aoi_set();
    const geom::Vec3 pred = geom::from_azimuth_elevation(-20.0, -12.0);
    for (auto _ : state) benchmark::DoNotOptimize(match_aoi(pred, aois));
}
BENCHMARK(BM_MatchAoi);

void BM_GenerateDriver(benchmark::State& state) {
    synth::GeneratorConfig cfg;
    cfg.n_drivers = 1;
    cfg.samples_per_aoi = 10;
    for (auto _ : state) {
        benchmark::DoNotOptimize(synth::generate_dataset(cfg));
        cfg.seed += 1;
    }
}
BENCHMARK(BM_GenerateDriver);

struct InferenceFixture {
    std::unique_ptr<ml::Predictor> model;
    nn::Tensor one{{1, 8, 6, 3}};

    explicit InferenceFixture(ml::Family family) {
        synth::GeneratorConfig cfg;
        cfg.n_drivers = 3;
        cfg.samples_per_aoi = 1;
        const data::Dataset ds = synth::generate_dataset(cfg);
        std::vector<std::size_t> idx(ds.samples.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::vector<int> classes;
        for (int i = 1; i <= 12; ++i) classes.push_back(i);
        const ml::ModelData md =
            ml::make_model_data(ds, idx, classes, ml::ModalityMask::all());
        ml::ModelSpec spec;
        spec.family = family;
        spec.class_ids = classes;
        model = ml::build_model(spec);
        ml::TrainConfig tc;
        tc.epochs = 1;
        model->train(md, md, tc);
        std::copy(md.inputs.ptr(), md.inputs.ptr() + 144, one.ptr());
    }
};

void BM_CnnInferSingle(benchmark::State& state) {
    static const InferenceFixture fx(ml::Family::cnn);
    for (auto _ : state) benchmark::DoNotOptimize(fx.model->predict(fx.one));
}
BENCHMARK(BM_CnnInferSingle);

void BM_RnnInferSingle(benchmark::State& state) {
    static const InferenceFixture fx(ml::Family::rnn);
    for (auto _ : state) benchmark::DoNotOptimize(fx.model->predict(fx.one));
}
BENCHMARK(BM_RnnInferSingle);

} // namespace

BENCHMARK_MAIN();
