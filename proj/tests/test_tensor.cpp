#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "pointfuse/layers.hpp"
#include "pointfuse/optim.hpp"
#include "pointfuse/rng.hpp"
#include "pointfuse/tensor.hpp"

using namespace pointfuse;
using nn::Tensor;

namespace {

std::vector<double> random_coeffs(std::size_t n, Rng& rng) {
    std::vector<double> c(n);
    for (double& v : c) v = rng.uniform(-1.0, 1.0);
    return c;
}

void randomize(Tensor& t, Rng& rng, double scale = 1.0) {
    for (double& v : t.data) v = scale * rng.uniform(-1.0, 1.0);
}

} // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.shape_str() == "[2,3,4]");
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
    CHECK(t.reshaped({4, 6}).dim(1) == 6);
}

TEST_CASE("gemm variants against hand-computed products") {
    // A = [[1,2],[3,4]], B = [[5,6],[7,8]]
    const std::vector<double> a{1, 2, 3, 4};
    const std::vector<double> b{5, 6, 7, 8};
    std::vector<double> c(4, 0.0);

    nn::gemm_nn(2, 2, 2, a.data(), b.data(), c.data(), false);
    CHECK(c == std::vector<double>{19, 22, 43, 50});

    nn::gemm_tn(2, 2, 2, a.data(), b.data(), c.data(), false); // A^T B
    CHECK(c == std::vector<double>{26, 30, 38, 44});

    nn::gemm_nt(2, 2, 2, a.data(), b.data(), c.data(), false); // A B^T
    CHECK(c == std::vector<double>{17, 23, 39, 53});
}

TEST_CASE("conv2d identity and counting cases") {
    Rng rng(7);
    SUBCASE("1x1 kernel of value 1 is the identity map") {
        nn::Conv2d conv("c", 1, 1, 1, 0, rng);
        const_cast<Tensor&>(conv.weights()).data = {1.0};
        const_cast<Tensor&>(conv.bias()).fill(0.0);
        Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
        const Tensor y = conv.forward(x);
        CHECK(y.data == x.data);
    }
    SUBCASE("all-ones 2x2 kernel on all-ones 3x3 input gives 2x2 of 4s") {
        nn::Conv2d conv("c", 1, 1, 2, 0, rng);
        const_cast<Tensor&>(conv.weights()).fill(1.0);
        const_cast<Tensor&>(conv.bias()).fill(0.0);
        Tensor x({1, 1, 3, 3});
        x.fill(1.0);
        const Tensor y = conv.forward(x);
        REQUIRE(y.shape == std::vector<int>{1, 1, 2, 2});
        for (const double v : y.data) CHECK(v == doctest::Approx(4.0));
    }
    SUBCASE("shape mismatch throws") {
        nn::Conv2d conv("c", 3, 4, 3, 1, rng);
        Tensor x({1, 2, 4, 6});
        CHECK_THROWS_AS(conv.forward(x), ShapeError);
    }
}

TEST_CASE("conv2d gradients match central finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        nn::Conv2d conv("c", 3, 4, 3, 1, rng);
        Tensor x({2, 3, 4, 6});
        randomize(x, rng);
        const std::vector<double> coeffs = random_coeffs(2 * 4 * 4 * 6, rng);

        for (nn::Param* p : conv.params()) p->zero_grad();
        const Tensor y = conv.forward(x);
        Tensor dy(y.shape, coeffs);
        const Tensor dx = conv.backward(dy);

        auto loss = [&]() { return gradcheck::project(conv.forward(x), coeffs); };
        for (nn::Param* p : conv.params())
            CHECK(gradcheck::max_rel_error(loss, p->value.data, p->grad.data) < 1e-4);
        CHECK(gradcheck::max_rel_error(loss, x.data, dx.data) < 1e-4);
    }
}

TEST_CASE("dense layer basics") {
    Rng rng(3);
    SUBCASE("identity weights, zero bias") {
        nn::Dense d("d", 3, 3, nn::Dense::Init::he, rng);
        Tensor& w = const_cast<Tensor&>(d.weights());
        w.fill(0.0);
        const_cast<Tensor&>(d.bias()).fill(0.0);
        for (int i = 0; i < 3; ++i) w.at(i, i) = 1.0;
        Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
        CHECK(d.forward(x).data == x.data);
    }
    SUBCASE("zero weights, bias b gives constant b") {
        nn::Dense d("d", 3, 2, nn::Dense::Init::he, rng);
        const_cast<Tensor&>(d.weights()).fill(0.0);
        const_cast<Tensor&>(d.bias()).data = {0.5, -1.5};
        Tensor x({2, 3});
        randomize(x, rng);
        const Tensor y = d.forward(x);
        CHECK(y.at(0, 0) == doctest::Approx(0.5));
        CHECK(y.at(1, 1) == doctest::Approx(-1.5));
    }
}

TEST_CASE("dense gradients match central finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        nn::Dense d("d", 6, 4, nn::Dense::Init::he, rng);
        Tensor x({3, 6});
        randomize(x, rng);
        const std::vector<double> coeffs = random_coeffs(12, rng);

        for (nn::Param* p : d.params()) p->zero_grad();
        Tensor dy({3, 4}, coeffs);
        d.forward(x);
        const Tensor dx = d.backward(dy);

        auto loss = [&]() { return gradcheck::project(d.forward(x), coeffs); };
        for (nn::Param* p : d.params())
            CHECK(gradcheck::max_rel_error(loss, p->value.data, p->grad.data) < 1e-4);
        CHECK(gradcheck::max_rel_error(loss, x.data, dx.data) < 1e-4);
    }
}

namespace {

// independent single LSTM cell step, straight from the update equations
void manual_cell(const Tensor& wx, const Tensor& wh, const Tensor& bias, int h,
                 const std::vector<double>& x, std::vector<double>& hstate,
                 std::vector<double>& cstate) {
    const int in = wx.dim(1);
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<double> z(static_cast<std::size_t>(4 * h));
    for (int r = 0; r < 4 * h; ++r) {
        double sum = bias[static_cast<std::size_t>(r)];
        for (int c = 0; c < in; ++c) sum += wx.at(r, c) * x[static_cast<std::size_t>(c)];
        for (int c = 0; c < h; ++c) sum += wh.at(r, c) * hstate[static_cast<std::size_t>(c)];
        z[static_cast<std::size_t>(r)] = sum;
    }
    for (int j = 0; j < h; ++j) {
        const double gi = sig(z[static_cast<std::size_t>(j)]);
        const double gf = sig(z[static_cast<std::size_t>(h + j)]);
        const double gg = std::tanh(z[static_cast<std::size_t>(2 * h + j)]);
        const double go = sig(z[static_cast<std::size_t>(3 * h + j)]);
        cstate[static_cast<std::size_t>(j)] = gf * cstate[static_cast<std::size_t>(j)] + gi * gg;
        hstate[static_cast<std::size_t>(j)] = go * std::tanh(cstate[static_cast<std::size_t>(j)]);
    }
}

} // namespace

TEST_CASE("lstm degenerate and composition cases") {
    Rng rng(11);
    const int h = 5, in = 4;

    SUBCASE("all-zero parameters give an all-zero hidden state") {
        nn::Lstm l("l", in, h, rng);
        const_cast<Tensor&>(l.wx()).fill(0.0);
        const_cast<Tensor&>(l.wh()).fill(0.0);
        Tensor x({2, 3, in});
        randomize(x, rng);
        l.forward(x);
        for (const double v : l.final_hidden().data) CHECK(v == doctest::Approx(0.0));
    }

    SUBCASE("f=1 equals a single manual cell step") {
        nn::Lstm l("l", in, h, rng);
        Tensor x({1, 1, in});
        randomize(x, rng);
        l.forward(x);
        std::vector<double> hstate(h, 0.0), cstate(h, 0.0);
        manual_cell(l.wx(), l.wh(), l.bias_values(), h,
                    {x.data.begin(), x.data.end()}, hstate, cstate);
        for (int j = 0; j < h; ++j)
            CHECK(l.final_hidden().at(0, j) == doctest::Approx(hstate[static_cast<std::size_t>(j)]));
    }

    SUBCASE("f=2 constant input equals two manual cell applications") {
        nn::Lstm l("l", in, h, rng);
        std::vector<double> step(in);
        for (double& v : step) v = rng.uniform(-1, 1);
        Tensor x({1, 2, in});
        for (int t = 0; t < 2; ++t)
            for (int c = 0; c < in; ++c) x.data[static_cast<std::size_t>(t * in + c)] = step[static_cast<std::size_t>(c)];
        l.forward(x);
        std::vector<double> hstate(h, 0.0), cstate(h, 0.0);
        manual_cell(l.wx(), l.wh(), l.bias_values(), h, step, hstate, cstate);
        manual_cell(l.wx(), l.wh(), l.bias_values(), h, step, hstate, cstate);
        for (int j = 0; j < h; ++j)
            CHECK(l.final_hidden().at(0, j) == doctest::Approx(hstate[static_cast<std::size_t>(j)]));
    }
}

TEST_CASE("lstm gradients match central finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        const int h = 4, in = 3, f = 8, b = 2;
        nn::Lstm l("l", in, h, rng);
        Tensor x({b, f, in});
        randomize(x, rng);
        const std::vector<double> coeffs = random_coeffs(static_cast<std::size_t>(b * h), rng);

        for (nn::Param* p : l.params()) p->zero_grad();
        l.forward(x);
        Tensor dh({b, h}, coeffs);
        const Tensor dx = l.backward_from_final(dh);

        auto loss = [&]() {
            l.forward(x);
            return gradcheck::project(l.final_hidden(), coeffs);
        };
        for (nn::Param* p : l.params())
            CHECK(gradcheck::max_rel_error(loss, p->value.data, p->grad.data) < 1e-4);
        CHECK(gradcheck::max_rel_error(loss, x.data, dx.data) < 1e-4);
    }
}

TEST_CASE("cosine loss values and gradient") {
    SUBCASE("pred equals target: mean cos 1, objective 0") {
        Tensor p({2, 3}, {1, 0, 0, 0, 0, 1});
        const nn::LossValue lv = nn::cosine_loss(p, p);
        CHECK(lv.value == doctest::Approx(1.0));
        CHECK(lv.objective == doctest::Approx(0.0));
    }
    SUBCASE("pred equals -target: mean cos -1, objective 2") {
        Tensor p({1, 3}, {0, 1, 0});
        Tensor t({1, 3}, {0, -1, 0});
        const nn::LossValue lv = nn::cosine_loss(p, t);
        CHECK(lv.value == doctest::Approx(-1.0));
        CHECK(lv.objective == doctest::Approx(2.0));
    }
    SUBCASE("cos values {1, 0} average to 0.5") {
        Tensor p({2, 3}, {1, 0, 0, 1, 0, 0});
        Tensor t({2, 3}, {2, 0, 0, 0, 3, 0});
        CHECK(nn::cosine_loss(p, t).value == doctest::Approx(0.5));
    }
    SUBCASE("zero row reports its index") {
        Tensor p({2, 3}, {1, 0, 0, 0, 0, 0});
        CHECK_THROWS_AS(nn::cosine_loss(p, p), ZeroVectorError);
    }
    SUBCASE("gradient matches finite differences") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Rng rng(seed);
            Tensor p({4, 3}), t({4, 3});
            randomize(p, rng);
            randomize(t, rng);
            for (std::size_t i = 0; i < 4; ++i) // keep rows away from zero norm
                p.data[i * 3] += (p.data[i * 3] < 0 ? -0.5 : 0.5);
            const nn::LossValue lv = nn::cosine_loss(p, t);
            auto loss = [&]() { return nn::cosine_loss(p, t).objective; };
            CHECK(gradcheck::max_rel_error(loss, p.data, lv.grad.data) < 1e-4);
        }
    }
}

TEST_CASE("softmax cross entropy values and gradient") {
    SUBCASE("uniform logits give ln k") {
        Tensor logits({2, 5});
        const nn::LossValue lv = nn::softmax_cross_entropy(logits, {0, 3});
        CHECK(lv.value == doctest::Approx(std::log(5.0)));
    }
    SUBCASE("dominant correct logit saturates to ~0 loss") {
        Tensor logits({1, 4}, {40.0, 0.0, 0.0, 0.0});
        CHECK(nn::softmax_cross_entropy(logits, {0}).value < 1e-6);
    }
    SUBCASE("label out of range") {
        Tensor logits({1, 4});
        CHECK_THROWS_AS(nn::softmax_cross_entropy(logits, {4}), DomainError);
        CHECK_THROWS_AS(nn::softmax_cross_entropy(logits, {-1}), DomainError);
    }
    SUBCASE("gradient matches finite differences") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Rng rng(seed);
            Tensor logits({3, 6});
            randomize(logits, rng, 2.0);
            const std::vector<int> labels{1, 5, 0};
            const nn::LossValue lv = nn::softmax_cross_entropy(logits, labels);
            auto loss = [&]() { return nn::softmax_cross_entropy(logits, labels).value; };
            CHECK(gradcheck::max_rel_error(loss, logits.data, lv.grad.data) < 1e-4);
        }
    }
}

TEST_CASE("adam optimizer") {
    SUBCASE("zero gradient leaves params unchanged, increments step") {
        nn::Param p("p", Tensor({3}, {1.0, -2.0, 0.5}));
        nn::Adam adam({&p});
        p.zero_grad();
        adam.step();
        CHECK(adam.steps() == 1);
        CHECK(p.value.data == std::vector<double>{1.0, -2.0, 0.5});
    }
    SUBCASE("first step matches the closed form") {
        // m_hat = g, v_hat = g^2, so the update is -lr * g / (|g| + eps')
        nn::Param p("p", Tensor({2}, {0.0, 0.0}));
        p.grad = Tensor({2}, {0.3, -4.0});
        nn::AdamConfig cfg;
        nn::Adam adam({&p}, cfg);
        adam.step();
        for (int i = 0; i < 2; ++i) {
            const double g = i == 0 ? 0.3 : -4.0;
            const double mhat = g;                       // m / (1 - beta1)
            const double vhat = g * g;                   // v / (1 - beta2)
            const double want = -cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
            CHECK(p.value[static_cast<std::size_t>(i)] == doctest::Approx(want).epsilon(1e-12));
            CHECK(std::abs(p.value[static_cast<std::size_t>(i)]
                           - (-cfg.learning_rate) * (g > 0 ? 1.0 : -1.0))
                  < 1e-5);
        }
    }
    SUBCASE("converges on the quadratic bowl f(w) = w^2") {
        nn::Param w("w", Tensor({1}, {1.0}));
        nn::Adam adam({&w}, {0.01, 0.9, 0.999, 1e-8});
        for (int i = 0; i < 200; ++i) {
            w.grad = Tensor({1}, {2.0 * w.value[0]});
            adam.step();
        }
        CHECK(std::abs(w.value[0]) < 0.1);
    }
    SUBCASE("shape mismatch rejected") {
        nn::Param p("p", Tensor({2}));
        nn::Adam adam({&p});
        p.grad = Tensor({3});
        CHECK_THROWS_AS(adam.step(), ShapeError);
    }
}
