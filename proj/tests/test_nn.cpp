#include <doctest.h>

#include <cmath>
#include <functional>

#include "kneexnet/nn/layers.hpp"
#include "kneexnet/nn/optim.hpp"
#include "kneexnet/random.hpp"

using namespace kneexnet;
using namespace kneexnet::nn;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
}

/// Scalar objective sum(w .* f(x)) with fixed random w, so the output gradient is w.
struct Probe {
    Tensor weights;
    double operator()(const Tensor& y) const {
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
        return s;
    }
};

/// Central-difference gradient check of both input and parameter gradients.
void check_gradients(Layer& layer, const Tensor& x, double tol = 1e-6) {
    const Tensor y = layer.forward(x);
    Probe probe{random_tensor(y.shape(), 99)};
    for (auto* p : layer.parameters()) p->grad.fill(0.0);
    const Tensor dx = layer.backward(probe.weights);
    const double h = 1e-6;

    Tensor xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + h;
        const double up = probe(layer.infer(xp));
        xp[i] = orig - h;
        const double down = probe(layer.infer(xp));
        xp[i] = orig;
        CHECK(dx[i] == doctest::Approx((up - down) / (2 * h)).epsilon(tol).scale(1.0));
    }
    for (auto* p : layer.parameters()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + h;
            const double up = probe(layer.infer(x));
            p->value[i] = orig - h;
            const double down = probe(layer.infer(x));
            p->value[i] = orig;
            CHECK(p->grad[i] == doctest::Approx((up - down) / (2 * h)).epsilon(tol).scale(1.0));
        }
    }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    Conv2d conv(2, 3, 3, 1, 1, 5);
    check_gradients(conv, random_tensor({2, 2, 5, 4}, 1));
    Conv2d strided(2, 2, 3, 2, 0, 6);
    check_gradients(strided, random_tensor({1, 2, 7, 7}, 2));
}

TEST_CASE("linear gradients match finite differences") {
    Linear fc(6, 4, 3);
    check_gradients(fc, random_tensor({3, 6}, 3));
}

TEST_CASE("pooling and activation gradients match finite differences") {
    AvgPool2d avg(2);
    check_gradients(avg, random_tensor({2, 3, 4, 6}, 4));
    MaxPool2d mx(2);
    check_gradients(mx, random_tensor({2, 2, 4, 4}, 5));
    GlobalAvgPool gap;
    check_gradients(gap, random_tensor({2, 3, 3, 5}, 6));
    ReLU relu;
    check_gradients(relu, random_tensor({4, 7}, 7));
    Flatten flat;
    check_gradients(flat, random_tensor({2, 3, 2, 2}, 8));
}

TEST_CASE("conv2d forward matches a direct convolution") {
    Conv2d conv(2, 2, 3, 1, 1, 11);
    const auto x = random_tensor({1, 2, 4, 5}, 12);
    const auto y = conv.infer(x);
    auto params = conv.parameters();
    const auto& w = params[0]->value;
    const auto& b = params[1]->value;
    REQUIRE(y.shape() == Shape{1, 2, 4, 5});
    for (std::size_t o = 0; o < 2; ++o) {
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 5; ++j) {
                double s = b[o];
                for (std::size_t c = 0; c < 2; ++c) {
                    for (int di = 0; di < 3; ++di) {
                        for (int dj = 0; dj < 3; ++dj) {
                            const int yi = i + di - 1, xj = j + dj - 1;
                            if (yi < 0 || yi >= 4 || xj < 0 || xj >= 5) continue;
                            s += w[((o * 2 + c) * 3 + di) * 3 + dj] * x[(c * 4 + yi) * 5 + xj];
                        }
                    }
                }
                CHECK(y[(o * 4 + i) * 5 + j] == doctest::Approx(s).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("sequential backward_to returns the intermediate gradient") {
    Sequential net;
    net.add("conv", std::make_unique<Conv2d>(1, 2, 3, 1, 1, 1));
    net.add("relu", std::make_unique<ReLU>());
    net.add("flat", std::make_unique<Flatten>());
    net.add("fc", std::make_unique<Linear>(2 * 4 * 4, 3, 2));
    const auto x = random_tensor({1, 1, 4, 4}, 3);
    auto [out, act] = net.forward_capture(x, 1);
    CHECK(act.shape() == Shape{1, 2, 4, 4});
    Tensor seed(out.shape());
    seed[1] = 1.0;
    const auto g = net.backward_to(seed, 1);
    // d out[1] / d act = fc weight row 1 reshaped.
    Linear& fc = dynamic_cast<Linear&>(net.layer(3));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(fc.weight().value[32 + i]));
    CHECK(net.find("relu") == 1);
    CHECK(net.find("missing") == net.size());
}

TEST_CASE("sequential copies are deep") {
    Sequential a;
    a.add("fc", std::make_unique<Linear>(2, 2, 1));
    Sequential b = a;
    b.parameters()[0]->value[0] += 1.0;
    CHECK(a.parameters()[0]->value[0] != b.parameters()[0]->value[0]);
}

TEST_CASE("cross entropy matches the closed form") {
    const Tensor logits({2, 3}, std::vector<double>{1, 2, 3, 0, 0, 0});
    const std::vector<std::size_t> targets{2, 1};
    const auto r = cross_entropy(logits, targets);
    const double z = std::exp(1) + std::exp(2) + std::exp(3);
    const double l0 = -std::log(std::exp(3) / z);
    const double l1 = std::log(3.0);
    CHECK(r.loss == doctest::Approx((l0 + l1) / 2).epsilon(1e-12));
    CHECK(r.grad[2] == doctest::Approx((std::exp(3) / z - 1) / 2).epsilon(1e-12));
    CHECK(r.grad[3] == doctest::Approx((1.0 / 3) / 2).epsilon(1e-12));
    CHECK(r.grad[4] == doctest::Approx((1.0 / 3 - 1) / 2).epsilon(1e-12));
}

TEST_CASE("adam matches a hand-rolled update") {
    Parameter p{"w", Tensor({2}, std::vector<double>{1.0, -2.0}), Tensor({2})};
    Adam opt({&p}, AdamOptions{0.1});
    double m[2] = {0, 0}, v[2] = {0, 0}, w[2] = {1.0, -2.0};
    for (int t = 1; t <= 5; ++t) {
        const double g[2] = {2 * p.value[0], 3.0};
        p.grad[0] = g[0];
        p.grad[1] = g[1];
        opt.step();
        for (int i = 0; i < 2; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(0.9, t));
            const double vh = v[i] / (1 - std::pow(0.999, t));
            w[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
            CHECK(p.value[i] == doctest::Approx(w[i]).epsilon(1e-12));
        }
        opt.zero_grad();
        CHECK(p.grad[0] == 0.0);
    }
}
