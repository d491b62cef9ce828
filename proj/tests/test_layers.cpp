#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "xsim/layers.hpp"
#include "xsim/rng.hpp"
#include "xsim/tensor.hpp"

using namespace xsim;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
    return t;
}

// Scalar objective s(x) = sum_i w_i * y_i for a fixed random weighting w, so
// ds/dy = w and backward(w) yields ds/dx plus parameter gradients.
double objective(Layer& layer, const Tensor& x, const Tensor& w) {
    Tensor y = layer.forward(x, nullptr);
    REQUIRE(y.numel() == w.numel());
    double s = 0.0;
    for (size_t i = 0; i < y.numel(); ++i) s += w[i] * y[i];
    return s;
}

double central_diff(const std::function<double()>& f, double* slot, double eps) {
    const double orig = *slot;
    *slot = orig + eps;
    const double up = f();
    *slot = orig - eps;
    const double dn = f();
    *slot = orig;
    return (up - dn) / (2.0 * eps);
}

void expect_close(double got, double want) {
    const double tol = 1e-6 + 1e-5 * std::max(std::abs(got), std::abs(want));
    CHECK(std::abs(got - want) <= tol);
}

// Checks analytic input and parameter gradients of `layer` against central
// finite differences. Samples at most `max_per_tensor` entries per tensor to
// keep the suite fast.
void check_gradients(Layer& layer, const Tensor& x0, size_t max_per_tensor = 24) {
    Rng rng(4242);
    Tensor x = x0;
    Tensor y_probe = layer.forward(x, nullptr);
    Tensor w = random_tensor(y_probe.shape, rng);

    std::vector<ParamTensor*> params;
    layer.collect_params(params);
    for (ParamTensor* p : params) p->zero_grad();

    LayerCache cache;
    layer.forward(x, &cache);
    Tensor dx = layer.backward(w, cache, /*accumulate=*/true);
    REQUIRE(dx.shape == x.shape);

    auto eval = [&] { return objective(layer, x, w); };

    const double eps = 1e-5;
    const size_t in_stride = std::max<size_t>(1, x.numel() / max_per_tensor);
    for (size_t i = 0; i < x.numel(); i += in_stride) {
        const double fd = central_diff(eval, &x.data[i], eps);
        expect_close(dx[i], fd);
    }

    for (ParamTensor* p : params) {
        const size_t stride = std::max<size_t>(1, p->value.numel() / max_per_tensor);
        for (size_t i = 0; i < p->value.numel(); i += stride) {
            const double fd = central_diff(eval, &p->value.data[i], eps);
            expect_close(p->grad[i], fd);
        }
    }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(1);
    Conv2d layer(2, 3, 3, 1, 1, /*has_bias=*/true);
    layer.init(rng);
    check_gradients(layer, random_tensor({2, 5, 5}, rng));
}

TEST_CASE("strided unbiased conv2d gradients match finite differences") {
    Rng rng(2);
    Conv2d layer(3, 4, 3, 2, 1, /*has_bias=*/false);
    layer.init(rng);
    check_gradients(layer, random_tensor({3, 7, 7}, rng));
}

TEST_CASE("dense gradients match finite differences") {
    Rng rng(3);
    Dense layer(6, 4);
    layer.init(rng);
    check_gradients(layer, random_tensor({6}, rng));
}

TEST_CASE("relu gradients match finite differences away from the kink") {
    Rng rng(4);
    ReLU layer;
    Tensor x = random_tensor({40}, rng);
    // Finite differences are meaningless at the kink, so push values off zero.
    for (size_t i = 0; i < x.numel(); ++i)
        if (std::abs(x[i]) < 0.1) x[i] = x[i] < 0 ? -0.1 : 0.1;
    check_gradients(layer, x, 40);
}

TEST_CASE("relu blocks gradient where the input was negative") {
    ReLU layer;
    Tensor x(std::vector<int>{4});
    x.data = {-1.0, 2.0, -3.0, 4.0};
    LayerCache cache;
    layer.forward(x, &cache);
    Tensor dy(std::vector<int>{4}, 1.0);
    Tensor dx = layer.backward(dy, cache, true);
    CHECK(dx.data == std::vector<double>{0.0, 1.0, 0.0, 1.0});
}

TEST_CASE("maxpool input gradients match finite differences") {
    Rng rng(5);
    MaxPool2d layer(2, 2, 0);
    check_gradients(layer, random_tensor({2, 6, 6}, rng), 36);
}

TEST_CASE("padded maxpool input gradients match finite differences") {
    Rng rng(6);
    MaxPool2d layer(3, 2, 1);
    check_gradients(layer, random_tensor({2, 7, 7}, rng));
}

TEST_CASE("global average pool gradients match finite differences") {
    Rng rng(7);
    GlobalAvgPool layer;
    check_gradients(layer, random_tensor({3, 4, 5}, rng));
}

TEST_CASE("batchnorm gradients match finite differences") {
    Rng rng(8);
    BatchNorm2d layer(3);
    layer.init(rng);
    // Give the affine parameters and running statistics non-trivial values.
    std::vector<ParamTensor*> params, state;
    layer.collect_params(params);
    layer.collect_state(state);
    for (ParamTensor* p : params)
        for (size_t i = 0; i < p->value.numel(); ++i) p->value[i] = rng.normal(0.0, 0.5) + 1.0;
    for (ParamTensor* s : state)
        for (size_t i = 0; i < s->value.numel(); ++i)
            s->value[i] = s->name.find("var") != std::string::npos ? 0.5 + rng.uniform()
                                                                   : rng.normal();
    check_gradients(layer, random_tensor({3, 4, 4}, rng));
}

TEST_CASE("projected bottleneck gradients match finite differences") {
    Rng rng(9);
    Bottleneck layer(4, 2, 8, 2);
    layer.init(rng);
    check_gradients(layer, random_tensor({4, 6, 6}, rng), 8);
}

TEST_CASE("identity bottleneck gradients match finite differences") {
    Rng rng(10);
    Bottleneck layer(8, 2, 8, 1);
    layer.init(rng);
    check_gradients(layer, random_tensor({8, 5, 5}, rng), 8);
}

TEST_CASE("backward accumulates parameter gradients only when asked") {
    Rng rng(11);
    Dense layer(5, 3);
    layer.init(rng);
    Tensor x = random_tensor({5}, rng);
    Tensor dy = random_tensor({3}, rng);

    std::vector<ParamTensor*> params;
    layer.collect_params(params);
    for (ParamTensor* p : params) p->zero_grad();

    LayerCache cache;
    layer.forward(x, &cache);
    layer.backward(dy, cache, /*accumulate=*/true);
    std::vector<Tensor> once;
    for (ParamTensor* p : params) once.push_back(p->grad);

    // A second accumulating pass doubles every gradient.
    layer.backward(dy, cache, /*accumulate=*/true);
    for (size_t i = 0; i < params.size(); ++i)
        for (size_t j = 0; j < once[i].numel(); ++j)
            CHECK(params[i]->grad[j] == doctest::Approx(2.0 * once[i][j]).epsilon(1e-12));

    // A non-accumulating pass must leave parameter gradients untouched.
    for (ParamTensor* p : params) p->zero_grad();
    Tensor dx_plain = layer.backward(dy, cache, /*accumulate=*/false);
    for (ParamTensor* p : params)
        for (size_t j = 0; j < p->grad.numel(); ++j) CHECK(p->grad[j] == 0.0);

    // The input gradient itself is the same either way.
    Tensor dx_acc = layer.backward(dy, cache, /*accumulate=*/true);
    CHECK(max_abs_diff(dx_plain, dx_acc) == 0.0);
}

TEST_CASE("independent caches let one layer serve two branches") {
    Rng rng(12);
    Conv2d layer(1, 2, 3, 1, 1, true);
    layer.init(rng);
    Tensor xa = random_tensor({1, 4, 4}, rng);
    Tensor xb = random_tensor({1, 4, 4}, rng);

    LayerCache ca, cb;
    layer.forward(xa, &ca);
    layer.forward(xb, &cb);

    Tensor dy(std::vector<int>{2, 4, 4}, 1.0);
    Tensor da = layer.backward(dy, ca, false);

    // Backward through branch A must match a fresh single-branch run, i.e. the
    // later forward through B did not clobber A's cache.
    Conv2d fresh(1, 2, 3, 1, 1, true);
    Rng rng2(12);
    fresh.init(rng2);
    LayerCache cf;
    fresh.forward(xa, &cf);
    Tensor df = fresh.backward(dy, cf, false);
    CHECK(max_abs_diff(da, df) == 0.0);
}
