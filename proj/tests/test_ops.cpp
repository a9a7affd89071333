#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "reface/gradcheck.hpp"
#include "reface/ops.hpp"
#include "reface/rng.hpp"

using namespace reface;

// ---- conv2d ------------------------------------------------------------

TEST_CASE("conv2d: 3x3 ones kernel over 3x3 ones image, pad 1") {
    TensorF x = TensorF::full({1, 1, 3, 3}, 1.0f);
    TensorF w = TensorF::full({1, 1, 3, 3}, 1.0f);
    TensorF b({1});
    auto y = conv2d(x, w, b, 1, 1);
    const float expect[9] = {4, 6, 4, 6, 9, 6, 4, 6, 4};
    REQUIRE_EQ(y.shape(), Shape{1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) CHECK_EQ(y.ptr()[i], doctest::Approx(expect[i]));
}

TEST_CASE("conv2d: per-channel 1x1 unit kernel is identity") {
    Rng rng(3);
    auto x = reftest::rand_tensor<float>(rng, {2, 4, 5, 5});
    TensorF w = TensorF::full({4, 1, 1, 1}, 1.0f);
    TensorF b({4});
    auto y = conv2d(x, w, b, 1, 0, 4);
    for (int64_t i = 0; i < x.numel(); ++i) CHECK_EQ(y.ptr()[i], x.ptr()[i]);
}

TEST_CASE("conv2d: groups=2 equals two independent half convs") {
    Rng rng(5);
    auto x = reftest::rand_tensor<double>(rng, {2, 4, 6, 6});
    auto w = reftest::rand_tensor<double>(rng, {6, 2, 3, 3});
    auto b = reftest::rand_tensor<double>(rng, {6});
    auto grouped = conv2d(x, w, b, 1, 1, 2);

    auto x0 = narrow(x, 1, 0, 2), x1 = narrow(x, 1, 2, 2);
    auto w0 = narrow(w, 0, 0, 3), w1 = narrow(w, 0, 3, 3);
    auto b0 = narrow(b, 0, 0, 3), b1 = narrow(b, 0, 3, 3);
    auto y = concat<double>({conv2d(x0, w0, b0, 1, 1), conv2d(x1, w1, b1, 1, 1)}, 1);

    REQUIRE_EQ(grouped.shape(), y.shape());
    for (int64_t i = 0; i < y.numel(); ++i) CHECK_EQ(grouped.ptr()[i], y.ptr()[i]);  // bitwise
}

TEST_CASE("conv2d matches nested-loop oracle on random instances") {
    Rng rng(17);
    for (int it = 0; it < 10; ++it) {
        const int n = rng.uniform_int(1, 2), groups = 1 << rng.uniform_int(0, 1);
        const int cin = groups * rng.uniform_int(1, 3);
        const int cout = groups * rng.uniform_int(1, 3);
        const int k = 2 * rng.uniform_int(0, 2) + 1;
        const int h = rng.uniform_int(k, k + 4), w = rng.uniform_int(k, k + 4);
        const int stride = rng.uniform_int(1, 2), pad = rng.uniform_int(0, 2);
        auto x = reftest::rand_tensor<float>(rng, {n, cin, h, w});
        auto wt = reftest::rand_tensor<float>(rng, {cout, cin / groups, k, k});
        auto b = reftest::rand_tensor<float>(rng, {cout});
        auto y = conv2d(x, wt, b, stride, pad, groups);
        auto ref = reftest::conv2d_oracle<float>(
            {x.ptr(), x.ptr() + x.numel()}, n, cin, h, w, {wt.ptr(), wt.ptr() + wt.numel()},
            cout, k, k, {b.ptr(), b.ptr() + b.numel()}, stride, pad, groups);
        CHECK_LE(reftest::max_abs_diff(y, ref), 1e-6);
    }
}

TEST_CASE("conv2d: linearity in input with zero bias") {
    Rng rng(23);
    auto x = reftest::rand_tensor<float>(rng, {1, 2, 5, 5});
    auto y = reftest::rand_tensor<float>(rng, {1, 2, 5, 5});
    auto w = reftest::rand_tensor<float>(rng, {3, 2, 3, 3});
    TensorF b({3});
    auto lhs = conv2d(add(scale(x, 2.0f), scale(y, -0.5f)), w, b, 1, 1);
    auto rhs = add(scale(conv2d(x, w, b, 1, 1), 2.0f), scale(conv2d(y, w, b, 1, 1), -0.5f));
    for (int64_t i = 0; i < lhs.numel(); ++i)
        CHECK_EQ(lhs.ptr()[i], doctest::Approx(rhs.ptr()[i]).epsilon(1e-5));
}

TEST_CASE("conv2d rejects mismatched shapes with a diagnostic") {
    TensorF x({1, 3, 4, 4});
    TensorF w({2, 2, 3, 3});  // expects 2 in-channels, input has 3
    TensorF b({2});
    CHECK_THROWS_WITH_AS(conv2d(x, w, b, 1, 1),
                         doctest::Contains("channels per group"), ShapeError);
    TensorF w2({2, 3, 3, 3});
    TensorF b2({3});
    CHECK_THROWS_WITH_AS(conv2d(x, w2, b2, 1, 1), doctest::Contains("bias"), ShapeError);
    CHECK_THROWS_AS(conv2d(x, w2, b, 1, 0, 2), ShapeError);  // 3 channels, 2 groups
}

TEST_CASE("conv2d gradients match finite differences (stride 2, pad 1, groups 2)") {
    Rng rng(31);
    auto x = reftest::rand_tensor<double>(rng, {2, 4, 5, 5});
    auto w = reftest::rand_tensor<double>(rng, {4, 2, 3, 3});
    auto b = reftest::rand_tensor<double>(rng, {4});
    x.set_requires_grad(true);
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    auto tgt = reftest::rand_tensor<double>(rng, {2, 4, 3, 3});
    auto report = grad_check(
        [&](const std::vector<TensorD>& in) {
            return l1(conv2d(in[0], in[1], in[2], 2, 1, 2), tgt);
        },
        {x, w, b});
    CAPTURE(report.worst);
    CHECK_LT(report.max_rel_err, 1e-5);
}

// ---- conv1d ------------------------------------------------------------

TEST_CASE("conv1d: ones kernel over ones signal, pad 1") {
    TensorF x = TensorF::full({1, 1, 3}, 1.0f);
    TensorF w = TensorF::full({1, 1, 3}, 1.0f);
    TensorF b({1});
    auto y = conv1d(x, w, b, 1, 1);
    REQUIRE_EQ(y.shape(), Shape{1, 1, 3});
    CHECK_EQ(y.ptr()[0], doctest::Approx(2));
    CHECK_EQ(y.ptr()[1], doctest::Approx(3));
    CHECK_EQ(y.ptr()[2], doctest::Approx(2));
}

TEST_CASE("conv1d: 1-tap unit kernel is identity") {
    Rng rng(37);
    auto x = reftest::rand_tensor<float>(rng, {2, 1, 7});
    TensorF w = TensorF::full({1, 1, 1}, 1.0f);
    TensorF b({1});
    auto y = conv1d(x, w, b, 1, 0);
    for (int64_t i = 0; i < x.numel(); ++i) CHECK_EQ(y.ptr()[i], x.ptr()[i]);
}

TEST_CASE("conv1d: scaling input scales output with zero bias") {
    Rng rng(41);
    auto x = reftest::rand_tensor<float>(rng, {1, 3, 9});
    auto w = reftest::rand_tensor<float>(rng, {2, 3, 3});
    TensorF b({2});
    auto lhs = conv1d(scale(x, 2.0f), w, b, 1, 1);
    auto rhs = scale(conv1d(x, w, b, 1, 1), 2.0f);
    for (int64_t i = 0; i < lhs.numel(); ++i)
        CHECK_EQ(lhs.ptr()[i], doctest::Approx(rhs.ptr()[i]).epsilon(1e-5));
}

TEST_CASE("conv1d matches nested-loop oracle on random instances") {
    Rng rng(43);
    for (int it = 0; it < 10; ++it) {
        const int n = rng.uniform_int(1, 2), cin = rng.uniform_int(1, 4);
        const int cout = rng.uniform_int(1, 4), k = rng.uniform_int(1, 4);
        const int t = rng.uniform_int(k, k + 6);
        const int stride = rng.uniform_int(1, 2), pad = rng.uniform_int(0, 2);
        auto x = reftest::rand_tensor<float>(rng, {n, cin, t});
        auto wt = reftest::rand_tensor<float>(rng, {cout, cin, k});
        auto b = reftest::rand_tensor<float>(rng, {cout});
        auto y = conv1d(x, wt, b, stride, pad);
        auto ref = reftest::conv1d_oracle<float>(
            {x.ptr(), x.ptr() + x.numel()}, n, cin, t, {wt.ptr(), wt.ptr() + wt.numel()}, cout,
            k, {b.ptr(), b.ptr() + b.numel()}, stride, pad);
        CHECK_LE(reftest::max_abs_diff(y, ref), 1e-6);
    }
}

TEST_CASE("conv1d gradients match finite differences") {
    Rng rng(47);
    auto x = reftest::rand_tensor<double>(rng, {2, 3, 6});
    auto w = reftest::rand_tensor<double>(rng, {2, 3, 3});
    auto b = reftest::rand_tensor<double>(rng, {2});
    x.set_requires_grad(true);
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    auto tgt = reftest::rand_tensor<double>(rng, {2, 2, 3});
    auto report = grad_check(
        [&](const std::vector<TensorD>& in) {
            return l1(conv1d(in[0], in[1], in[2], 2, 1), tgt);
        },
        {x, w, b});
    CAPTURE(report.worst);
    CHECK_LT(report.max_rel_err, 1e-5);
}

// ---- linear --------------------------------------------------------------

TEST_CASE("linear: identity weight passes input through") {
    TensorF x({2, 2}, {1, 2, 3, 4});
    TensorF w({2, 2}, {1, 0, 0, 1});
    TensorF b({2});
    auto y = linear(x, w, b);
    for (int i = 0; i < 4; ++i) CHECK_EQ(y.ptr()[i], x.ptr()[i]);
}

TEST_CASE("linear: hand-computed 2x2 case") {
    TensorF x({1, 2}, {1, 2});
    TensorF w({2, 2}, {1, 1, 0, 1});
    TensorF b({2}, {1, 0});
    auto y = linear(x, w, b);
    CHECK_EQ(y.ptr()[0], doctest::Approx(4));  // 1*1 + 2*1 + 1
    CHECK_EQ(y.ptr()[1], doctest::Approx(2));  // 1*0 + 2*1 + 0
}

TEST_CASE("linear: zero input broadcasts the bias") {
    TensorF x({3, 4});
    Rng rng(53);
    auto w = reftest::rand_tensor<float>(rng, {2, 4});
    auto b = reftest::rand_tensor<float>(rng, {2});
    auto y = linear(x, w, b);
    for (int n = 0; n < 3; ++n)
        for (int o = 0; o < 2; ++o) CHECK_EQ(y.ptr()[n * 2 + o], b.ptr()[o]);
}

// ---- activations -----------------------------------------------------------

TEST_CASE("activation values") {
    TensorF x({4}, {-1.0f, 0.0f, 0.5f, -2.0f});
    auto lr = leaky_relu(x, 0.2f);
    CHECK_EQ(lr.ptr()[0], doctest::Approx(-0.2f));
    CHECK_EQ(lr.ptr()[1], 0.0f);
    CHECK_EQ(lr.ptr()[2], doctest::Approx(0.5f));
    CHECK_EQ(lr.ptr()[3], doctest::Approx(-0.4f));
    auto r = relu(x);
    CHECK_EQ(r.ptr()[0], 0.0f);
    CHECK_EQ(r.ptr()[2], doctest::Approx(0.5f));
    CHECK_EQ(tanh_op(TensorF::scalar(0.0f)).item(), 0.0f);
    CHECK_EQ(tanh_op(TensorF::scalar(1.0f)).item(), doctest::Approx(std::tanh(1.0f)));
}

TEST_CASE("activation gradients match finite differences away from zero") {
    // all coordinates well away from the relu kink
    TensorD x({6}, {-2.0, -0.7, -0.1, 0.1, 0.9, 1.7});
    x.set_requires_grad(true);
    for (auto fn : {+[](const TensorD& t) { return relu(t); },
                    +[](const TensorD& t) { return leaky_relu(t, 0.2); },
                    +[](const TensorD& t) { return tanh_op(t); }}) {
        auto report = grad_check(
            [&](const std::vector<TensorD>& in) { return mean(fn(in[0])); }, {x});
        CAPTURE(report.worst);
        CHECK_LT(report.max_rel_err, 1e-5);
    }
}

// ---- instance_norm ---------------------------------------------------------

TEST_CASE("instance_norm: constant channel collapses to shift") {
    TensorF x = TensorF::full({2, 2, 3, 3}, 7.0f);
    TensorF scale_t({2}, {3.0f, 4.0f});
    TensorF shift_t({2}, {-1.0f, 2.0f});
    auto y = instance_norm(x, scale_t, shift_t);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < 9; ++i)
                CHECK_EQ(y.ptr()[(n * 2 + c) * 9 + i], doctest::Approx(shift_t.ptr()[c]));
}

TEST_CASE("instance_norm: output statistics match scale and shift") {
    Rng rng(59);
    auto x = reftest::rand_tensor<double>(rng, {2, 3, 8, 8}, -2.0, 2.0);
    TensorD scale_t({3}, {0.5, 1.5, 2.0});
    TensorD shift_t({3}, {-0.3, 0.0, 0.7});
    auto y = instance_norm(x, scale_t, shift_t, 1e-9);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c) {
            const double* p = y.ptr() + (n * 3 + c) * 64;
            double m = 0, v = 0;
            for (int i = 0; i < 64; ++i) m += p[i];
            m /= 64;
            for (int i = 0; i < 64; ++i) v += (p[i] - m) * (p[i] - m);
            v /= 64;
            CHECK_EQ(m, doctest::Approx(shift_t.ptr()[c]).epsilon(1e-4));
            CHECK_EQ(std::sqrt(v), doctest::Approx(scale_t.ptr()[c]).epsilon(1e-4));
        }
}

TEST_CASE("instance_norm gradients match finite differences") {
    Rng rng(61);
    auto x = reftest::rand_tensor<double>(rng, {2, 2, 4, 4});
    auto sc = reftest::rand_tensor<double>(rng, {2}, 0.5, 1.5);
    auto sh = reftest::rand_tensor<double>(rng, {2});
    x.set_requires_grad(true);
    sc.set_requires_grad(true);
    sh.set_requires_grad(true);
    auto tgt = reftest::rand_tensor<double>(rng, {2, 2, 4, 4});
    auto report = grad_check(
        [&](const std::vector<TensorD>& in) {
            return l1(instance_norm(in[0], in[1], in[2], 1e-5), tgt);
        },
        {x, sc, sh});
    CAPTURE(report.worst);
    CHECK_LT(report.max_rel_err, 1e-5);
}

// ---- structural ops ----------------------------------------------------

TEST_CASE("upsample_nearest2x block-repeats") {
    TensorF x({1, 1, 2, 2}, {1, 2, 3, 4});
    auto y = upsample_nearest2x(x);
    REQUIRE_EQ(y.shape(), Shape{1, 1, 4, 4});
    const float expect[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    for (int i = 0; i < 16; ++i) CHECK_EQ(y.ptr()[i], expect[i]);
}

TEST_CASE("l1 values") {
    TensorF a({2}, {1, 2});
    TensorF b({2}, {0, 0});
    CHECK_EQ(l1(a, b).item(), doctest::Approx(1.5f));
    CHECK_EQ(l1(a, a).item(), 0.0f);
}

TEST_CASE("concat preserves order along the axis") {
    TensorF a({1, 2, 1, 2}, {1, 2, 3, 4});
    TensorF b({1, 1, 1, 2}, {5, 6});
    auto y = concat<float>({a, b}, 1);
    REQUIRE_EQ(y.shape(), Shape{1, 3, 1, 2});
    const float expect[6] = {1, 2, 3, 4, 5, 6};
    for (int i = 0; i < 6; ++i) CHECK_EQ(y.ptr()[i], expect[i]);
    CHECK_THROWS_AS(concat<float>({a, TensorF({1, 1, 2, 2})}, 1), ShapeError);
}

TEST_CASE("narrow takes a contiguous slice and routes gradients") {
    TensorD x({2, 4}, {0, 1, 2, 3, 4, 5, 6, 7});
    x.set_requires_grad(true);
    auto y = narrow(x, 1, 1, 2);
    REQUIRE_EQ(y.shape(), Shape{2, 2});
    CHECK_EQ(y.ptr()[0], 1);
    CHECK_EQ(y.ptr()[3], 6);
    backward(mean(y));
    const double expect[8] = {0, 0.25, 0.25, 0, 0, 0.25, 0.25, 0};
    for (int i = 0; i < 8; ++i) CHECK_EQ(x.grad()[i], doctest::Approx(expect[i]));
    CHECK_THROWS_AS(narrow(x, 1, 3, 2), ShapeError);
}

TEST_CASE("reshape is a differentiable view copy") {
    TensorD x({2, 3}, {1, 2, 3, 4, 5, 6});
    x.set_requires_grad(true);
    auto y = reshape(x, {3, 2});
    CHECK_EQ(y.ptr()[5], 6);
    backward(mean(y));
    for (double g : x.grad()) CHECK_EQ(g, doctest::Approx(1.0 / 6.0));
    CHECK_THROWS_AS(reshape(x, {4, 2}), ShapeError);
}

// ---- every-op finite-difference sweep on random shapes ---------------------

TEST_CASE("gradient sweep: all differentiable ops on random shapes") {
    Rng rng(67);
    for (int it = 0; it < 5; ++it) {
        const int n = rng.uniform_int(1, 2), c = rng.uniform_int(1, 3);
        const int h = rng.uniform_int(3, 5), w = rng.uniform_int(3, 5);
        auto x = reftest::rand_tensor<double>(rng, {n, c, h, w});
        auto y = reftest::rand_tensor<double>(rng, {n, c, h, w});
        x.set_requires_grad(true);
        y.set_requires_grad(true);

        auto check = [&](const char* name, auto fn) {
            auto report = grad_check(
                [&](const std::vector<TensorD>& in) { return fn(in[0], in[1]); }, {x, y});
            CAPTURE(name);
            CAPTURE(report.worst);
            CHECK_LT(report.max_rel_err, 1e-5);
        };
        check("add", [](const TensorD& a, const TensorD& b) { return mean(add(a, b)); });
        check("sub", [](const TensorD& a, const TensorD& b) { return mean(sub(a, b)); });
        check("scale", [](const TensorD& a, const TensorD&) { return mean(scale(a, -1.7)); });
        check("tanh", [](const TensorD& a, const TensorD&) { return mean(tanh_op(a)); });
        check("upsample", [](const TensorD& a, const TensorD&) {
            return mean(upsample_nearest2x(a));
        });
        check("concat", [](const TensorD& a, const TensorD& b) {
            return mean(concat<double>({a, b}, 1));
        });
        check("l1", [](const TensorD& a, const TensorD& b) { return l1(a, b); });
        check("reshape+narrow", [](const TensorD& a, const TensorD&) {
            auto flat = reshape(a, {static_cast<int>(a.numel())});
            return mean(narrow(flat, 0, 1, static_cast<int>(a.numel()) - 1));
        });
    }
}
