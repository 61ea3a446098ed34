#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pyrflow/gradcheck.hpp"
#include "pyrflow/ops.hpp"
#include "pyrflow/rng.hpp"
#include "pyrflow/tensor.hpp"

using namespace pyrflow;

namespace {

std::vector<double> random_values(long long n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// independent oracle: plain triple loop
std::vector<double> matmul_oracle(const std::vector<double>& a, const std::vector<double>& b,
                                  int m, int k, int n) {
    std::vector<double> c((size_t)m * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            for (int p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
    return c;
}

// independent oracle: direct sliding-window cross-correlation
std::vector<double> conv_oracle(const std::vector<double>& x, const std::vector<double>& w,
                                const std::vector<double>* bias, int n, int ic, int ih, int iw,
                                int oc, int k, int stride, int pad) {
    const int oh = (ih + 2 * pad - k) / stride + 1;
    const int ow = (iw + 2 * pad - k) / stride + 1;
    std::vector<double> y((size_t)n * oc * oh * ow, 0.0);
    for (int b = 0; b < n; ++b)
        for (int o = 0; o < oc; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double s = bias ? (*bias)[o] : 0.0;
                    for (int c = 0; c < ic; ++c)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * stride - pad + ky;
                                const int ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= ih || ix < 0 || ix >= iw) continue;
                                s += x[((b * ic + c) * ih + iy) * iw + ix] *
                                     w[((o * ic + c) * k + ky) * k + kx];
                            }
                    y[((b * oc + o) * oh + oy) * ow + ox] = s;
                }
    return y;
}

}  // namespace

TEST_CASE("elementwise basics") {
    Tensor r = ops::relu(Tensor::scalar(-3.0));
    CHECK(r.item() == 0.0);

    Tensor e = ops::exp(Tensor::zeros({2, 2}));
    for (double v : e.values()) CHECK(v == 1.0);

    Tensor a = Tensor::constant({2}, {1, 2});
    Tensor b = Tensor::constant({2}, {3, 4});
    Tensor s = ops::add(a, b);
    CHECK(s.values() == std::vector<double>{4, 6});

    CHECK_THROWS_WITH_AS(ops::add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})),
                         doctest::Contains("[2x3]"), std::invalid_argument);
    CHECK(ops::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
}

TEST_CASE("add backward matches the finite-difference oracle") {
    // loss = sum(a + b): closed form gradient is all-ones on each input
    Tape tape;
    Tensor a = tape.leaf({2}, {1, 2});
    Tensor b = tape.leaf({2}, {3, 4});
    tape.backward(ops::sum(ops::add(a, b)));
    CHECK(tape.grad(a) == std::vector<double>{1, 1});
    CHECK(tape.grad(b) == std::vector<double>{1, 1});

    auto fn = [](Tape&, const std::vector<Tensor>& in) {
        return ops::sum(ops::add(in[0], in[1]));
    };
    CHECK(grad_check(fn, {{2}, {2}}, {{1, 2}, {3, 4}}) < 1e-9);
}

TEST_CASE("scalar broadcast in binary ops") {
    Tensor t = Tensor::constant({3}, {1, 2, 3});
    Tensor c = Tensor::scalar(10.0);
    CHECK(ops::add(t, c).values() == std::vector<double>{11, 12, 13});
    CHECK(ops::sub(c, t).values() == std::vector<double>{9, 8, 7});
    CHECK(ops::mul(c, t).values() == std::vector<double>{10, 20, 30});

    auto fn = [](Tape&, const std::vector<Tensor>& in) {
        return ops::sum(ops::mul(in[0], ops::sub(in[1], in[0])));
    };
    Rng rng(7);
    CHECK(grad_check(fn, {{4}, {1}}, {random_values(4, rng), {0.7}}) < 1e-6);
}

TEST_CASE("matmul laws and oracle") {
    std::vector<double> eye(16, 0.0);
    for (int i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
    Rng rng(3);
    std::vector<double> bv = random_values(4 * 3, rng);
    Tensor b = Tensor::constant({4, 3}, bv);
    CHECK(ops::matmul(Tensor::constant({4, 4}, eye), b).values() == bv);
    Tensor zp = ops::matmul(Tensor::zeros({4, 4}), b);
    for (double v : zp.values()) CHECK(v == 0.0);

    Tensor p = ops::matmul(Tensor::constant({2, 2}, {1, 2, 3, 4}),
                           Tensor::constant({2, 1}, {5, 6}));
    CHECK(p.values() == std::vector<double>{17, 39});
    CHECK(p.values() == matmul_oracle({1, 2, 3, 4}, {5, 6}, 2, 2, 1));

    CHECK_THROWS_AS(ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                    std::invalid_argument);

    // random instance against the oracle and the gradient oracle
    std::vector<double> av = random_values(3 * 5, rng);
    std::vector<double> bv2 = random_values(5 * 2, rng);
    Tensor prod = ops::matmul(Tensor::constant({3, 5}, av), Tensor::constant({5, 2}, bv2));
    auto want = matmul_oracle(av, bv2, 3, 5, 2);
    for (size_t i = 0; i < want.size(); ++i) CHECK(prod.values()[i] == doctest::Approx(want[i]).epsilon(1e-12));

    auto fn = [](Tape&, const std::vector<Tensor>& in) {
        return ops::sum(ops::mul(ops::matmul(in[0], in[1]), ops::matmul(in[0], in[1])));
    };
    CHECK(grad_check(fn, {{3, 5}, {5, 2}}, {av, bv2}) < 1e-6);
}

TEST_CASE("conv2d identities") {
    // 1x1 kernel with weight 1, bias 0 is the identity per channel
    Rng rng(11);
    std::vector<double> xv = random_values(1 * 2 * 3 * 3, rng);
    Tensor x = Tensor::constant({1, 2, 3, 3}, xv);
    std::vector<double> wv = {1, 0, 0, 1};  // out_c=2, in_c=2, 1x1: w[o][i] = delta
    Tensor w = Tensor::constant({2, 2, 1, 1}, wv);
    Tensor y = ops::conv2d(x, w, nullptr, 1, 0);
    CHECK(y.values() == xv);

    // 3x3 all-ones kernel on an all-ones 3x3 input, stride 1 pad 1
    Tensor ones_x = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor ones_w = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor z = ops::conv2d(ones_x, ones_w, nullptr, 1, 1);
    // frozen from the sliding-window oracle: corners see a 2x2 window, the
    // center sees the full 3x3
    CHECK(z.values() == std::vector<double>{4, 6, 4, 6, 9, 6, 4, 6, 4});
    CHECK(z.values() == conv_oracle(ones_x.values(), ones_w.values(), nullptr, 1, 1, 3, 3, 1,
                                    3, 1, 1));

    // zero kernel, bias b -> constant b
    Tensor zw = Tensor::zeros({3, 2, 3, 3});
    Tensor bias = Tensor::constant({3}, {0.5, -1.0, 2.0});
    Tensor c = ops::conv2d(x, zw, &bias, 1, 1);
    for (int o = 0; o < 3; ++o)
        for (int i = 0; i < 9; ++i) CHECK(c.values()[o * 9 + i] == bias.values()[o]);

    // channel mismatch is rejected
    CHECK_THROWS_AS(ops::conv2d(x, Tensor::zeros({2, 3, 1, 1}), nullptr, 1, 0),
                    std::invalid_argument);
}

TEST_CASE("conv2d random instances match the sliding-window oracle") {
    Rng rng(23);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 1 + (int)rng.uniform_int(0, 1);
        const int ic = 1 + (int)rng.uniform_int(0, 2);
        const int oc = 1 + (int)rng.uniform_int(0, 2);
        const int k = rng.uniform() < 0.5 ? 1 : 3;
        const int stride = rng.uniform() < 0.5 ? 1 : 2;
        const int pad = k == 3 ? 1 : 0;
        const int ih = 4 + 2 * (int)rng.uniform_int(0, 2);
        auto xv = random_values((long long)n * ic * ih * ih, rng);
        auto wv = random_values((long long)oc * ic * k * k, rng);
        auto bv = random_values(oc, rng);
        Tensor x = Tensor::constant({n, ic, ih, ih}, xv);
        Tensor w = Tensor::constant({oc, ic, k, k}, wv);
        Tensor bias = Tensor::constant({oc}, bv);
        Tensor y = ops::conv2d(x, w, &bias, stride, pad);
        auto want = conv_oracle(xv, wv, &bv, n, ic, ih, ih, oc, k, stride, pad);
        REQUIRE(y.values().size() == want.size());
        for (size_t i = 0; i < want.size(); ++i)
            CHECK(y.values()[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d composite gradient vs central differences") {
    Rng rng(5);
    auto xv = random_values(1 * 2 * 4 * 4, rng);
    auto wv = random_values(3 * 2 * 3 * 3, rng, -0.5, 0.5);
    auto bv = random_values(3, rng);
    auto fn = [](Tape&, const std::vector<Tensor>& in) {
        Tensor y = ops::conv2d(in[0], in[1], &in[2], 1, 1);
        return ops::sum(ops::mul(ops::relu(y), ops::sigmoid(y)));
    };
    CHECK(grad_check(fn, {{1, 2, 4, 4}, {3, 2, 3, 3}, {3}}, {xv, wv, bv}) < 1e-4);
}

TEST_CASE("structural ops") {
    Tensor x = Tensor::constant({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor up = ops::upsample_nearest2x(x);
    CHECK(up.shape() == Shape{1, 1, 4, 4});
    CHECK(up.values() ==
          std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});

    CHECK(ops::adaptive_avg_pool(x, 1, 1).item() == 2.5);

    // split into quarters then concat restores the input bit-exactly
    Rng rng(9);
    auto v = random_values(1 * 8 * 2 * 2, rng);
    Tensor big = Tensor::constant({1, 8, 2, 2}, v);
    auto parts = ops::split_channels(big, 4);
    REQUIRE(parts.size() == 4);
    for (const Tensor& p : parts) CHECK(p.shape() == Shape{1, 2, 2, 2});
    CHECK(ops::concat_channels(parts).values() == v);

    CHECK_THROWS_AS(ops::split_channels(big, 3), std::invalid_argument);
    CHECK_THROWS_AS(ops::reshape(big, {3, 3}), std::invalid_argument);
    CHECK(ops::reshape(big, {8, 4}).values() == v);
}

TEST_CASE("split/concat round-trips gradients exactly") {
    Rng rng(13);
    auto v = random_values(2 * 4 * 2 * 2, rng);
    auto direct = [](Tape&, const std::vector<Tensor>& in) {
        return ops::sum(ops::mul(in[0], in[0]));
    };
    auto routed = [](Tape&, const std::vector<Tensor>& in) {
        Tensor back = ops::concat_channels(ops::split_channels(in[0], 4));
        return ops::sum(ops::mul(back, back));
    };
    Tape t1, t2;
    Tensor a1 = t1.leaf({2, 4, 2, 2}, v);
    t1.backward(direct(t1, {a1}));
    Tape tb;
    Tensor a2 = tb.leaf({2, 4, 2, 2}, v);
    tb.backward(routed(tb, {a2}));
    CHECK(t1.grad(a1) == tb.grad(a2));
}

TEST_CASE("global average pool") {
    Tensor c = Tensor::full({1, 3, 4, 4}, 2.25);
    Tensor g = ops::global_avg_pool(c);
    CHECK(g.shape() == Shape{1, 3, 1, 1});
    for (double v : g.values()) CHECK(v == 2.25);

    Tensor m = Tensor::constant({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(ops::global_avg_pool(m).item() == 2.5);

    // backward distributes g/(H*W) to every cell
    Tape tape;
    Tensor x = tape.leaf({1, 1, 2, 2}, {1, 2, 3, 4});
    tape.backward(ops::sum(ops::global_avg_pool(x)));
    CHECK(tape.grad(x) == std::vector<double>{0.25, 0.25, 0.25, 0.25});
}

TEST_CASE("group_norm definition") {
    Tensor gamma1 = Tensor::full({4}, 1.0);
    Tensor beta0 = Tensor::zeros({4});
    Tensor cst = Tensor::full({1, 4, 2, 2}, 7.0);
    Tensor y = ops::group_norm(cst, 2, gamma1, beta0);
    for (double v : y.values()) CHECK(v == 0.0);

    Tensor beta = Tensor::full({4}, -1.5);
    Tensor y2 = ops::group_norm(cst, 2, Tensor::zeros({4}), beta);
    for (double v : y2.values()) CHECK(v == -1.5);

    // random instance against a scalar re-implementation
    Rng rng(17);
    auto xv = random_values(1 * 4 * 2 * 2, rng);
    auto gv = random_values(4, rng);
    auto bv = random_values(4, rng);
    const double eps = 1e-5;
    Tensor out = ops::group_norm(Tensor::constant({1, 4, 2, 2}, xv), 2,
                                 Tensor::constant({4}, gv), Tensor::constant({4}, bv), eps);
    for (int g = 0; g < 2; ++g) {
        double mu = 0, var = 0;
        for (int i = 0; i < 8; ++i) mu += xv[g * 8 + i];
        mu /= 8;
        for (int i = 0; i < 8; ++i) var += (xv[g * 8 + i] - mu) * (xv[g * 8 + i] - mu);
        var /= 8;
        for (int i = 0; i < 8; ++i) {
            const int c = g * 2 + i / 4;
            const double want = (xv[g * 8 + i] - mu) / std::sqrt(var + eps) * gv[c] + bv[c];
            CHECK(std::abs(out.values()[g * 8 + i] - want) < 1e-12);
        }
    }

    CHECK_THROWS_AS(ops::group_norm(cst, 3, gamma1, beta0), std::invalid_argument);
}

TEST_CASE("stop_gradient") {
    Rng rng(21);
    auto v = random_values(6, rng);
    Tape tape;
    Tensor x = tape.leaf({6}, v);
    Tensor s = ops::stop_gradient(x);
    CHECK(s.values() == v);  // bit-exact forward

    tape.backward(ops::sum(s));
    CHECK(tape.grad(x) == std::vector<double>(6, 0.0));

    // y = x + stop_gradient(x): only the live path carries gradient, so the
    // gradient is all-ones, not 2
    Tape t2;
    Tensor x2 = t2.leaf({6}, v);
    t2.backward(ops::sum(ops::add(x2, ops::stop_gradient(x2))));
    CHECK(t2.grad(x2) == std::vector<double>(6, 1.0));
    // finite differences on the surviving path (stopped branch frozen) agree
    Tensor frozen = Tensor::constant({6}, v);
    auto surviving = [frozen](Tape&, const std::vector<Tensor>& in) {
        return ops::sum(ops::add(in[0], frozen));
    };
    CHECK(grad_check(surviving, {{6}}, {v}) < 1e-9);
}

TEST_CASE("channel_mix identity, permutation, and triple-loop oracle") {
    Rng rng(31);
    auto xv = random_values(1 * 4 * 2 * 2, rng);
    Tensor x = Tensor::constant({1, 4, 2, 2}, xv);
    std::vector<double> eye(16, 0.0);
    for (int i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
    CHECK(ops::channel_mix(x, Tensor::constant({4, 4}, eye)).values() == xv);

    std::vector<double> perm(16, 0.0);  // swap channels 0 and 1
    perm[0 * 4 + 1] = 1.0;
    perm[1 * 4 + 0] = 1.0;
    perm[2 * 4 + 2] = 1.0;
    perm[3 * 4 + 3] = 1.0;
    Tensor swapped = ops::channel_mix(x, Tensor::constant({4, 4}, perm));
    for (int i = 0; i < 4; ++i) {
        CHECK(swapped.values()[0 * 4 + i] == xv[1 * 4 + i]);
        CHECK(swapped.values()[1 * 4 + i] == xv[0 * 4 + i]);
        CHECK(swapped.values()[2 * 4 + i] == xv[2 * 4 + i]);
    }

    auto mv = random_values(16, rng);
    Tensor got = ops::channel_mix(x, Tensor::constant({4, 4}, mv));
    for (int co = 0; co < 4; ++co)
        for (int p = 0; p < 4; ++p) {
            double s = 0.0;
            for (int ci = 0; ci < 4; ++ci) s += mv[co * 4 + ci] * xv[ci * 4 + p];
            CHECK(std::abs(got.values()[co * 4 + p] - s) < 1e-12);
        }

    auto fn = [](Tape&, const std::vector<Tensor>& in) {
        Tensor y = ops::channel_mix(in[0], in[1]);
        return ops::sum(ops::mul(y, y));
    };
    CHECK(grad_check(fn, {{2, 4, 2, 2}, {4, 4}},
                     {random_values(2 * 4 * 2 * 2, rng), random_values(16, rng)}) < 1e-4);
}

TEST_CASE("scale_channels and mean_over_batch gradients") {
    Rng rng(37);
    auto fn = [](Tape&, const std::vector<Tensor>& in) {
        Tensor y = ops::scale_channels(in[0], ops::sigmoid(in[1]));
        return ops::sum(ops::mul(y, y));
    };
    CHECK(grad_check(fn, {{2, 3, 2, 2}, {2, 1, 2, 2}},
                     {random_values(2 * 3 * 2 * 2, rng), random_values(2 * 1 * 2 * 2, rng)}) <
          1e-4);

    auto fn2 = [](Tape&, const std::vector<Tensor>& in) {
        Tensor v = ops::mean_over_batch(ops::global_avg_pool(in[0]));
        return ops::sum(ops::mul(v, v));
    };
    CHECK(grad_check(fn2, {{3, 4, 2, 2}}, {random_values(3 * 4 * 2 * 2, rng)}) < 1e-4);
}

TEST_CASE("grad_check oracle behaviours") {
    // f(x) = x^2 at x=3: analytic 6 vs central difference 6
    auto sq = [](Tape&, const std::vector<Tensor>& in) {
        return ops::mul(in[0], in[0]);
    };
    CHECK(grad_check(sq, {{1}}, {{3.0}}) < 1e-6);

    // constant function: both gradients are zero, error 0
    auto cst = [](Tape&, const std::vector<Tensor>& in) {
        return ops::sum(ops::mul(in[0], Tensor::zeros({4})));
    };
    CHECK(grad_check(cst, {{4}}, {{1, 2, 3, 4}}) == 0.0);

    // random conv2d + group_norm stack stays under 1e-4
    Rng rng(41);
    auto fn = [](Tape&, const std::vector<Tensor>& in) {
        Tensor y = ops::conv2d(in[0], in[1], nullptr, 1, 1);
        Tensor n = ops::group_norm(y, 2, in[2], in[3]);
        return ops::sum(ops::mul(n, ops::sigmoid(n)));
    };
    CHECK(grad_check(fn, {{1, 3, 4, 4}, {4, 3, 3, 3}, {4}, {4}},
                     {random_values(48, rng), random_values(108, rng, -0.4, 0.4),
                      random_values(4, rng, 0.5, 1.5), random_values(4, rng)}) < 1e-4);

    CHECK_THROWS_AS(grad_check(sq, {{1}}, {{3.0}}, {.step = 0.0}), std::invalid_argument);
}

TEST_CASE("every elementwise op matches finite differences on random instances") {
    Rng rng(53);
    using Fn = Tensor (*)(const Tensor&);
    struct Case {
        const char* name;
        Fn fn;
    };
    const Case cases[] = {
        {"exp", ops::exp}, {"neg_exp", ops::neg_exp}, {"relu", ops::relu},
        {"sigmoid", ops::sigmoid},
    };
    for (const auto& c : cases) {
        for (int t = 0; t < 5; ++t) {
            auto v = random_values(12, rng, -2.0, 2.0);
            // keep relu away from its kink
            for (auto& x : v)
                if (std::abs(x) < 1e-3) x = 0.5;
            Fn f = c.fn;
            auto fn = [f](Tape&, const std::vector<Tensor>& in) {
                return ops::sum(ops::mul(f(in[0]), in[0]));
            };
            INFO(c.name);
            CHECK(grad_check(fn, {{3, 4}}, {v}) < 1e-4);
        }
    }
}
