// The OpenMP kernels must be bit-identical to the serial reference: every
// parallel loop owns its output elements and keeps the reference accumulation
// order. Sizes here exceed the parallel thresholds so the OpenMP path engages.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "pyrflow/kernels.hpp"
#include "pyrflow/rng.hpp"

using namespace pyrflow;
namespace k = pyrflow::kernels;

namespace {
std::vector<double> rand_vec(long long n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}
}  // namespace

TEST_CASE("elementwise kernels: par == ref bitwise") {
    Rng rng(1);
    const long long n = 40000;  // above kParN
    auto a = rand_vec(n, rng);
    auto b = rand_vec(n, rng);
    for (int op : {k::kAdd, k::kSub, k::kMul}) {
        std::vector<double> r(n), p(n);
        k::ref::ew_binary(op, a.data(), b.data(), r.data(), n);
        k::par::ew_binary(op, a.data(), b.data(), p.data(), n);
        CHECK(r == p);
    }
    for (int op : {k::kExp, k::kNegExp, k::kRelu, k::kSigmoid, k::kNeg, k::kSquare}) {
        std::vector<double> r(n), p(n);
        k::ref::ew_unary(op, a.data(), r.data(), n);
        k::par::ew_unary(op, a.data(), p.data(), n);
        CHECK(r == p);
    }
    std::vector<double> r = b, p = b;
    k::ref::axpy(0.37, a.data(), r.data(), n);
    k::par::axpy(0.37, a.data(), p.data(), n);
    CHECK(r == p);
    CHECK(k::ref::reduce_sum(a.data(), n) == k::par::reduce_sum(a.data(), n));
}

TEST_CASE("matmul kernels: par == ref bitwise") {
    Rng rng(2);
    const int m = 48, kk = 64, n = 56;
    auto a = rand_vec((long long)m * kk, rng);
    auto b = rand_vec((long long)kk * n, rng);
    std::vector<double> r((long long)m * n), p((long long)m * n);
    k::ref::matmul(a.data(), b.data(), r.data(), m, kk, n);
    k::par::matmul(a.data(), b.data(), p.data(), m, kk, n);
    CHECK(r == p);

    auto g = rand_vec((long long)m * n, rng);
    std::vector<double> r2((long long)kk * n), p2((long long)kk * n);
    k::ref::matmul_at_b(a.data(), g.data(), r2.data(), m, kk, n);
    k::par::matmul_at_b(a.data(), g.data(), p2.data(), m, kk, n);
    CHECK(r2 == p2);

    std::vector<double> r3((long long)m * kk), p3((long long)m * kk);
    k::ref::matmul_a_bt(g.data(), b.data(), r3.data(), m, kk, n);
    k::par::matmul_a_bt(g.data(), b.data(), p3.data(), m, kk, n);
    CHECK(r3 == p3);
}

TEST_CASE("conv kernels: par == ref bitwise, fwd and all bwd") {
    Rng rng(3);
    auto d = k::conv2d_dims(2, 8, 24, 24, 12, 3, 1, 1);
    auto x = rand_vec((long long)d.n * d.in_c * d.in_h * d.in_w, rng);
    auto w = rand_vec((long long)d.out_c * d.in_c * 9, rng);
    auto bias = rand_vec(d.out_c, rng);
    const long long ysz = (long long)d.n * d.out_c * d.out_h * d.out_w;
    std::vector<double> yr(ysz), yp(ysz);
    k::ref::conv2d_fwd(d, x.data(), w.data(), bias.data(), yr.data());
    k::par::conv2d_fwd(d, x.data(), w.data(), bias.data(), yp.data());
    CHECK(yr == yp);

    auto gy = rand_vec(ysz, rng);
    std::vector<double> gxr(x.size(), 0.0), gxp(x.size(), 0.0);
    k::ref::conv2d_bwd_input(d, gy.data(), w.data(), gxr.data());
    k::par::conv2d_bwd_input(d, gy.data(), w.data(), gxp.data());
    CHECK(gxr == gxp);

    std::vector<double> gwr(w.size(), 0.0), gwp(w.size(), 0.0);
    k::ref::conv2d_bwd_weight(d, gy.data(), x.data(), gwr.data());
    k::par::conv2d_bwd_weight(d, gy.data(), x.data(), gwp.data());
    CHECK(gwr == gwp);

    std::vector<double> gbr(d.out_c, 0.0), gbp(d.out_c, 0.0);
    k::ref::conv2d_bwd_bias(d, gy.data(), gbr.data());
    k::par::conv2d_bwd_bias(d, gy.data(), gbp.data());
    CHECK(gbr == gbp);
}

TEST_CASE("group_norm kernels: par == ref bitwise") {
    Rng rng(4);
    const int n = 2, c = 16, hw = 24 * 24, groups = 8;
    auto x = rand_vec((long long)n * c * hw, rng);
    auto gamma = rand_vec(c, rng);
    auto beta = rand_vec(c, rng);
    std::vector<double> yr(x.size()), yp(x.size());
    std::vector<double> mr(n * groups), rr(n * groups), mp(n * groups), rp(n * groups);
    k::ref::group_norm_fwd(n, c, hw, groups, 1e-5, x.data(), gamma.data(), beta.data(),
                           yr.data(), mr.data(), rr.data());
    k::par::group_norm_fwd(n, c, hw, groups, 1e-5, x.data(), gamma.data(), beta.data(),
                           yp.data(), mp.data(), rp.data());
    CHECK(yr == yp);
    CHECK(mr == mp);
    CHECK(rr == rp);

    auto gy = rand_vec(x.size(), rng);
    std::vector<double> gx1(x.size(), 0.0), gx2(x.size(), 0.0);
    std::vector<double> gg1(c, 0.0), gg2(c, 0.0), gb1(c, 0.0), gb2(c, 0.0);
    k::ref::group_norm_bwd(n, c, hw, groups, x.data(), gamma.data(), mr.data(), rr.data(),
                           gy.data(), gx1.data(), gg1.data(), gb1.data());
    k::par::group_norm_bwd(n, c, hw, groups, x.data(), gamma.data(), mp.data(), rp.data(),
                           gy.data(), gx2.data(), gg2.data(), gb2.data());
    CHECK(gx1 == gx2);
    CHECK(gg1 == gg2);
    CHECK(gb1 == gb2);
}

TEST_CASE("resize and mix kernels: par == ref bitwise") {
    Rng rng(5);
    const int n = 2, c = 16, h = 32, w = 32;
    auto x = rand_vec((long long)n * c * h * w, rng);
    std::vector<double> yr((long long)n * c * 4 * h * w), yp(yr.size());
    k::ref::upsample2x_fwd(n, c, h, w, x.data(), yr.data());
    k::par::upsample2x_fwd(n, c, h, w, x.data(), yp.data());
    CHECK(yr == yp);

    std::vector<double> pr((long long)n * c * 8 * 8), pp(pr.size());
    k::ref::avgpool_fwd(n, c, h, w, 8, 8, x.data(), pr.data());
    k::par::avgpool_fwd(n, c, h, w, 8, 8, x.data(), pp.data());
    CHECK(pr == pp);

    auto m = rand_vec((long long)c * c, rng);
    std::vector<double> cr(x.size()), cp(x.size());
    k::ref::channel_mix_fwd(n, c, h * w, m.data(), x.data(), cr.data());
    k::par::channel_mix_fwd(n, c, h * w, m.data(), x.data(), cp.data());
    CHECK(cr == cp);

    auto gy = rand_vec(x.size(), rng);
    std::vector<double> gm1((long long)c * c, 0.0), gm2((long long)c * c, 0.0);
    k::ref::channel_mix_bwd_m(n, c, h * w, x.data(), gy.data(), gm1.data());
    k::par::channel_mix_bwd_m(n, c, h * w, x.data(), gy.data(), gm2.data());
    CHECK(gm1 == gm2);
}

TEST_CASE("mode dispatch switches implementations") {
    const auto prev = k::mode();
    k::set_mode(k::Mode::serial);
    CHECK(k::mode() == k::Mode::serial);
    k::set_mode(k::Mode::parallel);
    CHECK(k::mode() == k::Mode::parallel);
    k::set_mode(prev);
}
