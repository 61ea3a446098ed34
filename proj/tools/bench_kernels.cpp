// Times the OpenMP kernels against the serial reference and checks that the
// two produce bit-identical results. Sizes mimic the hot shapes of a training
// step plus some larger ones where threading pays off.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <memory>
#include <functional>
#include <string>
#include <vector>

#include "pyrflow/kernels.hpp"
#include "pyrflow/rng.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

using namespace pyrflow;
namespace k = pyrflow::kernels;

namespace {

std::vector<double> rand_vec(long long n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

struct Case {
    std::string name;
    std::function<void()> serial;
    std::function<void()> parallel;
    std::function<bool()> match;
    int reps;
};

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
    for (int i = 1; i < argc; ++i)
        if (!std::strcmp(argv[i], "--threads") && i + 1 < argc) threads = std::atoi(argv[++i]);
#if defined(_OPENMP)
    if (threads > 0) omp_set_num_threads(threads);
    std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp; both columns run serially\n");
#endif

    Rng rng(7);
    std::vector<Case> cases;

    // conv2d forward+backward at a training-step shape and a larger one
    for (auto [n, ic, oc, hw, reps] :
         {std::tuple{1, 16, 16, 16, 200}, std::tuple{4, 32, 32, 64, 3}}) {
        auto d = k::conv2d_dims(n, ic, hw, hw, oc, 3, 1, 1);
        auto x = rand_vec((long long)n * ic * hw * hw, rng);
        auto w = rand_vec((long long)oc * ic * 9, rng);
        auto b = rand_vec(oc, rng);
        auto gy = rand_vec((long long)n * oc * d.out_h * d.out_w, rng);
        auto ys = std::make_shared<std::vector<double>>(gy.size());
        auto yp = std::make_shared<std::vector<double>>(gy.size());
        auto gws = std::make_shared<std::vector<double>>(w.size());
        auto gwp = std::make_shared<std::vector<double>>(w.size());
        char name[80];
        std::snprintf(name, sizeof(name), "conv3x3 %dx%dx%dx%d -> %d", n, ic, hw, hw, oc);
        cases.push_back(
            {name,
             [=] { k::ref::conv2d_fwd(d, x.data(), w.data(), b.data(), ys->data()); },
             [=] { k::par::conv2d_fwd(d, x.data(), w.data(), b.data(), yp->data()); },
             [=] { return *ys == *yp; }, reps});
        std::snprintf(name, sizeof(name), "conv3x3 bwd_w %dx%dx%dx%d", n, ic, hw, hw);
        cases.push_back(
            {name,
             [=] {
                 std::fill(gws->begin(), gws->end(), 0.0);
                 k::ref::conv2d_bwd_weight(d, gy.data(), x.data(), gws->data());
             },
             [=] {
                 std::fill(gwp->begin(), gwp->end(), 0.0);
                 k::par::conv2d_bwd_weight(d, gy.data(), x.data(), gwp->data());
             },
             [=] { return *gws == *gwp; }, reps});
    }

    {
        const int m = 256, kk = 256, n = 256;
        auto a = rand_vec((long long)m * kk, rng);
        auto b = rand_vec((long long)kk * n, rng);
        auto cs = std::make_shared<std::vector<double>>((long long)m * n);
        auto cp = std::make_shared<std::vector<double>>((long long)m * n);
        cases.push_back({"matmul 256^3",
                         [=] { k::ref::matmul(a.data(), b.data(), cs->data(), m, kk, n); },
                         [=] { k::par::matmul(a.data(), b.data(), cp->data(), m, kk, n); },
                         [=] { return *cs == *cp; }, 5});
    }

    {
        const int n = 4, c = 32, hw = 64 * 64, groups = 8;
        auto x = rand_vec((long long)n * c * hw, rng);
        auto gamma = rand_vec(c, rng);
        auto beta = rand_vec(c, rng);
        auto ys = std::make_shared<std::vector<double>>(x.size());
        auto yp = std::make_shared<std::vector<double>>(x.size());
        auto ms = std::make_shared<std::vector<double>>(n * groups);
        auto rs = std::make_shared<std::vector<double>>(n * groups);
        auto mp = std::make_shared<std::vector<double>>(n * groups);
        auto rp = std::make_shared<std::vector<double>>(n * groups);
        cases.push_back({"group_norm 4x32x64x64",
                         [=] {
                             k::ref::group_norm_fwd(n, c, hw, groups, 1e-5, x.data(),
                                                    gamma.data(), beta.data(), ys->data(),
                                                    ms->data(), rs->data());
                         },
                         [=] {
                             k::par::group_norm_fwd(n, c, hw, groups, 1e-5, x.data(),
                                                    gamma.data(), beta.data(), yp->data(),
                                                    mp->data(), rp->data());
                         },
                         [=] { return *ys == *yp; }, 20});
    }

    {
        const long long n = 1 << 22;
        auto a = rand_vec(n, rng);
        auto b = rand_vec(n, rng);
        auto ys = std::make_shared<std::vector<double>>(n);
        auto yp = std::make_shared<std::vector<double>>(n);
        cases.push_back(
            {"ew mul 4M",
             [=] { k::ref::ew_binary(k::kMul, a.data(), b.data(), ys->data(), n); },
             [=] { k::par::ew_binary(k::kMul, a.data(), b.data(), yp->data(), n); },
             [=] { return *ys == *yp; }, 10});
    }

    std::printf("%-28s %12s %12s %9s %8s\n", "kernel", "serial ms", "openmp ms", "speedup",
                "bitexact");
    bool all_match = true;
    for (auto& c : cases) {
        const double ts = time_ms(c.serial, c.reps);
        const double tp = time_ms(c.parallel, c.reps);
        const bool ok = c.match();
        all_match = all_match && ok;
        std::printf("%-28s %12.3f %12.3f %8.2fx %8s\n", c.name.c_str(), ts, tp, ts / tp,
                    ok ? "yes" : "NO");
    }
    if (!all_match) {
        std::printf("mismatch between serial and openmp kernels\n");
        return 1;
    }
    return 0;
}
