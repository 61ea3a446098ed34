#include "pyrflow/kernels.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pyrflow::kernels {

namespace {
std::atomic<Mode> g_mode{Mode::parallel};
}

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

Conv2dDims conv2d_dims(int n, int in_c, int in_h, int in_w, int out_c, int k, int stride,
                       int pad) {
    Conv2dDims d{n, in_c, in_h, in_w, out_c, k, stride, pad, 0, 0};
    d.out_h = (in_h + 2 * pad - k) / stride + 1;
    d.out_w = (in_w + 2 * pad - k) / stride + 1;
    if (d.out_h <= 0 || d.out_w <= 0)
        throw std::invalid_argument("conv2d output would be empty (input " +
                                    std::to_string(in_h) + "x" + std::to_string(in_w) +
                                    ", kernel " + std::to_string(k) + ", stride " +
                                    std::to_string(stride) + ")");
    return d;
}

// clang-format off
#define PF_DISPATCH(name, ...)                          \
    if (mode() == Mode::parallel) return par::name(__VA_ARGS__); \
    return ref::name(__VA_ARGS__)
// clang-format on

void ew_binary(int op, const double* a, const double* b, double* out, long long n) {
    PF_DISPATCH(ew_binary, op, a, b, out, n);
}
void ew_binary_scalar(int op, const double* a, double b, double* out, long long n) {
    PF_DISPATCH(ew_binary_scalar, op, a, b, out, n);
}
void ew_unary(int op, const double* a, double* out, long long n) {
    PF_DISPATCH(ew_unary, op, a, out, n);
}
void axpy(double alpha, const double* x, double* y, long long n) {
    PF_DISPATCH(axpy, alpha, x, y, n);
}
double reduce_sum(const double* a, long long n) { PF_DISPATCH(reduce_sum, a, n); }
void matmul(const double* a, const double* b, double* out, int m, int k, int n) {
    PF_DISPATCH(matmul, a, b, out, m, k, n);
}
void matmul_at_b(const double* a, const double* b, double* out, int m, int k, int n) {
    PF_DISPATCH(matmul_at_b, a, b, out, m, k, n);
}
void matmul_a_bt(const double* a, const double* b, double* out, int m, int k, int n) {
    PF_DISPATCH(matmul_a_bt, a, b, out, m, k, n);
}
void conv2d_fwd(const Conv2dDims& d, const double* x, const double* w, const double* bias,
                double* y) {
    PF_DISPATCH(conv2d_fwd, d, x, w, bias, y);
}
void conv2d_bwd_input(const Conv2dDims& d, const double* gy, const double* w, double* gx) {
    PF_DISPATCH(conv2d_bwd_input, d, gy, w, gx);
}
void conv2d_bwd_weight(const Conv2dDims& d, const double* gy, const double* x, double* gw) {
    PF_DISPATCH(conv2d_bwd_weight, d, gy, x, gw);
}
void conv2d_bwd_bias(const Conv2dDims& d, const double* gy, double* gb) {
    PF_DISPATCH(conv2d_bwd_bias, d, gy, gb);
}
void group_norm_fwd(int n, int c, int hw, int groups, double eps, const double* x,
                    const double* gamma, const double* beta, double* y, double* mean,
                    double* rstd) {
    PF_DISPATCH(group_norm_fwd, n, c, hw, groups, eps, x, gamma, beta, y, mean, rstd);
}
void group_norm_bwd(int n, int c, int hw, int groups, const double* x, const double* gamma,
                    const double* mean, const double* rstd, const double* gy, double* gx,
                    double* ggamma, double* gbeta) {
    PF_DISPATCH(group_norm_bwd, n, c, hw, groups, x, gamma, mean, rstd, gy, gx, ggamma, gbeta);
}
void upsample2x_fwd(int n, int c, int h, int w, const double* x, double* y) {
    PF_DISPATCH(upsample2x_fwd, n, c, h, w, x, y);
}
void upsample2x_bwd(int n, int c, int h, int w, const double* gy, double* gx) {
    PF_DISPATCH(upsample2x_bwd, n, c, h, w, gy, gx);
}
void avgpool_fwd(int n, int c, int in_h, int in_w, int out_h, int out_w, const double* x,
                 double* y) {
    PF_DISPATCH(avgpool_fwd, n, c, in_h, in_w, out_h, out_w, x, y);
}
void avgpool_bwd(int n, int c, int in_h, int in_w, int out_h, int out_w, const double* gy,
                 double* gx) {
    PF_DISPATCH(avgpool_bwd, n, c, in_h, in_w, out_h, out_w, gy, gx);
}
void channel_mix_fwd(int n, int c, int hw, const double* m, const double* x, double* y) {
    PF_DISPATCH(channel_mix_fwd, n, c, hw, m, x, y);
}
void channel_mix_bwd_x(int n, int c, int hw, const double* m, const double* gy, double* gx) {
    PF_DISPATCH(channel_mix_bwd_x, n, c, hw, m, gy, gx);
}
void channel_mix_bwd_m(int n, int c, int hw, const double* x, const double* gy, double* gm) {
    PF_DISPATCH(channel_mix_bwd_m, n, c, hw, x, gy, gm);
}
void mul_acc(const double* a, const double* b, double* y, long long n) {
    PF_DISPATCH(mul_acc, a, b, y, n);
}
void relu_bwd_acc(const double* x, const double* gy, double* gx, long long n) {
    PF_DISPATCH(relu_bwd_acc, x, gy, gx, n);
}
void sigmoid_bwd_acc(const double* y, const double* gy, double* gx, long long n) {
    PF_DISPATCH(sigmoid_bwd_acc, y, gy, gx, n);
}
void bcast_mul_fwd(int n, int c, int hw, const double* x, const double* w, double* y) {
    PF_DISPATCH(bcast_mul_fwd, n, c, hw, x, w, y);
}
void bcast_mul_bwd_x(int n, int c, int hw, const double* w, const double* gy, double* gx) {
    PF_DISPATCH(bcast_mul_bwd_x, n, c, hw, w, gy, gx);
}
void bcast_mul_bwd_w(int n, int c, int hw, const double* x, const double* gy, double* gw) {
    PF_DISPATCH(bcast_mul_bwd_w, n, c, hw, x, gy, gw);
}

#undef PF_DISPATCH

}  // namespace pyrflow::kernels
