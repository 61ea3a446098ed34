#pragma once

#include <cstddef>

// Dense compute kernels behind the tape ops. Every kernel exists twice: the
// OpenMP build in pyrflow::kernels::par and a plain serial reference in
// pyrflow::kernels::ref. The parallel variants assign each output element to
// exactly one thread and keep the inner accumulation order identical to the
// reference, so results are bit-identical for any thread count. The unqualified
// functions dispatch on the global mode (tools/bench_kernels compares the two).

namespace pyrflow::kernels {

enum class Mode { serial, parallel };
Mode mode();
void set_mode(Mode m);

struct Conv2dDims {
    int n, in_c, in_h, in_w;
    int out_c, k, stride, pad;
    int out_h, out_w;
};

Conv2dDims conv2d_dims(int n, int in_c, int in_h, int in_w, int out_c, int k, int stride,
                       int pad);

#define PYRFLOW_KERNEL_DECLS                                                                  \
    void ew_binary(int op, const double* a, const double* b, double* out, long long n);       \
    void ew_binary_scalar(int op, const double* a, double b, double* out, long long n);       \
    void ew_unary(int op, const double* a, double* out, long long n);                         \
    void axpy(double alpha, const double* x, double* y, long long n);                         \
    double reduce_sum(const double* a, long long n);                                          \
    void matmul(const double* a, const double* b, double* out, int m, int k, int n);          \
    void matmul_at_b(const double* a, const double* b, double* out, int m, int k, int n);     \
    void matmul_a_bt(const double* a, const double* b, double* out, int m, int k, int n);     \
    void conv2d_fwd(const Conv2dDims& d, const double* x, const double* w, const double* bias,\
                    double* y);                                                               \
    void conv2d_bwd_input(const Conv2dDims& d, const double* gy, const double* w, double* gx);\
    void conv2d_bwd_weight(const Conv2dDims& d, const double* gy, const double* x,            \
                           double* gw);                                                       \
    void conv2d_bwd_bias(const Conv2dDims& d, const double* gy, double* gb);                  \
    void group_norm_fwd(int n, int c, int hw, int groups, double eps, const double* x,        \
                        const double* gamma, const double* beta, double* y, double* mean,     \
                        double* rstd);                                                        \
    void group_norm_bwd(int n, int c, int hw, int groups, const double* x,                    \
                        const double* gamma, const double* mean, const double* rstd,          \
                        const double* gy, double* gx, double* ggamma, double* gbeta);         \
    void upsample2x_fwd(int n, int c, int h, int w, const double* x, double* y);              \
    void upsample2x_bwd(int n, int c, int h, int w, const double* gy, double* gx);            \
    void avgpool_fwd(int n, int c, int in_h, int in_w, int out_h, int out_w, const double* x, \
                     double* y);                                                              \
    void avgpool_bwd(int n, int c, int in_h, int in_w, int out_h, int out_w,                  \
                     const double* gy, double* gx);                                           \
    void channel_mix_fwd(int n, int c, int hw, const double* m, const double* x, double* y);  \
    void channel_mix_bwd_x(int n, int c, int hw, const double* m, const double* gy,           \
                           double* gx);                                                       \
    void channel_mix_bwd_m(int n, int c, int hw, const double* x, const double* gy,           \
                           double* gm);                                                       \
    void mul_acc(const double* a, const double* b, double* y, long long n);                   \
    void relu_bwd_acc(const double* x, const double* gy, double* gx, long long n);            \
    void sigmoid_bwd_acc(const double* y, const double* gy, double* gx, long long n);         \
    void bcast_mul_fwd(int n, int c, int hw, const double* x, const double* w, double* y);    \
    void bcast_mul_bwd_x(int n, int c, int hw, const double* w, const double* gy,             \
                         double* gx);                                                         \
    void bcast_mul_bwd_w(int n, int c, int hw, const double* x, const double* gy,             \
                         double* gw);

// elementwise op codes
enum EwBinary { kAdd = 0, kSub = 1, kMul = 2 };
enum EwUnary { kExp = 0, kNegExp = 1, kRelu = 2, kSigmoid = 3, kNeg = 4, kSquare = 5 };

namespace ref {
PYRFLOW_KERNEL_DECLS
}
namespace par {
PYRFLOW_KERNEL_DECLS
}

// dispatch on mode()
PYRFLOW_KERNEL_DECLS

#undef PYRFLOW_KERNEL_DECLS

}  // namespace pyrflow::kernels
