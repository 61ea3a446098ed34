#include "pyrflow/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pyrflow/kernels.hpp"

namespace pyrflow::ops {

namespace k = pyrflow::kernels;

namespace {

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tape = nullptr;
    for (const Tensor* t : ts) {
        if (!t || !t->on_tape()) continue;
        if (tape && t->tape() != tape)
            throw std::invalid_argument("operation mixes tensors from different tapes");
        tape = t->tape();
    }
    return tape;
}

Tensor finish(Tape* tape, Shape shape, std::shared_ptr<std::vector<double>> data,
              std::vector<int> parents, Tape::BackwardFn fn) {
    if (!tape) return Tensor(std::move(shape), std::move(data), nullptr, -1);
    return tape->record(std::move(shape), std::move(data), std::move(parents), std::move(fn));
}

std::shared_ptr<std::vector<double>> alloc(long long n) {
    return std::make_shared<std::vector<double>>(n, 0.0);
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_4d(const Tensor& t, const char* what) {
    require(t.shape().size() == 4,
            std::string(what) + " must be 4-d NZHW, got " + shape_str(t.shape()));
}

std::vector<int> parent_ids(std::initializer_list<const Tensor*> ts) {
    std::vector<int> out;
    for (const Tensor* t : ts)
        if (t && t->on_tape()) out.push_back(t->node());
    return out;
}

enum class BinOp { add, sub, mul };

Tensor binary(BinOp op, const Tensor& a, const Tensor& b) {
    const bool a_scalar = a.size() == 1 && b.size() != 1;
    const bool b_scalar = b.size() == 1 && a.size() != 1;
    require(a.shape() == b.shape() || a_scalar || b_scalar,
            "elementwise op shape mismatch: " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
    const Tensor& big = a_scalar ? b : a;
    const long long n = big.size();
    auto out = alloc(n);
    const int kop = op == BinOp::add ? k::kAdd : (op == BinOp::sub ? k::kSub : k::kMul);
    if (a_scalar) {
        const double av = a.values()[0];
        if (op == BinOp::sub) {
            for (long long i = 0; i < n; ++i) (*out)[i] = av - b.values()[i];
        } else {
            k::ew_binary_scalar(kop, b.values().data(), av, out->data(), n);
        }
    } else if (b_scalar) {
        k::ew_binary_scalar(kop, a.values().data(), b.values()[0], out->data(), n);
    } else {
        k::ew_binary(kop, a.values().data(), b.values().data(), out->data(), n);
    }

    Tape* tape = common_tape({&a, &b});
    auto ad = a.data();
    auto bd = b.data();
    const int an = a.node(), bn = b.node();
    return finish(
        tape, big.shape(), out, parent_ids({&a, &b}),
        [op, ad, bd, an, bn, a_scalar, b_scalar, n](Tape& t, int self) {
            const std::vector<double>& g = *t.grad_ptr(self);
            if (an >= 0) {
                std::vector<double>& ga = t.grad_buffer(an);
                if (op == BinOp::mul) {
                    if (a_scalar) {
                        double s = 0.0;
                        for (long long i = 0; i < n; ++i) s += g[i] * (*bd)[i];
                        ga[0] += s;
                    } else if (b_scalar) {
                        k::axpy((*bd)[0], g.data(), ga.data(), n);
                    } else {
                        k::mul_acc(g.data(), bd->data(), ga.data(), n);
                    }
                } else {
                    if (a_scalar)
                        ga[0] += k::reduce_sum(g.data(), n);
                    else
                        k::axpy(1.0, g.data(), ga.data(), n);
                }
            }
            if (bn >= 0) {
                std::vector<double>& gb = t.grad_buffer(bn);
                const double sign = op == BinOp::sub ? -1.0 : 1.0;
                if (op == BinOp::mul) {
                    if (b_scalar) {
                        double s = 0.0;
                        for (long long i = 0; i < n; ++i) s += g[i] * (*ad)[i];
                        gb[0] += s;
                    } else if (a_scalar) {
                        k::axpy((*ad)[0], g.data(), gb.data(), n);
                    } else {
                        k::mul_acc(g.data(), ad->data(), gb.data(), n);
                    }
                } else {
                    if (b_scalar)
                        gb[0] += sign * k::reduce_sum(g.data(), n);
                    else
                        k::axpy(sign, g.data(), gb.data(), n);
                }
            }
        });
}

Tensor unary(int kop, const Tensor& a) {
    const long long n = a.size();
    auto out = alloc(n);
    k::ew_unary(kop, a.values().data(), out->data(), n);
    Tape* tape = common_tape({&a});
    auto ad = a.data();
    auto od = out;
    const int an = a.node();
    return finish(tape, a.shape(), out, parent_ids({&a}),
                  [kop, ad, od, an, n](Tape& t, int self) {
                      if (an < 0) return;
                      const std::vector<double>& g = *t.grad_ptr(self);
                      std::vector<double>& ga = t.grad_buffer(an);
                      switch (kop) {
                          case k::kExp:
                              k::mul_acc(g.data(), od->data(), ga.data(), n);
                              break;
                          case k::kNegExp:
                              for (long long i = 0; i < n; ++i) ga[i] -= g[i] * (*od)[i];
                              break;
                          case k::kRelu:
                              k::relu_bwd_acc(ad->data(), g.data(), ga.data(), n);
                              break;
                          case k::kSigmoid:
                              k::sigmoid_bwd_acc(od->data(), g.data(), ga.data(), n);
                              break;
                          default:
                              throw std::logic_error("unary backward: bad op");
                      }
                  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinOp::mul, a, b); }

Tensor scalar_mul(const Tensor& a, double c) {
    const long long n = a.size();
    auto out = alloc(n);
    k::ew_binary_scalar(k::kMul, a.values().data(), c, out->data(), n);
    Tape* tape = common_tape({&a});
    const int an = a.node();
    return finish(tape, a.shape(), out, parent_ids({&a}), [c, an, n](Tape& t, int self) {
        if (an < 0) return;
        k::axpy(c, t.grad_ptr(self)->data(), t.grad_buffer(an).data(), n);
    });
}

Tensor exp(const Tensor& a) { return unary(k::kExp, a); }
Tensor neg_exp(const Tensor& a) { return unary(k::kNegExp, a); }
Tensor relu(const Tensor& a) { return unary(k::kRelu, a); }
Tensor sigmoid(const Tensor& a) { return unary(k::kSigmoid, a); }

Tensor sum(const Tensor& a) {
    const long long n = a.size();
    auto out = alloc(1);
    (*out)[0] = k::reduce_sum(a.values().data(), n);
    Tape* tape = common_tape({&a});
    const int an = a.node();
    return finish(tape, Shape{1}, out, parent_ids({&a}), [an, n](Tape& t, int self) {
        if (an < 0) return;
        const double g0 = (*t.grad_ptr(self))[0];
        std::vector<double>& ga = t.grad_buffer(an);
        for (long long i = 0; i < n; ++i) ga[i] += g0;
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 2,
            "matmul requires 2-d tensors, got " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
    const int m = a.shape()[0], ka = a.shape()[1];
    const int kb = b.shape()[0], n = b.shape()[1];
    require(ka == kb, "matmul inner extents disagree: " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    auto out = alloc((long long)m * n);
    k::matmul(a.values().data(), b.values().data(), out->data(), m, ka, n);
    Tape* tape = common_tape({&a, &b});
    auto ad = a.data();
    auto bd = b.data();
    const int an = a.node(), bn = b.node();
    return finish(tape, Shape{m, n}, out, parent_ids({&a, &b}),
                  [ad, bd, an, bn, m, ka, n](Tape& t, int self) {
                      const std::vector<double>& g = *t.grad_ptr(self);
                      if (an >= 0) {
                          std::vector<double> scratch((long long)m * ka);
                          k::matmul_a_bt(g.data(), bd->data(), scratch.data(), m, ka, n);
                          k::axpy(1.0, scratch.data(), t.grad_buffer(an).data(),
                                  (long long)m * ka);
                      }
                      if (bn >= 0) {
                          std::vector<double> scratch((long long)ka * n);
                          k::matmul_at_b(ad->data(), g.data(), scratch.data(), m, ka, n);
                          k::axpy(1.0, scratch.data(), t.grad_buffer(bn).data(),
                                  (long long)ka * n);
                      }
                  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad) {
    require_4d(x, "conv2d input");
    require(w.shape().size() == 4, "conv2d kernel must be 4-d, got " + shape_str(w.shape()));
    const int kh = w.shape()[2], kw = w.shape()[3];
    require(kh == kw && (kh == 1 || kh == 3),
            "conv2d kernel spatial size must be 1 or 3, got " + shape_str(w.shape()));
    require(w.shape()[1] == x.shape()[1],
            "conv2d channel mismatch: input " + shape_str(x.shape()) + " vs kernel " +
                shape_str(w.shape()));
    if (bias)
        require(bias->shape() == Shape{w.shape()[0]},
                "conv2d bias must be [out_c], got " + shape_str(bias->shape()));
    auto d = k::conv2d_dims(x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3],
                            w.shape()[0], kh, stride, pad);
    auto out = alloc((long long)d.n * d.out_c * d.out_h * d.out_w);
    k::conv2d_fwd(d, x.values().data(), w.values().data(),
                  bias ? bias->values().data() : nullptr, out->data());
    Tape* tape = common_tape({&x, &w, bias});
    auto xd = x.data();
    auto wd = w.data();
    const int xn = x.node(), wn = w.node(), bn = bias ? bias->node() : -1;
    return finish(tape, Shape{d.n, d.out_c, d.out_h, d.out_w}, out,
                  parent_ids({&x, &w, bias}), [d, xd, wd, xn, wn, bn](Tape& t, int self) {
                      const std::vector<double>& g = *t.grad_ptr(self);
                      if (xn >= 0)
                          k::conv2d_bwd_input(d, g.data(), wd->data(),
                                              t.grad_buffer(xn).data());
                      if (wn >= 0)
                          k::conv2d_bwd_weight(d, g.data(), xd->data(),
                                               t.grad_buffer(wn).data());
                      if (bn >= 0) k::conv2d_bwd_bias(d, g.data(), t.grad_buffer(bn).data());
                  });
}

Tensor reshape(const Tensor& a, Shape shape) {
    require(shape_numel(shape) == a.size(), "reshape changes element count: " +
                                                shape_str(a.shape()) + " -> " +
                                                shape_str(shape));
    auto out = std::make_shared<std::vector<double>>(a.values());
    Tape* tape = common_tape({&a});
    const int an = a.node();
    const long long n = a.size();
    return finish(tape, std::move(shape), out, parent_ids({&a}), [an, n](Tape& t, int self) {
        if (an < 0) return;
        k::axpy(1.0, t.grad_ptr(self)->data(), t.grad_buffer(an).data(), n);
    });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_channels needs at least one input");
    for (const Tensor& p : parts) require_4d(p, "concat_channels input");
    const Shape& s0 = parts[0].shape();
    int total_c = 0;
    for (const Tensor& p : parts) {
        require(p.shape()[0] == s0[0] && p.shape()[2] == s0[2] && p.shape()[3] == s0[3],
                "concat_channels inputs must agree on N,H,W: " + shape_str(s0) + " vs " +
                    shape_str(p.shape()));
        total_c += p.shape()[1];
    }
    const int n = s0[0];
    const long long hw = (long long)s0[2] * s0[3];
    auto out = alloc((long long)n * total_c * hw);
    long long coff = 0;
    for (const Tensor& p : parts) {
        const int pc = p.shape()[1];
        for (int b = 0; b < n; ++b) {
            const double* src = p.values().data() + (long long)b * pc * hw;
            double* dst = out->data() + ((long long)b * total_c + coff) * hw;
            std::copy(src, src + (long long)pc * hw, dst);
        }
        coff += pc;
    }
    Tape* tape = nullptr;
    std::vector<int> parents;
    std::vector<std::pair<int, int>> nodes_and_c;  // (node, channels) in order
    for (const Tensor& p : parts) {
        if (p.on_tape()) {
            if (tape && p.tape() != tape)
                throw std::invalid_argument("operation mixes tensors from different tapes");
            tape = p.tape();
            parents.push_back(p.node());
        }
        nodes_and_c.emplace_back(p.node(), p.shape()[1]);
    }
    return finish(tape, Shape{n, total_c, s0[2], s0[3]}, out, std::move(parents),
                  [nodes_and_c, n, hw, total_c](Tape& t, int self) {
                      const std::vector<double>& g = *t.grad_ptr(self);
                      long long off = 0;
                      for (const auto& [node, pc] : nodes_and_c) {
                          if (node >= 0) {
                              std::vector<double>& gp = t.grad_buffer(node);
                              for (int b = 0; b < n; ++b) {
                                  const double* src =
                                      g.data() + ((long long)b * total_c + off) * hw;
                                  double* dst = gp.data() + (long long)b * pc * hw;
                                  for (long long i = 0; i < pc * hw; ++i) dst[i] += src[i];
                              }
                          }
                          off += pc;
                      }
                  });
}

namespace {
Tensor slice_channels(const Tensor& a, int from, int count) {
    const Shape& s = a.shape();
    const int n = s[0], c = s[1];
    const long long hw = (long long)s[2] * s[3];
    auto out = alloc((long long)n * count * hw);
    for (int b = 0; b < n; ++b) {
        const double* src = a.values().data() + ((long long)b * c + from) * hw;
        std::copy(src, src + (long long)count * hw, out->data() + (long long)b * count * hw);
    }
    Tape* tape = common_tape({&a});
    const int an = a.node();
    return finish(tape, Shape{n, count, s[2], s[3]}, out, parent_ids({&a}),
                  [an, from, count, n, c, hw](Tape& t, int self) {
                      if (an < 0) return;
                      const std::vector<double>& g = *t.grad_ptr(self);
                      std::vector<double>& ga = t.grad_buffer(an);
                      for (int b = 0; b < n; ++b) {
                          const double* src = g.data() + (long long)b * count * hw;
                          double* dst = ga.data() + ((long long)b * c + from) * hw;
                          for (long long i = 0; i < count * hw; ++i) dst[i] += src[i];
                      }
                  });
}
}  // namespace

std::vector<Tensor> split_channels(const Tensor& a, int parts) {
    require_4d(a, "split_channels input");
    const int c = a.shape()[1];
    require(parts > 0 && c % parts == 0,
            "split_channels: " + std::to_string(c) + " channels not divisible into " +
                std::to_string(parts) + " parts");
    const int each = c / parts;
    std::vector<Tensor> out;
    out.reserve(parts);
    for (int i = 0; i < parts; ++i) out.push_back(slice_channels(a, i * each, each));
    return out;
}

Tensor upsample_nearest2x(const Tensor& a) {
    require_4d(a, "upsample input");
    const Shape& s = a.shape();
    auto out = alloc(a.size() * 4);
    k::upsample2x_fwd(s[0], s[1], s[2], s[3], a.values().data(), out->data());
    Tape* tape = common_tape({&a});
    const int an = a.node();
    const Shape os{s[0], s[1], 2 * s[2], 2 * s[3]};
    return finish(tape, os, out, parent_ids({&a}), [an, s](Tape& t, int self) {
        if (an < 0) return;
        k::upsample2x_bwd(s[0], s[1], s[2], s[3], t.grad_ptr(self)->data(),
                          t.grad_buffer(an).data());
    });
}

Tensor adaptive_avg_pool(const Tensor& a, int out_h, int out_w) {
    require_4d(a, "pool input");
    const Shape& s = a.shape();
    require(out_h >= 1 && out_w >= 1 && s[2] % out_h == 0 && s[3] % out_w == 0,
            "adaptive_avg_pool requires integer block ratio: " + shape_str(s) + " -> " +
                std::to_string(out_h) + "x" + std::to_string(out_w));
    auto out = alloc((long long)s[0] * s[1] * out_h * out_w);
    k::avgpool_fwd(s[0], s[1], s[2], s[3], out_h, out_w, a.values().data(), out->data());
    Tape* tape = common_tape({&a});
    const int an = a.node();
    return finish(tape, Shape{s[0], s[1], out_h, out_w}, out, parent_ids({&a}),
                  [an, s, out_h, out_w](Tape& t, int self) {
                      if (an < 0) return;
                      k::avgpool_bwd(s[0], s[1], s[2], s[3], out_h, out_w,
                                     t.grad_ptr(self)->data(), t.grad_buffer(an).data());
                  });
}

Tensor global_avg_pool(const Tensor& a) { return adaptive_avg_pool(a, 1, 1); }

Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps) {
    require_4d(x, "group_norm input");
    require(eps > 0, "group_norm eps must be > 0");
    const Shape& s = x.shape();
    const int c = s[1];
    require(groups > 0 && c % groups == 0,
            "group_norm: " + std::to_string(c) + " channels not divisible by " +
                std::to_string(groups) + " groups");
    require(gamma.size() == c && beta.size() == c, "group_norm affine size must equal C");
    const int n = s[0];
    const int hw = s[2] * s[3];
    auto out = alloc(x.size());
    auto mean = std::make_shared<std::vector<double>>((long long)n * groups);
    auto rstd = std::make_shared<std::vector<double>>((long long)n * groups);
    k::group_norm_fwd(n, c, hw, groups, eps, x.values().data(), gamma.values().data(),
                      beta.values().data(), out->data(), mean->data(), rstd->data());
    Tape* tape = common_tape({&x, &gamma, &beta});
    auto xd = x.data();
    auto gd = gamma.data();
    const int xn = x.node(), gn = gamma.node(), bn = beta.node();
    return finish(
        tape, s, out, parent_ids({&x, &gamma, &beta}),
        [xd, gd, mean, rstd, xn, gn, bn, n, c, hw, groups](Tape& t, int self) {
            const std::vector<double>& g = *t.grad_ptr(self);
            std::vector<double> scratch_x, scratch_g, scratch_b;
            double* gx;
            double* ggamma;
            double* gbeta;
            if (xn >= 0) {
                gx = t.grad_buffer(xn).data();
            } else {
                scratch_x.assign((long long)n * c * hw, 0.0);
                gx = scratch_x.data();
            }
            if (gn >= 0) {
                ggamma = t.grad_buffer(gn).data();
            } else {
                scratch_g.assign(c, 0.0);
                ggamma = scratch_g.data();
            }
            if (bn >= 0) {
                gbeta = t.grad_buffer(bn).data();
            } else {
                scratch_b.assign(c, 0.0);
                gbeta = scratch_b.data();
            }
            k::group_norm_bwd(n, c, hw, groups, xd->data(), gd->data(), mean->data(),
                              rstd->data(), g.data(), gx, ggamma, gbeta);
        });
}

Tensor stop_gradient(const Tensor& a) {
    auto out = std::make_shared<std::vector<double>>(a.values());
    Tape* tape = common_tape({&a});
    // recorded with no parents: identical values, no path back
    return finish(tape, a.shape(), out, {}, nullptr);
}

Tensor channel_mix(const Tensor& x, const Tensor& m) {
    require_4d(x, "channel_mix input");
    require(m.shape().size() == 2 && m.shape()[0] == m.shape()[1],
            "channel_mix matrix must be square, got " + shape_str(m.shape()));
    const Shape& s = x.shape();
    require(m.shape()[0] == s[1], "channel_mix matrix " + shape_str(m.shape()) +
                                      " does not match channels of " + shape_str(s));
    const int n = s[0], c = s[1], hw = s[2] * s[3];
    auto out = alloc(x.size());
    k::channel_mix_fwd(n, c, hw, m.values().data(), x.values().data(), out->data());
    Tape* tape = common_tape({&x, &m});
    auto xd = x.data();
    auto md = m.data();
    const int xn = x.node(), mn = m.node();
    return finish(tape, s, out, parent_ids({&x, &m}),
                  [xd, md, xn, mn, n, c, hw](Tape& t, int self) {
                      const std::vector<double>& g = *t.grad_ptr(self);
                      if (xn >= 0)
                          k::channel_mix_bwd_x(n, c, hw, md->data(), g.data(),
                                               t.grad_buffer(xn).data());
                      if (mn >= 0)
                          k::channel_mix_bwd_m(n, c, hw, xd->data(), g.data(),
                                               t.grad_buffer(mn).data());
                  });
}

Tensor scale_channels(const Tensor& x, const Tensor& w) {
    require_4d(x, "scale_channels input");
    require_4d(w, "scale_channels weight");
    const Shape& s = x.shape();
    require(w.shape()[0] == s[0] && w.shape()[1] == 1 && w.shape()[2] == s[2] &&
                w.shape()[3] == s[3],
            "scale_channels weight must be N x 1 x H x W matching " + shape_str(s) +
                ", got " + shape_str(w.shape()));
    const int n = s[0], c = s[1], hw = s[2] * s[3];
    auto out = alloc(x.size());
    k::bcast_mul_fwd(n, c, hw, x.values().data(), w.values().data(), out->data());
    Tape* tape = common_tape({&x, &w});
    auto xd = x.data();
    auto wd = w.data();
    const int xn = x.node(), wn = w.node();
    return finish(tape, s, out, parent_ids({&x, &w}),
                  [xd, wd, xn, wn, n, c, hw](Tape& t, int self) {
                      const std::vector<double>& g = *t.grad_ptr(self);
                      if (xn >= 0)
                          k::bcast_mul_bwd_x(n, c, hw, wd->data(), g.data(),
                                             t.grad_buffer(xn).data());
                      if (wn >= 0)
                          k::bcast_mul_bwd_w(n, c, hw, xd->data(), g.data(),
                                             t.grad_buffer(wn).data());
                  });
}

Tensor mean_over_batch(const Tensor& x) {
    require_4d(x, "mean_over_batch input");
    const Shape& s = x.shape();
    require(s[2] == 1 && s[3] == 1,
            "mean_over_batch expects N x Z x 1 x 1, got " + shape_str(s));
    const int n = s[0], c = s[1];
    auto out = alloc(c);
    const double inv = 1.0 / n;
    for (int b = 0; b < n; ++b)
        for (int z = 0; z < c; ++z) (*out)[z] += x.values()[(long long)b * c + z] * inv;
    Tape* tape = common_tape({&x});
    const int xn = x.node();
    return finish(tape, Shape{c, 1}, out, parent_ids({&x}), [xn, n, c, inv](Tape& t,
                                                                            int self) {
        if (xn < 0) return;
        const std::vector<double>& g = *t.grad_ptr(self);
        std::vector<double>& gx = t.grad_buffer(xn);
        for (int b = 0; b < n; ++b)
            for (int z = 0; z < c; ++z) gx[(long long)b * c + z] += g[z] * inv;
    });
}

Tensor row_softmax(const Tensor& m) {
    require(m.shape().size() == 2, "row_softmax requires a 2-d tensor, got " +
                                       shape_str(m.shape()));
    const int rows = m.shape()[0], cols = m.shape()[1];
    auto out = alloc(m.size());
    for (int r = 0; r < rows; ++r) {
        const double* in = m.values().data() + (long long)r * cols;
        double* o = out->data() + (long long)r * cols;
        double mx = in[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
        double z = 0.0;
        for (int c = 0; c < cols; ++c) {
            o[c] = std::exp(in[c] - mx);
            z += o[c];
        }
        for (int c = 0; c < cols; ++c) o[c] /= z;
    }
    Tape* tape = common_tape({&m});
    auto od = out;
    const int mn = m.node();
    return finish(tape, m.shape(), out, parent_ids({&m}),
                  [od, mn, rows, cols](Tape& t, int self) {
                      if (mn < 0) return;
                      const std::vector<double>& g = *t.grad_ptr(self);
                      std::vector<double>& gm = t.grad_buffer(mn);
                      for (int r = 0; r < rows; ++r) {
                          const double* y = od->data() + (long long)r * cols;
                          const double* gr = g.data() + (long long)r * cols;
                          double dot = 0.0;
                          for (int c = 0; c < cols; ++c) dot += gr[c] * y[c];
                          double* o = gm.data() + (long long)r * cols;
                          for (int c = 0; c < cols; ++c) o[c] += y[c] * (gr[c] - dot);
                      }
                  });
}

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace pyrflow::ops
