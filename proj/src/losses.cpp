#include "pyrflow/losses.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pyrflow/ops.hpp"

namespace pyrflow {

namespace {

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

// subgradient of min(a, b) in a; 1/2 at ties so the IoU loss has an exact
// zero gradient at its minimum
double dmin_da(double a, double b) { return a < b ? 1.0 : (a == b ? 0.5 : 0.0); }

}  // namespace

std::map<int, LevelRange> default_level_ranges() {
    return {{2, {0.0, 8.0}},
            {3, {8.0, 16.0}},
            {4, {16.0, 32.0}},
            {5, {32.0, std::numeric_limits<double>::infinity()}}};
}

void validate_ranges(const std::map<int, LevelRange>& ranges) {
    if (ranges.empty()) throw std::invalid_argument("level ranges must not be empty");
    double expect_lo = 0.0;
    for (const auto& [l, r] : ranges) {
        if (r.lo != expect_lo)
            throw std::invalid_argument("level ranges overlap or leave a gap at " +
                                        std::to_string(r.lo) + " (expected " +
                                        std::to_string(expect_lo) + ")");
        if (!(r.hi > r.lo)) throw std::invalid_argument("level range must have hi > lo");
        expect_lo = r.hi;
    }
    if (std::isfinite(expect_lo))
        throw std::invalid_argument("level ranges must cover (0, inf); last hi is finite");
}

LevelTargets assign_targets(const std::vector<std::vector<GtObject>>& batch, int stride,
                            int grid_h, int grid_w, const LevelRange& range,
                            int num_classes) {
    const int n = static_cast<int>(batch.size());
    const long long plane = (long long)grid_h * grid_w;
    std::vector<double> cls((long long)n * num_classes * plane, 0.0);
    std::vector<double> reg((long long)n * 4 * plane, 0.0);
    std::vector<double> mask((long long)n * plane, 0.0);
    int num_pos = 0;
    for (int b = 0; b < n; ++b) {
        for (int i = 0; i < grid_h; ++i) {
            for (int j = 0; j < grid_w; ++j) {
                const double cy = (i + 0.5) * stride;
                const double cx = (j + 0.5) * stride;
                const GtObject* best = nullptr;
                for (const GtObject& obj : batch[b]) {
                    const double side = obj.box.max_side();
                    if (!(side > range.lo && side <= range.hi)) continue;
                    if (!obj.box.contains(cx, cy)) continue;
                    if (!best || obj.box.area() < best->box.area()) best = &obj;
                }
                if (!best) continue;
                ++num_pos;
                mask[(long long)b * plane + i * grid_w + j] = 1.0;
                cls[((long long)b * num_classes + best->cls) * plane + i * grid_w + j] = 1.0;
                double* r = reg.data() + (long long)b * 4 * plane + i * grid_w + j;
                r[0 * plane] = cx - best->box.x1;
                r[1 * plane] = cy - best->box.y1;
                r[2 * plane] = best->box.x2 - cx;
                r[3 * plane] = best->box.y2 - cy;
            }
        }
    }
    LevelTargets t;
    t.cls = Tensor::constant({n, num_classes, grid_h, grid_w}, std::move(cls));
    t.reg = Tensor::constant({n, 4, grid_h, grid_w}, std::move(reg));
    t.pos_mask = Tensor::constant({n, 1, grid_h, grid_w}, std::move(mask));
    t.num_pos = num_pos;
    return t;
}

Tensor focal_bce_loss(const Tensor& logits, const LevelTargets& targets,
                      const FocalConfig& cfg) {
    if (logits.shape() != targets.cls.shape())
        throw std::invalid_argument("focal loss shape mismatch: " +
                                    shape_str(logits.shape()) + " vs " +
                                    shape_str(targets.cls.shape()));
    const long long n = logits.size();
    const double denom = std::max(1, targets.num_pos);
    auto xd = logits.data();
    auto td = targets.cls.data();
    double total = 0.0;
    for (long long i = 0; i < n; ++i) {
        const double x = (*xd)[i];
        const double t = (*td)[i];
        const double log_pt = t > 0.5 ? -softplus(-x) : -softplus(x);
        const double u = t > 0.5 ? 1.0 / (1.0 + std::exp(x)) : 1.0 / (1.0 + std::exp(-x));
        const double at = t > 0.5 ? cfg.alpha : 1.0 - cfg.alpha;
        total -= at * std::pow(u, cfg.gamma) * log_pt;
    }
    auto out = std::make_shared<std::vector<double>>(1, total / denom);
    if (!logits.on_tape()) return Tensor({1}, out, nullptr, -1);
    Tape* tape = logits.tape();
    const int xn = logits.node();
    const double gamma = cfg.gamma, alpha = cfg.alpha;
    return tape->record(
        {1}, out, {xn}, [xd, td, xn, n, denom, gamma, alpha](Tape& tp, int self) {
            const double g0 = (*tp.grad_ptr(self))[0] / denom;
            std::vector<double>& gx = tp.grad_buffer(xn);
            for (long long i = 0; i < n; ++i) {
                const double x = (*xd)[i];
                const double t = (*td)[i];
                const double p = 1.0 / (1.0 + std::exp(-x));
                const double pt = t > 0.5 ? p : 1.0 - p;
                const double u = 1.0 - pt;
                const double log_pt = t > 0.5 ? -softplus(-x) : -softplus(x);
                const double at = t > 0.5 ? alpha : 1.0 - alpha;
                const double dfl_dpt =
                    at * gamma * std::pow(u, gamma - 1.0) * log_pt -
                    at * std::pow(u, gamma) / pt;
                const double dpt_dx = (t > 0.5 ? 1.0 : -1.0) * p * (1.0 - p);
                gx[i] += g0 * dfl_dpt * dpt_dx;
            }
        });
}

Tensor iou_loss(const Tensor& reg, const LevelTargets& targets) {
    if (reg.shape() != targets.reg.shape())
        throw std::invalid_argument("iou loss shape mismatch: " + shape_str(reg.shape()) +
                                    " vs " + shape_str(targets.reg.shape()));
    const Shape& s = reg.shape();
    const int n = s[0];
    const long long plane = (long long)s[2] * s[3];
    const double denom = std::max(1, targets.num_pos);
    auto pd = reg.data();
    auto gd = targets.reg.data();
    auto md = targets.pos_mask.data();

    double total = 0.0;
    for (int b = 0; b < n; ++b) {
        for (long long i = 0; i < plane; ++i) {
            if ((*md)[b * plane + i] == 0.0) continue;
            const double* p = pd->data() + (long long)b * 4 * plane + i;
            const double* q = gd->data() + (long long)b * 4 * plane + i;
            const double iw = std::min(p[0], q[0]) + std::min(p[2 * plane], q[2 * plane]);
            const double ih =
                std::min(p[plane], q[plane]) + std::min(p[3 * plane], q[3 * plane]);
            const double inter = iw * ih;
            const double ap = (p[0] + p[2 * plane]) * (p[plane] + p[3 * plane]);
            const double ag = (q[0] + q[2 * plane]) * (q[plane] + q[3 * plane]);
            const double uni = ap + ag - inter;
            total += 1.0 - inter / uni;
        }
    }
    auto out = std::make_shared<std::vector<double>>(1, total / denom);
    if (!reg.on_tape()) return Tensor({1}, out, nullptr, -1);
    Tape* tape = reg.tape();
    const int rn = reg.node();
    return tape->record({1}, out, {rn}, [pd, gd, md, rn, n, plane, denom](Tape& tp,
                                                                          int self) {
        const double g0 = (*tp.grad_ptr(self))[0] / denom;
        std::vector<double>& gx = tp.grad_buffer(rn);
        for (int b = 0; b < n; ++b) {
            for (long long i = 0; i < plane; ++i) {
                if ((*md)[b * plane + i] == 0.0) continue;
                const double* p = pd->data() + (long long)b * 4 * plane + i;
                const double* q = gd->data() + (long long)b * 4 * plane + i;
                double* g = gx.data() + (long long)b * 4 * plane + i;
                const double iw = std::min(p[0], q[0]) + std::min(p[2 * plane], q[2 * plane]);
                const double ih =
                    std::min(p[plane], q[plane]) + std::min(p[3 * plane], q[3 * plane]);
                const double inter = iw * ih;
                const double ap = (p[0] + p[2 * plane]) * (p[plane] + p[3 * plane]);
                const double uni = ap + (q[0] + q[2 * plane]) * (q[plane] + q[3 * plane]) -
                                   inter;
                const double inv_u2 = 1.0 / (uni * uni);
                // horizontal components: left (0) and right (2)
                for (int side = 0; side <= 2; side += 2) {
                    const double ml = dmin_da(p[side * plane], q[side * plane]);
                    const double dinter = ml * ih;
                    const double dap = p[plane] + p[3 * plane];
                    const double diou = (dinter * uni - inter * (dap - dinter)) * inv_u2;
                    g[side * plane] -= g0 * diou;
                }
                // vertical components: top (1) and bottom (3)
                for (int side = 1; side <= 3; side += 2) {
                    const double ml = dmin_da(p[side * plane], q[side * plane]);
                    const double dinter = ml * iw;
                    const double dap = p[0] + p[2 * plane];
                    const double diou = (dinter * uni - inter * (dap - dinter)) * inv_u2;
                    g[side * plane] -= g0 * diou;
                }
            }
        }
    });
}

DetectionLoss detection_loss(const Tensor& o_cls, const Tensor& o_reg,
                             const LevelTargets& targets, double lambda,
                             const FocalConfig& cfg) {
    DetectionLoss out;
    out.cls = focal_bce_loss(o_cls, targets, cfg);
    out.reg = iou_loss(o_reg, targets);
    out.combined = ops::add(out.cls, ops::scalar_mul(out.reg, lambda));
    return out;
}

Tensor uncertainty_wrap(const Tensor& loss, const Tensor& alpha, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("uncertainty tau must be > 0");
    if (loss.size() != 1 || alpha.size() != 1)
        throw std::invalid_argument("uncertainty_wrap expects scalar loss and alpha");
    return ops::add(ops::mul(ops::neg_exp(alpha), loss), ops::scalar_mul(alpha, tau));
}

}  // namespace pyrflow
