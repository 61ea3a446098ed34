#include "pyrflow/heads.hpp"

#include <cmath>

#include "pyrflow/ops.hpp"

namespace pyrflow {

namespace {

ConvParams make_conv(ParamStore& params, const std::string& name, int out_c, int in_c, int k,
                     Rng& rng, double bias_init = 0.0) {
    ConvParams p;
    p.w = &params.create(name + ".w", {out_c, in_c, k, k},
                         kaiming_conv_init(out_c, in_c, k, rng));
    p.b = &params.create(name + ".b", {out_c}, std::vector<double>(out_c, bias_init));
    return p;
}

Tensor apply_conv(Tape& tape, const ConvParams& p, const Tensor& x, int pad) {
    Tensor w = tape.use(*p.w);
    Tensor b = tape.use(*p.b);
    return ops::conv2d(x, w, &b, 1, pad);
}

}  // namespace

DetectionHeads::PerLevel DetectionHeads::make_head(ParamStore& params,
                                                   const std::string& prefix, int in_channels,
                                                   Rng& rng) const {
    PerLevel h;
    int c = in_channels;
    for (int b = 0; b < cfg_.tower_blocks; ++b) {
        const std::string bp = prefix + ".pre" + std::to_string(b);
        TowerBlock blk;
        blk.conv = make_conv(params, bp + ".conv", in_channels, c, 3, rng);
        blk.gn_gamma = &params.create(bp + ".gn.gamma", {in_channels},
                                      std::vector<double>(in_channels, 1.0));
        blk.gn_beta = &params.create(bp + ".gn.beta", {in_channels},
                                     std::vector<double>(in_channels, 0.0));
        h.tower.push_back(blk);
        c = in_channels;
    }
    // the classifier starts predicting the configured positive prior
    const double cls_bias = -std::log((1.0 - cfg_.cls_prior) / cfg_.cls_prior);
    h.cls = make_conv(params, prefix + ".cls", cfg_.num_classes, in_channels, 1, rng,
                      cls_bias);
    h.reg = make_conv(params, prefix + ".reg", 4, in_channels, 1, rng);
    return h;
}

DetectionHeads::DetectionHeads(ParamStore& params, const std::string& prefix,
                               const std::vector<int>& levels, int in_channels,
                               const HeadConfig& cfg, Rng& rng)
    : cfg_(cfg), in_channels_(in_channels) {
    if (cfg.shared_across_levels) {
        heads_.emplace(-1, make_head(params, prefix, in_channels, rng));
    } else {
        for (int l : levels)
            heads_.emplace(l, make_head(params, prefix + ".l" + std::to_string(l),
                                        in_channels, rng));
    }
}

HeadOutput DetectionHeads::forward(Tape& tape, const Tensor& feature, int level) const {
    if (feature.shape()[1] != in_channels_)
        throw std::invalid_argument("head expects " + std::to_string(in_channels_) +
                                    " channels, got " + shape_str(feature.shape()));
    const PerLevel& h = cfg_.shared_across_levels ? heads_.at(-1) : heads_.at(level);
    Tensor x = feature;
    for (const TowerBlock& blk : h.tower) {
        x = apply_conv(tape, blk.conv, x, 1);
        x = ops::group_norm(x, norm_groups(in_channels_), tape.use(*blk.gn_gamma),
                            tape.use(*blk.gn_beta));
        x = ops::relu(x);
    }
    HeadOutput out;
    out.tower = x;
    out.cls = apply_conv(tape, h.cls, x, 0);
    // exp keeps distances positive; the stride sets the level's natural scale
    const double stride = static_cast<double>(1 << level);
    out.reg = ops::scalar_mul(ops::exp(apply_conv(tape, h.reg, x, 0)), stride);
    return out;
}

UncertaintyHeads::UncertaintyHeads(ParamStore& params,
                                   const std::map<int, int>& stage_channels, Rng& rng) {
    (void)rng;
    for (const auto& [stage, c] : stage_channels) {
        for (int task = 0; task < 2; ++task) {
            const std::string name = "uncertainty.s" + std::to_string(stage) +
                                     (task == 0 ? ".cls" : ".reg");
            ConvParams p;
            p.w = &params.create(name + ".w", {1, c, 1, 1},
                                 std::vector<double>((long long)c, 0.0));
            // a slightly positive bias keeps the ReLU pre-activation off its
            // dead point at the start, so alpha can actually move
            p.b = &params.create(name + ".b", {1}, std::vector<double>(1, 0.1));
            proj_.emplace(std::make_pair(stage, task), p);
        }
    }
}

Tensor UncertaintyHeads::alpha(Tape& tape, const Tensor& feature, int stage,
                               Task task) const {
    const ConvParams& p = proj_.at({stage, task == Task::cls ? 0 : 1});
    Tensor w = tape.use(*p.w);
    Tensor b = tape.use(*p.b);
    Tensor pre = ops::conv2d(feature, w, &b, 1, 0);          // N x 1 x h x w
    Tensor mean = ops::mean_over_batch(ops::global_avg_pool(pre));  // {1, 1}
    return ops::relu(ops::reshape(mean, {1}));
}

}  // namespace pyrflow
