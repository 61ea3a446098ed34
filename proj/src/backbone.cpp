#include "pyrflow/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "pyrflow/ops.hpp"

namespace pyrflow {

int norm_groups(int c) {
    for (int g = std::min(8, c); g > 1; --g)
        if (c % g == 0) return g;
    return 1;
}

std::vector<double> kaiming_conv_init(int out_c, int in_c, int k, Rng& rng) {
    const double std = std::sqrt(2.0 / (in_c * k * k));
    std::vector<double> w((long long)out_c * in_c * k * k);
    for (auto& x : w) x = rng.normal(0.0, std);
    return w;
}

Backbone::Backbone(ParamStore& params, const BackboneSpec& spec, Rng& rng) : spec_(spec) {
    if (spec.input_size % 32 != 0)
        throw std::invalid_argument("backbone input_size must be divisible by 32, got " +
                                    std::to_string(spec.input_size));
    if (spec.stage_channels.size() != 5)
        throw std::invalid_argument("backbone needs 5 stage channel counts");
    if (spec.blocks_per_stage < 1)
        throw std::invalid_argument("backbone blocks_per_stage must be >= 1");

    int in_c = 3;
    for (int i = 0; i < 5; ++i) {
        const int out_c = spec.stage_channels[i];
        const std::string prefix = "backbone.s" + std::to_string(i);
        Stage st;
        st.channels = out_c;
        st.down.conv_w =
            &params.create(prefix + ".conv.w", {out_c, in_c, 3, 3},
                           kaiming_conv_init(out_c, in_c, 3, rng));
        st.down.conv_b = &params.create(prefix + ".conv.b", {out_c},
                                        std::vector<double>(out_c, 0.0));
        st.down.gn_gamma = &params.create(prefix + ".gn.gamma", {out_c},
                                          std::vector<double>(out_c, 1.0));
        st.down.gn_beta =
            &params.create(prefix + ".gn.beta", {out_c}, std::vector<double>(out_c, 0.0));
        for (int b = 1; b < spec.blocks_per_stage; ++b) {
            const std::string bp = prefix + ".res" + std::to_string(b);
            Block blk;
            blk.conv_w = &params.create(bp + ".conv.w", {out_c, out_c, 3, 3},
                                        kaiming_conv_init(out_c, out_c, 3, rng));
            blk.conv_b =
                &params.create(bp + ".conv.b", {out_c}, std::vector<double>(out_c, 0.0));
            blk.gn_gamma =
                &params.create(bp + ".gn.gamma", {out_c}, std::vector<double>(out_c, 1.0));
            blk.gn_beta =
                &params.create(bp + ".gn.beta", {out_c}, std::vector<double>(out_c, 0.0));
            st.blocks.push_back(blk);
        }
        stages_.push_back(st);
        in_c = out_c;
    }
}

Tensor Backbone::run_stage(Tape& tape, const Stage& st, const Tensor& in) const {
    Tensor w = tape.use(*st.down.conv_w);
    Tensor b = tape.use(*st.down.conv_b);
    Tensor y = ops::conv2d(in, w, &b, 2, 1);
    y = ops::group_norm(y, norm_groups(st.channels), tape.use(*st.down.gn_gamma),
                        tape.use(*st.down.gn_beta));
    y = ops::relu(y);
    for (const Block& blk : st.blocks) {
        Tensor bw = tape.use(*blk.conv_w);
        Tensor bb = tape.use(*blk.conv_b);
        Tensor r = ops::conv2d(y, bw, &bb, 1, 1);
        r = ops::group_norm(r, norm_groups(st.channels), tape.use(*blk.gn_gamma),
                            tape.use(*blk.gn_beta));
        y = ops::relu(ops::add(y, r));
    }
    return y;
}

FeatureMap Backbone::forward(Tape& tape, const Tensor& image, bool block_interstage) const {
    const int s = spec_.input_size;
    if (image.shape().size() != 4 || image.shape()[1] != 3 || image.shape()[2] != s ||
        image.shape()[3] != s)
        throw std::invalid_argument("backbone expects N x 3 x " + std::to_string(s) + " x " +
                                    std::to_string(s) + " input, got " +
                                    shape_str(image.shape()));
    FeatureMap out;
    Tensor x = image;
    for (int i = 0; i < 5; ++i) {
        if (i > 0 && block_interstage) x = ops::stop_gradient(x);
        x = run_stage(tape, stages_[i], x);
        if (i >= 1) out.emplace(i + 1, x);
    }
    return out;
}

}  // namespace pyrflow
