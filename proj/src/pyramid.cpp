#include "pyrflow/pyramid.hpp"

#include <cmath>
#include <stdexcept>

#include "pyrflow/ops.hpp"

namespace pyrflow {

namespace {

ConvParams make_conv(ParamStore& params, const std::string& name, int out_c, int in_c, int k,
                     Rng& rng, bool with_bias) {
    ConvParams p;
    p.w = &params.create(name + ".w", {out_c, in_c, k, k},
                         kaiming_conv_init(out_c, in_c, k, rng));
    if (with_bias)
        p.b = &params.create(name + ".b", {out_c}, std::vector<double>(out_c, 0.0));
    return p;
}

Tensor apply_conv(Tape& tape, const ConvParams& p, const Tensor& x, int stride, int pad) {
    Tensor w = tape.use(*p.w);
    if (!p.b) return ops::conv2d(x, w, nullptr, stride, pad);
    Tensor b = tape.use(*p.b);
    return ops::conv2d(x, w, &b, stride, pad);
}

void require_levels(const std::map<int, Tensor>& m, const char* what) {
    for (int l = 2; l <= 5; ++l)
        if (!m.count(l))
            throw std::invalid_argument(std::string(what) + ": missing level " +
                                        std::to_string(l));
}

Tensor resize_to(const Tensor& t, int target_h, int target_w) {
    Tensor cur = t;
    while (cur.shape()[2] < target_h) cur = ops::upsample_nearest2x(cur);
    if (cur.shape()[2] > target_h) cur = ops::adaptive_avg_pool(cur, target_h, target_w);
    return cur;
}

}  // namespace

TopDownFpn::TopDownFpn(ParamStore& params, const std::map<int, int>& in_channels, int z,
                       Rng& rng, bool with_bias, int smooth_kernel)
    : z_(z), smooth_kernel_(smooth_kernel) {
    if (smooth_kernel != 1 && smooth_kernel != 3)
        throw std::invalid_argument("smoothing kernel must be 1 or 3");
    for (const auto& [l, c] : in_channels) {
        lateral_[l] = make_conv(params, "pyramid.lat" + std::to_string(l), z, c, 1, rng,
                                with_bias);
        smooth_[l] = make_conv(params, "pyramid.smo" + std::to_string(l), z, z,
                               smooth_kernel, rng, with_bias);
    }
}

FeatureMap TopDownFpn::lateral_project(Tape& tape, const FeatureMap& c) const {
    FeatureMap out;
    for (const auto& [l, feat] : c) out.emplace(l, apply_conv(tape, lateral_.at(l), feat, 1, 0));
    return out;
}

PyramidSet TopDownFpn::build(Tape& tape, const FeatureMap& c) const {
    require_levels(c, "top-down pyramid input");
    FeatureMap lat = lateral_project(tape, c);
    PyramidSet out;
    out.channels = z_;
    Tensor running = lat.at(5);
    out.levels.emplace(5, apply_conv(tape, smooth_.at(5), running, 1, smooth_kernel_ / 2));
    for (int l = 4; l >= 2; --l) {
        running = ops::add(lat.at(l), ops::upsample_nearest2x(running));
        out.levels.emplace(l, apply_conv(tape, smooth_.at(l), running, 1, smooth_kernel_ / 2));
    }
    return out;
}

GroupedFpn::GroupedFpn(ParamStore& params, const std::map<int, int>& in_channels, int z,
                       int stages, bool row_softmax, Rng& rng)
    : z_(z), row_softmax_(row_softmax) {
    if (z % 4 != 0)
        throw std::invalid_argument("grouping pyramid channels must be divisible by 4, got " +
                                    std::to_string(z));
    if (stages < 1) throw std::invalid_argument("cascade stage count must be >= 1");
    for (const auto& [l, c] : in_channels) {
        lateral_[l] = make_conv(params, "pyramid.lat" + std::to_string(l), z, c, 1, rng, true);
        smooth_[l] = make_conv(params, "pyramid.smo" + std::to_string(l), z, z, 3, rng, true);
    }
    grouping_.resize(stages);
    for (int t = 0; t < stages; ++t) {
        for (int l = 2; l <= 5; ++l) {
            const std::string prefix =
                "pyramid.fg.t" + std::to_string(t) + ".g" + std::to_string(l);
            GroupingParams g;
            g.conv = make_conv(params, prefix + ".conv", z, z, 1, rng, true);
            g.gn_gamma =
                &params.create(prefix + ".gn.gamma", {z}, std::vector<double>(z, 1.0));
            g.gn_beta = &params.create(prefix + ".gn.beta", {z}, std::vector<double>(z, 0.0));
            // near-zero head weights with identity bias: the mix starts as a
            // (near) identity so early training is stable
            std::vector<double> hw((long long)z * z * z);
            for (auto& v : hw) v = rng.normal(0.0, 1e-3);
            g.head_w = &params.create(prefix + ".head.w", {z * z, z}, std::move(hw));
            std::vector<double> hb((long long)z * z, 0.0);
            for (int i = 0; i < z; ++i) hb[i * z + i] = 1.0;
            g.head_b = &params.create(prefix + ".head.b", {z * z, 1}, std::move(hb));
            grouping_[t][l] = g;
        }
    }
    if (stages > 1) {
        // the fusion net only exists once; both fusion inputs and all later
        // stages share it
        fw_.b1 = make_conv(params, "pyramid.fw.b1.conv", z, z, 3, rng, true);
        fw_.gn1_gamma =
            &params.create("pyramid.fw.b1.gn.gamma", {z}, std::vector<double>(z, 1.0));
        fw_.gn1_beta =
            &params.create("pyramid.fw.b1.gn.beta", {z}, std::vector<double>(z, 0.0));
        fw_.b2 = make_conv(params, "pyramid.fw.b2.conv", z, z, 3, rng, true);
        fw_.gn2_gamma =
            &params.create("pyramid.fw.b2.gn.gamma", {z}, std::vector<double>(z, 1.0));
        fw_.gn2_beta =
            &params.create("pyramid.fw.b2.gn.beta", {z}, std::vector<double>(z, 0.0));
        fw_.proj = make_conv(params, "pyramid.fw.proj", 1, z, 1, rng, true);
    }
}

Tensor GroupedFpn::grouping_matrix(Tape& tape, const Tensor& x, int stage, int level) const {
    if (x.shape()[1] != z_)
        throw std::invalid_argument("grouping matrix input has " +
                                    std::to_string(x.shape()[1]) + " channels, expected " +
                                    std::to_string(z_));
    const GroupingParams& g = grouping_.at(stage).at(level);
    Tensor h = apply_conv(tape, g.conv, x, 1, 0);
    h = ops::group_norm(h, norm_groups(z_), tape.use(*g.gn_gamma), tape.use(*g.gn_beta));
    h = ops::relu(h);
    Tensor v = ops::mean_over_batch(ops::global_avg_pool(h));           // {Z, 1}
    Tensor m = ops::add(ops::matmul(tape.use(*g.head_w), v), tape.use(*g.head_b));
    m = ops::reshape(m, {z_, z_});
    if (row_softmax_) m = ops::row_softmax(m);
    return m;
}

std::map<int, Tensor> GroupedFpn::group_stage(Tape& tape, const std::map<int, Tensor>& in,
                                              int stage) const {
    require_levels(in, "grouping stage input");
    std::map<int, Tensor> mixed;
    for (const auto& [k, feat] : in) {
        Tensor m = grouping_matrix(tape, feat, stage, k);
        mixed.emplace(k, ops::channel_mix(feat, m));
    }
    return regroup_quarters(mixed);
}

Tensor GroupedFpn::fusion_weight(Tape& tape, const Tensor& x) const {
    Tensor h = apply_conv(tape, fw_.b1, x, 1, 1);
    h = ops::group_norm(h, norm_groups(z_), tape.use(*fw_.gn1_gamma), tape.use(*fw_.gn1_beta));
    h = ops::relu(h);
    h = apply_conv(tape, fw_.b2, h, 1, 1);
    h = ops::group_norm(h, norm_groups(z_), tape.use(*fw_.gn2_gamma), tape.use(*fw_.gn2_beta));
    h = ops::relu(h);
    return ops::sigmoid(apply_conv(tape, fw_.proj, h, 1, 0));
}

PyramidSet GroupedFpn::build(Tape& tape, const FeatureMap& c) const {
    require_levels(c, "grouping pyramid input");
    std::map<int, Tensor> cur;
    for (const auto& [l, feat] : c) cur.emplace(l, apply_conv(tape, lateral_.at(l), feat, 1, 0));
    cur = group_stage(tape, cur, 0);
    for (int t = 1; t < stages(); ++t) {
        std::map<int, Tensor> regrouped = group_stage(tape, cur, t);
        std::map<int, Tensor> fused;
        for (const auto& [l, p] : cur) {
            const Tensor& ph = regrouped.at(l);
            Tensor fa = ops::scale_channels(p, fusion_weight(tape, p));
            Tensor fb = ops::scale_channels(ph, fusion_weight(tape, ph));
            fused.emplace(l, ops::add(fa, fb));
        }
        cur = std::move(fused);
    }
    PyramidSet out;
    out.channels = z_;
    for (const auto& [l, p] : cur)
        out.levels.emplace(l, apply_conv(tape, smooth_.at(l), p, 1, 1));
    return out;
}

PyramidSet SingleLevel::build(Tape&, const FeatureMap& c) const {
    PyramidSet out;
    out.channels = channels_;
    out.levels.emplace(5, c.at(5));
    return out;
}

std::map<int, Tensor> regroup_quarters(const std::map<int, Tensor>& x) {
    require_levels(x, "regroup input");
    const int z = x.at(2).shape()[1];
    if (z % 4 != 0)
        throw std::invalid_argument("regroup requires channels divisible by 4, got " +
                                    std::to_string(z));
    // quarters[k][q] carries the slice of X_k aimed at level 2+q
    std::map<int, std::vector<Tensor>> quarters;
    for (const auto& [k, feat] : x) quarters.emplace(k, ops::split_channels(feat, 4));
    std::map<int, Tensor> out;
    for (int l = 2; l <= 5; ++l) {
        const int th = x.at(l).shape()[2];
        const int tw = x.at(l).shape()[3];
        std::vector<Tensor> parts;
        parts.reserve(4);
        for (int k = 2; k <= 5; ++k)
            parts.push_back(resize_to(quarters.at(k)[l - 2], th, tw));
        out.emplace(l, ops::concat_channels(parts));
    }
    return out;
}

std::unique_ptr<PyramidBuilder> make_builder(ParamStore& params, const PyramidConfig& cfg,
                                             const std::map<int, int>& backbone_channels,
                                             Rng& rng) {
    switch (cfg.kind) {
        case BuilderKind::fpn_free:
            return std::make_unique<SingleLevel>(backbone_channels.at(5));
        case BuilderKind::fpn:
            return std::make_unique<TopDownFpn>(params, backbone_channels, cfg.channels, rng);
        case BuilderKind::fg:
            return std::make_unique<GroupedFpn>(params, backbone_channels, cfg.channels, 1,
                                                cfg.row_softmax, rng);
        case BuilderKind::cfg:
            return std::make_unique<GroupedFpn>(params, backbone_channels, cfg.channels,
                                                cfg.cascade_times, cfg.row_softmax, rng);
    }
    throw std::logic_error("unknown builder kind");
}

double verify_linear_expansion(const std::map<int, int>& in_channels, int z, int level2_size,
                               uint64_t seed, int trials, bool inject_bias) {
    Rng rng(seed);
    ParamStore params;
    TopDownFpn fpn(params, in_channels, z, rng, inject_bias, 1);
    if (inject_bias)
        for (Parameter* p : params.all())
            if (p->name.ends_with(".b"))
                for (auto& v : p->value) v = 1.0;

    auto random_features = [&](Rng& r) {
        FeatureMap m;
        for (const auto& [l, c] : in_channels) {
            const int hw = level2_size >> (l - 2);
            std::vector<double> v((long long)c * hw * hw);
            for (auto& x : v) x = r.uniform(-1.0, 1.0);
            m.emplace(l, Tensor::constant({1, c, hw, hw}, std::move(v)));
        }
        return m;
    };

    double max_residual = 0.0;
    for (int t = 0; t < trials; ++t) {
        FeatureMap fa = random_features(rng);
        FeatureMap fb = random_features(rng);
        double a = rng.uniform(0.5, 1.5);
        double b = rng.uniform(0.5, 1.5);
        // keep a+b away from 1 so an affine offset cannot masquerade as linear
        while (std::abs(a + b - 1.0) < 0.2) b = rng.uniform(0.5, 1.5);
        FeatureMap fab;
        for (const auto& [l, ta] : fa)
            fab.emplace(l, ops::add(ops::scalar_mul(ta, a), ops::scalar_mul(fb.at(l), b)));

        Tape tape;
        PyramidSet pa = fpn.build(tape, fa);
        PyramidSet pb = fpn.build(tape, fb);
        PyramidSet pab = fpn.build(tape, fab);
        for (int l = 2; l <= 5; ++l) {
            const auto& va = pa.levels.at(l).values();
            const auto& vb = pb.levels.at(l).values();
            const auto& vab = pab.levels.at(l).values();
            for (size_t i = 0; i < vab.size(); ++i)
                max_residual =
                    std::max(max_residual, std::abs(vab[i] - a * va[i] - b * vb[i]));
        }
    }
    return max_residual;
}

}  // namespace pyrflow
