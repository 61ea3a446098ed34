#include "pyrflow/gradsuite.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "pyrflow/gradcheck.hpp"
#include "pyrflow/heads.hpp"
#include "pyrflow/losses.hpp"
#include "pyrflow/model.hpp"
#include "pyrflow/ops.hpp"
#include "pyrflow/rng.hpp"

namespace pyrflow {

namespace {

std::vector<double> rand_vec(long long n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform(lo, hi);
        if (std::abs(x) < 1e-3) x = 0.1;  // keep clear of ReLU/min kinks
    }
    return v;
}

// weighted sum with fixed random weights makes the incoming gradient generic
Tensor weigh(const Tensor& t, Rng& rng) {
    std::vector<double> w(t.size());
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    return ops::sum(ops::mul(t, Tensor::constant(t.shape(), std::move(w))));
}

ModelConfig tiny_model_config(BuilderKind kind, LossMode mode) {
    ModelConfig cfg;
    cfg.backbone.input_size = 32;
    cfg.backbone.stage_channels = {4, 4, 8, 8, 8};
    cfg.backbone.blocks_per_stage = 1;
    cfg.pyramid.kind = kind;
    cfg.pyramid.channels = 8;
    cfg.pyramid.cascade_times = kind == BuilderKind::cfg ? 2 : 1;
    cfg.head.tower_blocks = 1;
    cfg.loss.mode = mode;
    return cfg;
}

std::vector<std::vector<GtObject>> tiny_scene_gts() {
    // one object per size bin so every level owns a positive
    return {{GtObject{{2, 2, 8, 8}, 0}, GtObject{{10, 6, 24, 20}, 1},
             GtObject{{1, 9, 31 , 30}, 2}}};
}

// move every parameter to a generic point: freshly initialized nets hold
// exact zeros (biases, GN betas, uncertainty projections) that would park
// ReLU inputs on their kink, where central differences disagree with any
// one-sided derivative
void jitter_params(ParamStore& params, uint64_t seed) {
    Rng rng(seed);
    for (Parameter* p : params.all())
        for (auto& v : p->value) v += rng.uniform(0.01, 0.06);
}

double model_param_check(const ModelConfig& cfg, uint64_t seed, int coords) {
    Detector model(cfg, seed);
    Rng rng(mix_seed(seed, 7));
    const int s = cfg.backbone.input_size;
    auto image_v = rand_vec((long long)3 * s * s, rng, 0.0, 1.0);
    auto gts = tiny_scene_gts();
    jitter_params(model.params(), mix_seed(seed, 21));
    auto f = [&](Tape& tape) {
        Tensor image = Tensor::constant({1, 3, s, s}, image_v);
        return model.training_loss(tape, image, gts).total;
    };
    GradCheckOptions opt;
    opt.max_coords_per_input = coords;
    opt.seed = mix_seed(seed, 13);
    return param_grad_check(f, model.params(), opt);
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(int trials, uint64_t seed) {
    std::vector<GradSuiteEntry> out;
    auto run = [&](const std::string& name,
                   const std::function<double(uint64_t)>& one_trial) {
        GradSuiteEntry e{name, 0.0, trials};
        for (int t = 0; t < trials; ++t)
            e.max_rel_err = std::max(e.max_rel_err, one_trial(mix_seed(seed, t)));
        out.push_back(e);
    };

    // ---- elementwise ----
    run("ew.add", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(24, rng), b = rand_vec(24, rng);
        return grad_check(
            [](Tape&, const std::vector<Tensor>& in) {
                return ops::sum(ops::mul(ops::add(in[0], in[1]), in[0]));
            },
            {{2, 3, 2, 2}, {2, 3, 2, 2}}, {a, b});
    });
    run("ew.sub", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(24, rng), b = rand_vec(24, rng);
        return grad_check(
            [](Tape&, const std::vector<Tensor>& in) {
                return ops::sum(ops::mul(ops::sub(in[0], in[1]), in[1]));
            },
            {{24}, {24}}, {a, b});
    });
    run("ew.mul", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(24, rng), b = rand_vec(24, rng);
        return grad_check(
            [](Tape&, const std::vector<Tensor>& in) {
                return ops::sum(ops::mul(in[0], in[1]));
            },
            {{24}, {24}}, {a, b});
    });
    run("ew.scalar_mul", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(24, rng);
        return grad_check(
            [](Tape&, const std::vector<Tensor>& in) {
                return ops::sum(ops::scalar_mul(in[0], -1.7));
            },
            {{24}}, {a});
    });
    run("ew.exp", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(24, rng);
        return grad_check(
            [](Tape&, const std::vector<Tensor>& in) { return ops::sum(ops::exp(in[0])); },
            {{24}}, {a});
    });
    run("ew.neg_exp", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(24, rng);
        return grad_check(
            [](Tape&, const std::vector<Tensor>& in) {
                return ops::sum(ops::neg_exp(in[0]));
            },
            {{24}}, {a});
    });
    run("ew.relu", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(24, rng);
        return grad_check(
            [](Tape&, const std::vector<Tensor>& in) {
                return ops::sum(ops::mul(ops::relu(in[0]), in[0]));
            },
            {{24}}, {a});
    });
    run("ew.sigmoid", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(24, rng);
        return grad_check(
            [](Tape&, const std::vector<Tensor>& in) {
                return ops::sum(ops::mul(ops::sigmoid(in[0]), in[0]));
            },
            {{24}}, {a});
    });

    // ---- linear algebra / conv ----
    run("matmul", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(4 * 6, rng), b = rand_vec(6 * 3, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::matmul(in[0], in[1]), wr);
            },
            {{4, 6}, {6, 3}}, {a, b});
    });
    run("conv2d.1x1", [](uint64_t s) {
        Rng rng(s);
        auto x = rand_vec(2 * 4 * 5 * 5, rng), w = rand_vec(3 * 4, rng), b = rand_vec(3, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::conv2d(in[0], in[1], &in[2], 1, 0), wr);
            },
            {{2, 4, 5, 5}, {3, 4, 1, 1}, {3}}, {x, w, b});
    });
    run("conv2d.3x3", [](uint64_t s) {
        Rng rng(s);
        auto x = rand_vec(1 * 3 * 6 * 6, rng), w = rand_vec(4 * 3 * 9, rng),
             b = rand_vec(4, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::conv2d(in[0], in[1], &in[2], 1, 1), wr);
            },
            {{1, 3, 6, 6}, {4, 3, 3, 3}, {4}}, {x, w, b});
    });
    run("conv2d.3x3.stride2", [](uint64_t s) {
        Rng rng(s);
        auto x = rand_vec(1 * 3 * 8 * 8, rng), w = rand_vec(4 * 3 * 9, rng),
             b = rand_vec(4, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::conv2d(in[0], in[1], &in[2], 2, 1), wr);
            },
            {{1, 3, 8, 8}, {4, 3, 3, 3}, {4}}, {x, w, b});
    });

    // ---- structural ----
    run("reshape", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(24, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::reshape(in[0], {4, 6}), wr);
            },
            {{2, 3, 2, 2}}, {a});
    });
    run("split+concat", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(1 * 8 * 3 * 3, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                auto parts = ops::split_channels(in[0], 4);
                std::swap(parts[0], parts[2]);
                return weigh(ops::concat_channels(parts), wr);
            },
            {{1, 8, 3, 3}}, {a});
    });
    run("upsample2x", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(2 * 3 * 4 * 4, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::upsample_nearest2x(in[0]), wr);
            },
            {{2, 3, 4, 4}}, {a});
    });
    run("adaptive_avg_pool", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(2 * 3 * 8 * 8, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::adaptive_avg_pool(in[0], 2, 2), wr);
            },
            {{2, 3, 8, 8}}, {a});
    });
    run("global_avg_pool", [](uint64_t s) {
        Rng rng(s);
        auto a = rand_vec(2 * 5 * 4 * 4, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::global_avg_pool(in[0]), wr);
            },
            {{2, 5, 4, 4}}, {a});
    });
    run("group_norm", [](uint64_t s) {
        Rng rng(s);
        auto x = rand_vec(2 * 8 * 3 * 3, rng);
        auto g = rand_vec(8, rng, 0.5, 1.5);
        auto b = rand_vec(8, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::group_norm(in[0], 4, in[1], in[2]), wr);
            },
            {{2, 8, 3, 3}, {8}, {8}}, {x, g, b});
    });
    run("channel_mix", [](uint64_t s) {
        Rng rng(s);
        auto x = rand_vec(2 * 4 * 3 * 3, rng);
        auto m = rand_vec(16, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::channel_mix(in[0], in[1]), wr);
            },
            {{2, 4, 3, 3}, {4, 4}}, {x, m});
    });
    run("scale_channels", [](uint64_t s) {
        Rng rng(s);
        auto x = rand_vec(2 * 4 * 3 * 3, rng);
        auto w = rand_vec(2 * 9, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::scale_channels(in[0], in[1]), wr);
            },
            {{2, 4, 3, 3}, {2, 1, 3, 3}}, {x, w});
    });
    run("mean_over_batch", [](uint64_t s) {
        Rng rng(s);
        auto x = rand_vec(3 * 6, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::mean_over_batch(in[0]), wr);
            },
            {{3, 6, 1, 1}}, {x});
    });
    run("row_softmax", [](uint64_t s) {
        Rng rng(s);
        auto m = rand_vec(5 * 4, rng);
        return grad_check(
            [s](Tape&, const std::vector<Tensor>& in) {
                Rng wr(mix_seed(s, 99));
                return weigh(ops::row_softmax(in[0]), wr);
            },
            {{5, 4}}, {m});
    });

    // ---- losses ----
    run("focal_bce", [](uint64_t s) {
        Rng rng(s);
        auto logits = rand_vec(1 * 3 * 4 * 4, rng, -2.5, 2.5);
        LevelTargets t = assign_targets(tiny_scene_gts(), 8, 4, 4,
                                        {0.0, std::numeric_limits<double>::infinity()}, 3);
        return grad_check(
            [t](Tape&, const std::vector<Tensor>& in) {
                return focal_bce_loss(in[0], t, FocalConfig{});
            },
            {{1, 3, 4, 4}}, {logits});
    });
    run("iou_loss", [](uint64_t s) {
        Rng rng(s);
        auto reg = rand_vec(1 * 4 * 4 * 4, rng, 1.0, 12.0);
        LevelTargets t = assign_targets(tiny_scene_gts(), 8, 4, 4,
                                        {0.0, std::numeric_limits<double>::infinity()}, 3);
        return grad_check(
            [t](Tape&, const std::vector<Tensor>& in) { return iou_loss(in[0], t); },
            {{1, 4, 4, 4}}, {reg});
    });
    run("uncertainty_wrap", [](uint64_t s) {
        Rng rng(s);
        std::vector<double> loss = {rng.uniform(0.1, 4.0)};
        std::vector<double> alpha = {rng.uniform(0.05, 2.0)};
        return grad_check(
            [](Tape&, const std::vector<Tensor>& in) {
                return uncertainty_wrap(in[0], in[1], 0.3);
            },
            {{1}, {1}}, {loss, alpha});
    });

    // ---- composites ----
    run("composite.backbone", [](uint64_t s) {
        ModelConfig cfg = tiny_model_config(BuilderKind::fpn, LossMode::base);
        ParamStore params;
        Rng rng(s);
        Backbone bb(params, cfg.backbone, rng);
        jitter_params(params, mix_seed(s, 21));
        auto image = rand_vec((long long)3 * 32 * 32, rng, 0.0, 1.0);
        auto f = [&](Tape& tape) {
            Tensor img = Tensor::constant({1, 3, 32, 32}, image);
            FeatureMap c = bb.forward(tape, img);
            Rng lrng(mix_seed(s, 4));
            Tensor total;
            bool first = true;
            for (auto& [l, t] : c) {
                Tensor w = weigh(t, lrng);
                total = first ? w : ops::add(total, w);
                first = false;
            }
            return total;
        };
        GradCheckOptions opt;
        opt.max_coords_per_input = 4;
        opt.seed = mix_seed(s, 5);
        return param_grad_check(f, params, opt);
    });
    for (auto [kind, name] : {std::pair{BuilderKind::fpn, "composite.builder.fpn"},
                              std::pair{BuilderKind::fg, "composite.builder.fg"},
                              std::pair{BuilderKind::cfg, "composite.builder.cfg"}}) {
        run(name, [kind](uint64_t s) {
            ModelConfig cfg = tiny_model_config(kind, LossMode::base);
            return model_param_check(cfg, s, 3);
        });
    }
    run("composite.head+losses", [](uint64_t s) {
        ModelConfig cfg = tiny_model_config(BuilderKind::fpn, LossMode::base);
        cfg.head.tower_blocks = 2;
        return model_param_check(cfg, s, 3);
    });
    run("composite.fpn_free", [](uint64_t s) {
        ModelConfig cfg = tiny_model_config(BuilderKind::fpn_free, LossMode::base);
        return model_param_check(cfg, s, 4);
    });
    run("composite.aux_uncertainty", [](uint64_t s) {
        ModelConfig cfg = tiny_model_config(BuilderKind::fpn, LossMode::aux_uncertainty);
        return model_param_check(cfg, s, 3);
    });

    return out;
}

}  // namespace pyrflow
