#include "pyrflow/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pyrflow/ops.hpp"

namespace pyrflow {

SgdOptimizer::SgdOptimizer(ParamStore& params, double momentum)
    : params_(params), momentum_(momentum) {
    for (Parameter* p : params_.all()) velocity_[p->name].assign(p->value.size(), 0.0);
}

void SgdOptimizer::step(double lr) {
    for (Parameter* p : params_.all()) {
        std::vector<double>& v = velocity_.at(p->name);
        for (size_t i = 0; i < p->value.size(); ++i) {
            v[i] = momentum_ * v[i] + p->grad[i];
            p->value[i] -= lr * v[i];
            p->grad[i] = 0.0;
        }
    }
}

SceneSpec train_scene_spec(const RunConfig& cfg) {
    SceneSpec s = cfg.scene;
    s.seed = mix_seed(cfg.seed, 0xA11CE);
    return s;
}

SceneSpec eval_scene_spec(const RunConfig& cfg) {
    SceneSpec s = cfg.scene;
    s.seed = mix_seed(cfg.seed, 0xE7A1);
    return s;
}

std::vector<Detection> detect_scene(const Detector& model, const RunConfig& cfg,
                                    const Scene& scene) {
    const int s = cfg.scene.image_size;
    Tensor image = Tensor::constant({1, 3, s, s}, scene.image);
    Tape tape;
    auto outputs = model.infer(tape, image);
    std::vector<LevelPred> preds;
    for (const auto& lo : outputs) {
        LevelPred lp;
        lp.level = lo.level;
        lp.stride = lo.stride;
        lp.grid_h = lo.cls.shape()[2];
        lp.grid_w = lo.cls.shape()[3];
        lp.num_classes = lo.cls.shape()[1];
        lp.cls_logits = lo.cls.values();
        lp.reg = lo.reg.values();
        preds.push_back(std::move(lp));
    }
    return decode_predictions(preds, cfg.eval.decode, s);
}

ApResult evaluate_detector(const Detector& model, const RunConfig& cfg) {
    const SceneSpec spec = eval_scene_spec(cfg);
    std::vector<std::vector<Detection>> dets;
    std::vector<std::vector<GtObject>> gts;
    for (int i = 0; i < cfg.train.eval_scenes; ++i) {
        Scene scene = generate_scene(spec, i);
        dets.push_back(detect_scene(model, cfg, scene));
        gts.push_back(scene.objects);
    }
    return evaluate_ap(dets, gts, cfg.eval.iou_thresh, SizeBins{}, kNumClasses);
}

namespace {

double lr_at(const TrainConfig& t, int step) {
    double lr = t.lr;
    for (double frac : t.milestones)
        if (step >= static_cast<int>(frac * t.steps)) lr *= t.decay;
    return lr;
}

}  // namespace

TrainResult train_detector(Detector& model, const RunConfig& cfg,
                           const std::function<void(const std::string&)>& progress) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result;
    const SceneSpec train_spec = train_scene_spec(cfg);
    Rng aug_rng(mix_seed(cfg.seed, 0xF11B));
    SgdOptimizer opt(model.params(), cfg.train.momentum);
    const int s = cfg.scene.image_size;

    double cur_total = 0, cur_cls = 0, cur_reg = 0, cur_aux = 0;

    auto eval_point = [&](int step) {
        EvalPoint p;
        p.step = step;
        p.loss_total = cur_total;
        p.loss_cls = cur_cls;
        p.loss_reg = cur_reg;
        p.loss_aux = cur_aux;
        p.ap = evaluate_detector(model, cfg);
        result.curve.push_back(p);
        if (progress) {
            std::ostringstream os;
            os << "step " << step << " loss " << cur_total << " ap " << p.ap.overall;
            progress(os.str());
        }
    };

    eval_point(0);

    for (int step = 0; step < cfg.train.steps; ++step) {
        // assemble the batch
        std::vector<double> images;
        images.reserve((size_t)cfg.train.batch_size * 3 * s * s);
        std::vector<std::vector<GtObject>> gts;
        for (int b = 0; b < cfg.train.batch_size; ++b) {
            const long long idx =
                ((long long)step * cfg.train.batch_size + b) % cfg.train.train_scenes;
            Scene scene = generate_scene(train_spec, idx);
            if (cfg.train.hflip && aug_rng.uniform() < 0.5) scene = hflip(scene, s);
            images.insert(images.end(), scene.image.begin(), scene.image.end());
            gts.push_back(scene.objects);
        }
        Tensor batch =
            Tensor::constant({cfg.train.batch_size, 3, s, s}, std::move(images));

        Tape tape;
        LossBreakdown loss = model.training_loss(tape, batch, gts);
        if (!std::isfinite(loss.total_value))
            throw std::runtime_error("training diverged: non-finite loss at step " +
                                     std::to_string(step));
        tape.backward(loss.total);
        tape.accumulate_param_grads();
        opt.step(lr_at(cfg.train, step));

        cur_total = loss.total_value;
        cur_cls = cur_reg = cur_aux = 0;
        for (const auto& [l, v] : loss.level_cls) cur_cls += v;
        for (const auto& [l, v] : loss.level_reg) cur_reg += v;
        for (const auto& [i, t] : loss.aux) cur_aux += t.cls + loss.lambda * t.reg;

        const int done = step + 1;
        const bool final_step = done == cfg.train.steps;
        if (final_step || (cfg.train.eval_every > 0 && done % cfg.train.eval_every == 0))
            eval_point(done);
    }

    result.final_ap = result.curve.back().ap;
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace pyrflow
