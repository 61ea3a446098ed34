#include "pyrflow/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pyrflow/ops.hpp"

namespace pyrflow {

std::string loss_mode_name(LossMode m) {
    switch (m) {
        case LossMode::base: return "base";
        case LossMode::aux: return "aux";
        case LossMode::aux_uncertainty: return "aux-uncertainty";
    }
    return "?";
}

LossMode parse_loss_mode(const std::string& s) {
    if (s == "base") return LossMode::base;
    if (s == "aux") return LossMode::aux;
    if (s == "aux-uncertainty") return LossMode::aux_uncertainty;
    throw std::invalid_argument("unknown loss mode: " + s);
}

std::string builder_name(BuilderKind k) {
    switch (k) {
        case BuilderKind::fpn_free: return "fpn-free";
        case BuilderKind::fpn: return "fpn";
        case BuilderKind::fg: return "fg";
        case BuilderKind::cfg: return "cfg";
    }
    return "?";
}

BuilderKind parse_builder(const std::string& s) {
    if (s == "fpn-free") return BuilderKind::fpn_free;
    if (s == "fpn") return BuilderKind::fpn;
    if (s == "fg") return BuilderKind::fg;
    if (s == "cfg") return BuilderKind::cfg;
    throw std::invalid_argument("unknown builder: " + s);
}

double recombine_total(const LossBreakdown& b) {
    double total = 0.0;
    for (const auto& [l, cls] : b.level_cls) total += cls + b.lambda * b.level_reg.at(l);
    for (const auto& [i, t] : b.aux) {
        if (b.mode == LossMode::aux) {
            total += t.cls + b.lambda * t.reg;
        } else if (b.mode == LossMode::aux_uncertainty) {
            total += std::exp(-t.alpha_cls) * t.cls + b.tau * t.alpha_cls;
            total += b.lambda * (std::exp(-t.alpha_reg) * t.reg + b.tau * t.alpha_reg);
        }
    }
    return total;
}

Detector::Detector(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    validate_ranges(cfg_.loss.ranges);
    if (cfg_.loss.tau <= 0) throw std::invalid_argument("loss.tau must be > 0");
    Rng rng(seed);
    backbone_ = std::make_unique<Backbone>(params_, cfg_.backbone, rng);

    std::map<int, int> backbone_channels;
    for (int l = 2; l <= 5; ++l) backbone_channels[l] = cfg_.backbone.stage_channels[l - 1];
    builder_ = make_builder(params_, cfg_.pyramid, backbone_channels, rng);

    heads_ = std::make_unique<DetectionHeads>(params_, "head", levels(),
                                              builder_->out_channels(), cfg_.head, rng);

    if (cfg_.loss.mode != LossMode::base) {
        HeadConfig aux_cfg = cfg_.head;
        aux_cfg.tower_blocks = 1;  // lightweight towers on raw backbone features
        aux_cfg.shared_across_levels = true;
        std::map<int, int> aux_channels;
        for (int i = 2; i <= 4; ++i) {
            aux_channels[i] = backbone_channels.at(i);
            aux_heads_[i] = std::make_unique<DetectionHeads>(
                params_, "aux.h" + std::to_string(i), std::vector<int>{i},
                backbone_channels.at(i), aux_cfg, rng);
        }
        uncertainty_ = std::make_unique<UncertaintyHeads>(params_, aux_channels, rng);
    }
}

std::vector<int> Detector::levels() const {
    if (cfg_.pyramid.kind == BuilderKind::fpn_free) return {5};
    return {2, 3, 4, 5};
}

FeatureMap Detector::backbone_features(Tape& tape, const Tensor& images,
                                       bool block_interstage) const {
    return backbone_->forward(tape, images, block_interstage);
}

LevelTargets Detector::targets_for_level(const std::vector<std::vector<GtObject>>& gts,
                                         int level, int grid_h, int grid_w,
                                         bool all_scales) const {
    LevelRange range;
    if (all_scales) {
        range = {0.0, std::numeric_limits<double>::infinity()};
    } else {
        range = cfg_.loss.ranges.at(level);
    }
    return assign_targets(gts, 1 << level, grid_h, grid_w, range, cfg_.head.num_classes);
}

LossBreakdown Detector::training_loss(Tape& tape, const Tensor& images,
                                      const std::vector<std::vector<GtObject>>& gts) const {
    LossBreakdown out;
    out.lambda = cfg_.loss.lambda;
    out.tau = cfg_.loss.tau;
    out.mode = cfg_.loss.mode;

    FeatureMap c = backbone_->forward(tape, images, false);
    PyramidSet p = builder_->build(tape, c);

    const bool single = levels().size() == 1;
    Tensor total;
    bool first = true;
    for (const auto& [l, feat] : p.levels) {
        HeadOutput head = heads_->forward(tape, feat, l);
        LevelTargets t = targets_for_level(gts, l, feat.shape()[2], feat.shape()[3], single);
        DetectionLoss dl =
            detection_loss(head.cls, head.reg, t, cfg_.loss.lambda, cfg_.loss.focal);
        out.level_cls[l] = dl.cls.item();
        out.level_reg[l] = dl.reg.item();
        total = first ? dl.combined : ops::add(total, dl.combined);
        first = false;
    }

    if (cfg_.loss.mode != LossMode::base) {
        for (const auto& [stage, head] : aux_heads_) {
            const Tensor& feat = c.at(stage);
            HeadOutput ho = head->forward(tape, feat, stage);
            LevelTargets t =
                targets_for_level(gts, stage, feat.shape()[2], feat.shape()[3], true);
            DetectionLoss dl =
                detection_loss(ho.cls, ho.reg, t, cfg_.loss.lambda, cfg_.loss.focal);
            AuxLossTerm term;
            term.cls = dl.cls.item();
            term.reg = dl.reg.item();
            if (cfg_.loss.mode == LossMode::aux) {
                total = ops::add(total, dl.combined);
            } else {
                Tensor a_cls =
                    uncertainty_->alpha(tape, ho.tower, stage, UncertaintyHeads::Task::cls);
                Tensor a_reg =
                    uncertainty_->alpha(tape, ho.tower, stage, UncertaintyHeads::Task::reg);
                term.alpha_cls = a_cls.item();
                term.alpha_reg = a_reg.item();
                Tensor wrapped =
                    ops::add(uncertainty_wrap(dl.cls, a_cls, cfg_.loss.tau),
                             ops::scalar_mul(
                                 uncertainty_wrap(dl.reg, a_reg, cfg_.loss.tau),
                                 cfg_.loss.lambda));
                total = ops::add(total, wrapped);
            }
            out.aux[stage] = term;
        }
    }

    out.total = total;
    out.total_value = total.item();
    return out;
}

std::vector<Detector::LevelOutput> Detector::infer(Tape& tape, const Tensor& images) const {
    FeatureMap c = backbone_->forward(tape, images, false);
    PyramidSet p = builder_->build(tape, c);
    std::vector<LevelOutput> out;
    for (const auto& [l, feat] : p.levels) {
        HeadOutput head = heads_->forward(tape, feat, l);
        out.push_back({l, 1 << l, head.cls, head.reg});
    }
    return out;
}

std::vector<std::pair<std::string, Tensor>> Detector::source_losses(
    Tape& tape, const FeatureMap& c, const std::vector<std::vector<GtObject>>& gts,
    bool include_aux) const {
    std::vector<std::pair<std::string, Tensor>> out;
    PyramidSet p = builder_->build(tape, c);
    const bool single = levels().size() == 1;
    for (const auto& [l, feat] : p.levels) {
        HeadOutput head = heads_->forward(tape, feat, l);
        LevelTargets t = targets_for_level(gts, l, feat.shape()[2], feat.shape()[3], single);
        DetectionLoss dl =
            detection_loss(head.cls, head.reg, t, cfg_.loss.lambda, cfg_.loss.focal);
        out.emplace_back("L" + std::to_string(l), dl.combined);
    }
    if (include_aux) {
        if (aux_heads_.empty())
            throw std::invalid_argument(
                "auxiliary loss sources requested but the model was built in base mode");
        for (const auto& [stage, head] : aux_heads_) {
            const Tensor& feat = c.at(stage);
            HeadOutput ho = head->forward(tape, feat, stage);
            LevelTargets t =
                targets_for_level(gts, stage, feat.shape()[2], feat.shape()[3], true);
            DetectionLoss dl =
                detection_loss(ho.cls, ho.reg, t, cfg_.loss.lambda, cfg_.loss.focal);
            out.emplace_back("aux" + std::to_string(stage), dl.combined);
        }
    }
    return out;
}

}  // namespace pyrflow
