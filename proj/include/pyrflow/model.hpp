#pragma once

#include <memory>
#include <string>

#include "pyrflow/backbone.hpp"
#include "pyrflow/heads.hpp"
#include "pyrflow/losses.hpp"
#include "pyrflow/pyramid.hpp"

namespace pyrflow {

enum class LossMode { base, aux, aux_uncertainty };

std::string loss_mode_name(LossMode m);
LossMode parse_loss_mode(const std::string& s);
std::string builder_name(BuilderKind k);
BuilderKind parse_builder(const std::string& s);

struct LossConfig {
    LossMode mode = LossMode::base;
    double lambda = 1.0;
    double tau = 0.1;
    FocalConfig focal;
    std::map<int, LevelRange> ranges = default_level_ranges();
};

struct ModelConfig {
    BackboneSpec backbone;
    PyramidConfig pyramid;
    HeadConfig head;
    LossConfig loss;
};

struct AuxLossTerm {
    double cls = 0, reg = 0;         // raw losses before any wrapping
    double alpha_cls = 0, alpha_reg = 0;
};

struct LossBreakdown {
    std::map<int, double> level_cls;  // keyed by pyramid level
    std::map<int, double> level_reg;
    std::map<int, AuxLossTerm> aux;  // keyed by backbone stage (2..4)
    double lambda = 1.0;
    double tau = 0.1;
    LossMode mode = LossMode::base;
    double total_value = 0.0;
    Tensor total;  // scalar on the tape, ready for backward
};

// recombines the scalar parts the documented way; tests hold this against
// total_value
double recombine_total(const LossBreakdown& b);

// The full detector: staged backbone, one of the pyramid builders, dense
// heads, and (when enabled) per-stage auxiliary heads with learned
// uncertainties. All parameters live in one store, created deterministically
// from the seed.
class Detector {
   public:
    Detector(const ModelConfig& cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::vector<int> levels() const;  // {5} for the neckless detector, else {2..5}

    LossBreakdown training_loss(Tape& tape, const Tensor& images,
                                const std::vector<std::vector<GtObject>>& gts) const;

    struct LevelOutput {
        int level;
        int stride;
        Tensor cls;
        Tensor reg;
    };
    // backbone -> pyramid -> heads, nothing else; loss machinery contributes
    // zero ops here regardless of the configured loss mode
    std::vector<LevelOutput> infer(Tape& tape, const Tensor& images) const;

    FeatureMap backbone_features(Tape& tape, const Tensor& images,
                                 bool block_interstage) const;

    // Named per-source scalar losses from one forward pass over precomputed
    // backbone features: "L2".."L5" (or "L5" alone), plus "aux2".."aux4" when
    // requested. Used by the supervision-matrix measurements.
    std::vector<std::pair<std::string, Tensor>> source_losses(
        Tape& tape, const FeatureMap& c, const std::vector<std::vector<GtObject>>& gts,
        bool include_aux) const;

   private:
    LevelTargets targets_for_level(const std::vector<std::vector<GtObject>>& gts, int level,
                                   int grid_h, int grid_w, bool all_scales) const;

    ModelConfig cfg_;
    ParamStore params_;
    std::unique_ptr<Backbone> backbone_;
    std::unique_ptr<PyramidBuilder> builder_;
    std::unique_ptr<DetectionHeads> heads_;
    std::map<int, std::unique_ptr<DetectionHeads>> aux_heads_;  // stage -> head
    std::unique_ptr<UncertaintyHeads> uncertainty_;
};

}  // namespace pyrflow
