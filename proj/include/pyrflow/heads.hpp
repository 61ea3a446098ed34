#pragma once

#include <map>
#include <string>
#include <vector>

#include "pyrflow/pyramid.hpp"
#include "pyrflow/tensor.hpp"

namespace pyrflow {

struct HeadConfig {
    int num_classes = 3;
    int tower_blocks = 2;       // conv blocks before the 1x1 projections
    bool shared_across_levels = true;
    double cls_prior = 0.01;    // initial positive rate baked into the cls bias
};

struct HeadOutput {
    Tensor cls;    // N x K x h x w logits
    Tensor reg;    // N x 4 x h x w side distances in pixels (positive)
    Tensor tower;  // the shared feature both projections read
};

// Dense prediction head: tower of (3x3 conv + GN + ReLU), then 1x1 cls and reg
// projections. Regression logits pass through exp and are scaled by the level
// stride so outputs are pixel distances.
class DetectionHeads {
   public:
    DetectionHeads(ParamStore& params, const std::string& prefix,
                   const std::vector<int>& levels, int in_channels, const HeadConfig& cfg,
                   Rng& rng);

    HeadOutput forward(Tape& tape, const Tensor& feature, int level) const;

    int num_classes() const { return cfg_.num_classes; }

   private:
    struct TowerBlock {
        ConvParams conv;
        Parameter* gn_gamma;
        Parameter* gn_beta;
    };
    struct PerLevel {
        std::vector<TowerBlock> tower;
        ConvParams cls;
        ConvParams reg;
    };

    PerLevel make_head(ParamStore& params, const std::string& prefix, int in_channels,
                       Rng& rng) const;

    HeadConfig cfg_;
    int in_channels_;
    std::map<int, PerLevel> heads_;  // keyed by level; single key -1 when shared
};

// One learned scalar uncertainty per (source, task): a 1x1 projection of the
// prediction feature, spatial mean, then ReLU.
class UncertaintyHeads {
   public:
    enum class Task { cls, reg };

    UncertaintyHeads(ParamStore& params, const std::map<int, int>& stage_channels, Rng& rng);

    Tensor alpha(Tape& tape, const Tensor& feature, int stage, Task task) const;

   private:
    std::map<std::pair<int, int>, ConvParams> proj_;
};

}  // namespace pyrflow
