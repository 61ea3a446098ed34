#pragma once

#include <map>

#include "pyrflow/rng.hpp"
#include "pyrflow/tensor.hpp"

namespace pyrflow {

// Staged feature extractor. Stage i halves resolution once (stride-2 3x3 conv
// + group norm + ReLU, then optional residual 3x3 blocks), so stage outputs
// C_2..C_5 sit at strides 4, 8, 16, 32 relative to the input.
struct BackboneSpec {
    std::vector<int> stage_channels = {8, 16, 24, 32, 40};  // outputs of s0..s4
    int blocks_per_stage = 1;
    int input_size = 64;  // square, divisible by 32
    uint64_t seed = 0;
};

// largest divisor of c not exceeding 8
int norm_groups(int c);

// feature maps keyed by stage index (2..5)
using FeatureMap = std::map<int, Tensor>;

class Backbone {
   public:
    // Creates parameters under "backbone.s{i}.*" with seeded Kaiming init.
    Backbone(ParamStore& params, const BackboneSpec& spec, Rng& rng);

    // image is N x 3 x S x S with S = spec.input_size. With block_interstage
    // set, each stage consumes stop_gradient of the previous stage's output,
    // so gradient reaches the returned features only through their direct
    // consumers (the direct-supervision measurement mode).
    FeatureMap forward(Tape& tape, const Tensor& image, bool block_interstage = false) const;

    const BackboneSpec& spec() const { return spec_; }

   private:
    struct Block {
        Parameter* conv_w;
        Parameter* conv_b;
        Parameter* gn_gamma;
        Parameter* gn_beta;
    };
    struct Stage {
        Block down;                  // stride-2 entry conv
        std::vector<Block> blocks;   // residual blocks
        int channels;
    };

    Tensor run_stage(Tape& tape, const Stage& st, const Tensor& in) const;

    BackboneSpec spec_;
    std::vector<Stage> stages_;
};

// Kaiming-style conv init: N(0, sqrt(2 / fan_in)) weights, zero bias.
std::vector<double> kaiming_conv_init(int out_c, int in_c, int k, Rng& rng);

}  // namespace pyrflow
