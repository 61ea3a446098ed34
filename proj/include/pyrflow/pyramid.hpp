#pragma once

#include <map>
#include <memory>

#include "pyrflow/backbone.hpp"
#include "pyrflow/tensor.hpp"

namespace pyrflow {

enum class BuilderKind { fpn_free, fpn, fg, cfg };

struct PyramidConfig {
    BuilderKind kind = BuilderKind::fpn;
    int channels = 16;       // Z; grouping builders require Z % 4 == 0
    int cascade_times = 1;   // T, used by cfg
    bool row_softmax = false;
};

// Ordered per-level feature maps. Level l has stride 2^l; all levels share the
// channel count.
struct PyramidSet {
    std::map<int, Tensor> levels;
    int channels = 0;
};

class PyramidBuilder {
   public:
    virtual ~PyramidBuilder() = default;
    virtual PyramidSet build(Tape& tape, const FeatureMap& c) const = 0;
    virtual int out_channels() const = 0;
};

struct ConvParams {
    Parameter* w = nullptr;
    Parameter* b = nullptr;  // null for bias-free construction
};

// Classical top-down pyramid: per-level 1x1 laterals, upsample-and-add from
// the top, per-level smoothing conv. smooth_kernel 1 gives the strictly linear
// configuration used by the superposition verifier.
class TopDownFpn : public PyramidBuilder {
   public:
    TopDownFpn(ParamStore& params, const std::map<int, int>& in_channels, int z, Rng& rng,
               bool with_bias = true, int smooth_kernel = 3);

    PyramidSet build(Tape& tape, const FeatureMap& c) const override;
    int out_channels() const override { return z_; }

    // intermediate products, exposed for tests
    FeatureMap lateral_project(Tape& tape, const FeatureMap& c) const;

   private:
    int z_;
    int smooth_kernel_;
    std::map<int, ConvParams> lateral_;
    std::map<int, ConvParams> smooth_;
};

// Feature-grouping pyramid with an optional cascade. Each stage computes a
// learned Z x Z mixing matrix per level, applies it to the channel/pixel
// matrix, splits the result into level-indexed channel quarters and reassembles
// one quarter per source level into every output level. Stages after the first
// fuse their output with their input through a shared scalar-map weight net.
class GroupedFpn : public PyramidBuilder {
   public:
    GroupedFpn(ParamStore& params, const std::map<int, int>& in_channels, int z, int stages,
               bool row_softmax, Rng& rng);

    PyramidSet build(Tape& tape, const FeatureMap& c) const override;
    int out_channels() const override { return z_; }

    int stages() const { return static_cast<int>(grouping_.size()); }

    // M = head(gap(relu(gn(conv1x1(x))))), reshaped to Z x Z
    Tensor grouping_matrix(Tape& tape, const Tensor& x, int stage, int level) const;
    // one grouping pass (mix + quarter + reassemble) with stage parameters
    std::map<int, Tensor> group_stage(Tape& tape, const std::map<int, Tensor>& in,
                                      int stage) const;
    // fusion weight map in (0,1), one channel
    Tensor fusion_weight(Tape& tape, const Tensor& x) const;

   private:
    struct GroupingParams {
        ConvParams conv;       // 1x1, Z -> Z
        Parameter* gn_gamma;
        Parameter* gn_beta;
        Parameter* head_w;     // Z^2 x Z
        Parameter* head_b;     // Z^2 x 1, identity-initialized
    };
    struct FusionParams {
        ConvParams b1, b2;     // 3x3 blocks
        Parameter* gn1_gamma;
        Parameter* gn1_beta;
        Parameter* gn2_gamma;
        Parameter* gn2_beta;
        ConvParams proj;       // 1x1 -> 1 channel
    };

    int z_;
    bool row_softmax_;
    std::map<int, ConvParams> lateral_;
    std::map<int, ConvParams> smooth_;
    std::vector<std::map<int, GroupingParams>> grouping_;  // [stage][level]
    FusionParams fw_;
};

// Pass-through "pyramid" for the detector without a neck: level 5 only.
class SingleLevel : public PyramidBuilder {
   public:
    explicit SingleLevel(int c5_channels) : channels_(c5_channels) {}
    PyramidSet build(Tape& tape, const FeatureMap& c) const override;
    int out_channels() const override { return channels_; }

   private:
    int channels_;
};

std::unique_ptr<PyramidBuilder> make_builder(ParamStore& params, const PyramidConfig& cfg,
                                             const std::map<int, int>& backbone_channels,
                                             Rng& rng);

// Splits each X_k into level-indexed channel quarters, resizes quarter (k, l)
// to the level-l grid (nearest upsampling toward finer levels, average pooling
// toward coarser ones) and concatenates over k.
std::map<int, Tensor> regroup_quarters(const std::map<int, Tensor>& x);

// Superposition residual of the bias-free top-down pyramid with 1x1 smoothing:
// max over trials of ||P(aA + bB) - aP(A) - bP(B)||_inf. With inject_bias the
// construction keeps its biases (the negative control; the map turns affine).
double verify_linear_expansion(const std::map<int, int>& in_channels, int z, int level2_size,
                               uint64_t seed, int trials, bool inject_bias = false);

}  // namespace pyrflow
