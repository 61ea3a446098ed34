#pragma once

#include <map>
#include <vector>

#include "pyrflow/geometry.hpp"
#include "pyrflow/tensor.hpp"

namespace pyrflow {

// scale range (lo, hi] of object max side, in input pixels
struct LevelRange {
    double lo = 0.0;
    double hi = 0.0;
};

// P2..P5 ranges for 64-px images; boundaries are half-open so a side exactly
// on a boundary goes to the lower level
std::map<int, LevelRange> default_level_ranges();

// throws unless the ranges partition (0, inf) in increasing level order
void validate_ranges(const std::map<int, LevelRange>& ranges);

struct FocalConfig {
    double gamma = 2.0;
    double alpha = 0.25;
};

// Dense targets for one grid. All tensors are constants.
struct LevelTargets {
    Tensor cls;       // N x K x h x w one-hot
    Tensor reg;       // N x 4 x h x w distances (left, top, right, bottom)
    Tensor pos_mask;  // N x 1 x h x w
    int num_pos = 0;
};

// Cells whose centers fall strictly inside a box of an object whose max side
// lies in range become positives (smallest box wins a contested cell).
LevelTargets assign_targets(const std::vector<std::vector<GtObject>>& batch, int stride,
                            int grid_h, int grid_w, const LevelRange& range, int num_classes);

// Focal-modulated binary cross-entropy over all locations and classes, summed
// and normalized by max(1, num positives).
Tensor focal_bce_loss(const Tensor& logits, const LevelTargets& targets,
                      const FocalConfig& cfg);

// Mean (1 - IoU) between predicted and target side distances over positive
// cells; zero when there are none.
Tensor iou_loss(const Tensor& reg, const LevelTargets& targets);

struct DetectionLoss {
    Tensor cls;
    Tensor reg;
    Tensor combined;  // cls + lambda * reg
};

DetectionLoss detection_loss(const Tensor& o_cls, const Tensor& o_reg,
                             const LevelTargets& targets, double lambda,
                             const FocalConfig& cfg);

// e^{-alpha} * loss + tau * alpha (tau > 0)
Tensor uncertainty_wrap(const Tensor& loss, const Tensor& alpha, double tau);

}  // namespace pyrflow
