#pragma once

#include <vector>

#include "pyrflow/geometry.hpp"

namespace pyrflow {

struct Detection {
    Box box;
    int cls = 0;
    double score = 0.0;
    int level = 0;
};

struct DecodeConfig {
    double score_thresh = 0.05;
    int per_level_topk = 1000;
    double nms_iou = 0.5;
    int max_total = 100;
};

// One image's raw head output at one pyramid level.
struct LevelPred {
    int level = 0;
    int stride = 0;
    int grid_h = 0, grid_w = 0;
    int num_classes = 0;
    std::vector<double> cls_logits;  // K x h x w
    std::vector<double> reg;         // 4 x h x w pixel distances (l,t,r,b)
};

// Per level: sigmoid scores filtered at score_thresh, top-k kept, boxes decoded
// from cell centers; then class-wise greedy NMS over the level pool and the
// top max_total by score. Deterministic for equal inputs (ties break on
// class, level, cell order).
std::vector<Detection> decode_predictions(const std::vector<LevelPred>& preds,
                                          const DecodeConfig& cfg, int image_size);

}  // namespace pyrflow
