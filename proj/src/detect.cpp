#include "pyrflow/detect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pyrflow {

namespace {

struct Candidate {
    Detection det;
    long long ordinal;  // deterministic tiebreak
};

bool score_before(const Candidate& a, const Candidate& b) {
    if (a.det.score != b.det.score) return a.det.score > b.det.score;
    return a.ordinal < b.ordinal;
}

}  // namespace

std::vector<Detection> decode_predictions(const std::vector<LevelPred>& preds,
                                          const DecodeConfig& cfg, int image_size) {
    if (cfg.score_thresh < 0 || cfg.score_thresh > 1 || cfg.nms_iou <= 0 || cfg.nms_iou > 1 ||
        cfg.per_level_topk < 1 || cfg.max_total < 1)
        throw std::invalid_argument("decode thresholds out of range");

    std::vector<Candidate> pool;
    long long ordinal = 0;
    for (const LevelPred& lp : preds) {
        std::vector<Candidate> level_cands;
        const long long plane = (long long)lp.grid_h * lp.grid_w;
        for (int i = 0; i < lp.grid_h; ++i) {
            for (int j = 0; j < lp.grid_w; ++j) {
                const double cy = (i + 0.5) * lp.stride;
                const double cx = (j + 0.5) * lp.stride;
                const long long cell = (long long)i * lp.grid_w + j;
                for (int k = 0; k < lp.num_classes; ++k) {
                    const double score =
                        1.0 / (1.0 + std::exp(-lp.cls_logits[k * plane + cell]));
                    if (score < cfg.score_thresh) continue;
                    Box b;
                    b.x1 = std::max(0.0, cx - lp.reg[0 * plane + cell]);
                    b.y1 = std::max(0.0, cy - lp.reg[1 * plane + cell]);
                    b.x2 = std::min((double)image_size, cx + lp.reg[2 * plane + cell]);
                    b.y2 = std::min((double)image_size, cy + lp.reg[3 * plane + cell]);
                    if (!(b.x2 > b.x1 && b.y2 > b.y1)) continue;
                    level_cands.push_back({Detection{b, k, score, lp.level}, ordinal++});
                }
            }
        }
        std::sort(level_cands.begin(), level_cands.end(), score_before);
        if ((int)level_cands.size() > cfg.per_level_topk)
            level_cands.resize(cfg.per_level_topk);
        pool.insert(pool.end(), level_cands.begin(), level_cands.end());
    }

    std::sort(pool.begin(), pool.end(), score_before);
    std::vector<Detection> kept;
    for (const Candidate& c : pool) {
        bool suppressed = false;
        for (const Detection& k : kept) {
            if (k.cls != c.det.cls) continue;
            if (iou(k.box, c.det.box) > cfg.nms_iou) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            kept.push_back(c.det);
            if ((int)kept.size() >= cfg.max_total) break;
        }
    }
    return kept;
}

}  // namespace pyrflow
