#include "pyrflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pyrflow {

namespace {

struct RankedDet {
    double score;
    int image;
    long long ordinal;   // insertion order within image, for deterministic ranking
    int matched_gt;      // index into that image's gts, -1 if unmatched
};

double ap_from_flags(const std::vector<char>& tp_flags, int num_gt) {
    if (num_gt == 0) return 0.0;
    std::vector<double> precision, recall;
    int tp = 0;
    for (size_t i = 0; i < tp_flags.size(); ++i) {
        if (tp_flags[i]) ++tp;
        precision.push_back((double)tp / (double)(i + 1));
        recall.push_back((double)tp / (double)num_gt);
    }
    double ap = 0.0;
    for (int r = 0; r <= 100; ++r) {
        const double target = r / 100.0;
        double best = 0.0;
        for (size_t i = 0; i < recall.size(); ++i)
            if (recall[i] >= target) best = std::max(best, precision[i]);
        ap += best;
    }
    return ap / 101.0;
}

int bin_of(double side, const SizeBins& bins) {
    if (side <= bins.small_hi) return 0;
    if (side <= bins.medium_hi) return 1;
    return 2;
}

}  // namespace

ApResult evaluate_ap(const std::vector<std::vector<Detection>>& dets_per_image,
                     const std::vector<std::vector<GtObject>>& gts_per_image,
                     double iou_thresh, const SizeBins& bins, int num_classes) {
    if (dets_per_image.size() != gts_per_image.size())
        throw std::invalid_argument("evaluate_ap: image count mismatch");
    if (!(iou_thresh > 0.0 && iou_thresh < 1.0))
        throw std::invalid_argument("evaluate_ap: iou_thresh must be in (0, 1)");

    const int images = (int)dets_per_image.size();
    ApResult out;
    double sum_all = 0.0, sum_bin[3] = {0, 0, 0};
    int cls_all = 0, cls_bin[3] = {0, 0, 0};

    for (int cls = 0; cls < num_classes; ++cls) {
        std::vector<RankedDet> ranked;
        int num_gt = 0, num_gt_bin[3] = {0, 0, 0};
        for (int im = 0; im < images; ++im) {
            for (const GtObject& g : gts_per_image[im])
                if (g.cls == cls) {
                    ++num_gt;
                    ++num_gt_bin[bin_of(g.box.max_side(), bins)];
                }

            // greedy per-image matching in descending score
            std::vector<int> order;
            for (size_t d = 0; d < dets_per_image[im].size(); ++d)
                if (dets_per_image[im][d].cls == cls) order.push_back((int)d);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const auto& da = dets_per_image[im][a];
                const auto& db = dets_per_image[im][b];
                if (da.score != db.score) return da.score > db.score;
                return a < b;
            });
            std::vector<char> taken(gts_per_image[im].size(), 0);
            for (int d : order) {
                const Detection& det = dets_per_image[im][d];
                int best_gt = -1;
                double best_iou = -1.0;
                for (size_t g = 0; g < gts_per_image[im].size(); ++g) {
                    if (gts_per_image[im][g].cls != cls || taken[g]) continue;
                    const double v = iou(det.box, gts_per_image[im][g].box);
                    if (v >= iou_thresh && v > best_iou) {
                        best_iou = v;
                        best_gt = (int)g;
                    }
                }
                if (best_gt >= 0) taken[best_gt] = 1;
                ranked.push_back({det.score, im, (long long)d, best_gt});
            }
        }
        if (num_gt == 0) continue;  // class absent from ground truth
        ++cls_all;

        std::sort(ranked.begin(), ranked.end(), [](const RankedDet& a, const RankedDet& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.image != b.image) return a.image < b.image;
            return a.ordinal < b.ordinal;
        });

        std::vector<char> tp_flags;
        tp_flags.reserve(ranked.size());
        for (const RankedDet& r : ranked) tp_flags.push_back(r.matched_gt >= 0);
        const double ap = ap_from_flags(tp_flags, num_gt);
        out.per_class[cls] = ap;
        sum_all += ap;

        for (int b = 0; b < 3; ++b) {
            if (num_gt_bin[b] == 0) continue;
            ++cls_bin[b];
            std::vector<char> flags;
            for (const RankedDet& r : ranked) {
                if (r.matched_gt >= 0) {
                    const GtObject& g = gts_per_image[r.image][r.matched_gt];
                    if (bin_of(g.box.max_side(), bins) != b) continue;  // ignored
                    flags.push_back(1);
                } else {
                    flags.push_back(0);  // unmatched detections stay false positives
                }
            }
            sum_bin[b] += ap_from_flags(flags, num_gt_bin[b]);
        }
    }

    out.overall = cls_all ? sum_all / cls_all : 0.0;
    out.small = cls_bin[0] ? sum_bin[0] / cls_bin[0] : 0.0;
    out.medium = cls_bin[1] ? sum_bin[1] / cls_bin[1] : 0.0;
    out.large = cls_bin[2] ? sum_bin[2] / cls_bin[2] : 0.0;
    return out;
}

}  // namespace pyrflow
