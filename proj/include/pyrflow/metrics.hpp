#pragma once

#include <map>
#include <vector>

#include "pyrflow/detect.hpp"
#include "pyrflow/geometry.hpp"

namespace pyrflow {

struct SizeBins {
    double small_hi = 8.0;
    double medium_hi = 32.0;  // bins by GT max side: (0,8], (8,32], (32,inf)
};

struct ApResult {
    double overall = 0.0;
    double small = 0.0, medium = 0.0, large = 0.0;
    std::map<int, double> per_class;
};

// COCO-style single-threshold AP: greedy matching per class in descending
// score (one match per GT at IoU >= iou_thresh), 101-point interpolated
// precision-recall area. Size-binned APs restrict GTs by max side; detections
// matched to out-of-bin GTs are ignored, unmatched detections count as false
// positives in every bin. Classes without ground truth are excluded from the
// mean; an empty bin scores 0.
ApResult evaluate_ap(const std::vector<std::vector<Detection>>& dets_per_image,
                     const std::vector<std::vector<GtObject>>& gts_per_image,
                     double iou_thresh, const SizeBins& bins, int num_classes);

}  // namespace pyrflow
