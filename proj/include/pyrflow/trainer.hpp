#pragma once

#include <functional>
#include <string>

#include "pyrflow/config.hpp"
#include "pyrflow/metrics.hpp"

namespace pyrflow {

// Plain SGD with momentum: v <- mu * v + g; p <- p - lr * v.
class SgdOptimizer {
   public:
    SgdOptimizer(ParamStore& params, double momentum);
    void step(double lr);  // consumes and clears Parameter::grad

   private:
    ParamStore& params_;
    double momentum_;
    std::map<std::string, std::vector<double>> velocity_;
};

struct EvalPoint {
    int step = 0;
    double loss_total = 0, loss_cls = 0, loss_reg = 0, loss_aux = 0;
    ApResult ap;
};

struct TrainResult {
    std::vector<EvalPoint> curve;  // one entry per evaluation step
    ApResult final_ap;
    double wall_time_s = 0.0;
};

// scene streams are independent deterministic functions of the run seed
SceneSpec train_scene_spec(const RunConfig& cfg);
SceneSpec eval_scene_spec(const RunConfig& cfg);

// run inference + decoding on one scene
std::vector<Detection> detect_scene(const Detector& model, const RunConfig& cfg,
                                    const Scene& scene);

ApResult evaluate_detector(const Detector& model, const RunConfig& cfg);

// Deterministic loop: batch -> forward -> backward -> SGD step with the decay
// schedule; evaluates at step 0, every train.eval_every steps, and at the end.
// Throws if the loss goes non-finite. progress (may be null) receives a line
// per log interval.
TrainResult train_detector(Detector& model, const RunConfig& cfg,
                           const std::function<void(const std::string&)>& progress = {});

}  // namespace pyrflow
