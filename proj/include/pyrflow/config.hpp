#pragma once

#include <string>

#include "pyrflow/detect.hpp"
#include "pyrflow/model.hpp"
#include "pyrflow/scene.hpp"

namespace pyrflow {

struct TrainConfig {
    int steps = 2000;
    double lr = 0.01;
    double momentum = 0.9;
    int batch_size = 1;
    std::vector<double> milestones = {0.75, 0.92};  // fractions of steps
    double decay = 0.1;
    int train_scenes = 512;
    int eval_scenes = 128;
    int eval_every = 1000;  // 0 disables periodic eval; the final step always evaluates
    bool hflip = true;
    bool report_wall_time = false;  // keep reports byte-reproducible by default
};

struct EvalConfig {
    DecodeConfig decode;
    double iou_thresh = 0.5;
};

struct RunConfig {
    ModelConfig model;
    SceneSpec scene;
    TrainConfig train;
    EvalConfig eval;
    uint64_t seed = 0;
};

// Flat "section.key = value" text. Unknown keys are errors. '#' starts a
// comment.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// single key=value application (also used for CLI overrides)
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// consistency checks that span sections (run after parsing + overrides)
void finalize_config(RunConfig& cfg);

// every key in sorted order; parsing this text reproduces the config
std::string canonical_config(const RunConfig& cfg);

// FNV-1a 64 of the canonical text, as 16 hex digits
std::string config_digest(const RunConfig& cfg);
uint64_t fnv1a64(const std::string& text);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace pyrflow
