#include "pyrflow/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pyrflow {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (...) {
        throw std::invalid_argument("config key " + key + ": bad integer '" + v + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        unsigned long long r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (...) {
        throw std::invalid_argument("config key " + key + ": bad integer '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (...) {
        throw std::invalid_argument("config key " + key + ": bad number '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key " + key + ": bad bool '" + v + "'");
}

std::vector<std::string> split_csv(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& s : split_csv(v)) out.push_back(to_int(key, s));
    return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_csv(v)) out.push_back(to_double(key, s));
    return out;
}

std::map<int, LevelRange> ranges_from_bounds(const std::vector<double>& b) {
    if (b.size() != 3)
        throw std::invalid_argument("loss.range_bounds needs exactly 3 boundaries");
    return {{2, {0.0, b[0]}},
            {3, {b[0], b[1]}},
            {4, {b[1], b[2]}},
            {5, {b[2], std::numeric_limits<double>::infinity()}}};
}

std::vector<double> bounds_from_ranges(const std::map<int, LevelRange>& r) {
    return {r.at(2).hi, r.at(3).hi, r.at(4).hi};
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(T)>& fmt) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt(v[i]);
    }
    return out;
}

}  // namespace

std::string format_double(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", v);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void apply_config_kv(RunConfig& c, const std::string& key, const std::string& v) {
    if (key == "seed") {
        c.seed = to_u64(key, v);
    } else if (key == "backbone.input_size") {
        c.model.backbone.input_size = to_int(key, v);
    } else if (key == "backbone.channels") {
        c.model.backbone.stage_channels = to_int_list(key, v);
    } else if (key == "backbone.blocks_per_stage") {
        c.model.backbone.blocks_per_stage = to_int(key, v);
    } else if (key == "pyramid.builder") {
        c.model.pyramid.kind = parse_builder(v);
    } else if (key == "pyramid.channels") {
        c.model.pyramid.channels = to_int(key, v);
    } else if (key == "pyramid.cascade_times") {
        c.model.pyramid.cascade_times = to_int(key, v);
    } else if (key == "pyramid.row_softmax") {
        c.model.pyramid.row_softmax = to_bool(key, v);
    } else if (key == "heads.tower_blocks") {
        c.model.head.tower_blocks = to_int(key, v);
    } else if (key == "heads.shared") {
        c.model.head.shared_across_levels = to_bool(key, v);
    } else if (key == "heads.cls_prior") {
        c.model.head.cls_prior = to_double(key, v);
    } else if (key == "loss.mode") {
        c.model.loss.mode = parse_loss_mode(v);
    } else if (key == "loss.lambda") {
        c.model.loss.lambda = to_double(key, v);
    } else if (key == "loss.tau") {
        c.model.loss.tau = to_double(key, v);
    } else if (key == "loss.focal_gamma") {
        c.model.loss.focal.gamma = to_double(key, v);
    } else if (key == "loss.focal_alpha") {
        c.model.loss.focal.alpha = to_double(key, v);
    } else if (key == "loss.range_bounds") {
        c.model.loss.ranges = ranges_from_bounds(to_double_list(key, v));
    } else if (key == "scene.image_size") {
        c.scene.image_size = to_int(key, v);
    } else if (key == "scene.min_objects") {
        c.scene.min_objects = to_int(key, v);
    } else if (key == "scene.max_objects") {
        c.scene.max_objects = to_int(key, v);
    } else if (key == "train.steps") {
        c.train.steps = to_int(key, v);
    } else if (key == "train.lr") {
        c.train.lr = to_double(key, v);
    } else if (key == "train.momentum") {
        c.train.momentum = to_double(key, v);
    } else if (key == "train.batch_size") {
        c.train.batch_size = to_int(key, v);
    } else if (key == "train.milestones") {
        c.train.milestones = to_double_list(key, v);
    } else if (key == "train.decay") {
        c.train.decay = to_double(key, v);
    } else if (key == "train.train_scenes") {
        c.train.train_scenes = to_int(key, v);
    } else if (key == "train.eval_scenes") {
        c.train.eval_scenes = to_int(key, v);
    } else if (key == "train.eval_every") {
        c.train.eval_every = to_int(key, v);
    } else if (key == "train.hflip") {
        c.train.hflip = to_bool(key, v);
    } else if (key == "train.report_wall_time") {
        c.train.report_wall_time = to_bool(key, v);
    } else if (key == "eval.score_thresh") {
        c.eval.decode.score_thresh = to_double(key, v);
    } else if (key == "eval.topk") {
        c.eval.decode.per_level_topk = to_int(key, v);
    } else if (key == "eval.nms_iou") {
        c.eval.decode.nms_iou = to_double(key, v);
    } else if (key == "eval.max_total") {
        c.eval.decode.max_total = to_int(key, v);
    } else if (key == "eval.iou_thresh") {
        c.eval.iou_thresh = to_double(key, v);
    } else {
        throw std::invalid_argument("unknown config key: " + key);
    }
}

void finalize_config(RunConfig& c) {
    if (c.scene.image_size != c.model.backbone.input_size)
        throw std::invalid_argument(
            "scene.image_size must equal backbone.input_size (got " +
            std::to_string(c.scene.image_size) + " vs " +
            std::to_string(c.model.backbone.input_size) + ")");
    if (c.model.backbone.stage_channels.size() != 5)
        throw std::invalid_argument("backbone.channels needs 5 entries");
    validate_ranges(c.model.loss.ranges);
    if (c.train.steps < 0 || c.train.batch_size < 1 || c.train.train_scenes < 1 ||
        c.train.eval_scenes < 1)
        throw std::invalid_argument("train.* settings out of range");
    if (c.train.lr <= 0 || c.train.momentum < 0 || c.train.momentum >= 1)
        throw std::invalid_argument("optimizer settings out of range");
    for (double m : c.train.milestones)
        if (m < 0 || m > 1)
            throw std::invalid_argument("train.milestones must be fractions of steps");
    if (c.model.pyramid.cascade_times < 1)
        throw std::invalid_argument("pyramid.cascade_times must be >= 1");
    if (c.model.head.cls_prior <= 0 || c.model.head.cls_prior >= 1)
        throw std::invalid_argument("heads.cls_prior must lie in (0, 1)");
    c.model.backbone.seed = c.seed;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        apply_config_kv(cfg, key, value);
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string canonical_config(const RunConfig& c) {
    std::map<std::string, std::string> kv;
    kv["seed"] = std::to_string(c.seed);
    kv["backbone.input_size"] = std::to_string(c.model.backbone.input_size);
    kv["backbone.channels"] = join<int>(
        c.model.backbone.stage_channels, [](int x) { return std::to_string(x); });
    kv["backbone.blocks_per_stage"] = std::to_string(c.model.backbone.blocks_per_stage);
    kv["pyramid.builder"] = builder_name(c.model.pyramid.kind);
    kv["pyramid.channels"] = std::to_string(c.model.pyramid.channels);
    kv["pyramid.cascade_times"] = std::to_string(c.model.pyramid.cascade_times);
    kv["pyramid.row_softmax"] = c.model.pyramid.row_softmax ? "true" : "false";
    kv["heads.tower_blocks"] = std::to_string(c.model.head.tower_blocks);
    kv["heads.shared"] = c.model.head.shared_across_levels ? "true" : "false";
    kv["heads.cls_prior"] = format_double(c.model.head.cls_prior);
    kv["loss.mode"] = loss_mode_name(c.model.loss.mode);
    kv["loss.lambda"] = format_double(c.model.loss.lambda);
    kv["loss.tau"] = format_double(c.model.loss.tau);
    kv["loss.focal_gamma"] = format_double(c.model.loss.focal.gamma);
    kv["loss.focal_alpha"] = format_double(c.model.loss.focal.alpha);
    kv["loss.range_bounds"] = join<double>(bounds_from_ranges(c.model.loss.ranges),
                                           [](double x) { return format_double(x); });
    kv["scene.image_size"] = std::to_string(c.scene.image_size);
    kv["scene.min_objects"] = std::to_string(c.scene.min_objects);
    kv["scene.max_objects"] = std::to_string(c.scene.max_objects);
    kv["train.steps"] = std::to_string(c.train.steps);
    kv["train.lr"] = format_double(c.train.lr);
    kv["train.momentum"] = format_double(c.train.momentum);
    kv["train.batch_size"] = std::to_string(c.train.batch_size);
    kv["train.milestones"] =
        join<double>(c.train.milestones, [](double x) { return format_double(x); });
    kv["train.decay"] = format_double(c.train.decay);
    kv["train.train_scenes"] = std::to_string(c.train.train_scenes);
    kv["train.eval_scenes"] = std::to_string(c.train.eval_scenes);
    kv["train.eval_every"] = std::to_string(c.train.eval_every);
    kv["train.hflip"] = c.train.hflip ? "true" : "false";
    kv["train.report_wall_time"] = c.train.report_wall_time ? "true" : "false";
    kv["eval.score_thresh"] = format_double(c.eval.decode.score_thresh);
    kv["eval.topk"] = std::to_string(c.eval.decode.per_level_topk);
    kv["eval.nms_iou"] = format_double(c.eval.decode.nms_iou);
    kv["eval.max_total"] = std::to_string(c.eval.decode.max_total);
    kv["eval.iou_thresh"] = format_double(c.eval.iou_thresh);

    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

uint64_t fnv1a64(const std::string& text) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_digest(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
    return buf;
}

}  // namespace pyrflow
