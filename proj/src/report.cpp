#include "pyrflow/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pyrflow/scene.hpp"

namespace pyrflow {

using nlohmann::json;

void save_checkpoint(const ParamStore& params, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write checkpoint " + path);
    f << "checkpoint v1\n";
    for (const Parameter* p : params.all()) {
        f << p->name << " ";
        for (size_t i = 0; i < p->shape.size(); ++i) f << (i ? "," : "") << p->shape[i];
        for (double v : p->value) f << " " << format_double(v);
        f << "\n";
    }
}

void load_checkpoint(ParamStore& params, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read checkpoint " + path);
    std::string header;
    std::getline(f, header);
    if (header != "checkpoint v1")
        throw std::runtime_error("unrecognized checkpoint header in " + path);
    std::string line;
    size_t loaded = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream in(line);
        std::string name, shape_csv;
        in >> name >> shape_csv;
        Parameter& p = params.at(name);
        std::string expect;
        for (size_t i = 0; i < p.shape.size(); ++i)
            expect += (i ? "," : "") + std::to_string(p.shape[i]);
        if (shape_csv != expect)
            throw std::runtime_error("checkpoint shape mismatch for " + name + ": " +
                                     shape_csv + " vs " + expect);
        for (double& v : p.value)
            if (!(in >> v))
                throw std::runtime_error("checkpoint truncated at parameter " + name);
        ++loaded;
    }
    if (loaded != params.count())
        throw std::runtime_error("checkpoint holds " + std::to_string(loaded) +
                                 " parameters, model has " +
                                 std::to_string(params.count()));
}

namespace {

json ap_to_json(const ApResult& ap) {
    json per_class = json::object();
    for (const auto& [cls, v] : ap.per_class) per_class[class_name(cls)] = v;
    return {{"overall", ap.overall}, {"small", ap.small},     {"medium", ap.medium},
            {"large", ap.large},     {"per_class", per_class}};
}

}  // namespace

std::string report_json_text(const RunConfig& cfg, const TrainResult& result) {
    json doc;
    doc["config_digest"] = config_digest(cfg);
    doc["seed"] = cfg.seed;
    doc["steps"] = cfg.train.steps;
    json curves = json::array();
    for (const EvalPoint& p : result.curve)
        curves.push_back({{"step", p.step},
                          {"loss_total", p.loss_total},
                          {"loss_cls", p.loss_cls},
                          {"loss_reg", p.loss_reg},
                          {"loss_aux", p.loss_aux},
                          {"ap", ap_to_json(p.ap)}});
    doc["curves"] = curves;
    doc["ap"] = ap_to_json(result.final_ap);
    doc["wall_time_s"] = cfg.train.report_wall_time ? result.wall_time_s : 0.0;
    return doc.dump(2) + "\n";
}

std::string metrics_csv_text(const TrainResult& result) {
    std::string out =
        "step,loss_total,loss_cls,loss_reg,loss_aux,ap_overall,ap_small,ap_medium,ap_large\n";
    for (const EvalPoint& p : result.curve) {
        out += std::to_string(p.step) + "," + format_double(p.loss_total) + "," +
               format_double(p.loss_cls) + "," + format_double(p.loss_reg) + "," +
               format_double(p.loss_aux) + "," + format_double(p.ap.overall) + "," +
               format_double(p.ap.small) + "," + format_double(p.ap.medium) + "," +
               format_double(p.ap.large) + "\n";
    }
    return out;
}

void write_train_report(const RunConfig& cfg, const TrainResult& result,
                        const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream f(out_dir + "/report.json");
        if (!f) throw std::runtime_error("cannot write report.json under " + out_dir);
        f << report_json_text(cfg, result);
    }
    {
        std::ofstream f(out_dir + "/metrics.csv");
        if (!f) throw std::runtime_error("cannot write metrics.csv under " + out_dir);
        f << metrics_csv_text(result);
    }
    {
        std::ofstream f(out_dir + "/config.resolved");
        f << canonical_config(cfg);
    }
}

}  // namespace pyrflow
