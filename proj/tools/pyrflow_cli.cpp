// Command-line surface: train / eval / gradflow / gradcheck / scene-gen.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "pyrflow/gradflow.hpp"
#include "pyrflow/gradsuite.hpp"
#include "pyrflow/kernels.hpp"
#include "pyrflow/report.hpp"
#include "pyrflow/trainer.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

using namespace pyrflow;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    int64_t seed = -1;  // -1 keeps the config's value
    std::string builder;
    int cascade_times = 0;
    std::string loss_mode;
    int threads = 0;
    bool serial_kernels = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_config = true) {
    if (with_config) cmd->add_option("--config", a.config_path, "run configuration file");
    cmd->add_option("--seed", a.seed, "override the run seed");
    cmd->add_option("--out", a.out_dir, "output directory");
    cmd->add_option("--builder", a.builder, "fpn-free|fpn|fg|cfg");
    cmd->add_option("--cascade-times", a.cascade_times, "cascade stage count (cfg builder)");
    cmd->add_option("--loss-mode", a.loss_mode, "base|aux|aux-uncertainty");
    cmd->add_option("--threads", a.threads, "OpenMP thread count (0 = library default)");
    cmd->add_flag("--serial-kernels", a.serial_kernels,
                  "run the serial reference kernels instead of the OpenMP build");
}

RunConfig load_config(const CommonArgs& a) {
    RunConfig cfg;
    if (!a.config_path.empty()) cfg = parse_config_file(a.config_path);
    if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);
    if (!a.builder.empty()) cfg.model.pyramid.kind = parse_builder(a.builder);
    if (a.cascade_times > 0) cfg.model.pyramid.cascade_times = a.cascade_times;
    if (!a.loss_mode.empty()) cfg.model.loss.mode = parse_loss_mode(a.loss_mode);
    finalize_config(cfg);
    if (a.threads > 0) {
#if defined(_OPENMP)
        omp_set_num_threads(a.threads);
#endif
    }
    kernels::set_mode(a.serial_kernels ? kernels::Mode::serial : kernels::Mode::parallel);
    return cfg;
}

int cmd_train(const CommonArgs& a) {
    RunConfig cfg = load_config(a);
    Detector model(cfg.model, cfg.seed);
    TrainResult result = train_detector(model, cfg, [](const std::string& line) {
        std::cout << line << "\n" << std::flush;
    });
    write_train_report(cfg, result, a.out_dir);
    save_checkpoint(model.params(), a.out_dir + "/checkpoint.txt");
    std::cout << "ap " << result.final_ap.overall << " (S " << result.final_ap.small
              << ", M " << result.final_ap.medium << ", L " << result.final_ap.large
              << ")\nwall_time_s " << result.wall_time_s << "\nreports written to "
              << a.out_dir << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& a, const std::string& checkpoint) {
    RunConfig cfg = load_config(a);
    Detector model(cfg.model, cfg.seed);
    if (!checkpoint.empty()) load_checkpoint(model.params(), checkpoint);
    ApResult ap = evaluate_detector(model, cfg);
    nlohmann::json doc;
    doc["config_digest"] = config_digest(cfg);
    doc["seed"] = cfg.seed;
    doc["ap"] = {{"overall", ap.overall},
                 {"small", ap.small},
                 {"medium", ap.medium},
                 {"large", ap.large}};
    for (const auto& [cls, v] : ap.per_class) doc["ap"]["per_class"][class_name(cls)] = v;
    std::filesystem::create_directories(a.out_dir);
    std::ofstream f(a.out_dir + "/eval.json");
    f << doc.dump(2) << "\n";
    std::cout << doc.dump(2) << "\n";
    return 0;
}

int cmd_gradflow(const CommonArgs& a, const std::string& mode, const std::string& seeds_csv) {
    RunConfig cfg = load_config(a);
    std::vector<uint64_t> seeds;
    {
        std::stringstream ss(seeds_csv);
        std::string item;
        while (std::getline(ss, item, ',')) seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) seeds = {1, 2, 3, 4, 5};
    std::filesystem::create_directories(a.out_dir);
    const std::string digest = config_digest(cfg);
    auto run_one = [&](bool direct) {
        SupervisionMatrix m = supervision_matrix(cfg.model, cfg.scene, seeds, direct);
        const std::string stem =
            a.out_dir + "/gradflow_" + (direct ? "direct" : "full");
        write_flow_report(m, digest, stem + ".json", stem + ".txt");
        std::ifstream t(stem + ".txt");
        std::cout << t.rdbuf() << "\n";
    };
    if (mode == "direct" || mode == "both") run_one(true);
    if (mode == "full" || mode == "both") run_one(false);
    return 0;
}

int cmd_gradcheck(int trials, uint64_t seed) {
    auto entries = run_gradient_suite(trials, seed);
    double worst = 0.0;
    std::printf("%-30s %12s  (%d trials each)\n", "case", "max rel err", trials);
    for (const auto& e : entries) {
        std::printf("%-30s %12.3e\n", e.name.c_str(), e.max_rel_err);
        worst = std::max(worst, e.max_rel_err);
    }
    std::printf("%-30s %12.3e\n", "worst", worst);
    if (worst >= 1e-4) {
        std::cerr << "gradcheck failed: max relative error " << worst << " >= 1e-4\n";
        return 1;
    }
    return 0;
}

int cmd_scene_gen(const CommonArgs& a, int count) {
    RunConfig cfg = load_config(a);
    SceneSpec spec = cfg.scene;
    spec.seed = cfg.seed;
    std::filesystem::create_directories(a.out_dir);
    nlohmann::json ann = nlohmann::json::array();
    for (int i = 0; i < count; ++i) {
        Scene s = generate_scene(spec, i);
        char name[64];
        std::snprintf(name, sizeof(name), "scene_%04d.ppm", i);
        write_ppm(s, spec.image_size, a.out_dir + "/" + name);
        nlohmann::json objs = nlohmann::json::array();
        for (const GtObject& o : s.objects)
            objs.push_back({{"box", {o.box.x1, o.box.y1, o.box.x2, o.box.y2}},
                            {"class", class_name(o.cls)}});
        ann.push_back({{"image", name}, {"objects", objs}});
    }
    std::ofstream f(a.out_dir + "/annotations.json");
    f << ann.dump(2) << "\n";
    std::cout << "wrote " << count << " scenes to " << a.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale pyramid detector lab"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, flow_args, scene_args;
    std::string eval_checkpoint;
    std::string flow_mode = "both", flow_seeds;
    int gen_count = 16;
    int check_trials = 20;
    uint64_t check_seed = 20240901;

    CLI::App* train = app.add_subcommand("train", "train a detector and write reports");
    add_common(train, train_args);

    CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(evalc, eval_args);
    evalc->add_option("--checkpoint", eval_checkpoint, "checkpoint to load");

    CLI::App* flow = app.add_subcommand("gradflow", "measure supervision matrices");
    add_common(flow, flow_args);
    flow->add_option("--mode", flow_mode, "direct|full|both");
    flow->add_option("--seeds", flow_seeds, "comma-separated seed list");

    CLI::App* check = app.add_subcommand("gradcheck", "finite-difference gradient sweep");
    check->add_option("--trials", check_trials, "random trials per case");
    check->add_option("--check-seed", check_seed, "sweep seed");

    CLI::App* gen = app.add_subcommand("scene-gen", "write synthetic scenes to disk");
    add_common(gen, scene_args);
    gen->add_option("--count", gen_count, "number of scenes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (evalc->parsed()) return cmd_eval(eval_args, eval_checkpoint);
        if (flow->parsed()) return cmd_gradflow(flow_args, flow_mode, flow_seeds);
        if (check->parsed()) return cmd_gradcheck(check_trials, check_seed);
        if (gen->parsed()) return cmd_scene_gen(scene_args, gen_count);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
