#include "pyrflow/gradflow.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pyrflow/ops.hpp"

namespace pyrflow {

using nlohmann::json;

double SupervisionMatrix::mean(int row, int col) const {
    double s = 0.0;
    for (const auto& per_seed : values) s += per_seed[row][col];
    return s / values.size();
}

double SupervisionMatrix::median(int row, int col) const {
    std::vector<double> v;
    v.reserve(values.size());
    for (const auto& per_seed : values) v.push_back(per_seed[row][col]);
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SupervisionMatrix supervision_matrix(const ModelConfig& cfg, const SceneSpec& scene_spec,
                                     const std::vector<uint64_t>& seeds, bool direct_path) {
    if (seeds.empty()) throw std::invalid_argument("supervision matrix needs >= 1 seed");
    SupervisionMatrix out;
    out.mode = direct_path ? "direct-path" : "full-path";
    out.builder = builder_name(cfg.pyramid.kind);
    out.seeds = seeds;
    out.cols = {2, 3, 4, 5};

    const bool include_aux = cfg.loss.mode != LossMode::base;
    for (uint64_t seed : seeds) {
        Detector model(cfg, seed);
        SceneSpec sp = scene_spec;
        sp.seed = seed;
        Scene scene = generate_scene(sp, 0);
        Tensor image = Tensor::constant({1, 3, sp.image_size, sp.image_size}, scene.image);

        Tape tape;
        FeatureMap c = model.backbone_features(tape, image, direct_path);
        auto losses = model.source_losses(tape, c, {scene.objects}, include_aux);

        if (out.rows.empty())
            for (const auto& [name, t] : losses) out.rows.push_back(name);

        std::vector<std::vector<double>> grid;
        for (const auto& [name, loss] : losses) {
            tape.backward(loss);
            std::vector<double> row;
            for (int i : out.cols) row.push_back(ops::l2_norm(tape.grad(c.at(i))));
            grid.push_back(std::move(row));
        }
        out.values.push_back(std::move(grid));
    }
    return out;
}

void write_flow_report(const SupervisionMatrix& m, const std::string& config_digest,
                       const std::string& json_path, const std::string& table_path) {
    json doc;
    doc["mode"] = m.mode;
    doc["builder"] = m.builder;
    doc["seeds"] = m.seeds;
    doc["config_digest"] = config_digest;
    json cells = json::array();
    for (size_t r = 0; r < m.rows.size(); ++r)
        for (size_t c = 0; c < m.cols.size(); ++c)
            cells.push_back({{"loss", m.rows[r]},
                             {"feature", "C" + std::to_string(m.cols[c])},
                             {"norm", m.mean((int)r, (int)c)}});
    doc["cells"] = cells;
    std::ofstream jf(json_path);
    if (!jf) throw std::runtime_error("cannot write " + json_path);
    jf << doc.dump(2) << "\n";

    std::ofstream tf(table_path);
    if (!tf) throw std::runtime_error("cannot write " + table_path);
    tf << "supervision matrix (" << m.mode << ", builder " << m.builder
       << ", mean over " << m.seeds.size() << " seeds)\n";
    tf << std::left << std::setw(8) << "";
    for (int c : m.cols) tf << std::setw(14) << ("C" + std::to_string(c));
    tf << "\n";
    for (size_t r = 0; r < m.rows.size(); ++r) {
        tf << std::left << std::setw(8) << m.rows[r];
        for (size_t c = 0; c < m.cols.size(); ++c) {
            std::ostringstream v;
            v << std::scientific << std::setprecision(3) << m.mean((int)r, (int)c);
            tf << std::setw(14) << v.str();
        }
        tf << "\n";
    }
}

SupervisionMatrix parse_flow_report(const std::string& json_path) {
    std::ifstream f(json_path);
    if (!f) throw std::runtime_error("cannot read " + json_path);
    json doc = json::parse(f);
    SupervisionMatrix m;
    m.mode = doc.at("mode").get<std::string>();
    m.builder = doc.at("builder").get<std::string>();
    m.seeds = doc.at("seeds").get<std::vector<uint64_t>>();
    std::map<std::string, std::map<std::string, double>> table;
    for (const auto& cell : doc.at("cells"))
        table[cell.at("loss").get<std::string>()][cell.at("feature").get<std::string>()] =
            cell.at("norm").get<double>();
    m.cols = {2, 3, 4, 5};
    // keep L-rows before aux rows, both in numeric order
    std::vector<std::string> names;
    for (const auto& [name, _] : table) names.push_back(name);
    std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
        const bool aa = a.starts_with("aux"), bb = b.starts_with("aux");
        if (aa != bb) return !aa;
        return a < b;
    });
    m.rows = names;
    std::vector<std::vector<double>> grid;
    for (const auto& name : m.rows) {
        std::vector<double> row;
        for (int c : m.cols) row.push_back(table.at(name).at("C" + std::to_string(c)));
        grid.push_back(std::move(row));
    }
    m.values.push_back(std::move(grid));
    return m;
}

}  // namespace pyrflow
