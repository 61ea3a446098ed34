#pragma once

#include <string>
#include <vector>

#include "pyrflow/model.hpp"
#include "pyrflow/scene.hpp"

namespace pyrflow {

// Gradient norms from each loss source to each backbone feature: the
// executable form of the where-does-supervision-reach question. In
// direct-path mode the inter-stage backbone edges are gradient-blocked, so an
// entry is nonzero only if the builder routes that feature into that loss's
// level. Full-path mode measures the unblocked graph.
struct SupervisionMatrix {
    std::string mode;     // "direct-path" | "full-path"
    std::string builder;  // builder name from the model config
    std::vector<uint64_t> seeds;
    std::vector<std::string> rows;  // "L2".."L5" and optionally "aux2".."aux4"
    std::vector<int> cols;          // backbone feature indices 2..5

    // values[seed][row][col] = ||d loss / d C_col||_2
    std::vector<std::vector<std::vector<double>>> values;

    double mean(int row, int col) const;
    double median(int row, int col) const;
};

SupervisionMatrix supervision_matrix(const ModelConfig& cfg, const SceneSpec& scene,
                                     const std::vector<uint64_t>& seeds, bool direct_path);

// JSON document {mode, builder, seeds[], cells[{loss, feature, norm}],
// config_digest} plus a rendered text table. norm is the seed mean.
void write_flow_report(const SupervisionMatrix& m, const std::string& config_digest,
                       const std::string& json_path, const std::string& table_path);

// round-trip: reads a document written by write_flow_report (cells hold seed
// means, so the parsed matrix has one synthetic "seed" entry)
SupervisionMatrix parse_flow_report(const std::string& json_path);

}  // namespace pyrflow
