#pragma once

#include <string>

#include "pyrflow/config.hpp"
#include "pyrflow/trainer.hpp"

namespace pyrflow {

// Text checkpoint: "name shape_csv v0 v1 ..." per parameter, full precision.
void save_checkpoint(const ParamStore& params, const std::string& path);
void load_checkpoint(ParamStore& params, const std::string& path);

// report.json (config_digest, seed, steps, curves[], ap{...}, wall_time_s)
// and metrics.csv (header + one row per evaluation step). wall_time_s is 0.0
// unless train.report_wall_time is set, so default outputs are byte-stable.
void write_train_report(const RunConfig& cfg, const TrainResult& result,
                        const std::string& out_dir);

std::string report_json_text(const RunConfig& cfg, const TrainResult& result);
std::string metrics_csv_text(const TrainResult& result);

}  // namespace pyrflow
