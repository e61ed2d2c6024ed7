#pragma once

// On-disk layout of one training run:
//   history.csv   one row per evaluation point
//   summary.json  final metrics, config echo, seed
//   weights.csv   final parameters, one value per row

#include <filesystem>

#include <json.hpp>

#include "ecaml/config.hpp"
#include "ecaml/experiments.hpp"
#include "ecaml/mlp.hpp"

namespace ecaml {

// Creates `dir`. An existing non-empty directory is an IoError unless
// `force` is set, in which case it is emptied first.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

void write_history_csv(const std::filesystem::path& path, const RunHistory& history);
std::vector<EvalRecord> read_history_csv(const std::filesystem::path& path);

// Header "layer,tensor,row,col,value"; tensor is "weight" or "bias".
void save_weights_csv(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_weights_csv(const std::filesystem::path& path, bool normalize_output);

nlohmann::json metrics_json(const FinalMetrics& m);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

// history.csv, weights.csv and summary.json for one finished run.
void write_run(const std::filesystem::path& dir, const RunConfig& cfg, const TrainResult& result);

}  // namespace ecaml
