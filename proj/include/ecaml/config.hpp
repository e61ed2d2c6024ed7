#pragma once

// JSON run configuration. Sections mlp, train, loss, ec, data and eval map
// onto the typed configs; every field is optional and unknown keys are
// rejected with the offending path (e.g. "train.lrr").

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecaml/experiments.hpp"
#include "ecaml/mlp.hpp"
#include "ecaml/synthetic.hpp"

namespace ecaml {

// Grids for the ablation commands; they live in the eval section.
struct AblationGrid {
  std::vector<double> lambdas{0.0, 1.0, 10.0, 100.0, 1000.0, 10000.0};
  std::vector<std::size_t> dims{8, 16, 32};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct RunConfig {
  MlpConfig mlp;
  TrainConfig train;
  SynthConfig data;
  AblationGrid grid;

  void validate() const;
};

// Throws ConfigError("<path>: <reason>").
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& cfg);

LossKind parse_loss_kind(const std::string& name);

}  // namespace ecaml
