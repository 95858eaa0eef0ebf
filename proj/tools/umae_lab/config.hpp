#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "umae/dataset.hpp"
#include "umae/masking.hpp"
#include "umae/model.hpp"
#include "umae/train.hpp"

namespace umae::lab {

struct DatasetSection {
  std::string kind = "doc2x2";  // doc2x2 | synthetic | cifar | file
  SyntheticSpec synthetic;
  std::string path;  // cifar batch file or dataset JSON
  long max_records = 5000;
  int patch_side = 4;
  int levels = 4;  // quantization of real data; 0 keeps raw values
};

struct AnalysisSection {
  double lambda = 0.01;
  int k = 0;  // residual rank; 0 means the model's k
  std::vector<double> rho_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::string metric = "average";  // average | max | both
  long pairs_budget = 0;
  std::uint64_t seed = 0;
  std::string pseudo = "identity";  // identity | trained
  long lipschitz_samples = 2000;
};

struct ExperimentConfig {
  DatasetSection dataset;
  MaskFamily mask;
  ModelConfig model;
  std::string checkpoint;  // model JSON to load instead of a fresh init
  TrainConfig train;
  AnalysisSection analysis;
  std::vector<std::string> artifacts;  // inputs of the report subcommand
  std::string output = "out";
};

/// Parses a config document. Unknown keys are errors; missing keys take
/// defaults, except mask.n, model.n and model.s which follow the dataset.
ExperimentConfig parse_config(const nlohmann::json& j);

/// The fully resolved document: every key present, dataset shape filled in.
nlohmann::json to_json(const ExperimentConfig& c);

/// Applies "a.b.c=value"; value is parsed as JSON when it parses, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

Dataset load_dataset(const DatasetSection& d);

/// Fills the shape fields left open by the document and validates everything.
void resolve(ExperimentConfig& c, const Dataset& ds);

}  // namespace umae::lab
