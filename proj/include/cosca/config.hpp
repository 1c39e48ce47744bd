#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "cosca/data.hpp"
#include "cosca/trainer.hpp"

namespace cosca::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DatasetKind : std::uint8_t { moons, blobs, csv };

const char* dataset_kind_name(DatasetKind k);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::moons;
  std::uint64_t seed = 0;
  // moons
  std::size_t n_per_domain = 1000;
  double rotation_deg = 35.0;
  double noise_sd = 0.1;
  // blobs
  int num_classes = 3;
  std::size_t n_per_class = 300;
  double shift_x = 1.0;
  double shift_y = -0.5;
  double scale = 1.2;
  // csv
  std::string source_csv;
  std::string target_csv;
  std::string target_truth_csv;
};

struct OutputConfig {
  std::string dir = "runs/out";
  bool export_embeddings = false;
  bool save_checkpoint = true;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  train::TrainConfig train;
  OutputConfig output;
};

// ini-style sections [dataset] / [train] / [output] with key = value lines;
// unknown or duplicate keys fail fast naming the file and line
ExperimentConfig parse_config(const std::string& text, const std::string& path);
ExperimentConfig load_config(const std::string& path);

// canonical form: fixed key order, doubles at full precision; reparsing
// reproduces the config exactly
std::string serialize_config(const ExperimentConfig& cfg);

data::DomainShiftData build_dataset(const DatasetSpec& spec);

}  // namespace cosca::config
