#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cosca/data.hpp"
#include "cosca/models.hpp"
#include "cosca/trainer.hpp"

namespace cosca::report {

// one json object per line: each epoch's iteration records followed by the
// epoch record, keys alphabetical, so identical runs give identical bytes
void write_metrics_jsonl(const std::string& path, const train::RunRecord& rec,
                         int iters_per_epoch);

struct FinalSummary {
  std::string variant;
  std::uint64_t seed = 0;
  train::IterRecord last_iter;
  train::EpochRecord last_epoch;
  train::EvalResult target_eval;  // pass -1 accuracies when no target truth exists
};

void write_final_json(const std::string& path, const FinalSummary& s);

struct Pca2 {
  std::vector<double> mean;   // per-feature mean of the input rows
  std::vector<double> axis0;  // unit vector, largest variance
  std::vector<double> axis1;  // unit vector, second largest
  std::vector<double> projected;  // n x 2 row-major, centered projections
};

// top-2 principal axes via cyclic jacobi on the covariance; the sign of each
// axis is fixed so its largest-magnitude loading is positive
Pca2 pca2(const ad::Tensor& features);

void write_embeddings_csv(const std::string& path, const models::ModelTriple& model,
                          const data::Dataset& source, const data::Dataset& target,
                          const std::vector<int>& target_truth);

struct AblationCell {
  std::string variant;
  std::uint64_t seed = 0;
  train::EvalResult eval;
  bool failed = false;
};

// '#'-prefixed lines with the median and iqr per variant over finished cells
std::string ablation_summary(const std::vector<AblationCell>& cells);

// per-cell rows followed by the summary block
void write_ablation_csv(const std::string& path, const std::vector<AblationCell>& cells);

double median(std::vector<double> v);
double iqr(std::vector<double> v);

}  // namespace cosca::report
