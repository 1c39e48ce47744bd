#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cosca/rng.hpp"
#include "cosca/tensor.hpp"

namespace cosca::data {

enum class DomainTag { source, target };

struct Dataset {
  ad::Tensor inputs;        // N x d
  std::vector<int> labels;  // empty for unlabeled data
  DomainTag domain_tag = DomainTag::source;
  int num_classes = 0;
  bool standardized = false;

  std::size_t size() const { return inputs.rows(); }
  std::size_t dim() const { return inputs.cols(); }
  bool has_labels() const { return !labels.empty(); }
};

// target labels ride along for evaluation only and never enter the Dataset
struct DomainShiftData {
  Dataset source;
  Dataset target;
  std::vector<int> target_truth;
};

// source: two interleaved moons; target: a fresh draw rotated about its own
// centroid
DomainShiftData gen_two_moons_shift(std::size_t n_per_domain, double rotation_deg,
                                    double noise_sd, std::uint64_t seed);

// isotropic Gaussian classes on a circle of radius 3; the target's means are
// translated by mean_shift and its features scaled
DomainShiftData gen_gaussian_blobs_shift(int num_classes, std::size_t n_per_class,
                                         const std::vector<double>& mean_shift, double scale,
                                         std::uint64_t seed);

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> sd;  // floored at 1e-8
};

// per-feature z-score from source statistics, applied to both domains in
// place; a second application would skew the data, so it throws instead
StandardizationStats standardize(Dataset& source, Dataset& target);
void apply_standardization(Dataset& ds, const StandardizationStats& stats);

struct LabeledBatch {
  ad::Tensor inputs;
  std::vector<int> labels;
};

struct UnlabeledBatch {
  ad::Tensor inputs;
};

// without-replacement per-class pools, reshuffled when exhausted; every batch
// holds near-equal counts of min(K, classes_per_batch) distinct classes
class ClassAwareSampler {
 public:
  // classes_per_batch 0 means all classes every batch
  ClassAwareSampler(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                    std::size_t classes_per_batch = 0);
  LabeledBatch next();

 private:
  std::size_t draw_from_pool(std::size_t cls);
  const Dataset* ds_;
  std::size_t batch_size_;
  std::size_t classes_per_batch_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> pools_;
  std::vector<std::size_t> pool_pos_;
};

class UniformSampler {
 public:
  UniformSampler(const Dataset& ds, std::size_t batch_size, std::uint64_t seed);
  UnlabeledBatch next();

 private:
  const Dataset* ds_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> pool_;
  std::size_t pos_ = 0;
};

// header x0,...,x{d-1}[,label]; 17 significant digits
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);
std::vector<int> load_labels_csv(const std::string& path);
void save_labels_csv(const std::vector<int>& labels, const std::string& path);

}  // namespace cosca::data
