#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cosca/data.hpp"
#include "cosca/losses.hpp"
#include "cosca/models.hpp"
#include "cosca/rng.hpp"

namespace cosca::train {

enum class Variant : std::uint8_t { source_only, mcd, mcd_mmd, mcd_contras, cosca };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// defaults were tuned once on the rotated-moons benchmark and then frozen;
// they are the configuration the acceptance regression baselines pin down
struct TrainConfig {
  Variant variant = Variant::cosca;
  double lambda1 = 1.0;  // global alignment weight
  double lambda2 = 1.0;  // classifier disagreement weight
  double lambda3 = 1.0;  // class-conditional alignment weight, ramped by omega
  double theta = 2.0;    // ramp sharpness
  int tau = 2;           // classifier steps per outer iteration
  int delta = 2;         // generator steps per outer iteration
  double margin = 1.0;
  int max_epochs = 300;
  int iters_per_epoch = 20;
  std::size_t batch_size_source = 128;
  std::size_t batch_size_target = 128;
  std::vector<std::size_t> g_hidden = {32};
  std::size_t feature_dim = 32;
  std::vector<std::size_t> f_hidden = {32};
  bool tanh_hidden = true;  // tanh instead of relu on hidden and feature layers
  models::OptimizerConfig opt_g{models::OptKind::sgd_momentum, 1e-2};
  models::OptimizerConfig opt_f{models::OptKind::sgd_momentum, 1e-2};
  std::uint64_t seed = 0;
  std::size_t pair_budget = 0;   // 0 keeps every pair
  double conf_threshold = 1.5;   // pseudo-label confidence gate, confidence is in [0, 2]
  bool reuse_batch = false;      // reuse the outer batch for the inner steps
  losses::KernelSpec mmd_kernel;

  void validate() const;
};

struct Lambdas {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
};

// per-variant gating: ablations zero out the terms they drop so skipped work
// collapses bit-exactly onto the smaller method
Lambdas effective_lambdas(const TrainConfig& cfg);

// ramp weight exp(-theta * (1 - t/max_epochs)) * lambda3 for 1-based epoch t;
// equals lambda3 exactly at t == max_epochs
double omega(int t, int max_epochs, double theta, double lambda3);

struct StepLosses {
  double ce = 0.0;
  double mmd = 0.0;
  double adv = 0.0;
  double contras = 0.0;
};

struct IterRecord {
  long long iter = 0;  // 1-based outer iteration, global across epochs
  double loss_ce = 0.0;
  double loss_mmd = 0.0;
  double loss_adv = 0.0;
  double loss_contras = 0.0;
  double omega = 0.0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double source_acc = 0.0;
  double target_acc = -1.0;        // -1 when no target truth was given
  double pseudo_label_acc = -1.0;  // agreement of argmax(p1+p2) with target truth
};

struct RunRecord {
  std::vector<IterRecord> iters;
  std::vector<EpochRecord> epochs;
};

struct EvalResult {
  double accuracy_f1 = 0.0;
  double accuracy_f2 = 0.0;
  double accuracy_ensemble = 0.0;
};

// thrown when a loss turns non-finite; the message names the offending term
struct NanAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainerState {
  TrainConfig cfg;
  Lambdas eff;
  models::OptState opt_g;
  models::OptState opt_f;  // covers f1 then f2 parameters
  Rng pair_rng;
  TrainerState() : pair_rng(0) {}
};

TrainerState make_state(const TrainConfig& cfg);

// minimize ce + l1*mmd over G, F1, F2
StepLosses step_a(TrainerState& st, models::ModelTriple& model, const data::LabeledBatch& src,
                  const data::UnlabeledBatch& tgt);

// minimize ce - l2*disc over F1, F2 with G held fixed; include_ce=false isolates
// the maximized disagreement term for testing
double step_b(TrainerState& st, models::ModelTriple& model, const data::LabeledBatch& src,
              const data::UnlabeledBatch& tgt, bool include_ce = true);

// minimize l2*disc + omega(epoch)*contrastive over G with F1, F2 held fixed;
// pseudo-labels come from the current predictions and act as constants
StepLosses step_c(TrainerState& st, models::ModelTriple& model, const data::LabeledBatch& src,
                  const data::UnlabeledBatch& tgt, int epoch);

enum class StepKind : std::uint8_t { a, b, c };
enum class StepPhase : std::uint8_t { before, after };
using StepObserver =
    std::function<void(StepKind, StepPhase, const models::ModelTriple&, long long)>;

// per-head argmax accuracy plus the ensemble (argmax of p1+p2, ties to the
// lowest class index)
EvalResult evaluate(const models::ModelTriple& model, const data::Dataset& ds,
                    const std::vector<int>& labels);

struct TrainOutput {
  models::ModelTriple model;
  RunRecord record;
};

// full alternating run; datasets must be standardized, target unlabeled;
// target_truth may be empty (accuracy fields then hold -1)
TrainOutput train(const TrainConfig& cfg, const data::Dataset& source,
                  const data::Dataset& target, const std::vector<int>& target_truth = {},
                  const StepObserver& observer = nullptr);

}  // namespace cosca::train
