#pragma once

#include <cstddef>
#include <vector>

#include "cosca/autodiff.hpp"
#include "cosca/rng.hpp"
#include "cosca/tensor.hpp"

namespace cosca::losses {

struct ProbPair {
  ad::Tensor p1;  // n x K softmax outputs of the first classifier
  ad::Tensor p2;  // n x K, second classifier, same inputs
};

struct PseudoLabels {
  std::vector<int> labels;        // argmax of p1+p2, ties to the lowest index
  std::vector<double> confidence; // max of p1+p2, in [0, 2]
};

enum class MmdKernel { normalized_mean_sq, rbf_mean };

struct KernelSpec {
  MmdKernel kind = MmdKernel::normalized_mean_sq;
  double sigma = 1.0;
};

ProbPair prob_pair(const ad::Tensor& logits1, const ad::Tensor& logits2);

// mean over the batch of -[log p1(y|x) + log p2(y|x)]; the logits path goes
// through log-softmax so huge logits stay stable
ad::Tensor cross_entropy_source(const ad::Tensor& logits1, const ad::Tensor& logits2,
                                const std::vector<int>& labels);
// same loss straight from probabilities, log arguments clamped at 1e-12
ad::Tensor cross_entropy_from_probs(const ProbPair& probs, const std::vector<int>& labels);

// squared distance between l2-normalized batch-mean features (normalization
// skipped below norm 1e-12); rbf_mean swaps in 2 - 2*k_rbf on those means
ad::Tensor mmd_loss(const ad::Tensor& source_feats, const ad::Tensor& target_feats,
                    const KernelSpec& kernel = {});

// mean over the batch of (1/K) * sum_k |p1_k - p2_k|; range [0, 2/K]
ad::Tensor discrepancy(const ProbPair& probs);

PseudoLabels pseudo_label(const ProbPair& probs);

// same class: squared distance; different: squared hinge on the margin
ad::Tensor siamese_distance(const ad::Tensor& feat_i, const ad::Tensor& feat_j,
                            bool same_class, double margin);

// mean pair loss over source<->target pairs plus mean over unordered
// target<->target pairs; target samples below conf_threshold are left out;
// pair_budget > 0 caps each family at a uniform subsample drawn from pair_rng
ad::Tensor contrastive_loss(const ad::Tensor& source_feats, const std::vector<int>& source_labels,
                            const ad::Tensor& target_feats, const PseudoLabels& target_pseudo,
                            double margin, std::size_t pair_budget = 0,
                            double conf_threshold = 0.0, Rng* pair_rng = nullptr);

}  // namespace cosca::losses
