#include "cosca/losses.hpp"

#include <stdexcept>

namespace cosca::losses {

namespace {

void check_labels(const std::vector<int>& labels, std::size_t n, std::size_t num_classes,
                  const char* op) {
  if (labels.size() != n)
    throw std::invalid_argument(std::string(op) + ": one label per row required");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw std::invalid_argument(std::string(op) + ": label out of range");
}

void check_prob_pair(const ProbPair& probs, const char* op) {
  if (probs.p1.rank() != 2 || probs.p2.rank() != 2 || probs.p1.shape != probs.p2.shape)
    throw std::invalid_argument(std::string(op) + ": probability matrices must match");
  if (probs.p1.data.empty())
    throw std::invalid_argument(std::string(op) + ": empty batch");
}

// normalized mean embedding of one domain's features
ad::Tensor normalized_mean(const ad::Tensor& feats) {
  ad::Tensor g = ad::mean_axis(feats, 0);
  ad::Tensor norm = ad::l2_norm(g);
  if (norm.value() < 1e-12) return g;
  return ad::div_by_scalar_tensor(g, norm);
}

}  // namespace

ProbPair prob_pair(const ad::Tensor& logits1, const ad::Tensor& logits2) {
  if (logits1.rank() != 2 || logits2.rank() != 2 || logits1.shape != logits2.shape)
    throw std::invalid_argument("prob_pair: logit matrices must match");
  return ProbPair{ad::softmax_rows(logits1), ad::softmax_rows(logits2)};
}

ad::Tensor cross_entropy_source(const ad::Tensor& logits1, const ad::Tensor& logits2,
                                const std::vector<int>& labels) {
  if (logits1.rank() != 2 || logits2.rank() != 2 || logits1.shape != logits2.shape)
    throw std::invalid_argument("cross_entropy_source: logit matrices must match");
  if (logits1.data.empty())
    throw std::invalid_argument("cross_entropy_source: empty batch");
  check_labels(labels, logits1.rows(), logits1.cols(), "cross_entropy_source");
  ad::Tensor nll1 = ad::sub(ad::logsumexp_rows(logits1), ad::gather_rows(logits1, labels));
  ad::Tensor nll2 = ad::sub(ad::logsumexp_rows(logits2), ad::gather_rows(logits2, labels));
  return ad::mean(ad::add(nll1, nll2));
}

ad::Tensor cross_entropy_from_probs(const ProbPair& probs, const std::vector<int>& labels) {
  check_prob_pair(probs, "cross_entropy_from_probs");
  check_labels(labels, probs.p1.rows(), probs.p1.cols(), "cross_entropy_from_probs");
  ad::Tensor lp1 = ad::log(ad::max_with_scalar(ad::gather_rows(probs.p1, labels), 1e-12));
  ad::Tensor lp2 = ad::log(ad::max_with_scalar(ad::gather_rows(probs.p2, labels), 1e-12));
  return ad::neg(ad::mean(ad::add(lp1, lp2)));
}

ad::Tensor mmd_loss(const ad::Tensor& source_feats, const ad::Tensor& target_feats,
                    const KernelSpec& kernel) {
  if (source_feats.rank() != 2 || target_feats.rank() != 2 ||
      source_feats.cols() != target_feats.cols())
    throw std::invalid_argument("mmd_loss: feature dimensions do not match");
  if (source_feats.data.empty() || target_feats.data.empty())
    throw std::invalid_argument("mmd_loss: empty batch");
  ad::Tensor diff = ad::sub(normalized_mean(source_feats), normalized_mean(target_feats));
  ad::Tensor dist_sq = ad::sum(ad::square(diff));
  if (kernel.kind == MmdKernel::normalized_mean_sq) return dist_sq;
  const double inv = -1.0 / (2.0 * kernel.sigma * kernel.sigma);
  return ad::add_scalar(ad::mul_scalar(ad::exp(ad::mul_scalar(dist_sq, inv)), -2.0), 2.0);
}

ad::Tensor discrepancy(const ProbPair& probs) {
  check_prob_pair(probs, "discrepancy");
  const double inv = 1.0 / static_cast<double>(probs.p1.data.size());
  return ad::mul_scalar(ad::sum(ad::abs(ad::sub(probs.p1, probs.p2))), inv);
}

PseudoLabels pseudo_label(const ProbPair& probs) {
  check_prob_pair(probs, "pseudo_label");
  const std::size_t n = probs.p1.rows(), k = probs.p1.cols();
  PseudoLabels out;
  out.labels.resize(n);
  out.confidence.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    double best_val = probs.p1.data[i * k] + probs.p2.data[i * k];
    for (std::size_t j = 1; j < k; ++j) {
      const double v = probs.p1.data[i * k + j] + probs.p2.data[i * k + j];
      if (v > best_val) {
        best_val = v;
        best = static_cast<int>(j);
      }
    }
    out.labels[i] = best;
    out.confidence[i] = best_val;
  }
  return out;
}

ad::Tensor siamese_distance(const ad::Tensor& feat_i, const ad::Tensor& feat_j,
                            bool same_class, double margin) {
  if (!(margin > 0.0)) throw std::invalid_argument("siamese_distance: margin must be positive");
  if (feat_i.shape != feat_j.shape)
    throw std::invalid_argument("siamese_distance: feature shapes must match");
  ad::Tensor delta = ad::sub(feat_i, feat_j);
  if (same_class) return ad::sum(ad::square(delta));
  ad::Tensor hinge = ad::max_with_scalar(ad::add_scalar(ad::neg(ad::l2_norm(delta)), margin), 0.0);
  return ad::square(hinge);
}

namespace {

// keep the first `budget` of a uniform draw without replacement; order within
// the kept set follows the draw so the result is deterministic per rng state
std::vector<kernels::PairTerm> subsample(std::vector<kernels::PairTerm> pairs,
                                         std::size_t budget, Rng* rng) {
  if (budget == 0 || pairs.size() <= budget) return pairs;
  if (rng == nullptr)
    throw std::invalid_argument("contrastive_loss: pair_budget needs an rng");
  for (std::size_t i = 0; i < budget; ++i) {
    const std::size_t j = i + rng->below(pairs.size() - i);
    std::swap(pairs[i], pairs[j]);
  }
  pairs.resize(budget);
  return pairs;
}

}  // namespace

ad::Tensor contrastive_loss(const ad::Tensor& source_feats, const std::vector<int>& source_labels,
                            const ad::Tensor& target_feats, const PseudoLabels& target_pseudo,
                            double margin, std::size_t pair_budget, double conf_threshold,
                            Rng* pair_rng) {
  if (source_feats.rank() != 2 || target_feats.rank() != 2 ||
      source_feats.cols() != target_feats.cols())
    throw std::invalid_argument("contrastive_loss: feature dimensions do not match");
  if (source_feats.data.empty() || target_feats.data.empty())
    throw std::invalid_argument("contrastive_loss: empty batch");
  const std::size_t ns = source_feats.rows(), nt = target_feats.rows();
  if (source_labels.size() != ns)
    throw std::invalid_argument("contrastive_loss: one source label per row required");
  if (target_pseudo.labels.size() != nt || target_pseudo.confidence.size() != nt)
    throw std::invalid_argument("contrastive_loss: pseudo labels do not cover the target batch");

  std::vector<char> keep(nt);
  for (std::size_t j = 0; j < nt; ++j)
    keep[j] = target_pseudo.confidence[j] >= conf_threshold ? 1 : 0;

  std::vector<kernels::PairTerm> st;
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nt; ++j)
      if (keep[j])
        st.push_back({static_cast<int>(i), static_cast<int>(j),
                      source_labels[i] == target_pseudo.labels[j]});
  std::vector<kernels::PairTerm> tt;
  for (std::size_t i = 0; i < nt; ++i)
    for (std::size_t j = i + 1; j < nt; ++j)
      if (keep[i] && keep[j])
        tt.push_back({static_cast<int>(i), static_cast<int>(j),
                      target_pseudo.labels[i] == target_pseudo.labels[j]});
  st = subsample(std::move(st), pair_budget, pair_rng);
  tt = subsample(std::move(tt), pair_budget, pair_rng);

  ad::Tensor total = ad::Tensor::scalar(0.0);
  bool have_term = false;
  if (!st.empty()) {
    total = ad::mul_scalar(ad::pair_loss_sum(source_feats, target_feats, st, margin),
                           1.0 / static_cast<double>(st.size()));
    have_term = true;
  }
  if (!tt.empty()) {
    ad::Tensor term = ad::mul_scalar(ad::pair_loss_sum(target_feats, target_feats, tt, margin),
                                     1.0 / static_cast<double>(tt.size()));
    total = have_term ? ad::add(total, term) : term;
    have_term = true;
  }
  return total;
}

}  // namespace cosca::losses
