#include "cosca/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <vector>

#include "cosca/losses.hpp"
#include "cosca/models.hpp"
#include "cosca/rng.hpp"
#include "cosca/tensor.hpp"

namespace cosca::gradcheck {

namespace {

constexpr double kStep = 1e-5;
constexpr double kThreshold = 1e-4;

struct Instance {
  models::ModelTriple model;
  ad::Tensor xs;  // 4 x 2 source inputs
  std::vector<int> ys;
  ad::Tensor xt;  // 3 x 2 target inputs
};

Instance make_instance(std::uint64_t seed) {
  Instance inst;
  models::ArchitectureSpec spec;
  spec.g_dims = {2, 5, 4};
  spec.f_dims = {4, 4, 3};
  inst.model = models::init_model(spec, mix_seed(seed, 0xA), true);
  Rng rng(mix_seed(seed, 0xB));
  std::vector<double> xs(4 * 2), xt(3 * 2);
  for (double& v : xs) v = rng.normal();
  for (double& v : xt) v = rng.normal();
  inst.xs = ad::Tensor::matrix(4, 2, std::move(xs));
  inst.xt = ad::Tensor::matrix(3, 2, std::move(xt));
  inst.ys.resize(4);
  for (int& y : inst.ys) y = static_cast<int>(rng.below(3));
  return inst;
}

std::vector<double*> flat_params(std::vector<models::Mlp*> nets) {
  std::vector<double*> out;
  for (models::Mlp* net : nets)
    for (ad::Tensor* t : models::parameters(*net))
      for (double& x : t->data) out.push_back(&x);
  return out;
}

std::vector<double> flat_grads(const ad::Tape& tape, const std::vector<const models::Mlp*>& traced) {
  std::vector<double> out;
  for (const models::Mlp* net : traced) {
    const auto per_tensor = models::collect_grads(tape, *net);
    for (const auto& g : per_tensor) out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

// one gradient comparison: analytic via the tape, numeric via central
// differences with the loss recomputed from plain forwards
double worst_rel_err(const std::vector<double*>& params, const std::vector<double>& analytic,
                     const std::function<double()>& value) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + kStep;
    const double up = value();
    *params[k] = saved - kStep;
    const double down = value();
    *params[k] = saved;
    const double fd = (up - down) / (2.0 * kStep);
    const double denom = std::max(std::abs(analytic[k]), std::abs(fd));
    if (denom < 1e-7) continue;
    worst = std::max(worst, std::abs(analytic[k] - fd) / denom);
  }
  return worst;
}

double check_cross_entropy(std::uint64_t seed, bool corrupt) {
  auto inst = make_instance(seed);
  auto& m = inst.model;

  ad::Tape tape;
  auto tg = models::trace(tape, m.g);
  auto tf1 = models::trace(tape, m.f1);
  auto tf2 = models::trace(tape, m.f2);
  auto feats = models::forward_features(tg, inst.xs);
  auto loss = losses::cross_entropy_source(models::forward_logits(tf1, feats),
                                           models::forward_logits(tf2, feats), inst.ys);
  tape.backward(loss);
  auto analytic = flat_grads(tape, {&tg, &tf1, &tf2});
  if (corrupt) analytic[0] += 0.5;

  return worst_rel_err(flat_params({&m.g, &m.f1, &m.f2}), analytic, [&] {
    auto f = models::forward_features(m.g, inst.xs);
    return losses::cross_entropy_source(models::forward_logits(m.f1, f),
                                        models::forward_logits(m.f2, f), inst.ys)
        .value();
  });
}

double check_mmd(std::uint64_t seed, bool alt_kernel) {
  auto inst = make_instance(seed);
  auto& m = inst.model;
  losses::KernelSpec kernel;
  if (alt_kernel) kernel.kind = losses::MmdKernel::rbf_mean;

  ad::Tape tape;
  auto tg = models::trace(tape, m.g);
  auto loss = losses::mmd_loss(models::forward_features(tg, inst.xs),
                               models::forward_features(tg, inst.xt), kernel);
  tape.backward(loss);
  auto analytic = flat_grads(tape, {&tg});

  return worst_rel_err(flat_params({&m.g}), analytic, [&] {
    return losses::mmd_loss(models::forward_features(m.g, inst.xs),
                            models::forward_features(m.g, inst.xt), kernel)
        .value();
  });
}

// |p1 - p2| has a kink wherever the classifiers agree exactly, so instances
// whose probability gaps come close are skipped in favor of a reseeded one
bool discrepancy_too_close(const models::ModelTriple& m, const ad::Tensor& xt) {
  auto feats = models::forward_features(m.g, xt);
  auto probs = losses::prob_pair(models::forward_logits(m.f1, feats),
                                 models::forward_logits(m.f2, feats));
  for (std::size_t i = 0; i < probs.p1.size(); ++i)
    if (std::abs(probs.p1.data[i] - probs.p2.data[i]) < 1e-3) return true;
  return false;
}

double check_discrepancy(std::uint64_t seed) {
  Instance inst;
  for (int attempt = 0;; ++attempt) {
    inst = make_instance(mix_seed(seed, 0x5000 + attempt));
    if (!discrepancy_too_close(inst.model, inst.xt) || attempt >= 50) break;
  }
  auto& m = inst.model;

  ad::Tape tape;
  auto tg = models::trace(tape, m.g);
  auto tf1 = models::trace(tape, m.f1);
  auto tf2 = models::trace(tape, m.f2);
  auto feats = models::forward_features(tg, inst.xt);
  auto loss = losses::discrepancy(losses::prob_pair(models::forward_logits(tf1, feats),
                                                    models::forward_logits(tf2, feats)));
  tape.backward(loss);
  auto analytic = flat_grads(tape, {&tg, &tf1, &tf2});

  return worst_rel_err(flat_params({&m.g, &m.f1, &m.f2}), analytic, [&] {
    auto f = models::forward_features(m.g, inst.xt);
    return losses::discrepancy(losses::prob_pair(models::forward_logits(m.f1, f),
                                                 models::forward_logits(m.f2, f)))
        .value();
  });
}

double check_siamese(std::uint64_t seed, bool same_class) {
  auto inst = make_instance(seed);
  auto& m = inst.model;

  std::vector<double> xi(inst.xs.data.begin(), inst.xs.data.begin() + 2);
  std::vector<double> xj(inst.xs.data.begin() + 2, inst.xs.data.begin() + 4);
  const auto row_i = ad::Tensor::matrix(1, 2, std::move(xi));
  const auto row_j = ad::Tensor::matrix(1, 2, std::move(xj));

  // margin chosen relative to the base distance keeps the hinge strictly
  // active and far from its kink
  double margin = 1.0;
  if (!same_class) {
    auto fi = models::forward_features(m.g, row_i);
    auto fj = models::forward_features(m.g, row_j);
    double dist_sq = 0.0;
    for (std::size_t k = 0; k < fi.size(); ++k) {
      const double dki = fi.data[k] - fj.data[k];
      dist_sq += dki * dki;
    }
    margin = 2.0 * std::sqrt(dist_sq) + 0.5;
  }

  ad::Tape tape;
  auto tg = models::trace(tape, m.g);
  auto loss = losses::siamese_distance(models::forward_features(tg, row_i),
                                       models::forward_features(tg, row_j), same_class, margin);
  tape.backward(loss);
  auto analytic = flat_grads(tape, {&tg});

  return worst_rel_err(flat_params({&m.g}), analytic, [&] {
    return losses::siamese_distance(models::forward_features(m.g, row_i),
                                    models::forward_features(m.g, row_j), same_class, margin)
        .value();
  });
}

bool contrastive_near_kink(const models::ModelTriple& m, const Instance& inst,
                           const losses::PseudoLabels& pseudo, double margin) {
  auto sf = models::forward_features(m.g, inst.xs);
  auto tf = models::forward_features(m.g, inst.xt);
  auto gap = [&](const ad::Tensor& a, std::size_t i, const ad::Tensor& b, std::size_t j) {
    double dist_sq = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double d = a.at(i, k) - b.at(j, k);
      dist_sq += d * d;
    }
    const double dist = std::sqrt(dist_sq);
    return std::min(dist, std::abs(dist - margin));
  };
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (inst.ys[i] != pseudo.labels[j] && gap(sf, i, tf, j) < 1e-2) return true;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j)
      if (pseudo.labels[i] != pseudo.labels[j] && gap(tf, i, tf, j) < 1e-2) return true;
  return false;
}

double check_contrastive(std::uint64_t seed) {
  const double margin = 1.0;
  Instance inst;
  losses::PseudoLabels pseudo;
  for (int attempt = 0;; ++attempt) {
    inst = make_instance(mix_seed(seed, 0x6000 + attempt));
    auto tf = models::forward_features(inst.model.g, inst.xt);
    pseudo = losses::pseudo_label(losses::prob_pair(models::forward_logits(inst.model.f1, tf),
                                                    models::forward_logits(inst.model.f2, tf)));
    if (!contrastive_near_kink(inst.model, inst, pseudo, margin) || attempt >= 50) break;
  }
  auto& m = inst.model;

  // the pseudo-labels are constants of the loss: they stay pinned to the base
  // parameters during both the analytic pass and every perturbed evaluation
  ad::Tape tape;
  auto tg = models::trace(tape, m.g);
  auto loss = losses::contrastive_loss(models::forward_features(tg, inst.xs), inst.ys,
                                       models::forward_features(tg, inst.xt), pseudo, margin);
  tape.backward(loss);
  auto analytic = flat_grads(tape, {&tg});

  return worst_rel_err(flat_params({&m.g}), analytic, [&] {
    return losses::contrastive_loss(models::forward_features(m.g, inst.xs), inst.ys,
                                    models::forward_features(m.g, inst.xt), pseudo, margin)
        .value();
  });
}

}  // namespace

bool run_gradcheck(std::ostream& out, std::uint64_t seed, int instances_per_loss, bool corrupt) {
  struct Row {
    const char* name;
    std::function<double(std::uint64_t, int)> check;
  };
  const Row rows[] = {
      {"cross_entropy",
       [&](std::uint64_t s, int i) { return check_cross_entropy(s, corrupt && i == 0); }},
      {"mmd", [](std::uint64_t s, int i) { return check_mmd(s, i % 2 == 1); }},
      {"discrepancy", [](std::uint64_t s, int) { return check_discrepancy(s); }},
      {"siamese_distance", [](std::uint64_t s, int i) { return check_siamese(s, i % 2 == 0); }},
      {"contrastive", [](std::uint64_t s, int) { return check_contrastive(s); }},
  };

  bool all_ok = true;
  for (const Row& row : rows) {
    double worst = 0.0;
    for (int i = 0; i < instances_per_loss; ++i) {
      const std::uint64_t inst_seed = mix_seed(seed, 0xC0 + static_cast<std::uint64_t>(i));
      worst = std::max(worst, row.check(inst_seed, i));
    }
    const bool ok = worst <= kThreshold;
    all_ok = all_ok && ok;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-18s worst rel err %.3e  %s\n", row.name, worst,
                  ok ? "ok" : "FAIL");
    out << buf;
  }
  return all_ok;
}

}  // namespace cosca::gradcheck
