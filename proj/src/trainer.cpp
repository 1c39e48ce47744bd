#include "cosca/trainer.hpp"

#include <cmath>
#include <stdexcept>

namespace cosca::train {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::source_only: return "source_only";
    case Variant::mcd: return "mcd";
    case Variant::mcd_mmd: return "mcd_mmd";
    case Variant::mcd_contras: return "mcd_contras";
    case Variant::cosca: return "cosca";
  }
  throw std::logic_error("variant_name: bad enum value");
}

Variant variant_from_name(const std::string& name) {
  if (name == "source_only") return Variant::source_only;
  if (name == "mcd") return Variant::mcd;
  if (name == "mcd_mmd") return Variant::mcd_mmd;
  if (name == "mcd_contras") return Variant::mcd_contras;
  if (name == "cosca") return Variant::cosca;
  throw std::invalid_argument("unknown variant: " + name);
}

void TrainConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
    throw std::invalid_argument("train config: loss weights must be nonnegative");
  if (theta < 0.0) throw std::invalid_argument("train config: theta must be nonnegative");
  if (tau < 1 || delta < 1)
    throw std::invalid_argument("train config: inner step counts must be at least 1");
  if (!(margin > 0.0)) throw std::invalid_argument("train config: margin must be positive");
  if (max_epochs < 1 || iters_per_epoch < 1)
    throw std::invalid_argument("train config: epoch and iteration counts must be at least 1");
  if (batch_size_source == 0 || batch_size_target == 0)
    throw std::invalid_argument("train config: batch sizes must be positive");
  if (feature_dim == 0) throw std::invalid_argument("train config: feature_dim must be positive");
  for (std::size_t h : g_hidden)
    if (h == 0) throw std::invalid_argument("train config: zero-width generator layer");
  for (std::size_t h : f_hidden)
    if (h == 0) throw std::invalid_argument("train config: zero-width classifier layer");
  if (conf_threshold < 0.0 || conf_threshold > 2.0)
    throw std::invalid_argument("train config: conf_threshold must lie in [0, 2]");
  if (!(opt_g.learning_rate > 0.0) || !(opt_f.learning_rate > 0.0))
    throw std::invalid_argument("train config: learning rates must be positive");
  if (!(mmd_kernel.sigma > 0.0))
    throw std::invalid_argument("train config: mmd sigma must be positive");
}

Lambdas effective_lambdas(const TrainConfig& cfg) {
  switch (cfg.variant) {
    case Variant::source_only: return {0.0, 0.0, 0.0};
    case Variant::mcd: return {0.0, cfg.lambda2, 0.0};
    case Variant::mcd_mmd: return {cfg.lambda1, cfg.lambda2, 0.0};
    case Variant::mcd_contras: return {0.0, cfg.lambda2, cfg.lambda3};
    case Variant::cosca: return {cfg.lambda1, cfg.lambda2, cfg.lambda3};
  }
  throw std::logic_error("effective_lambdas: bad enum value");
}

double omega(int t, int max_epochs, double theta, double lambda3) {
  if (max_epochs <= 0) throw std::invalid_argument("omega: max_epochs must be positive");
  const double frac = static_cast<double>(t) / static_cast<double>(max_epochs);
  return std::exp(-theta * (1.0 - frac)) * lambda3;
}

TrainerState make_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainerState st;
  st.cfg = cfg;
  st.eff = effective_lambdas(cfg);
  st.opt_g.cfg = cfg.opt_g;
  st.opt_f.cfg = cfg.opt_f;
  st.pair_rng = Rng(mix_seed(cfg.seed, 0x14));
  return st;
}

namespace {

void check_finite(const ad::Tensor& loss, const char* term) {
  if (!std::isfinite(loss.value())) throw NanAbort(std::string("non-finite ") + term);
}

std::vector<ad::Tensor*> classifier_params(models::ModelTriple& m) {
  auto p = models::parameters(m.f1);
  auto p2 = models::parameters(m.f2);
  p.insert(p.end(), p2.begin(), p2.end());
  return p;
}

std::vector<std::vector<double>> classifier_grads(const ad::Tape& tape, const models::Mlp& tf1,
                                                  const models::Mlp& tf2) {
  auto g = models::collect_grads(tape, tf1);
  auto g2 = models::collect_grads(tape, tf2);
  for (auto& v : g2) g.push_back(std::move(v));
  return g;
}

}  // namespace

StepLosses step_a(TrainerState& st, models::ModelTriple& model, const data::LabeledBatch& src,
                  const data::UnlabeledBatch& tgt) {
  ad::Tape tape;
  auto tg = models::trace(tape, model.g);
  auto tf1 = models::trace(tape, model.f1);
  auto tf2 = models::trace(tape, model.f2);

  auto src_feats = models::forward_features(tg, src.inputs);
  auto ce = losses::cross_entropy_source(models::forward_logits(tf1, src_feats),
                                         models::forward_logits(tf2, src_feats), src.labels);
  check_finite(ce, "loss_ce");

  StepLosses out;
  out.ce = ce.value();
  ad::Tensor loss = ce;
  if (st.eff.l1 != 0.0) {
    auto tgt_feats = models::forward_features(tg, tgt.inputs);
    auto mmd = losses::mmd_loss(src_feats, tgt_feats, st.cfg.mmd_kernel);
    check_finite(mmd, "loss_mmd");
    out.mmd = mmd.value();
    loss = ad::add(loss, ad::mul_scalar(mmd, st.eff.l1));
  }
  tape.backward(loss);
  st.opt_g.apply(models::parameters(model.g), models::collect_grads(tape, tg));
  st.opt_f.apply(classifier_params(model), classifier_grads(tape, tf1, tf2));
  return out;
}

double step_b(TrainerState& st, models::ModelTriple& model, const data::LabeledBatch& src,
              const data::UnlabeledBatch& tgt, bool include_ce) {
  if (st.eff.l2 == 0.0 && !include_ce) return 0.0;
  ad::Tape tape;
  auto tf1 = models::trace(tape, model.f1);
  auto tf2 = models::trace(tape, model.f2);

  ad::Tensor loss;
  bool have_loss = false;
  if (include_ce) {
    // plain forward holds the generator fixed: features enter as constants
    auto src_feats = models::forward_features(model.g, src.inputs);
    auto ce = losses::cross_entropy_source(models::forward_logits(tf1, src_feats),
                                           models::forward_logits(tf2, src_feats), src.labels);
    check_finite(ce, "loss_ce");
    loss = ce;
    have_loss = true;
  }
  double adv_val = 0.0;
  if (st.eff.l2 != 0.0) {
    auto tgt_feats = models::forward_features(model.g, tgt.inputs);
    auto probs = losses::prob_pair(models::forward_logits(tf1, tgt_feats),
                                   models::forward_logits(tf2, tgt_feats));
    auto adv = losses::discrepancy(probs);
    check_finite(adv, "loss_adv");
    adv_val = adv.value();
    auto scaled = ad::mul_scalar(adv, st.eff.l2);
    loss = have_loss ? ad::sub(loss, scaled) : ad::neg(scaled);
  }
  tape.backward(loss);
  st.opt_f.apply(classifier_params(model), classifier_grads(tape, tf1, tf2));
  return adv_val;
}

StepLosses step_c(TrainerState& st, models::ModelTriple& model, const data::LabeledBatch& src,
                  const data::UnlabeledBatch& tgt, int epoch) {
  const double w = omega(epoch, st.cfg.max_epochs, st.cfg.theta, st.eff.l3);
  StepLosses out;
  if (st.eff.l2 == 0.0 && w == 0.0) return out;

  ad::Tape tape;
  auto tg = models::trace(tape, model.g);
  auto tgt_feats = models::forward_features(tg, tgt.inputs);
  // fixed classifiers: plain weights enter the graph as constants, gradients
  // flow through the features back into G only
  auto probs = losses::prob_pair(models::forward_logits(model.f1, tgt_feats),
                                 models::forward_logits(model.f2, tgt_feats));
  ad::Tensor loss;
  bool have_loss = false;
  if (st.eff.l2 != 0.0) {
    auto adv = losses::discrepancy(probs);
    check_finite(adv, "loss_adv");
    out.adv = adv.value();
    loss = ad::mul_scalar(adv, st.eff.l2);
    have_loss = true;
  }
  if (w != 0.0) {
    auto pseudo = losses::pseudo_label(probs);
    auto src_feats = models::forward_features(tg, src.inputs);
    auto contras =
        losses::contrastive_loss(src_feats, src.labels, tgt_feats, pseudo, st.cfg.margin,
                                 st.cfg.pair_budget, st.cfg.conf_threshold, &st.pair_rng);
    check_finite(contras, "loss_contras");
    out.contras = contras.value();
    auto scaled = ad::mul_scalar(contras, w);
    loss = have_loss ? ad::add(loss, scaled) : scaled;
    have_loss = true;
  }
  // every pair can be gated out, leaving a constant zero with nothing to update
  if (!loss.on_tape()) return out;
  tape.backward(loss);
  st.opt_g.apply(models::parameters(model.g), models::collect_grads(tape, tg));
  return out;
}

namespace {

int argmax_row(const std::vector<double>& d, std::size_t row, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (d[row * k + j] > d[row * k + best]) best = j;
  return static_cast<int>(best);
}

}  // namespace

EvalResult evaluate(const models::ModelTriple& model, const data::Dataset& ds,
                    const std::vector<int>& labels) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  if (labels.size() != ds.size())
    throw std::invalid_argument("evaluate: label count does not match dataset");

  auto feats = models::forward_features(model.g, ds.inputs);
  auto probs = losses::prob_pair(models::forward_logits(model.f1, feats),
                                 models::forward_logits(model.f2, feats));
  auto pseudo = losses::pseudo_label(probs);
  const std::size_t n = ds.size(), k = probs.p1.cols();
  std::size_t hit1 = 0, hit2 = 0, hit_ens = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hit1 += argmax_row(probs.p1.data, i, k) == labels[i] ? 1 : 0;
    hit2 += argmax_row(probs.p2.data, i, k) == labels[i] ? 1 : 0;
    hit_ens += pseudo.labels[i] == labels[i] ? 1 : 0;
  }
  EvalResult out;
  out.accuracy_f1 = static_cast<double>(hit1) / static_cast<double>(n);
  out.accuracy_f2 = static_cast<double>(hit2) / static_cast<double>(n);
  out.accuracy_ensemble = static_cast<double>(hit_ens) / static_cast<double>(n);
  return out;
}

TrainOutput train(const TrainConfig& cfg, const data::Dataset& source,
                  const data::Dataset& target, const std::vector<int>& target_truth,
                  const StepObserver& observer) {
  cfg.validate();
  if (!source.standardized || !target.standardized)
    throw std::invalid_argument("train: datasets must be standardized first");
  if (!source.has_labels()) throw std::invalid_argument("train: source has no labels");
  if (target.has_labels()) throw std::invalid_argument("train: target must be unlabeled");
  if (source.num_classes < 2) throw std::invalid_argument("train: need at least 2 classes");
  if (!target_truth.empty() && target_truth.size() != target.size())
    throw std::invalid_argument("train: target truth size does not match target");
  if (source.dim() != target.dim())
    throw std::invalid_argument("train: domain dimension mismatch");

  models::ArchitectureSpec spec;
  spec.g_dims.clear();
  spec.g_dims.push_back(source.dim());
  for (std::size_t h : cfg.g_hidden) spec.g_dims.push_back(h);
  spec.g_dims.push_back(cfg.feature_dim);
  spec.f_dims.clear();
  spec.f_dims.push_back(cfg.feature_dim);
  for (std::size_t h : cfg.f_hidden) spec.f_dims.push_back(h);
  spec.f_dims.push_back(static_cast<std::size_t>(source.num_classes));
  spec.validate();

  TrainOutput out;
  out.model = models::init_model(spec, mix_seed(cfg.seed, 0x11), cfg.tanh_hidden);
  data::ClassAwareSampler src_sampler(source, cfg.batch_size_source, mix_seed(cfg.seed, 0x12));
  data::UniformSampler tgt_sampler(target, cfg.batch_size_target, mix_seed(cfg.seed, 0x13));
  TrainerState st = make_state(cfg);

  const bool inner_steps = cfg.variant != Variant::source_only;
  long long iter = 0;
  auto notify = [&](StepKind k, StepPhase p) {
    if (observer) observer(k, p, out.model, iter);
  };

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (int it = 0; it < cfg.iters_per_epoch; ++it) {
      ++iter;
      auto bs = src_sampler.next();
      auto bt = tgt_sampler.next();

      notify(StepKind::a, StepPhase::before);
      const StepLosses a = step_a(st, out.model, bs, bt);
      notify(StepKind::a, StepPhase::after);

      IterRecord rec;
      rec.iter = iter;
      rec.loss_ce = a.ce;
      rec.loss_mmd = a.mmd;
      rec.omega = omega(epoch, cfg.max_epochs, cfg.theta, st.eff.l3);
      if (inner_steps) {
        for (int k = 0; k < cfg.tau; ++k) {
          if (!cfg.reuse_batch) {
            bs = src_sampler.next();
            bt = tgt_sampler.next();
          }
          notify(StepKind::b, StepPhase::before);
          step_b(st, out.model, bs, bt);
          notify(StepKind::b, StepPhase::after);
        }
        for (int k = 0; k < cfg.delta; ++k) {
          if (!cfg.reuse_batch) {
            bs = src_sampler.next();
            bt = tgt_sampler.next();
          }
          notify(StepKind::c, StepPhase::before);
          const StepLosses c = step_c(st, out.model, bs, bt, epoch);
          notify(StepKind::c, StepPhase::after);
          rec.loss_adv = c.adv;
          rec.loss_contras = c.contras;
        }
      }
      out.record.iters.push_back(rec);
    }

    EpochRecord er;
    er.epoch = epoch;
    er.source_acc = evaluate(out.model, source, source.labels).accuracy_ensemble;
    if (!target_truth.empty()) {
      const EvalResult ev = evaluate(out.model, target, target_truth);
      er.target_acc = ev.accuracy_ensemble;
      // the pseudo-label rule is the ensemble argmax, so its accuracy is the
      // ensemble accuracy measured on the full target set
      er.pseudo_label_acc = ev.accuracy_ensemble;
    }
    out.record.epochs.push_back(er);
  }
  return out;
}

}  // namespace cosca::train
