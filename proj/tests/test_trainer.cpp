#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cosca/trainer.hpp"

using namespace cosca;
using namespace cosca::train;

namespace {

TrainConfig small_cfg(std::uint64_t seed, Variant v) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.seed = seed;
  cfg.g_hidden = {8};
  cfg.feature_dim = 8;
  cfg.f_hidden = {8};
  cfg.batch_size_source = 16;
  cfg.batch_size_target = 16;
  cfg.max_epochs = 3;
  cfg.iters_per_epoch = 4;
  return cfg;
}

struct Fixture {
  data::DomainShiftData d;
  models::ModelTriple model;
  TrainerState st;
  data::LabeledBatch bs;
  data::UnlabeledBatch bt;
};

Fixture make_fixture(std::uint64_t seed, const TrainConfig& cfg) {
  Fixture fx;
  fx.d = data::gen_two_moons_shift(100, 35.0, 0.1, seed);
  data::standardize(fx.d.source, fx.d.target);
  models::ArchitectureSpec spec;
  spec.g_dims = {2, cfg.g_hidden[0], cfg.feature_dim};
  spec.f_dims = {cfg.feature_dim, cfg.f_hidden[0], 2};
  fx.model = models::init_model(spec, mix_seed(seed, 0x11));
  fx.st = make_state(cfg);
  data::ClassAwareSampler ss(fx.d.source, cfg.batch_size_source, mix_seed(seed, 0x12));
  data::UniformSampler ts(fx.d.target, cfg.batch_size_target, mix_seed(seed, 0x13));
  fx.bs = ss.next();
  fx.bt = ts.next();
  return fx;
}

std::vector<double> flatten(const models::Mlp& m) {
  std::vector<double> out;
  for (const ad::Tensor* t : models::parameters(m))
    out.insert(out.end(), t->data.begin(), t->data.end());
  return out;
}

bool same_params(const models::Mlp& a, const models::Mlp& b) {
  const auto fa = flatten(a), fb = flatten(b);
  return fa.size() == fb.size() &&
         std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(double)) == 0;
}

double objective_a(const models::ModelTriple& m, const TrainerState& st,
                   const data::LabeledBatch& bs, const data::UnlabeledBatch& bt) {
  auto feats = models::forward_features(m.g, bs.inputs);
  double v = losses::cross_entropy_source(models::forward_logits(m.f1, feats),
                                          models::forward_logits(m.f2, feats), bs.labels)
                 .value();
  if (st.eff.l1 != 0.0) {
    auto tf = models::forward_features(m.g, bt.inputs);
    v += st.eff.l1 * losses::mmd_loss(feats, tf, st.cfg.mmd_kernel).value();
  }
  return v;
}

double target_discrepancy(const models::ModelTriple& m, const data::UnlabeledBatch& bt) {
  auto tf = models::forward_features(m.g, bt.inputs);
  return losses::discrepancy(losses::prob_pair(models::forward_logits(m.f1, tf),
                                               models::forward_logits(m.f2, tf)))
      .value();
}

double objective_c(const models::ModelTriple& m, const TrainerState& st, int epoch,
                   const data::LabeledBatch& bs, const data::UnlabeledBatch& bt) {
  auto tf = models::forward_features(m.g, bt.inputs);
  auto probs = losses::prob_pair(models::forward_logits(m.f1, tf),
                                 models::forward_logits(m.f2, tf));
  double v = st.eff.l2 * losses::discrepancy(probs).value();
  const double w = omega(epoch, st.cfg.max_epochs, st.cfg.theta, st.eff.l3);
  if (w != 0.0) {
    auto pseudo = losses::pseudo_label(probs);
    auto sf = models::forward_features(m.g, bs.inputs);
    v += w * losses::contrastive_loss(sf, bs.labels, tf, pseudo, st.cfg.margin).value();
  }
  return v;
}

bool records_equal(const RunRecord& a, const RunRecord& b) {
  if (a.iters.size() != b.iters.size() || a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t i = 0; i < a.iters.size(); ++i) {
    const auto &x = a.iters[i], &y = b.iters[i];
    if (x.iter != y.iter || x.loss_ce != y.loss_ce || x.loss_mmd != y.loss_mmd ||
        x.loss_adv != y.loss_adv || x.loss_contras != y.loss_contras || x.omega != y.omega)
      return false;
  }
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const auto &x = a.epochs[i], &y = b.epochs[i];
    if (x.epoch != y.epoch || x.source_acc != y.source_acc || x.target_acc != y.target_acc ||
        x.pseudo_label_acc != y.pseudo_label_acc)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("omega ramp hits lambda3 exactly at the last epoch") {
  CHECK(omega(60, 60, 5.0, 1.0) == 1.0);
  CHECK(omega(60, 60, 5.0, 0.37) == 0.37);
  CHECK(omega(0, 60, 5.0, 1.0) == doctest::Approx(std::exp(-5.0)).epsilon(1e-12));
  CHECK(omega(1, 4, 2.0, 3.0) == doctest::Approx(3.0 * std::exp(-1.5)).epsilon(1e-12));
  for (int t = 1; t < 60; ++t) CHECK(omega(t, 60, 5.0, 1.0) < omega(t + 1, 60, 5.0, 1.0));
  CHECK(omega(10, 60, 0.0, 2.5) == 2.5);
  CHECK_THROWS_AS(omega(1, 0, 5.0, 1.0), std::invalid_argument);
}

TEST_CASE("variant names round-trip and gate the loss weights") {
  for (Variant v : {Variant::source_only, Variant::mcd, Variant::mcd_mmd, Variant::mcd_contras,
                    Variant::cosca})
    CHECK(variant_from_name(variant_name(v)) == v);
  CHECK_THROWS_AS(variant_from_name("dann"), std::invalid_argument);

  TrainConfig cfg;
  cfg.lambda1 = 0.3;
  cfg.lambda2 = 0.7;
  cfg.lambda3 = 0.9;
  cfg.variant = Variant::source_only;
  auto e = effective_lambdas(cfg);
  CHECK((e.l1 == 0.0 && e.l2 == 0.0 && e.l3 == 0.0));
  cfg.variant = Variant::mcd;
  e = effective_lambdas(cfg);
  CHECK((e.l1 == 0.0 && e.l2 == 0.7 && e.l3 == 0.0));
  cfg.variant = Variant::mcd_mmd;
  e = effective_lambdas(cfg);
  CHECK((e.l1 == 0.3 && e.l2 == 0.7 && e.l3 == 0.0));
  cfg.variant = Variant::mcd_contras;
  e = effective_lambdas(cfg);
  CHECK((e.l1 == 0.0 && e.l2 == 0.7 && e.l3 == 0.9));
  cfg.variant = Variant::cosca;
  e = effective_lambdas(cfg);
  CHECK((e.l1 == 0.3 && e.l2 == 0.7 && e.l3 == 0.9));
}

TEST_CASE("config validation rejects bad fields") {
  TrainConfig cfg;
  cfg.lambda1 = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.tau = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.margin = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.conf_threshold = 2.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.opt_g.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("classifier step leaves the generator untouched, generator step the classifiers") {
  auto cfg = small_cfg(3, Variant::cosca);
  auto fx = make_fixture(3, cfg);
  const auto g0 = flatten(fx.model.g);
  const auto f10 = flatten(fx.model.f1);
  step_b(fx.st, fx.model, fx.bs, fx.bt);
  CHECK(flatten(fx.model.g) == g0);
  CHECK(flatten(fx.model.f1) != f10);

  const auto f11 = flatten(fx.model.f1);
  const auto f21 = flatten(fx.model.f2);
  step_c(fx.st, fx.model, fx.bs, fx.bt, cfg.max_epochs);
  CHECK(flatten(fx.model.f1) == f11);
  CHECK(flatten(fx.model.f2) == f21);
  CHECK(flatten(fx.model.g) != g0);
}

TEST_CASE("joint step descends its objective on the held batch") {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cfg = small_cfg(seed, Variant::cosca);
    cfg.opt_g.kind = models::OptKind::sgd;
    cfg.opt_f.kind = models::OptKind::sgd;
    cfg.opt_g.learning_rate = 1e-3;
    cfg.opt_f.learning_rate = 1e-3;
    auto fx = make_fixture(seed, cfg);
    const double before = objective_a(fx.model, fx.st, fx.bs, fx.bt);
    step_a(fx.st, fx.model, fx.bs, fx.bt);
    const double after = objective_a(fx.model, fx.st, fx.bs, fx.bt);
    failures += after < before ? 0 : 1;
  }
  CHECK(failures <= 1);
}

TEST_CASE("classifier step raises target disagreement when the ce anchor is off") {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cfg = small_cfg(seed, Variant::mcd);
    cfg.opt_f.kind = models::OptKind::sgd;
    cfg.opt_f.learning_rate = 1e-3;
    auto fx = make_fixture(seed, cfg);
    const double before = target_discrepancy(fx.model, fx.bt);
    step_b(fx.st, fx.model, fx.bs, fx.bt, false);
    const double after = target_discrepancy(fx.model, fx.bt);
    failures += after > before ? 0 : 1;
  }
  CHECK(failures <= 2);
}

TEST_CASE("generator step descends disagreement plus class alignment") {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cfg = small_cfg(seed, Variant::cosca);
    cfg.opt_g.kind = models::OptKind::sgd;
    cfg.opt_g.learning_rate = 1e-3;
    auto fx = make_fixture(seed, cfg);
    const int epoch = cfg.max_epochs;  // full contrastive weight
    const double before = objective_c(fx.model, fx.st, epoch, fx.bs, fx.bt);
    step_c(fx.st, fx.model, fx.bs, fx.bt, epoch);
    const double after = objective_c(fx.model, fx.st, epoch, fx.bs, fx.bt);
    failures += after < before ? 0 : 1;
  }
  CHECK(failures <= 2);
}

TEST_CASE("disabled classifier step is a no-op") {
  auto cfg = small_cfg(5, Variant::source_only);
  auto fx = make_fixture(5, cfg);
  const auto f10 = flatten(fx.model.f1);
  CHECK(step_b(fx.st, fx.model, fx.bs, fx.bt, false) == 0.0);
  CHECK(flatten(fx.model.f1) == f10);
}

TEST_CASE("a random model scores near chance on the target") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto d = data::gen_two_moons_shift(400, 35.0, 0.1, seed);
    data::standardize(d.source, d.target);
    models::ArchitectureSpec spec;
    auto model = models::init_model(spec, mix_seed(seed, 0x11));
    total += evaluate(model, d.target, d.target_truth).accuracy_ensemble;
  }
  const double mean = total / 5.0;
  CHECK(mean > 0.3);
  CHECK(mean < 0.7);
}

TEST_CASE("evaluate validates label count") {
  auto d = data::gen_two_moons_shift(50, 35.0, 0.1, 1);
  models::ArchitectureSpec spec;
  auto model = models::init_model(spec, 1);
  std::vector<int> short_labels(10, 0);
  CHECK_THROWS_AS(evaluate(model, d.target, short_labels), std::invalid_argument);
}

TEST_CASE("training twice with one seed is bit-identical") {
  auto cfg = small_cfg(7, Variant::cosca);
  auto d1 = data::gen_two_moons_shift(100, 35.0, 0.1, 9);
  data::standardize(d1.source, d1.target);
  auto d2 = data::gen_two_moons_shift(100, 35.0, 0.1, 9);
  data::standardize(d2.source, d2.target);
  auto r1 = train::train(cfg, d1.source, d1.target, d1.target_truth);
  auto r2 = train::train(cfg, d2.source, d2.target, d2.target_truth);
  CHECK(same_params(r1.model.g, r2.model.g));
  CHECK(same_params(r1.model.f1, r2.model.f1));
  CHECK(same_params(r1.model.f2, r2.model.f2));
  CHECK(records_equal(r1.record, r2.record));
}

TEST_CASE("ablation weights collapse onto the smaller method bit-exactly") {
  auto make_data = [] {
    auto d = data::gen_two_moons_shift(100, 35.0, 0.1, 21);
    data::standardize(d.source, d.target);
    return d;
  };
  auto da = make_data();
  auto cfg_cosca = small_cfg(11, Variant::cosca);
  cfg_cosca.lambda1 = 0.0;
  cfg_cosca.lambda3 = 0.0;
  auto run_cosca = train::train(cfg_cosca, da.source, da.target, da.target_truth);

  auto db = make_data();
  auto cfg_mcd = small_cfg(11, Variant::mcd);
  auto run_mcd = train::train(cfg_mcd, db.source, db.target, db.target_truth);

  CHECK(same_params(run_cosca.model.g, run_mcd.model.g));
  CHECK(same_params(run_cosca.model.f1, run_mcd.model.f1));
  CHECK(same_params(run_cosca.model.f2, run_mcd.model.f2));
  CHECK(records_equal(run_cosca.record, run_mcd.record));

  auto dc = make_data();
  auto cfg_mmd0 = small_cfg(11, Variant::mcd_mmd);
  cfg_mmd0.lambda1 = 0.0;
  auto run_mmd0 = train::train(cfg_mmd0, dc.source, dc.target, dc.target_truth);
  CHECK(same_params(run_mmd0.model.g, run_mcd.model.g));
  CHECK(records_equal(run_mmd0.record, run_mcd.record));

  auto dd = make_data();
  auto cfg_con0 = small_cfg(11, Variant::mcd_contras);
  cfg_con0.lambda3 = 0.0;
  auto run_con0 = train::train(cfg_con0, dd.source, dd.target, dd.target_truth);
  CHECK(same_params(run_con0.model.g, run_mcd.model.g));
  CHECK(records_equal(run_con0.record, run_mcd.record));
}

TEST_CASE("training records carry the expected shape and finite losses") {
  auto cfg = small_cfg(13, Variant::cosca);
  auto d = data::gen_two_moons_shift(100, 35.0, 0.1, 13);
  data::standardize(d.source, d.target);
  auto out = train::train(cfg, d.source, d.target, d.target_truth);
  REQUIRE(out.record.iters.size() == 12);
  REQUIRE(out.record.epochs.size() == 3);
  for (std::size_t i = 0; i < out.record.iters.size(); ++i) {
    const auto& r = out.record.iters[i];
    CHECK(r.iter == static_cast<long long>(i + 1));
    CHECK(std::isfinite(r.loss_ce));
    CHECK(std::isfinite(r.loss_mmd));
    CHECK(std::isfinite(r.loss_adv));
    CHECK(std::isfinite(r.loss_contras));
    const int epoch = static_cast<int>(i) / cfg.iters_per_epoch + 1;
    CHECK(r.omega == omega(epoch, cfg.max_epochs, cfg.theta, cfg.lambda3));
  }
  for (const auto& e : out.record.epochs) {
    CHECK(e.source_acc >= 0.0);
    CHECK(e.target_acc >= 0.0);
    CHECK(e.pseudo_label_acc == e.target_acc);
  }

  auto d2 = data::gen_two_moons_shift(100, 35.0, 0.1, 13);
  data::standardize(d2.source, d2.target);
  auto no_truth = train::train(cfg, d2.source, d2.target);
  for (const auto& e : no_truth.record.epochs) {
    CHECK(e.target_acc == -1.0);
    CHECK(e.pseudo_label_acc == -1.0);
  }
}

TEST_CASE("source-only training skips the adversarial steps") {
  auto cfg = small_cfg(17, Variant::source_only);
  auto d = data::gen_two_moons_shift(100, 35.0, 0.1, 17);
  data::standardize(d.source, d.target);
  int b_count = 0, c_count = 0, a_count = 0;
  auto out = train::train(cfg, d.source, d.target, d.target_truth,
                   [&](StepKind k, StepPhase p, const models::ModelTriple&, long long) {
                     if (p != StepPhase::before) return;
                     if (k == StepKind::a) ++a_count;
                     if (k == StepKind::b) ++b_count;
                     if (k == StepKind::c) ++c_count;
                   });
  CHECK(a_count == 12);
  CHECK(b_count == 0);
  CHECK(c_count == 0);
  for (const auto& r : out.record.iters) {
    CHECK(r.loss_adv == 0.0);
    CHECK(r.loss_contras == 0.0);
    CHECK(r.loss_mmd == 0.0);
  }
}

TEST_CASE("the observer sees the full alternating schedule with frozen groups") {
  auto cfg = small_cfg(19, Variant::cosca);
  cfg.max_epochs = 2;
  cfg.iters_per_epoch = 2;
  auto d = data::gen_two_moons_shift(100, 35.0, 0.1, 19);
  data::standardize(d.source, d.target);

  std::vector<StepKind> kinds;
  std::vector<double> g_before, f1_before, f2_before;
  int freeze_violations = 0;
  train::train(cfg, d.source, d.target, d.target_truth,
        [&](StepKind k, StepPhase p, const models::ModelTriple& m, long long) {
          if (p == StepPhase::before) {
            kinds.push_back(k);
            if (k == StepKind::b) g_before = flatten(m.g);
            if (k == StepKind::c) {
              f1_before = flatten(m.f1);
              f2_before = flatten(m.f2);
            }
            return;
          }
          if (k == StepKind::b && flatten(m.g) != g_before) ++freeze_violations;
          if (k == StepKind::c && (flatten(m.f1) != f1_before || flatten(m.f2) != f2_before))
            ++freeze_violations;
        });
  CHECK(freeze_violations == 0);
  REQUIRE(kinds.size() == 4 * (1 + 2 + 2));
  for (std::size_t i = 0; i < kinds.size(); i += 5) {
    CHECK(kinds[i] == StepKind::a);
    CHECK(kinds[i + 1] == StepKind::b);
    CHECK(kinds[i + 2] == StepKind::b);
    CHECK(kinds[i + 3] == StepKind::c);
    CHECK(kinds[i + 4] == StepKind::c);
  }
}

TEST_CASE("a poisoned weight aborts naming the first bad loss") {
  auto cfg = small_cfg(23, Variant::cosca);
  auto fx = make_fixture(23, cfg);
  // the final classifier layer is linear, so the poison reaches the loss
  // (a relu would swallow it: max(nan, 0) picks 0)
  fx.model.f1.layers.back().w.data[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    step_a(fx.st, fx.model, fx.bs, fx.bt);
    CHECK(false);
  } catch (const NanAbort& e) {
    CHECK(std::string(e.what()).find("loss_ce") != std::string::npos);
  }

  auto fy = make_fixture(23, cfg);
  fy.model.f1.layers.back().w.data[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    step_c(fy.st, fy.model, fy.bs, fy.bt, 1);
    CHECK(false);
  } catch (const NanAbort& e) {
    CHECK(std::string(e.what()).find("loss_adv") != std::string::npos);
  }
}

TEST_CASE("train validates its dataset contract") {
  auto cfg = small_cfg(29, Variant::cosca);
  auto d = data::gen_two_moons_shift(100, 35.0, 0.1, 29);
  CHECK_THROWS_AS(train::train(cfg, d.source, d.target, d.target_truth), std::invalid_argument);

  data::standardize(d.source, d.target);
  auto labeled_target = d.target;
  labeled_target.labels = d.target_truth;
  labeled_target.num_classes = 2;
  CHECK_THROWS_AS(train::train(cfg, d.source, labeled_target, d.target_truth), std::invalid_argument);

  std::vector<int> bad_truth(3, 0);
  CHECK_THROWS_AS(train::train(cfg, d.source, d.target, bad_truth), std::invalid_argument);
}

TEST_CASE("batch reuse changes the trajectory but stays deterministic") {
  auto cfg = small_cfg(31, Variant::cosca);
  cfg.reuse_batch = true;
  auto d = data::gen_two_moons_shift(100, 35.0, 0.1, 31);
  data::standardize(d.source, d.target);
  auto r1 = train::train(cfg, d.source, d.target, d.target_truth);
  auto d2 = data::gen_two_moons_shift(100, 35.0, 0.1, 31);
  data::standardize(d2.source, d2.target);
  auto r2 = train::train(cfg, d2.source, d2.target, d2.target_truth);
  CHECK(same_params(r1.model.g, r2.model.g));
  CHECK(records_equal(r1.record, r2.record));

  auto cfg_fresh = small_cfg(31, Variant::cosca);
  auto d3 = data::gen_two_moons_shift(100, 35.0, 0.1, 31);
  data::standardize(d3.source, d3.target);
  auto r3 = train::train(cfg_fresh, d3.source, d3.target, d3.target_truth);
  CHECK_FALSE(same_params(r1.model.g, r3.model.g));
}
