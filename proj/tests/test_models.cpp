#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "cosca/models.hpp"
#include "cosca/rng.hpp"

using namespace cosca;
using models::ArchitectureSpec;
using models::Mlp;
using models::ModelTriple;

namespace {

bool same_params(const Mlp& a, const Mlp& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].w.data != b.layers[l].w.data) return false;
    if (a.layers[l].b.data != b.layers[l].b.data) return false;
  }
  return true;
}

ArchitectureSpec tiny_spec() {
  ArchitectureSpec s;
  s.g_dims = {2, 5, 4};
  s.f_dims = {4, 4, 3};
  return s;
}

}  // namespace

TEST_CASE("init_model is deterministic and splits f1 from f2") {
  auto a = models::init_model(tiny_spec(), 42);
  auto b = models::init_model(tiny_spec(), 42);
  CHECK(same_params(a.g, b.g));
  CHECK(same_params(a.f1, b.f1));
  CHECK(same_params(a.f2, b.f2));
  CHECK_FALSE(same_params(a.f1, a.f2));
  auto c = models::init_model(tiny_spec(), 43);
  CHECK_FALSE(same_params(a.g, c.g));

  for (const auto& layer : a.g.layers)
    for (double v : layer.b.data) CHECK(v == 0.0);
  CHECK(a.f1.layers.back().act == models::Activation::none);
  CHECK(a.g.layers.back().act == models::Activation::relu);
}

TEST_CASE("architecture validation rejects broken chains") {
  ArchitectureSpec s = tiny_spec();
  s.f_dims[0] = 5;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = tiny_spec();
  s.f_dims.back() = 1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = tiny_spec();
  s.g_dims = {2};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("forward of a zeroed net is zero and batches are independent") {
  auto model = models::init_model(tiny_spec(), 1);
  for (auto* p : models::parameters(model.g))
    for (double& v : p->data) v = 0.0;
  ad::Tensor x = ad::Tensor::matrix(3, 2, {1, -2, 0.5, 4, -1, -1});
  ad::Tensor feats = models::forward_features(model.g, x);
  CHECK(feats.rows() == 3);
  CHECK(feats.cols() == 4);
  for (double v : feats.data) CHECK(v == 0.0);

  auto model2 = models::init_model(tiny_spec(), 2);
  ad::Tensor full = models::mlp_forward(model2.g, x);
  for (std::size_t i = 0; i < 3; ++i) {
    ad::Tensor row = ad::Tensor::matrix(1, 2, {x.at(i, 0), x.at(i, 1)});
    ad::Tensor one = models::mlp_forward(model2.g, row);
    for (std::size_t j = 0; j < one.cols(); ++j) CHECK(one.at(0, j) == full.at(i, j));
  }

  ad::Tensor bad = ad::Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(models::mlp_forward(model2.g, bad), std::invalid_argument);
}

TEST_CASE("sgd update rule") {
  Mlp net;
  net.layers.push_back({ad::Tensor::matrix(1, 1, {1.0}), ad::Tensor::vec({0.0}),
                        models::Activation::none});
  models::OptState opt;
  opt.cfg.kind = models::OptKind::sgd;
  opt.cfg.learning_rate = 0.1;
  opt.apply(models::parameters(net), {{2.0}, {0.0}});
  CHECK(net.layers[0].w.data[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(net.layers[0].b.data[0] == 0.0);

  CHECK_THROWS_AS(opt.apply(models::parameters(net), {{1.0}}), std::invalid_argument);
}

TEST_CASE("sgd momentum accumulates velocity") {
  Mlp net;
  net.layers.push_back({ad::Tensor::matrix(1, 1, {0.0}), ad::Tensor::vec({0.0}),
                        models::Activation::none});
  models::OptState opt;
  opt.cfg.kind = models::OptKind::sgd_momentum;
  opt.cfg.learning_rate = 0.1;
  opt.cfg.momentum = 0.5;
  opt.apply(models::parameters(net), {{1.0}, {0.0}});
  // v=1, w=-0.1
  CHECK(net.layers[0].w.data[0] == doctest::Approx(-0.1).epsilon(1e-15));
  opt.apply(models::parameters(net), {{1.0}, {0.0}});
  // v=1.5, w=-0.25
  CHECK(net.layers[0].w.data[0] == doctest::Approx(-0.25).epsilon(1e-15));
}

TEST_CASE("adam first step moves each weight by about lr regardless of gradient size") {
  Mlp net;
  net.layers.push_back({ad::Tensor::matrix(1, 3, {1.0, -2.0, 0.3}),
                        ad::Tensor::vec({0.5}), models::Activation::none});
  models::OptState opt;
  opt.cfg.kind = models::OptKind::adam;
  opt.cfg.learning_rate = 1e-3;
  const std::vector<double> before = net.layers[0].w.data;
  opt.apply(models::parameters(net), {{7.0, 0.001, -40.0}, {1.0}});
  for (std::size_t j = 0; j < 3; ++j) {
    const double moved = net.layers[0].w.data[j] - before[j];
    const double grad = std::vector<double>{7.0, 0.001, -40.0}[j];
    CHECK(std::fabs(moved) == doctest::Approx(1e-3).epsilon(1e-3));
    CHECK(moved * grad < 0.0);
  }
}

TEST_CASE("updating f1 never touches f2") {
  auto model = models::init_model(tiny_spec(), 9);
  const auto f2_before = model.f2;
  models::OptState opt;
  opt.cfg.kind = models::OptKind::sgd;
  auto params = models::parameters(model.f1);
  std::vector<std::vector<double>> grads;
  for (auto* p : params) grads.emplace_back(p->data.size(), 1.0);
  opt.apply(params, grads);
  CHECK(same_params(model.f2, f2_before));
  CHECK_FALSE(same_params(model.f1, f2_before));
}

TEST_CASE("traced copies leave the original parameters alone") {
  auto model = models::init_model(tiny_spec(), 5);
  ad::Tape tape;
  Mlp traced = models::trace(tape, model.g);
  CHECK(traced.layers[0].w.on_tape());
  CHECK_FALSE(model.g.layers[0].w.on_tape());
  traced.layers[0].w.data[0] += 1.0;
  CHECK(traced.layers[0].w.data[0] != model.g.layers[0].w.data[0]);

  ad::Tensor x = ad::Tensor::matrix(2, 2, {0.1, -0.2, 0.3, 0.4});
  ad::Tensor out = models::mlp_forward(traced, x);
  tape.backward(ad::sum(out));
  auto grads = models::collect_grads(tape, traced);
  CHECK(grads.size() == models::parameters(traced).size());
  for (std::size_t i = 0; i < grads.size(); ++i)
    CHECK(grads[i].size() == models::parameters(traced)[i]->data.size());
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  auto model = models::init_model(tiny_spec(), 77);
  const char* path = "test_models_ckpt.bin";
  models::save_checkpoint(path, model);
  auto loaded = models::load_checkpoint(path);
  CHECK(same_params(model.g, loaded.g));
  CHECK(same_params(model.f1, loaded.f1));
  CHECK(same_params(model.f2, loaded.f2));
  CHECK(loaded.spec.g_dims == model.spec.g_dims);
  CHECK(loaded.spec.f_dims == model.spec.f_dims);
  for (std::size_t l = 0; l < model.g.layers.size(); ++l)
    CHECK(loaded.g.layers[l].act == model.g.layers[l].act);

  {
    std::ofstream f(path, std::ios::binary);
    f << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(models::load_checkpoint(path), std::runtime_error);
  CHECK_THROWS_AS(models::load_checkpoint("no_such_dir/nope.bin"), std::runtime_error);
  std::remove(path);
}
