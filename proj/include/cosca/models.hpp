#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cosca/autodiff.hpp"
#include "cosca/tensor.hpp"

namespace cosca::models {

enum class Activation : std::uint8_t { relu = 0, tanh = 1, none = 2 };

struct Layer {
  ad::Tensor w;  // in x out
  ad::Tensor b;  // out
  Activation act = Activation::none;
};

struct Mlp {
  std::vector<Layer> layers;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
};

// dims include the input: g_dims = {input, hidden..., feature},
// f_dims = {feature, hidden..., K}
struct ArchitectureSpec {
  std::vector<std::size_t> g_dims{2, 64, 64};
  std::vector<std::size_t> f_dims{64, 64, 2};
  void validate() const;
  std::size_t input_dim() const { return g_dims.front(); }
  std::size_t feature_dim() const { return g_dims.back(); }
  std::size_t num_classes() const { return f_dims.back(); }
};

struct ModelTriple {
  ArchitectureSpec spec;
  Mlp g;
  Mlp f1;
  Mlp f2;
};

// generator hidden layers default to relu; classifiers are relu with a final
// linear layer; set tanh_hidden for smooth activations (the gradient checker
// wants a kink-free model)
ModelTriple init_model(const ArchitectureSpec& spec, std::uint64_t seed,
                       bool tanh_hidden = false);

// copies of the net whose parameters are tape leaves; forwarding a plain Mlp
// keeps its weights off the tape, which is how the fixed nets of the
// alternating steps enter the graph as constants
Mlp trace(ad::Tape& tape, const Mlp& m);

ad::Tensor mlp_forward(const Mlp& m, const ad::Tensor& x);
ad::Tensor forward_features(const Mlp& g, const ad::Tensor& x);
ad::Tensor forward_logits(const Mlp& f, const ad::Tensor& features);

// per-layer weight then bias, in layer order
std::vector<ad::Tensor*> parameters(Mlp& m);
std::vector<const ad::Tensor*> parameters(const Mlp& m);
std::vector<std::vector<double>> collect_grads(const ad::Tape& tape, const Mlp& traced);

enum class OptKind { sgd, sgd_momentum, adam };

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptState {
  OptimizerConfig cfg;
  long long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  void apply(const std::vector<ad::Tensor*>& params,
             const std::vector<std::vector<double>>& grads);
};

// binary checkpoint, see save_checkpoint in models.cpp for the layout
void save_checkpoint(const std::string& path, const ModelTriple& model);
ModelTriple load_checkpoint(const std::string& path);

}  // namespace cosca::models
