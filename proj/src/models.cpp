#include "cosca/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cosca/rng.hpp"

namespace cosca::models {

std::size_t Mlp::input_dim() const {
  if (layers.empty()) throw std::logic_error("input_dim: empty mlp");
  return layers.front().w.rows();
}

std::size_t Mlp::output_dim() const {
  if (layers.empty()) throw std::logic_error("output_dim: empty mlp");
  return layers.back().w.cols();
}

void ArchitectureSpec::validate() const {
  if (g_dims.size() < 2 || f_dims.size() < 2)
    throw std::invalid_argument("architecture: each net needs at least one layer");
  for (std::size_t d : g_dims)
    if (d == 0) throw std::invalid_argument("architecture: zero layer width");
  for (std::size_t d : f_dims)
    if (d == 0) throw std::invalid_argument("architecture: zero layer width");
  if (g_dims.back() != f_dims.front())
    throw std::invalid_argument("architecture: generator output must feed the classifiers");
  if (f_dims.back() < 2)
    throw std::invalid_argument("architecture: need at least two classes");
}

namespace {

Mlp init_mlp(const std::vector<std::size_t>& dims, bool final_linear, bool tanh_hidden,
             std::uint64_t seed) {
  Rng rng(seed);
  const Activation hidden = tanh_hidden ? Activation::tanh : Activation::relu;
  Mlp m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    Layer layer;
    layer.w = ad::Tensor::matrix(fan_in, fan_out, std::move(w));
    layer.b = ad::Tensor::vec(std::vector<double>(fan_out, 0.0));
    const bool last = l + 2 == dims.size();
    layer.act = (last && final_linear) ? Activation::none : hidden;
    m.layers.push_back(std::move(layer));
  }
  return m;
}

}  // namespace

ModelTriple init_model(const ArchitectureSpec& spec, std::uint64_t seed, bool tanh_hidden) {
  spec.validate();
  ModelTriple t;
  t.spec = spec;
  t.g = init_mlp(spec.g_dims, false, tanh_hidden, mix_seed(seed, 0x67));
  t.f1 = init_mlp(spec.f_dims, true, tanh_hidden, mix_seed(seed, 0xF1));
  t.f2 = init_mlp(spec.f_dims, true, tanh_hidden, mix_seed(seed, 0xF2));
  return t;
}

Mlp trace(ad::Tape& tape, const Mlp& m) {
  Mlp out;
  for (const auto& layer : m.layers) {
    Layer traced;
    traced.w = tape.leaf(layer.w.shape, layer.w.data);
    traced.b = tape.leaf(layer.b.shape, layer.b.data);
    traced.act = layer.act;
    out.layers.push_back(std::move(traced));
  }
  return out;
}

ad::Tensor mlp_forward(const Mlp& m, const ad::Tensor& x) {
  if (x.rank() != 2 || x.cols() != m.input_dim())
    throw std::invalid_argument("mlp_forward: input width does not match the first layer");
  ad::Tensor h = x;
  for (const auto& layer : m.layers) {
    h = ad::add_rowwise(ad::matmul(h, layer.w), layer.b);
    switch (layer.act) {
      case Activation::relu: h = ad::relu(h); break;
      case Activation::tanh: h = ad::tanh(h); break;
      case Activation::none: break;
    }
  }
  return h;
}

ad::Tensor forward_features(const Mlp& g, const ad::Tensor& x) { return mlp_forward(g, x); }

ad::Tensor forward_logits(const Mlp& f, const ad::Tensor& features) {
  return mlp_forward(f, features);
}

std::vector<ad::Tensor*> parameters(Mlp& m) {
  std::vector<ad::Tensor*> ps;
  for (auto& layer : m.layers) {
    ps.push_back(&layer.w);
    ps.push_back(&layer.b);
  }
  return ps;
}

std::vector<const ad::Tensor*> parameters(const Mlp& m) {
  std::vector<const ad::Tensor*> ps;
  for (const auto& layer : m.layers) {
    ps.push_back(&layer.w);
    ps.push_back(&layer.b);
  }
  return ps;
}

std::vector<std::vector<double>> collect_grads(const ad::Tape& tape, const Mlp& traced) {
  std::vector<std::vector<double>> gs;
  for (const auto* p : parameters(traced)) gs.push_back(tape.grad(*p));
  return gs;
}

void OptState::apply(const std::vector<ad::Tensor*>& params,
                     const std::vector<std::vector<double>>& grads) {
  if (grads.size() != params.size())
    throw std::invalid_argument("apply: gradient count does not match parameter count");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].size() != params[i]->data.size())
      throw std::invalid_argument("apply: gradient shape does not match parameter shape");

  if (m.empty() && cfg.kind != OptKind::sgd) {
    m.resize(params.size());
    v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i].assign(params[i]->data.size(), 0.0);
      if (cfg.kind == OptKind::adam) v[i].assign(params[i]->data.size(), 0.0);
    }
  }
  if (!m.empty() && m.size() != params.size())
    throw std::invalid_argument("apply: optimizer state built for a different parameter set");

  ++step;
  const double lr = cfg.learning_rate;
  switch (cfg.kind) {
    case OptKind::sgd:
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i]->data;
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * grads[i][j];
      }
      break;
    case OptKind::sgd_momentum:
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i]->data;
        for (std::size_t j = 0; j < w.size(); ++j) {
          m[i][j] = cfg.momentum * m[i][j] + grads[i][j];
          w[j] -= lr * m[i][j];
        }
      }
      break;
    case OptKind::adam: {
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i]->data;
        for (std::size_t j = 0; j < w.size(); ++j) {
          m[i][j] = cfg.beta1 * m[i][j] + (1.0 - cfg.beta1) * grads[i][j];
          v[i][j] = cfg.beta2 * v[i][j] + (1.0 - cfg.beta2) * grads[i][j] * grads[i][j];
          const double mhat = m[i][j] / bc1;
          const double vhat = v[i][j] / bc2;
          w[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
      }
      break;
    }
  }
}

// checkpoint layout, little-endian:
//   magic "CSCK", u32 version = 1
//   for each of g, f1, f2:
//     u32 n_layers
//     per layer: u32 in, u32 out, u8 activation, f64 weights (in*out, row
//     major), f64 biases (out)
namespace {

constexpr char kMagic[4] = {'C', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_mlp(std::ofstream& f, const Mlp& m) {
  write_u32(f, static_cast<std::uint32_t>(m.layers.size()));
  for (const auto& layer : m.layers) {
    write_u32(f, static_cast<std::uint32_t>(layer.w.rows()));
    write_u32(f, static_cast<std::uint32_t>(layer.w.cols()));
    const std::uint8_t act = static_cast<std::uint8_t>(layer.act);
    f.write(reinterpret_cast<const char*>(&act), 1);
    f.write(reinterpret_cast<const char*>(layer.w.data.data()),
            static_cast<std::streamsize>(layer.w.data.size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(layer.b.data.data()),
            static_cast<std::streamsize>(layer.b.data.size() * sizeof(double)));
  }
}

Mlp read_mlp(std::ifstream& f, const std::string& path) {
  Mlp m;
  const std::uint32_t n_layers = read_u32(f);
  if (n_layers == 0 || n_layers > 64)
    throw std::runtime_error("checkpoint corrupt (layer count): " + path);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint32_t in = read_u32(f), out = read_u32(f);
    std::uint8_t act = 0;
    f.read(reinterpret_cast<char*>(&act), 1);
    if (!f || in == 0 || out == 0 || act > 2)
      throw std::runtime_error("checkpoint corrupt (layer header): " + path);
    Layer layer;
    std::vector<double> w(static_cast<std::size_t>(in) * out), b(out);
    f.read(reinterpret_cast<char*>(w.data()),
           static_cast<std::streamsize>(w.size() * sizeof(double)));
    f.read(reinterpret_cast<char*>(b.data()),
           static_cast<std::streamsize>(b.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint truncated: " + path);
    layer.w = ad::Tensor::matrix(in, out, std::move(w));
    layer.b = ad::Tensor::vec(std::move(b));
    layer.act = static_cast<Activation>(act);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelTriple& model) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write(kMagic, 4);
  write_u32(f, kVersion);
  write_mlp(f, model.g);
  write_mlp(f, model.f1);
  write_mlp(f, model.f2);
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelTriple load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4] = {};
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  if (read_u32(f) != kVersion)
    throw std::runtime_error("unsupported checkpoint version: " + path);
  ModelTriple t;
  t.g = read_mlp(f, path);
  t.f1 = read_mlp(f, path);
  t.f2 = read_mlp(f, path);
  ArchitectureSpec spec;
  spec.g_dims.clear();
  spec.f_dims.clear();
  for (const auto& layer : t.g.layers) spec.g_dims.push_back(layer.w.rows());
  spec.g_dims.push_back(t.g.layers.back().w.cols());
  for (const auto& layer : t.f1.layers) spec.f_dims.push_back(layer.w.rows());
  spec.f_dims.push_back(t.f1.layers.back().w.cols());
  spec.validate();
  t.spec = spec;
  return t;
}

}  // namespace cosca::models
