#include "cosca/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace cosca::ad {

Tensor Tape::leaf(std::vector<std::size_t> shape, std::vector<double> data) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != data.size()) throw std::invalid_argument("leaf: data length does not match shape");
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(data);
  t.tape = this;
  t.node = record({}, t.data.size(), nullptr);
  return t;
}

int Tape::record(std::vector<int> parents, std::size_t out_size, BackFn back) {
  for (int p : parents) {
    if (p < 0 || static_cast<std::size_t>(p) >= nodes_.size())
      throw std::invalid_argument("record: parent handle out of range");
  }
  nodes_.push_back(Node{std::move(parents), out_size, std::move(back)});
  return static_cast<int>(nodes_.size() - 1);
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape != this || loss.node < 0)
    throw std::invalid_argument("backward: loss is not on this tape");
  if (loss.data.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  grads_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) grads_[i].assign(nodes_[i].size, 0.0);
  grads_[static_cast<std::size_t>(loss.node)][0] = 1.0;
  for (int i = loss.node; i >= 0; --i) {
    const Node& nd = nodes_[static_cast<std::size_t>(i)];
    if (nd.back) nd.back(grads_[static_cast<std::size_t>(i)], *this);
  }
}

bool Tape::has_grad(const Tensor& t) const {
  return t.tape == this && t.node >= 0 &&
         static_cast<std::size_t>(t.node) < grads_.size();
}

const std::vector<double>& Tape::grad(const Tensor& t) const {
  if (!has_grad(t)) throw std::invalid_argument("grad: no gradient recorded for tensor");
  return grads_[static_cast<std::size_t>(t.node)];
}

std::vector<double>& Tape::grad_buf(int node) {
  return grads_.at(static_cast<std::size_t>(node));
}

namespace {

Tape* merged(const Tensor& a, const Tensor& b, const char* op) {
  Tape* ta = a.on_tape() ? a.tape : nullptr;
  Tape* tb = b.on_tape() ? b.tape : nullptr;
  if (ta && tb && ta != tb)
    throw std::invalid_argument(std::string(op) + ": inputs live on different tapes");
  return ta ? ta : tb;
}

void need_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

void need_nonempty(const Tensor& a, const char* op) {
  if (a.data.empty())
    throw std::invalid_argument(std::string(op) + ": empty-tensor reduction");
}

// elementwise unary where d out_i / d x_i is a precomputed vector
Tensor unary(const Tensor& x, std::vector<double> out_data, std::vector<double> dloc) {
  Tensor out;
  out.shape = x.shape;
  out.data = std::move(out_data);
  if (x.on_tape()) {
    const int px = x.node;
    out.tape = x.tape;
    out.node = x.tape->record(
        {px}, out.data.size(),
        [px, d = std::move(dloc)](const std::vector<double>& og, Tape& t) {
          auto& gx = t.grad_buf(px);
          for (std::size_t i = 0; i < og.size(); ++i) gx[i] += d[i] * og[i];
        });
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul: both inputs must be rank 2");
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions do not match");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  kernels::matmul(out.data.data(), a.data.data(), b.data.data(), m, k, n);
  Tape* tp = merged(a, b, "matmul");
  if (tp) {
    const int pa = a.on_tape() ? a.node : -1;
    const int pb = b.on_tape() ? b.node : -1;
    std::vector<int> parents;
    if (pa >= 0) parents.push_back(pa);
    if (pb >= 0) parents.push_back(pb);
    out.tape = tp;
    out.node = tp->record(
        std::move(parents), out.data.size(),
        [pa, pb, ad = a.data, bd = b.data, m, k, n](const std::vector<double>& og, Tape& t) {
          if (pa >= 0) kernels::matmul_abt_acc(t.grad_buf(pa).data(), og.data(), bd.data(), m, k, n);
          if (pb >= 0) kernels::matmul_atb_acc(t.grad_buf(pb).data(), ad.data(), og.data(), m, k, n);
        });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  need_same_shape(a, b, "add");
  Tensor out;
  out.shape = a.shape;
  out.data.resize(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  Tape* tp = merged(a, b, "add");
  if (tp) {
    const int pa = a.on_tape() ? a.node : -1;
    const int pb = b.on_tape() ? b.node : -1;
    std::vector<int> parents;
    if (pa >= 0) parents.push_back(pa);
    if (pb >= 0) parents.push_back(pb);
    out.tape = tp;
    out.node = tp->record(std::move(parents), out.data.size(),
        [pa, pb](const std::vector<double>& og, Tape& t) {
          if (pa >= 0) {
            auto& ga = t.grad_buf(pa);
            for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i];
          }
          if (pb >= 0) {
            auto& gb = t.grad_buf(pb);
            for (std::size_t i = 0; i < og.size(); ++i) gb[i] += og[i];
          }
        });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  need_same_shape(a, b, "sub");
  Tensor out;
  out.shape = a.shape;
  out.data.resize(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  Tape* tp = merged(a, b, "sub");
  if (tp) {
    const int pa = a.on_tape() ? a.node : -1;
    const int pb = b.on_tape() ? b.node : -1;
    std::vector<int> parents;
    if (pa >= 0) parents.push_back(pa);
    if (pb >= 0) parents.push_back(pb);
    out.tape = tp;
    out.node = tp->record(std::move(parents), out.data.size(),
        [pa, pb](const std::vector<double>& og, Tape& t) {
          if (pa >= 0) {
            auto& ga = t.grad_buf(pa);
            for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i];
          }
          if (pb >= 0) {
            auto& gb = t.grad_buf(pb);
            for (std::size_t i = 0; i < og.size(); ++i) gb[i] -= og[i];
          }
        });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  need_same_shape(a, b, "mul");
  Tensor out;
  out.shape = a.shape;
  out.data.resize(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  Tape* tp = merged(a, b, "mul");
  if (tp) {
    const int pa = a.on_tape() ? a.node : -1;
    const int pb = b.on_tape() ? b.node : -1;
    std::vector<int> parents;
    if (pa >= 0) parents.push_back(pa);
    if (pb >= 0) parents.push_back(pb);
    out.tape = tp;
    out.node = tp->record(std::move(parents), out.data.size(),
        [pa, pb, ad = a.data, bd = b.data](const std::vector<double>& og, Tape& t) {
          if (pa >= 0) {
            auto& ga = t.grad_buf(pa);
            for (std::size_t i = 0; i < og.size(); ++i) ga[i] += bd[i] * og[i];
          }
          if (pb >= 0) {
            auto& gb = t.grad_buf(pb);
            for (std::size_t i = 0; i < og.size(); ++i) gb[i] += ad[i] * og[i];
          }
        });
  }
  return out;
}

Tensor add_rowwise(const Tensor& m, const Tensor& row) {
  if (m.rank() != 2 || row.rank() != 1 || row.shape[0] != m.cols())
    throw std::invalid_argument("add_rowwise: need matrix[n x k] and row[k]");
  const std::size_t r = m.rows(), c = m.cols();
  Tensor out;
  out.shape = m.shape;
  out.data.resize(m.data.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = m.data[i * c + j] + row.data[j];
  Tape* tp = merged(m, row, "add_rowwise");
  if (tp) {
    const int pm = m.on_tape() ? m.node : -1;
    const int pr = row.on_tape() ? row.node : -1;
    std::vector<int> parents;
    if (pm >= 0) parents.push_back(pm);
    if (pr >= 0) parents.push_back(pr);
    out.tape = tp;
    out.node = tp->record(std::move(parents), out.data.size(),
        [pm, pr, r, c](const std::vector<double>& og, Tape& t) {
          if (pm >= 0) {
            auto& gm = t.grad_buf(pm);
            for (std::size_t i = 0; i < og.size(); ++i) gm[i] += og[i];
          }
          if (pr >= 0) {
            auto& gr = t.grad_buf(pr);
            for (std::size_t j = 0; j < c; ++j) {
              double s = 0.0;
              for (std::size_t i = 0; i < r; ++i) s += og[i * c + j];
              gr[j] += s;
            }
          }
        });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data.size()), d(a.data.size(), 1.0);
  for (std::size_t i = 0; i < a.data.size(); ++i) out[i] = a.data[i] + s;
  return unary(a, std::move(out), std::move(d));
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data.size()), d(a.data.size(), s);
  for (std::size_t i = 0; i < a.data.size(); ++i) out[i] = a.data[i] * s;
  return unary(a, std::move(out), std::move(d));
}

Tensor max_with_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data.size()), d(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out[i] = a.data[i] > s ? a.data[i] : s;
    d[i] = a.data[i] > s ? 1.0 : 0.0;
  }
  return unary(a, std::move(out), std::move(d));
}

Tensor relu(const Tensor& a) { return max_with_scalar(a, 0.0); }

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.data.size()), d(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out[i] = std::tanh(a.data[i]);
    d[i] = 1.0 - out[i] * out[i];
  }
  return unary(a, std::move(out), std::move(d));
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.data.size()), d(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out[i] = std::exp(a.data[i]);
    d[i] = out[i];
  }
  return unary(a, std::move(out), std::move(d));
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.data.size()), d(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if (!(a.data[i] > 0.0)) throw std::domain_error("log: input must be strictly positive");
    out[i] = std::log(a.data[i]);
    d[i] = 1.0 / a.data[i];
  }
  return unary(a, std::move(out), std::move(d));
}

Tensor neg(const Tensor& a) {
  std::vector<double> out(a.data.size()), d(a.data.size(), -1.0);
  for (std::size_t i = 0; i < a.data.size(); ++i) out[i] = -a.data[i];
  return unary(a, std::move(out), std::move(d));
}

Tensor abs(const Tensor& a) {
  std::vector<double> out(a.data.size()), d(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out[i] = std::fabs(a.data[i]);
    d[i] = a.data[i] > 0.0 ? 1.0 : (a.data[i] < 0.0 ? -1.0 : 0.0);
  }
  return unary(a, std::move(out), std::move(d));
}

Tensor square(const Tensor& a) {
  std::vector<double> out(a.data.size()), d(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out[i] = a.data[i] * a.data[i];
    d[i] = 2.0 * a.data[i];
  }
  return unary(a, std::move(out), std::move(d));
}

Tensor sqrt(const Tensor& a) {
  std::vector<double> out(a.data.size()), d(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if (a.data[i] < 0.0) throw std::domain_error("sqrt: input must be nonnegative");
    out[i] = std::sqrt(a.data[i]);
    d[i] = a.data[i] > 0.0 ? 0.5 / out[i] : 0.0;
  }
  return unary(a, std::move(out), std::move(d));
}

Tensor sum(const Tensor& a) {
  need_nonempty(a, "sum");
  Tensor out;
  out.data = {kernels::sum(a.data.data(), a.data.size())};
  if (a.on_tape()) {
    const int pa = a.node;
    out.tape = a.tape;
    out.node = a.tape->record({pa}, 1,
        [pa](const std::vector<double>& og, Tape& t) {
          auto& ga = t.grad_buf(pa);
          for (double& g : ga) g += og[0];
        });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  need_nonempty(a, "mean");
  const double inv = 1.0 / static_cast<double>(a.data.size());
  Tensor out;
  out.data = {kernels::sum(a.data.data(), a.data.size()) * inv};
  if (a.on_tape()) {
    const int pa = a.node;
    out.tape = a.tape;
    out.node = a.tape->record({pa}, 1,
        [pa, inv](const std::vector<double>& og, Tape& t) {
          auto& ga = t.grad_buf(pa);
          for (double& g : ga) g += inv * og[0];
        });
  }
  return out;
}

namespace {

Tensor axis_reduce(const Tensor& a, int axis, bool take_mean, const char* op) {
  if (a.rank() != 2) throw std::invalid_argument(std::string(op) + ": tensor is not rank 2");
  if (axis != 0 && axis != 1) throw std::invalid_argument(std::string(op) + ": axis out of range");
  need_nonempty(a, op);
  const std::size_t r = a.rows(), c = a.cols();
  const std::size_t out_len = axis == 0 ? c : r;
  const double inv = take_mean ? 1.0 / static_cast<double>(axis == 0 ? r : c) : 1.0;
  Tensor out;
  out.shape = {out_len};
  out.data.assign(out_len, 0.0);
  if (axis == 0) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.data[j] += a.data[i * c + j];
  } else {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.data[i] += a.data[i * c + j];
  }
  if (take_mean)
    for (double& v : out.data) v *= inv;
  if (a.on_tape()) {
    const int pa = a.node;
    out.tape = a.tape;
    out.node = a.tape->record({pa}, out.data.size(),
        [pa, axis, r, c, inv](const std::vector<double>& og, Tape& t) {
          auto& ga = t.grad_buf(pa);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              ga[i * c + j] += inv * og[axis == 0 ? j : i];
        });
  }
  return out;
}

}  // namespace

Tensor sum_axis(const Tensor& a, int axis) { return axis_reduce(a, axis, false, "sum_axis"); }
Tensor mean_axis(const Tensor& a, int axis) { return axis_reduce(a, axis, true, "mean_axis"); }

Tensor l2_norm(const Tensor& a) {
  need_nonempty(a, "l2_norm");
  const double norm = std::sqrt(kernels::sum_sq(a.data.data(), a.data.size()));
  Tensor out;
  out.data = {norm};
  if (a.on_tape()) {
    const int pa = a.node;
    out.tape = a.tape;
    out.node = a.tape->record({pa}, 1,
        [pa, ad = a.data, norm](const std::vector<double>& og, Tape& t) {
          if (norm == 0.0) return;  // zero subgradient at the origin
          auto& ga = t.grad_buf(pa);
          for (std::size_t i = 0; i < ad.size(); ++i) ga[i] += ad[i] / norm * og[0];
        });
  }
  return out;
}

Tensor div_by_scalar_tensor(const Tensor& a, const Tensor& s) {
  if (s.data.size() != 1)
    throw std::invalid_argument("div_by_scalar_tensor: divisor must be scalar");
  const double sv = s.data[0];
  if (sv == 0.0) throw std::domain_error("div_by_scalar_tensor: division by zero");
  Tensor out;
  out.shape = a.shape;
  out.data.resize(a.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] / sv;
  Tape* tp = merged(a, s, "div_by_scalar_tensor");
  if (tp) {
    const int pa = a.on_tape() ? a.node : -1;
    const int ps = s.on_tape() ? s.node : -1;
    std::vector<int> parents;
    if (pa >= 0) parents.push_back(pa);
    if (ps >= 0) parents.push_back(ps);
    out.tape = tp;
    out.node = tp->record(std::move(parents), out.data.size(),
        [pa, ps, ad = a.data, sv](const std::vector<double>& og, Tape& t) {
          if (pa >= 0) {
            auto& ga = t.grad_buf(pa);
            for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] / sv;
          }
          if (ps >= 0) {
            double acc = 0.0;
            for (std::size_t i = 0; i < og.size(); ++i) acc += og[i] * (-ad[i] / (sv * sv));
            t.grad_buf(ps)[0] += acc;
          }
        });
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_rows: tensor is not rank 2");
  const std::size_t r = logits.rows(), c = logits.cols();
  Tensor out;
  out.shape = logits.shape;
  out.data.resize(logits.data.size());
  kernels::softmax_rows(out.data.data(), logits.data.data(), r, c);
  if (logits.on_tape()) {
    const int pa = logits.node;
    out.tape = logits.tape;
    out.node = logits.tape->record({pa}, out.data.size(),
        [pa, y = out.data, r, c](const std::vector<double>& og, Tape& t) {
          auto& gx = t.grad_buf(pa);
          for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += og[i * c + j] * y[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
              gx[i * c + j] += y[i * c + j] * (og[i * c + j] - dot);
          }
        });
  }
  return out;
}

Tensor logsumexp_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("logsumexp_rows: tensor is not rank 2");
  const std::size_t r = logits.rows(), c = logits.cols();
  Tensor out;
  out.shape = {r};
  out.data.resize(r);
  std::vector<double> p(logits.data.size());
  kernels::softmax_rows(p.data(), logits.data.data(), r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = logits.data.data() + i * c;
    double mx = xi[0];
    for (std::size_t j = 1; j < c; ++j) mx = xi[j] > mx ? xi[j] : mx;
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(xi[j] - mx);
    out.data[i] = mx + std::log(denom);
  }
  if (logits.on_tape()) {
    const int pa = logits.node;
    out.tape = logits.tape;
    out.node = logits.tape->record({pa}, out.data.size(),
        [pa, p = std::move(p), r, c](const std::vector<double>& og, Tape& t) {
          auto& gx = t.grad_buf(pa);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += p[i * c + j] * og[i];
        });
  }
  return out;
}

Tensor gather_rows(const Tensor& m, const std::vector<int>& col_idx) {
  if (m.rank() != 2) throw std::invalid_argument("gather_rows: tensor is not rank 2");
  const std::size_t r = m.rows(), c = m.cols();
  if (col_idx.size() != r)
    throw std::invalid_argument("gather_rows: one column index per row required");
  for (int j : col_idx)
    if (j < 0 || static_cast<std::size_t>(j) >= c)
      throw std::invalid_argument("gather_rows: column index out of range");
  Tensor out;
  out.shape = {r};
  out.data.resize(r);
  for (std::size_t i = 0; i < r; ++i)
    out.data[i] = m.data[i * c + static_cast<std::size_t>(col_idx[i])];
  if (m.on_tape()) {
    const int pm = m.node;
    out.tape = m.tape;
    out.node = m.tape->record({pm}, out.data.size(),
        [pm, idx = col_idx, c](const std::vector<double>& og, Tape& t) {
          auto& gm = t.grad_buf(pm);
          for (std::size_t i = 0; i < og.size(); ++i)
            gm[i * c + static_cast<std::size_t>(idx[i])] += og[i];
        });
  }
  return out;
}

Tensor pair_loss_sum(const Tensor& a, const Tensor& b,
                     std::vector<kernels::PairTerm> pairs, double margin) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("pair_loss_sum: both inputs must be rank 2");
  if (a.cols() != b.cols())
    throw std::invalid_argument("pair_loss_sum: feature dimensions do not match");
  const std::size_t ra = a.rows(), rb = b.rows(), d = a.cols();
  for (const auto& p : pairs) {
    if (p.i < 0 || static_cast<std::size_t>(p.i) >= ra || p.j < 0 ||
        static_cast<std::size_t>(p.j) >= rb)
      throw std::invalid_argument("pair_loss_sum: pair index out of range");
  }
  Tensor out;
  out.data = {kernels::contrastive_sum(a.data.data(), b.data.data(), d, pairs.data(),
                                       pairs.size(), margin)};
  Tape* tp = merged(a, b, "pair_loss_sum");
  if (tp) {
    const int pa = a.on_tape() ? a.node : -1;
    const int pb = b.on_tape() ? b.node : -1;
    std::vector<int> parents;
    if (pa >= 0) parents.push_back(pa);
    if (pb >= 0 && pb != pa) parents.push_back(pb);
    out.tape = tp;
    out.node = tp->record(std::move(parents), 1,
        [pa, pb, ad = a.data, bd = b.data, ra, rb, d, ps = std::move(pairs),
         margin](const std::vector<double>& og, Tape& t) {
          std::vector<double> scratch_a, scratch_b;
          double* da;
          double* db;
          if (pa >= 0) {
            da = t.grad_buf(pa).data();
          } else {
            scratch_a.assign(ra * d, 0.0);
            da = scratch_a.data();
          }
          if (pb >= 0) {
            db = t.grad_buf(pb).data();
          } else {
            scratch_b.assign(rb * d, 0.0);
            db = scratch_b.data();
          }
          kernels::contrastive_grad(da, db, ad.data(), bd.data(), ra, rb, d,
                                    ps.data(), ps.size(), margin, og[0]);
        });
  }
  return out;
}

Tensor detach(const Tensor& t) {
  Tensor out;
  out.shape = t.shape;
  out.data = t.data;
  return out;
}

}  // namespace cosca::ad
