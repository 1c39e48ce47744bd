#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cosca/kernels.hpp"
#include "cosca/tensor.hpp"

namespace cosca::ad {

// reverse-mode tape; nodes are stored in creation (topological) order and the
// backward sweep resets every gradient buffer first, so repeated backward
// passes over one tape are bit-identical
class Tape {
 public:
  // out_grad is the gradient of the loss w.r.t. this node's output; the
  // callback accumulates into the parents via grad_buf
  using BackFn = std::function<void(const std::vector<double>& out_grad, Tape&)>;

  Tensor leaf(std::vector<std::size_t> shape, std::vector<double> data);
  int record(std::vector<int> parents, std::size_t out_size, BackFn back);

  void backward(const Tensor& loss);
  bool has_grad(const Tensor& t) const;
  const std::vector<double>& grad(const Tensor& t) const;
  std::vector<double>& grad_buf(int node);
  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> parents;
    std::size_t size;
    BackFn back;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_rowwise(const Tensor& m, const Tensor& row);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor max_with_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);
Tensor mean_axis(const Tensor& a, int axis);
Tensor l2_norm(const Tensor& a);
Tensor div_by_scalar_tensor(const Tensor& a, const Tensor& s);
Tensor softmax_rows(const Tensor& logits);
Tensor logsumexp_rows(const Tensor& logits);
Tensor gather_rows(const Tensor& m, const std::vector<int>& col_idx);
// sum over pair terms: same-class pairs contribute squared distance, rest a
// squared hinge on the margin; a and b may be the same tensor
Tensor pair_loss_sum(const Tensor& a, const Tensor& b,
                     std::vector<kernels::PairTerm> pairs, double margin);
Tensor detach(const Tensor& t);

}  // namespace cosca::ad
