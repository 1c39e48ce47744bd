#pragma once

#include <cstddef>
#include <vector>

namespace cosca::ad {

class Tape;

// dense row-major tensor; rank 0 with one element is a scalar
// tape/node link the value into a computation tape, -1 means untracked
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  Tape* tape = nullptr;
  int node = -1;

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool on_tape() const { return tape != nullptr && node >= 0; }
  bool is_scalar() const { return shape.empty() && data.size() == 1; }
  double value() const;
  double at(std::size_t i, std::size_t j) const;
  double& at(std::size_t i, std::size_t j);
  bool all_finite() const;
};

}  // namespace cosca::ad
