#include "cosca/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace cosca::ad {

namespace {
std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data = {v};
  return t;
}

Tensor Tensor::vec(std::vector<double> v) {
  Tensor t;
  t.shape = {v.size()};
  t.data = std::move(v);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  if (v.size() != rows * cols)
    throw std::invalid_argument("matrix: data length does not match rows*cols");
  Tensor t;
  t.shape = {rows, cols};
  t.data = std::move(v);
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.data.assign(shape_size(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t;
  t.data.assign(shape_size(shape), v);
  t.shape = std::move(shape);
  return t;
}

std::size_t Tensor::rows() const {
  if (shape.size() != 2) throw std::invalid_argument("rows: tensor is not rank 2");
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() != 2) throw std::invalid_argument("cols: tensor is not rank 2");
  return shape[1];
}

double Tensor::value() const {
  if (data.size() != 1) throw std::invalid_argument("value: tensor is not scalar");
  return data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (shape.size() != 2 || i >= shape[0] || j >= shape[1])
    throw std::invalid_argument("at: index out of range");
  return data[i * shape[1] + j];
}

double& Tensor::at(std::size_t i, std::size_t j) {
  if (shape.size() != 2 || i >= shape[0] || j >= shape[1])
    throw std::invalid_argument("at: index out of range");
  return data[i * shape[1] + j];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace cosca::ad
