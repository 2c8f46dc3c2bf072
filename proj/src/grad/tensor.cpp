#include "grad/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tokforge::grad {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

bool Tensor::is_scalar() const {
  return size() == 1;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.data = std::make_shared<std::vector<double>>(shape_numel(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor_from: zero dimension");
  }
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor_from: " + std::to_string(values.size()) +
                                " values for a shape of " + std::to_string(shape_numel(shape)));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("tensor_from: non-finite value");
  }
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(std::move(values));
  return t;
}

Tensor Tensor::scalar(double v) {
  return from({1}, {v});
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape = shape;
  t.data = std::make_shared<std::vector<double>>(*data);
  return t;
}

}  // namespace tokforge::grad
