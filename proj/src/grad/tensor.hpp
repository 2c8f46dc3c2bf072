#pragma once

#include <cstddef>
#include <memory>
#include <vector>

namespace tokforge::grad {

class Graph;

// Dense row-major real array. `data` is shared so watched views and saved
// activations alias the same storage without copies. `node` ties a tensor to
// the graph that produced (or watched) it; -1 means untracked.
struct Tensor {
  std::vector<std::size_t> shape;
  std::shared_ptr<std::vector<double>> data;
  Graph* graph = nullptr;
  int node = -1;
  bool requires_grad = false;

  Tensor() = default;

  std::size_t size() const { return data ? data->size() : 0; }
  // 1-D tensors count as a single row.
  std::size_t rows() const { return shape.size() < 2 ? 1 : shape[0]; }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }
  bool tracked() const { return node >= 0; }
  bool is_scalar() const;

  double operator[](std::size_t i) const { return (*data)[i]; }
  double& operator[](std::size_t i) { return (*data)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*data)[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return (*data)[r * cols() + c]; }

  const std::vector<double>& values() const { return *data; }
  std::vector<double>& values() { return *data; }

  // Untracked constructors.
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);
  static Tensor scalar(double v);

  // Deep copy of the values; the copy is untracked.
  Tensor clone() const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace tokforge::grad
