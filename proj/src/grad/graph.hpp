#pragma once

#include <map>
#include <vector>

#include "grad/tensor.hpp"

namespace tokforge::grad {

// Gradient of a scalar loss w.r.t. the graph's leaves, keyed by leaf node id.
// Iteration order is ascending node id, so joint reductions are bit-stable.
class GradMap {
 public:
  bool contains(const Tensor& leaf) const { return leaf.tracked() && grads_.count(leaf.node) > 0; }
  const Tensor* find(const Tensor& leaf) const;
  Tensor get_or_zeros(const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }

  void insert(int node, Tensor grad) { grads_.emplace(node, std::move(grad)); }
  std::map<int, Tensor>& entries() { return grads_; }
  const std::map<int, Tensor>& entries() const { return grads_; }

  // Joint L2 norm over every entry, summed in ascending node-id order.
  double global_norm() const;

 private:
  std::map<int, Tensor> grads_;
};

// Scales every entry by max_norm/norm when the joint norm exceeds max_norm.
GradMap clip_global_norm(const GradMap& grads, double max_norm);

// Append-only tape. Node inputs always precede the node, so a single reverse
// sweep visits each node exactly once. A non-recording graph runs the same
// arithmetic without building the tape, which is how no-grad sampling works.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }
  std::size_t node_count() const { return nodes_.size(); }

  // Tracked leaf owning fresh storage.
  Tensor leaf(std::vector<std::size_t> shape, std::vector<double> values);
  // Tracked view of an existing tensor; shares its storage. On a
  // non-recording graph this is a plain untracked view.
  Tensor watch(const Tensor& t);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double c);
  Tensor matmul(const Tensor& a, const Tensor& b);
  // A[m,n] + b[n] applied to every row.
  Tensor add_broadcast(const Tensor& a, const Tensor& b);
  // v[n] tiled into [m,n].
  Tensor repeat_rows(const Tensor& v, std::size_t m);
  // Column j of A multiplied by s[j]; s is a plain constant.
  Tensor scale_cols(const Tensor& a, const std::vector<double>& s);
  // Horizontal concat of [m, k_i] blocks.
  Tensor concat_cols(const std::vector<Tensor>& parts);
  // Vertical concat; 1-D parts are treated as single rows.
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor silu(const Tensor& x);
  Tensor tanh_act(const Tensor& x);
  Tensor sum(const Tensor& x);
  Tensor mean_sq_err(const Tensor& pred, const Tensor& target);
  // -log softmax(logits)[target]; logits is a length-K vector.
  Tensor softmax_cross_entropy(const Tensor& logits, std::size_t target);
  // Mean row-wise cross entropy over logits[m,K].
  Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets);

  // Reverse sweep from a scalar loss. Leaves not on any path to the loss get
  // no entry.
  GradMap backward(const Tensor& loss) const;

 private:
  enum class Op {
    Leaf,
    Add,
    Sub,
    Scale,
    Matmul,
    AddBroadcast,
    RepeatRows,
    ScaleCols,
    ConcatCols,
    ConcatRows,
    Silu,
    Tanh,
    Sum,
    MeanSqErr,
    CrossEntropy,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    Tensor ta, tb;                  // saved input values
    double c = 0.0;                 // scale factor
    std::vector<double> aux;        // op-specific (column scales, softmax probs)
    std::vector<int> targets;       // cross entropy
    std::vector<int> part_ids;      // concat inputs (-1 for untracked)
    std::vector<Tensor> tparts;     // concat inputs, saved for shapes
  };

  int record(Node n);
  bool track(const Tensor& t) const { return recording_ && t.tracked(); }
  void check_mine(const Tensor& t, const char* op) const;
  Tensor finish(Tensor out, Node n, bool any_tracked);

  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace tokforge::grad
