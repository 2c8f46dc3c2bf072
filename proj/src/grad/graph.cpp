#include "grad/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tokforge::grad {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void add_into(std::vector<double>& acc, std::size_t n, const double* src, double w = 1.0) {
  if (acc.empty()) acc.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) acc[i] += w * src[i];
}

}  // namespace

const Tensor* GradMap::find(const Tensor& leaf) const {
  if (!leaf.tracked()) return nullptr;
  auto it = grads_.find(leaf.node);
  return it == grads_.end() ? nullptr : &it->second;
}

Tensor GradMap::get_or_zeros(const Tensor& leaf) const {
  if (const Tensor* g = find(leaf)) return *g;
  return Tensor::zeros(leaf.shape);
}

double GradMap::global_norm() const {
  double sq = 0.0;
  for (const auto& [id, g] : grads_) {
    for (double v : g.values()) sq += v * v;
  }
  return std::sqrt(sq);
}

GradMap clip_global_norm(const GradMap& grads, double max_norm) {
  require(max_norm > 0.0, "clip_global_norm: max_norm must be positive");
  const double norm = grads.global_norm();
  GradMap out;
  const double s = norm > max_norm ? max_norm / norm : 1.0;
  for (const auto& [id, g] : grads.entries()) {
    Tensor c = g.clone();
    if (s != 1.0) {
      for (double& v : c.values()) v *= s;
    }
    out.insert(id, std::move(c));
  }
  return out;
}

int Graph::record(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_mine(const Tensor& t, const char* op) const {
  if (t.tracked() && t.graph != nullptr && t.graph != this) {
    throw std::invalid_argument(std::string(op) + ": tensor belongs to another graph");
  }
}

Tensor Graph::finish(Tensor out, Node n, bool any_tracked) {
  if (recording_ && any_tracked) {
    out.node = record(std::move(n));
    out.graph = this;
    out.requires_grad = true;
  }
  return out;
}

Tensor Graph::leaf(std::vector<std::size_t> shape, std::vector<double> values) {
  Tensor t = Tensor::from(std::move(shape), std::move(values));
  return watch(t);
}

Tensor Graph::watch(const Tensor& t) {
  Tensor v = t;  // shares data
  v.graph = nullptr;
  v.node = -1;
  v.requires_grad = false;
  if (recording_) {
    Node n;
    n.op = Op::Leaf;
    n.ta = v;
    v.node = record(std::move(n));
    v.graph = this;
    v.requires_grad = true;
  }
  return v;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  check_mine(a, "add");
  check_mine(b, "add");
  require(a.shape == b.shape, "add: shape mismatch");
  Tensor out = Tensor::zeros(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  Node n;
  n.op = Op::Add;
  n.a = track(a) ? a.node : -1;
  n.b = track(b) ? b.node : -1;
  n.ta = a;
  n.tb = b;
  return finish(std::move(out), std::move(n), n.a >= 0 || n.b >= 0);
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  check_mine(a, "sub");
  check_mine(b, "sub");
  require(a.shape == b.shape, "sub: shape mismatch");
  Tensor out = Tensor::zeros(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  Node n;
  n.op = Op::Sub;
  n.a = track(a) ? a.node : -1;
  n.b = track(b) ? b.node : -1;
  n.ta = a;
  n.tb = b;
  return finish(std::move(out), std::move(n), n.a >= 0 || n.b >= 0);
}

Tensor Graph::scale(const Tensor& a, double c) {
  check_mine(a, "scale");
  Tensor out = Tensor::zeros(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
  Node n;
  n.op = Op::Scale;
  n.a = track(a) ? a.node : -1;
  n.ta = a;
  n.c = c;
  return finish(std::move(out), std::move(n), n.a >= 0);
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  check_mine(a, "matmul");
  check_mine(b, "matmul");
  require(a.shape.size() == 2 && b.shape.size() == 2, "matmul: operands must be 2-D");
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  require(b.shape[0] == k, "matmul: inner dimensions disagree");
  Tensor out = Tensor::zeros({m, n});
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = av[i * k + kk];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += aik * bv[kk * n + j];
    }
  }
  Node nd;
  nd.op = Op::Matmul;
  nd.a = track(a) ? a.node : -1;
  nd.b = track(b) ? b.node : -1;
  nd.ta = a;
  nd.tb = b;
  return finish(std::move(out), std::move(nd), nd.a >= 0 || nd.b >= 0);
}

Tensor Graph::add_broadcast(const Tensor& a, const Tensor& b) {
  check_mine(a, "add_broadcast");
  check_mine(b, "add_broadcast");
  require(a.shape.size() == 2, "add_broadcast: matrix must be 2-D");
  require(b.shape.size() == 1, "add_broadcast: bias must be 1-D");
  const std::size_t m = a.shape[0], n = a.shape[1];
  require(b.shape[0] == n, "add_broadcast: bias length disagrees with matrix width");
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + b[j];
  }
  Node nd;
  nd.op = Op::AddBroadcast;
  nd.a = track(a) ? a.node : -1;
  nd.b = track(b) ? b.node : -1;
  nd.ta = a;
  nd.tb = b;
  return finish(std::move(out), std::move(nd), nd.a >= 0 || nd.b >= 0);
}

Tensor Graph::repeat_rows(const Tensor& v, std::size_t m) {
  check_mine(v, "repeat_rows");
  require(v.shape.size() == 1, "repeat_rows: input must be 1-D");
  require(m >= 1, "repeat_rows: need at least one row");
  const std::size_t n = v.shape[0];
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = v[j];
  }
  Node nd;
  nd.op = Op::RepeatRows;
  nd.a = track(v) ? v.node : -1;
  nd.ta = v;
  return finish(std::move(out), std::move(nd), nd.a >= 0);
}

Tensor Graph::scale_cols(const Tensor& a, const std::vector<double>& s) {
  check_mine(a, "scale_cols");
  require(a.shape.size() == 2, "scale_cols: matrix must be 2-D");
  const std::size_t m = a.shape[0], n = a.shape[1];
  require(s.size() == n, "scale_cols: scale length disagrees with matrix width");
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] * s[j];
  }
  Node nd;
  nd.op = Op::ScaleCols;
  nd.a = track(a) ? a.node : -1;
  nd.ta = a;
  nd.aux = s;
  return finish(std::move(out), std::move(nd), nd.a >= 0);
}

Tensor Graph::concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  bool any = false;
  for (const Tensor& p : parts) {
    check_mine(p, "concat_cols");
    require(p.rows() == m, "concat_cols: leading dimensions disagree");
    total += p.cols();
    any = any || track(p);
  }
  Tensor out = Tensor::zeros({m, total});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < w; ++j) out[i * total + off + j] = p.values()[i * w + j];
    }
    off += w;
  }
  Node nd;
  nd.op = Op::ConcatCols;
  for (const Tensor& p : parts) {
    nd.part_ids.push_back(track(p) ? p.node : -1);
    nd.tparts.push_back(p);
  }
  return finish(std::move(out), std::move(nd), any);
}

Tensor Graph::concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: no parts");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  bool any = false;
  for (const Tensor& p : parts) {
    check_mine(p, "concat_rows");
    require(p.cols() == n, "concat_rows: widths disagree");
    total += p.rows();
    any = any || track(p);
  }
  Tensor out = Tensor::zeros({total, n});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i) out[off + i] = p[i];
    off += p.size();
  }
  Node nd;
  nd.op = Op::ConcatRows;
  for (const Tensor& p : parts) {
    nd.part_ids.push_back(track(p) ? p.node : -1);
    nd.tparts.push_back(p);
  }
  return finish(std::move(out), std::move(nd), any);
}

Tensor Graph::silu(const Tensor& x) {
  check_mine(x, "silu");
  Tensor out = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * sigmoid(x[i]);
  Node nd;
  nd.op = Op::Silu;
  nd.a = track(x) ? x.node : -1;
  nd.ta = x;
  return finish(std::move(out), std::move(nd), nd.a >= 0);
}

Tensor Graph::tanh_act(const Tensor& x) {
  check_mine(x, "tanh_act");
  Tensor out = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  Node nd;
  nd.op = Op::Tanh;
  nd.a = track(x) ? x.node : -1;
  nd.ta = x;
  return finish(std::move(out), std::move(nd), nd.a >= 0);
}

Tensor Graph::sum(const Tensor& x) {
  check_mine(x, "sum");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  Tensor out = Tensor::scalar(s);
  Node nd;
  nd.op = Op::Sum;
  nd.a = track(x) ? x.node : -1;
  nd.ta = x;
  return finish(std::move(out), std::move(nd), nd.a >= 0);
}

Tensor Graph::mean_sq_err(const Tensor& pred, const Tensor& target) {
  check_mine(pred, "mean_sq_err");
  check_mine(target, "mean_sq_err");
  require(pred.shape == target.shape, "mean_sq_err: shape mismatch");
  const std::size_t n = pred.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  Tensor out = Tensor::scalar(s / static_cast<double>(n));
  Node nd;
  nd.op = Op::MeanSqErr;
  nd.a = track(pred) ? pred.node : -1;
  nd.b = track(target) ? target.node : -1;
  nd.ta = pred;
  nd.tb = target;
  return finish(std::move(out), std::move(nd), nd.a >= 0 || nd.b >= 0);
}

Tensor Graph::softmax_cross_entropy(const Tensor& logits, std::size_t target) {
  require(logits.shape.size() == 1, "softmax_cross_entropy: logits must be 1-D");
  require(target < logits.shape[0], "softmax_cross_entropy: target out of range");
  return cross_entropy_mean(logits, {static_cast<int>(target)});
}

Tensor Graph::cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets) {
  check_mine(logits, "cross_entropy_mean");
  const std::size_t m = logits.rows();
  const std::size_t k = logits.cols();
  require(k >= 1, "cross_entropy_mean: empty logits");
  require(targets.size() == m, "cross_entropy_mean: one target per row required");
  for (int t : targets) {
    require(t >= 0 && static_cast<std::size_t>(t) < k, "cross_entropy_mean: target out of range");
  }
  std::vector<double> probs(m * k);
  double loss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = logits.values().data() + r * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z);
    for (std::size_t j = 0; j < k; ++j) probs[r * k + j] = std::exp(row[j] - mx) / z;
    loss += -(row[targets[r]] - mx - logz);
  }
  Tensor out = Tensor::scalar(loss / static_cast<double>(m));
  Node nd;
  nd.op = Op::CrossEntropy;
  nd.a = track(logits) ? logits.node : -1;
  nd.ta = logits;
  nd.aux = std::move(probs);
  nd.targets = targets;
  return finish(std::move(out), std::move(nd), nd.a >= 0);
}

GradMap Graph::backward(const Tensor& loss) const {
  require(loss.is_scalar(), "backward: loss must be scalar");
  require(loss.tracked() && loss.graph == this, "backward: loss is not tracked by this graph");

  std::vector<std::vector<double>> adj(nodes_.size());
  adj[loss.node].assign(1, 1.0);

  GradMap grads;
  for (int i = loss.node; i >= 0; --i) {
    if (adj[i].empty()) continue;
    const Node& nd = nodes_[i];
    const std::vector<double>& g = adj[i];
    switch (nd.op) {
      case Op::Leaf: {
        Tensor gt = Tensor::zeros(nd.ta.shape);
        gt.values() = g;
        grads.insert(i, std::move(gt));
        break;
      }
      case Op::Add: {
        if (nd.a >= 0) add_into(adj[nd.a], g.size(), g.data());
        if (nd.b >= 0) add_into(adj[nd.b], g.size(), g.data());
        break;
      }
      case Op::Sub: {
        if (nd.a >= 0) add_into(adj[nd.a], g.size(), g.data());
        if (nd.b >= 0) add_into(adj[nd.b], g.size(), g.data(), -1.0);
        break;
      }
      case Op::Scale: {
        if (nd.a >= 0) add_into(adj[nd.a], g.size(), g.data(), nd.c);
        break;
      }
      case Op::Matmul: {
        const std::size_t m = nd.ta.shape[0], k = nd.ta.shape[1], n = nd.tb.shape[1];
        if (nd.a >= 0) {
          auto& da = adj[nd.a];
          if (da.empty()) da.assign(m * k, 0.0);
          // dA = dC * B^T
          for (std::size_t i2 = 0; i2 < m; ++i2) {
            for (std::size_t j = 0; j < n; ++j) {
              const double gij = g[i2 * n + j];
              if (gij == 0.0) continue;
              for (std::size_t kk = 0; kk < k; ++kk) {
                da[i2 * k + kk] += gij * nd.tb.values()[kk * n + j];
              }
            }
          }
        }
        if (nd.b >= 0) {
          auto& db = adj[nd.b];
          if (db.empty()) db.assign(k * n, 0.0);
          // dB = A^T * dC
          for (std::size_t i2 = 0; i2 < m; ++i2) {
            for (std::size_t kk = 0; kk < k; ++kk) {
              const double aik = nd.ta.values()[i2 * k + kk];
              if (aik == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j) {
                db[kk * n + j] += aik * g[i2 * n + j];
              }
            }
          }
        }
        break;
      }
      case Op::AddBroadcast: {
        const std::size_t m = nd.ta.shape[0], n = nd.ta.shape[1];
        if (nd.a >= 0) add_into(adj[nd.a], g.size(), g.data());
        if (nd.b >= 0) {
          auto& db = adj[nd.b];
          if (db.empty()) db.assign(n, 0.0);
          for (std::size_t i2 = 0; i2 < m; ++i2) {
            for (std::size_t j = 0; j < n; ++j) db[j] += g[i2 * n + j];
          }
        }
        break;
      }
      case Op::RepeatRows: {
        const std::size_t n = nd.ta.shape[0];
        const std::size_t m = g.size() / n;
        if (nd.a >= 0) {
          auto& dv = adj[nd.a];
          if (dv.empty()) dv.assign(n, 0.0);
          for (std::size_t i2 = 0; i2 < m; ++i2) {
            for (std::size_t j = 0; j < n; ++j) dv[j] += g[i2 * n + j];
          }
        }
        break;
      }
      case Op::ScaleCols: {
        if (nd.a >= 0) {
          const std::size_t m = nd.ta.shape[0], n = nd.ta.shape[1];
          auto& da = adj[nd.a];
          if (da.empty()) da.assign(m * n, 0.0);
          for (std::size_t i2 = 0; i2 < m; ++i2) {
            for (std::size_t j = 0; j < n; ++j) da[i2 * n + j] += g[i2 * n + j] * nd.aux[j];
          }
        }
        break;
      }
      case Op::ConcatCols: {
        const std::size_t m = nd.tparts[0].rows();
        std::size_t total = 0;
        for (const Tensor& p : nd.tparts) total += p.cols();
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < nd.tparts.size(); ++pi) {
          const std::size_t w = nd.tparts[pi].cols();
          if (nd.part_ids[pi] >= 0) {
            auto& dp = adj[nd.part_ids[pi]];
            if (dp.empty()) dp.assign(m * w, 0.0);
            for (std::size_t i2 = 0; i2 < m; ++i2) {
              for (std::size_t j = 0; j < w; ++j) dp[i2 * w + j] += g[i2 * total + off + j];
            }
          }
          off += w;
        }
        break;
      }
      case Op::ConcatRows: {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < nd.tparts.size(); ++pi) {
          const std::size_t sz = nd.tparts[pi].size();
          if (nd.part_ids[pi] >= 0) {
            add_into(adj[nd.part_ids[pi]], sz, g.data() + off);
          }
          off += sz;
        }
        break;
      }
      case Op::Silu: {
        if (nd.a >= 0) {
          auto& da = adj[nd.a];
          if (da.empty()) da.assign(g.size(), 0.0);
          for (std::size_t i2 = 0; i2 < g.size(); ++i2) {
            const double x = nd.ta.values()[i2];
            const double s = sigmoid(x);
            da[i2] += g[i2] * s * (1.0 + x * (1.0 - s));
          }
        }
        break;
      }
      case Op::Tanh: {
        if (nd.a >= 0) {
          auto& da = adj[nd.a];
          if (da.empty()) da.assign(g.size(), 0.0);
          for (std::size_t i2 = 0; i2 < g.size(); ++i2) {
            const double y = std::tanh(nd.ta.values()[i2]);
            da[i2] += g[i2] * (1.0 - y * y);
          }
        }
        break;
      }
      case Op::Sum: {
        if (nd.a >= 0) {
          auto& da = adj[nd.a];
          if (da.empty()) da.assign(nd.ta.size(), 0.0);
          for (double& v : da) v += g[0];
        }
        break;
      }
      case Op::MeanSqErr: {
        const std::size_t n = nd.ta.size();
        const double w = 2.0 * g[0] / static_cast<double>(n);
        if (nd.a >= 0) {
          auto& da = adj[nd.a];
          if (da.empty()) da.assign(n, 0.0);
          for (std::size_t i2 = 0; i2 < n; ++i2) {
            da[i2] += w * (nd.ta.values()[i2] - nd.tb.values()[i2]);
          }
        }
        if (nd.b >= 0) {
          auto& db = adj[nd.b];
          if (db.empty()) db.assign(n, 0.0);
          for (std::size_t i2 = 0; i2 < n; ++i2) {
            db[i2] -= w * (nd.ta.values()[i2] - nd.tb.values()[i2]);
          }
        }
        break;
      }
      case Op::CrossEntropy: {
        if (nd.a >= 0) {
          const std::size_t m = nd.ta.rows();
          const std::size_t k = nd.ta.cols();
          const double w = g[0] / static_cast<double>(m);
          auto& da = adj[nd.a];
          if (da.empty()) da.assign(m * k, 0.0);
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t j = 0; j < k; ++j) {
              double d = nd.aux[r * k + j];
              if (j == static_cast<std::size_t>(nd.targets[r])) d -= 1.0;
              da[r * k + j] += w * d;
            }
          }
        }
        break;
      }
    }
    adj[i].clear();
  }
  return grads;
}

}  // namespace tokforge::grad
