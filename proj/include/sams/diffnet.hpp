#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sams/common.hpp"
#include "sams/numerics.hpp"

namespace sams {

struct DistributionError : RuntimeFault {
  using RuntimeFault::RuntimeFault;
};

// Dense row-major matrix; the only tensor rank the networks here need.
struct Tensor2 {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Tensor2() = default;
  Tensor2(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {
    if (r <= 0 || c <= 0) throw ConfigError("Tensor2: dimensions must be positive");
  }
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
  std::size_t size() const { return v.size(); }

  static Tensor2 zeros_like(const Tensor2& other) { return Tensor2(other.rows, other.cols); }
};

// No zero-skipping here: 0 * NaN must stay NaN so diverged parameters behind a
// dead relu unit are still caught by the non-finite guards downstream.
inline Tensor2 matmul_values(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows) throw ConfigError("matmul: inner dimensions differ");
  Tensor2 c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      for (int j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  return c;
}

// Named parameters with matching gradient slots and Adam moments. Creation
// order is the serialization order, so construction must be deterministic.
class ParamStore {
 public:
  struct Slot {
    std::string name;
    Tensor2 value, grad, m, v;
  };

  explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

  enum class Init { XavierUniform, Zeros };

  Tensor2& create(const std::string& name, int rows, int cols, Init init) {
    if (index_.count(name)) throw ConfigError("ParamStore: duplicate parameter " + name);
    Slot slot;
    slot.name = name;
    slot.value = Tensor2(rows, cols);
    slot.grad = Tensor2(rows, cols);
    slot.m = Tensor2(rows, cols);
    slot.v = Tensor2(rows, cols);
    if (init == Init::XavierUniform) {
      const double limit = std::sqrt(6.0 / (rows + cols));
      std::uniform_real_distribution<double> unif(-limit, limit);
      for (double& x : slot.value.v) x = unif(rng_);
    }
    index_[name] = slots_.size();
    slots_.push_back(std::move(slot));
    return slots_.back().value;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Slot& slot(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
    return slots_[it->second];
  }
  const Slot& slot(const std::string& name) const {
    return const_cast<ParamStore*>(this)->slot(name);
  }
  Tensor2& value(const std::string& name) { return slot(name).value; }
  Tensor2& grad(const std::string& name) { return slot(name).grad; }
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }

  void zero_grads() {
    for (auto& s : slots_)
      std::fill(s.grad.v.begin(), s.grad.v.end(), 0.0);
  }

  double grad_norm() const {
    double ss = 0.0;
    for (const auto& s : slots_)
      for (double g : s.grad.v) ss += g * g;
    return std::sqrt(ss);
  }

  std::int64_t adam_t = 0;
  std::mt19937_64& rng() { return rng_; }

 private:
  std::vector<Slot> slots_;
  std::map<std::string, std::size_t> index_;
  std::mt19937_64 rng_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update from the accumulated gradients; grads are left untouched
// (callers zero them when starting the next batch).
inline void adam_step(ParamStore& store, const AdamConfig& cfg) {
  ++store.adam_t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.adam_t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.adam_t));
  for (auto& s : store.slots()) {
    for (std::size_t k = 0; k < s.value.size(); ++k) {
      const double g = s.grad.v[k];
      s.m.v[k] = cfg.beta1 * s.m.v[k] + (1.0 - cfg.beta1) * g;
      s.v.v[k] = cfg.beta2 * s.v.v[k] + (1.0 - cfg.beta2) * g * g;
      const double mhat = s.m.v[k] / bc1;
      const double vhat = s.v.v[k] / bc2;
      s.value.v[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// Reverse-mode tape. One forward build, one backward sweep; gradients of
// parameter leaves are flushed into their ParamStore on backward().
class Tape {
 public:
  struct Var {
    int idx = -1;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Tensor2 value) { return make_leaf(std::move(value)); }

  Var param(ParamStore& store, const std::string& name) {
    Var var = make_leaf(store.value(name));
    bindings_.push_back({&store, name, var.idx});
    return var;
  }

  const Tensor2& value(Var var) const { return nodes_[static_cast<std::size_t>(var.idx)].value; }
  const Tensor2& grad(Var var) const { return nodes_[static_cast<std::size_t>(var.idx)].grad; }

  Var matmul(Var a, Var b) {
    Tensor2 out = matmul_values(val(a), val(b));
    Var var = make_node(std::move(out));
    add_back(var, [this, a, b, var] {
      const Tensor2& dc = g(var);
      const Tensor2 &av = val(a), &bv = val(b);
      Tensor2& da = g(a);
      Tensor2& db = g(b);
      for (int i = 0; i < av.rows; ++i)
        for (int j = 0; j < bv.cols; ++j) {
          const double d = dc.at(i, j);
          if (d == 0.0) continue;
          for (int k = 0; k < av.cols; ++k) {
            da.at(i, k) += d * bv.at(k, j);
            db.at(k, j) += d * av.at(i, k);
          }
        }
    });
    return var;
  }

  Var add(Var a, Var b) {
    const Tensor2 &av = val(a), &bv = val(b);
    if (av.rows != bv.rows || av.cols != bv.cols) throw ConfigError("add: shape mismatch");
    Tensor2 out = av;
    for (std::size_t k = 0; k < out.size(); ++k) out.v[k] += bv.v[k];
    Var var = make_node(std::move(out));
    add_back(var, [this, a, b, var] {
      const Tensor2& dc = g(var);
      for (std::size_t k = 0; k < dc.size(); ++k) {
        g(a).v[k] += dc.v[k];
        g(b).v[k] += dc.v[k];
      }
    });
    return var;
  }

  // bias is 1 x cols, broadcast over rows
  Var add_rowvec(Var a, Var bias) {
    const Tensor2 &av = val(a), &bv = val(bias);
    if (bv.rows != 1 || bv.cols != av.cols) throw ConfigError("add_rowvec: shape mismatch");
    Tensor2 out = av;
    for (int i = 0; i < av.rows; ++i)
      for (int j = 0; j < av.cols; ++j) out.at(i, j) += bv.at(0, j);
    Var var = make_node(std::move(out));
    add_back(var, [this, a, bias, var] {
      const Tensor2& dc = g(var);
      for (int i = 0; i < dc.rows; ++i)
        for (int j = 0; j < dc.cols; ++j) {
          g(a).at(i, j) += dc.at(i, j);
          g(bias).at(0, j) += dc.at(i, j);
        }
    });
    return var;
  }

  Var relu(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
    Var var = make_node(std::move(out));
    add_back(var, [this, a, var] {
      const Tensor2& dc = g(var);
      const Tensor2& av = val(a);
      for (std::size_t k = 0; k < dc.size(); ++k)
        if (av.v[k] > 0.0) g(a).v[k] += dc.v[k];
    });
    return var;
  }

  Var leaky_relu(Var a, double slope = 0.2) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = x > 0.0 ? x : slope * x;
    Var var = make_node(std::move(out));
    add_back(var, [this, a, var, slope] {
      const Tensor2& dc = g(var);
      const Tensor2& av = val(a);
      for (std::size_t k = 0; k < dc.size(); ++k)
        g(a).v[k] += dc.v[k] * (av.v[k] > 0.0 ? 1.0 : slope);
    });
    return var;
  }

  Var softplus(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = x > 30.0 ? x : std::log1p(std::exp(x));
    Var var = make_node(std::move(out));
    add_back(var, [this, a, var] {
      const Tensor2& dc = g(var);
      const Tensor2& av = val(a);
      for (std::size_t k = 0; k < dc.size(); ++k)
        g(a).v[k] += dc.v[k] / (1.0 + std::exp(-av.v[k]));
    });
    return var;
  }

  Var row_softmax(Var a) {
    Tensor2 out = val(a);
    for (int i = 0; i < out.rows; ++i) {
      double mx = -1e300;
      for (int j = 0; j < out.cols; ++j) mx = std::max(mx, out.at(i, j));
      double sum = 0.0;
      for (int j = 0; j < out.cols; ++j) {
        out.at(i, j) = std::exp(out.at(i, j) - mx);
        sum += out.at(i, j);
      }
      for (int j = 0; j < out.cols; ++j) out.at(i, j) /= sum;
    }
    Var var = make_node(std::move(out));
    add_back(var, [this, a, var] {
      const Tensor2& y = val(var);
      const Tensor2& dy = g(var);
      for (int i = 0; i < y.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < y.cols; ++j) dot += dy.at(i, j) * y.at(i, j);
        for (int j = 0; j < y.cols; ++j)
          g(a).at(i, j) += y.at(i, j) * (dy.at(i, j) - dot);
      }
    });
    return var;
  }

  // u, w are n x 1 column vectors; out_ij = u_i + w_j
  Var outer_add(Var u, Var w) {
    const Tensor2 &uv = val(u), &wv = val(w);
    if (uv.cols != 1 || wv.cols != 1 || uv.rows != wv.rows)
      throw ConfigError("outer_add: needs two equal-length column vectors");
    Tensor2 out(uv.rows, uv.rows);
    for (int i = 0; i < uv.rows; ++i)
      for (int j = 0; j < uv.rows; ++j) out.at(i, j) = uv.at(i, 0) + wv.at(j, 0);
    Var var = make_node(std::move(out));
    add_back(var, [this, u, w, var] {
      const Tensor2& dc = g(var);
      for (int i = 0; i < dc.rows; ++i)
        for (int j = 0; j < dc.cols; ++j) {
          g(u).at(i, 0) += dc.at(i, j);
          g(w).at(j, 0) += dc.at(i, j);
        }
    });
    return var;
  }

  // s is a 1x1 parameter; out = s * constant
  Var scalar_times(Var s, Tensor2 constant) {
    const Tensor2& sv = val(s);
    if (sv.rows != 1 || sv.cols != 1) throw ConfigError("scalar_times: scalar must be 1x1");
    Tensor2 out = constant;
    for (double& x : out.v) x *= sv.at(0, 0);
    Var var = make_node(std::move(out));
    auto held = std::make_shared<Tensor2>(std::move(constant));
    add_back(var, [this, s, var, held] {
      const Tensor2& dc = g(var);
      double acc = 0.0;
      for (std::size_t k = 0; k < dc.size(); ++k) acc += dc.v[k] * held->v[k];
      g(s).at(0, 0) += acc;
    });
    return var;
  }

  // out_i = [sum_{j != i} h_j || h_i], shape n x 2d
  Var neighbor_sum_pool(Var h) {
    const Tensor2& hv = val(h);
    const int n = hv.rows, d = hv.cols;
    Tensor2 colsum(1, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) colsum.at(0, j) += hv.at(i, j);
    Tensor2 out(n, 2 * d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        out.at(i, j) = colsum.at(0, j) - hv.at(i, j);
        out.at(i, d + j) = hv.at(i, j);
      }
    Var var = make_node(std::move(out));
    add_back(var, [this, h, var, d] {
      const Tensor2& dc = g(var);
      const int n = dc.rows;
      for (int j = 0; j < d; ++j) {
        double col = 0.0;
        for (int i = 0; i < n; ++i) col += dc.at(i, j);
        for (int i = 0; i < n; ++i)
          g(h).at(i, j) += (col - dc.at(i, j)) + dc.at(i, d + j);
      }
    });
    return var;
  }

  // column sums, shape 1 x d
  Var global_sum_pool(Var h) {
    const Tensor2& hv = val(h);
    Tensor2 out(1, hv.cols);
    for (int i = 0; i < hv.rows; ++i)
      for (int j = 0; j < hv.cols; ++j) out.at(0, j) += hv.at(i, j);
    Var var = make_node(std::move(out));
    add_back(var, [this, h, var] {
      const Tensor2& dc = g(var);
      Tensor2& dh = g(h);
      for (int i = 0; i < dh.rows; ++i)
        for (int j = 0; j < dh.cols; ++j) dh.at(i, j) += dc.at(0, j);
    });
    return var;
  }

  // Per-row Dirichlet log-density of the constant simplex sample x given
  // concentrations; out is n x 1. Gradient wrt concentrations uses digamma.
  Var dirichlet_row_logpdfs(Var conc, Tensor2 x) {
    const Tensor2& cv = val(conc);
    if (cv.rows != x.rows || cv.cols != x.cols)
      throw ConfigError("dirichlet_row_logpdfs: shape mismatch");
    for (double c : cv.v)
      if (!(c > 0.0)) throw DistributionError("dirichlet: non-positive concentration");
    Tensor2 out(cv.rows, 1);
    for (int i = 0; i < cv.rows; ++i) {
      double csum = 0.0, acc = 0.0;
      for (int j = 0; j < cv.cols; ++j) {
        const double c = cv.at(i, j);
        csum += c;
        acc += (c - 1.0) * std::log(x.at(i, j)) - lgamma_fn(c);
      }
      out.at(i, 0) = acc + lgamma_fn(csum);
    }
    Var var = make_node(std::move(out));
    auto held = std::make_shared<Tensor2>(std::move(x));
    add_back(var, [this, conc, var, held] {
      const Tensor2& dc = g(var);
      const Tensor2& cv = val(conc);
      for (int i = 0; i < cv.rows; ++i) {
        const double d = dc.at(i, 0);
        if (d == 0.0) continue;
        double csum = 0.0;
        for (int j = 0; j < cv.cols; ++j) csum += cv.at(i, j);
        const double psi_sum = digamma_fn(csum);
        for (int j = 0; j < cv.cols; ++j)
          g(conc).at(i, j) +=
              d * (psi_sum - digamma_fn(cv.at(i, j)) + std::log(held->at(i, j)));
      }
    });
    return var;
  }

  // Per-row Dirichlet entropy, n x 1; gradient uses trigamma.
  Var dirichlet_row_entropies(Var conc) {
    const Tensor2& cv = val(conc);
    for (double c : cv.v)
      if (!(c > 0.0)) throw DistributionError("dirichlet: non-positive concentration");
    const int n = cv.rows, k = cv.cols;
    Tensor2 out(n, 1);
    for (int i = 0; i < n; ++i) {
      double csum = 0.0, logb = 0.0, acc = 0.0;
      for (int j = 0; j < k; ++j) {
        csum += cv.at(i, j);
        logb += lgamma_fn(cv.at(i, j));
      }
      logb -= lgamma_fn(csum);
      const double psi_sum = digamma_fn(csum);
      for (int j = 0; j < k; ++j) acc += (cv.at(i, j) - 1.0) * digamma_fn(cv.at(i, j));
      out.at(i, 0) = logb + (csum - k) * psi_sum - acc;
    }
    Var var = make_node(std::move(out));
    add_back(var, [this, conc, var, k] {
      const Tensor2& dc = g(var);
      const Tensor2& cv = val(conc);
      for (int i = 0; i < cv.rows; ++i) {
        const double d = dc.at(i, 0);
        if (d == 0.0) continue;
        double csum = 0.0;
        for (int j = 0; j < k; ++j) csum += cv.at(i, j);
        const double tri_sum = trigamma_fn(csum);
        for (int j = 0; j < k; ++j)
          g(conc).at(i, j) +=
              d * ((csum - k) * tri_sum - (cv.at(i, j) - 1.0) * trigamma_fn(cv.at(i, j)));
      }
    });
    return var;
  }

  Var sum_all(Var a) {
    const Tensor2& av = val(a);
    Tensor2 out(1, 1);
    for (double x : av.v) out.at(0, 0) += x;
    Var var = make_node(std::move(out));
    add_back(var, [this, a, var] {
      const double d = g(var).at(0, 0);
      for (double& x : g(a).v) x += d;
    });
    return var;
  }

  Var scale(Var a, double k) {
    Tensor2 out = val(a);
    for (double& x : out.v) x *= k;
    Var var = make_node(std::move(out));
    add_back(var, [this, a, var, k] {
      const Tensor2& dc = g(var);
      for (std::size_t i = 0; i < dc.size(); ++i) g(a).v[i] += k * dc.v[i];
    });
    return var;
  }

  Var add_const(Var a, double c) {
    Tensor2 out = val(a);
    for (double& x : out.v) x += c;
    Var var = make_node(std::move(out));
    add_back(var, [this, a, var] {
      const Tensor2& dc = g(var);
      for (std::size_t i = 0; i < dc.size(); ++i) g(a).v[i] += dc.v[i];
    });
    return var;
  }

  Var square(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.v) x *= x;
    Var var = make_node(std::move(out));
    add_back(var, [this, a, var] {
      const Tensor2& dc = g(var);
      const Tensor2& av = val(a);
      for (std::size_t i = 0; i < dc.size(); ++i) g(a).v[i] += 2.0 * av.v[i] * dc.v[i];
    });
    return var;
  }

  // Seeds the output gradient and sweeps the tape in reverse; parameter leaf
  // gradients are added into their stores.
  void backward(Var out, double seed = 1.0) {
    if (swept_) throw InternalError("Tape: backward called twice");
    swept_ = true;
    Tensor2& og = nodes_[static_cast<std::size_t>(out.idx)].grad;
    if (og.size() != 1) throw ConfigError("Tape::backward: output must be scalar");
    og.at(0, 0) = seed;
    for (auto it = backfns_.rbegin(); it != backfns_.rend(); ++it) (*it)();
    for (const auto& binding : bindings_) {
      Tensor2& target = binding.store->grad(binding.name);
      const Tensor2& source = nodes_[static_cast<std::size_t>(binding.idx)].grad;
      for (std::size_t k = 0; k < target.size(); ++k) target.v[k] += source.v[k];
    }
  }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
  };
  struct Binding {
    ParamStore* store;
    std::string name;
    int idx;
  };

  Var make_leaf(Tensor2 value) { return make_node(std::move(value)); }
  Var make_node(Tensor2 value) {
    Node node;
    node.grad = Tensor2::zeros_like(value);
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }
  void add_back(Var, std::function<void()> fn) { backfns_.push_back(std::move(fn)); }
  const Tensor2& val(Var v) const { return nodes_[static_cast<std::size_t>(v.idx)].value; }
  Tensor2& g(Var v) { return nodes_[static_cast<std::size_t>(v.idx)].grad; }

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> backfns_;
  std::vector<Binding> bindings_;
  bool swept_ = false;
};

using Var = Tape::Var;

// y = x W + b
inline Var dense_forward(Tape& tape, Var x, Var weight, Var bias) {
  return tape.add_rowvec(tape.matmul(x, weight), bias);
}

struct GatParams {
  Var weight;     // F x d
  Var attn_self;  // d x 1
  Var attn_peer;  // d x 1
  Var edge_bias;  // 1 x 1, coefficient on the normalized travel time
};

// Graph attention over the complete zone graph. Attention logits combine the
// transformed features of both endpoints with the edge travel time.
inline Var gat_forward(Tape& tape, Var node_features, const Tensor2& adjacency_norm,
                       const GatParams& params) {
  Var hw = tape.matmul(node_features, params.weight);
  Var self_score = tape.matmul(hw, params.attn_self);
  Var peer_score = tape.matmul(hw, params.attn_peer);
  Var logits = tape.add(tape.outer_add(self_score, peer_score),
                        tape.scalar_times(params.edge_bias, adjacency_norm));
  Var attn = tape.row_softmax(tape.leaky_relu(logits));
  return tape.matmul(attn, hw);
}

// Symmetric-normalized dense propagation matrix D^-1/2 (exp(-m/tau) + I) D^-1/2.
inline Tensor2 gcn_norm_adjacency(const Tensor2& travel_times, double tau) {
  if (travel_times.rows != travel_times.cols)
    throw ConfigError("gcn_norm_adjacency: square matrix required");
  if (!(tau > 0.0)) throw ConfigError("gcn_norm_adjacency: tau must be positive");
  const int n = travel_times.rows;
  Tensor2 a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a.at(i, j) = std::exp(-travel_times.at(i, j) / tau) + (i == j ? 1.0 : 0.0);
  std::vector<double> dinv(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j) deg += a.at(i, j);
    dinv[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a.at(i, j) *= dinv[static_cast<std::size_t>(i)] * dinv[static_cast<std::size_t>(j)];
  return a;
}

// One graph-convolution layer with a skip connection: ReLU(Hhat h W) + h.
// The skip requires equal input/output widths.
inline Var gcn_forward(Tape& tape, Var h, const Tensor2& hhat, Var weight) {
  const Tensor2& wv = tape.value(weight);
  if (wv.rows != wv.cols || tape.value(h).cols != wv.rows)
    throw ConfigError("gcn_forward: skip connection needs equal widths");
  Var mixed = tape.matmul(tape.input(hhat), h);
  return tape.add(tape.relu(tape.matmul(mixed, weight)), h);
}

enum class PoolMode { PerNodeNeighbors, Global };

inline Var sum_pool(Tape& tape, Var h, PoolMode mode) {
  return mode == PoolMode::PerNodeNeighbors ? tape.neighbor_sum_pool(h)
                                            : tape.global_sum_pool(h);
}

// ---- Dirichlet sampling (no gradients; sampling path only) ----

inline constexpr double kSimplexFloor = 1e-6;

namespace detail {

// Marsaglia-Tsang; shapes below 1 are boosted through Gamma(a + 1) U^(1/a).
inline double sample_gamma(double shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (shape < 1.0) {
    const double u = 1.0 - unif(rng);  // (0, 1]
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  std::normal_distribution<double> norm(0.0, 1.0);
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = norm(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = 1.0 - unif(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace detail

// Draw from Dir(conc) via normalized Gamma draws, then clamp to the simplex
// interior (floor kSimplexFloor) and renormalize.
inline std::vector<double> dirichlet_sample(const std::vector<double>& conc,
                                            std::mt19937_64& rng) {
  if (conc.empty()) throw DistributionError("dirichlet_sample: empty concentration");
  std::vector<double> x(conc.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < conc.size(); ++k) {
    if (!(conc[k] > 0.0)) throw DistributionError("dirichlet: non-positive concentration");
    x[k] = detail::sample_gamma(conc[k], rng);
    sum += x[k];
  }
  for (double& xi : x) xi = sum > 0.0 ? xi / sum : 1.0 / static_cast<double>(x.size());
  double renorm = 0.0;
  for (double& xi : x) {
    xi = std::max(xi, kSimplexFloor);
    renorm += xi;
  }
  for (double& xi : x) xi /= renorm;
  return x;
}

// Plain (non-tape) Dirichlet log density at an interior simplex point.
inline double dirichlet_logpdf(const std::vector<double>& conc,
                               const std::vector<double>& x) {
  if (conc.size() != x.size() || conc.empty())
    throw DistributionError("dirichlet_logpdf: size mismatch");
  double csum = 0.0, acc = 0.0;
  for (std::size_t k = 0; k < conc.size(); ++k) {
    if (!(conc[k] > 0.0)) throw DistributionError("dirichlet: non-positive concentration");
    if (!(x[k] > 0.0 && x[k] < 1.0))
      throw DistributionError("dirichlet_logpdf: x must be interior to the simplex");
    csum += conc[k];
    acc += (conc[k] - 1.0) * std::log(x[k]) - lgamma_fn(conc[k]);
  }
  return acc + lgamma_fn(csum);
}

// ---- Finite-difference gradient checking ----

// loss_fn(with_grad) must return the scalar loss and, when with_grad is true,
// accumulate analytic gradients into the store. Relative error uses
// max(|analytic|, |numeric|, 1e-4) as the denominator so dead entries do not
// drown the check in finite-difference noise.
inline double gradient_check(ParamStore& store,
                             const std::function<double(bool)>& loss_fn,
                             double h = 1e-5) {
  store.zero_grads();
  loss_fn(true);
  std::vector<Tensor2> analytic;
  for (const auto& s : store.slots()) analytic.push_back(s.grad);

  double max_rel = 0.0;
  for (std::size_t si = 0; si < store.slots().size(); ++si) {
    Tensor2& value = store.slots()[si].value;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double orig = value.v[k];
      value.v[k] = orig + h;
      const double f_plus = loss_fn(false);
      value.v[k] = orig - h;
      const double f_minus = loss_fn(false);
      value.v[k] = orig;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[si].v[k];
      const double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-4});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// ---- Checkpoint I/O ----
// Little-endian binary layout (version 1):
//   magic "SAMSCKP1" | u32 version | u32 n_sections
//   per section: str name | i64 adam_t | str rng_state | u32 n_params
//     per param: str name | u32 rows | u32 cols | f64[rows*cols] value
//                | f64[...] adam_m | f64[...] adam_v
//   str meta (free-form JSON)
// where str = u32 byte length + bytes.

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}
inline void write_i64(std::ostream& os, std::int64_t x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}
inline void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void write_f64s(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}
inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  if (!is) throw DataError("checkpoint: truncated file");
  return x;
}
inline std::int64_t read_i64(std::istream& is) {
  std::int64_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  if (!is) throw DataError("checkpoint: truncated file");
  return x;
}
inline std::string read_str(std::istream& is) {
  const std::uint32_t len = read_u32(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw DataError("checkpoint: truncated file");
  return s;
}
inline void read_f64s(std::istream& is, std::vector<double>& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw DataError("checkpoint: truncated file");
}

}  // namespace detail

inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, const ParamStore*>>& sections,
                            const std::string& meta_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open " + path + " for writing");
  os.write("SAMSCKP1", 8);
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, store] : sections) {
    detail::write_str(os, name);
    detail::write_i64(os, store->adam_t);
    std::ostringstream rng_text;
    rng_text << const_cast<ParamStore*>(store)->rng();
    detail::write_str(os, rng_text.str());
    detail::write_u32(os, static_cast<std::uint32_t>(store->slots().size()));
    for (const auto& s : store->slots()) {
      detail::write_str(os, s.name);
      detail::write_u32(os, static_cast<std::uint32_t>(s.value.rows));
      detail::write_u32(os, static_cast<std::uint32_t>(s.value.cols));
      detail::write_f64s(os, s.value.v);
      detail::write_f64s(os, s.m.v);
      detail::write_f64s(os, s.v.v);
    }
  }
  detail::write_str(os, meta_json);
  if (!os) throw DataError("checkpoint: write failed for " + path);
}

// Restores values, Adam moments, and RNG state into existing same-shape stores.
inline std::string load_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, ParamStore*>>& sections) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "SAMSCKP1", 8) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  if (detail::read_u32(is) != 1) throw DataError("checkpoint: unsupported version");
  const std::uint32_t n_sections = detail::read_u32(is);
  if (n_sections != sections.size())
    throw DataError("checkpoint: section count mismatch");
  for (std::uint32_t si = 0; si < n_sections; ++si) {
    const std::string name = detail::read_str(is);
    ParamStore* store = nullptr;
    for (const auto& [want, ptr] : sections)
      if (want == name) store = ptr;
    if (!store) throw DataError("checkpoint: unexpected section " + name);
    store->adam_t = detail::read_i64(is);
    std::istringstream rng_text(detail::read_str(is));
    rng_text >> store->rng();
    const std::uint32_t n_params = detail::read_u32(is);
    if (n_params != store->slots().size())
      throw DataError("checkpoint: parameter count mismatch in " + name);
    for (std::uint32_t pi = 0; pi < n_params; ++pi) {
      const std::string pname = detail::read_str(is);
      auto& s = store->slot(pname);
      const std::uint32_t rows = detail::read_u32(is);
      const std::uint32_t cols = detail::read_u32(is);
      if (rows != static_cast<std::uint32_t>(s.value.rows) ||
          cols != static_cast<std::uint32_t>(s.value.cols))
        throw DataError("checkpoint: shape mismatch for " + pname);
      detail::read_f64s(is, s.value.v);
      detail::read_f64s(is, s.m.v);
      detail::read_f64s(is, s.v.v);
    }
  }
  return detail::read_str(is);
}

}  // namespace sams
