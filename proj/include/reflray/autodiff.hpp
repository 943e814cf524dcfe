#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "reflray/common.hpp"

// Reverse-mode autodiff over an append-only tape of scalar operations, with
// forward-mode duals for nested directional derivatives. Dense-layer ops are
// recorded as fused groups so MLP evaluation does not pay per-scalar node
// overhead; everything else is a plain scalar node with cached local partials.
//
// Subgradient convention: |x| at 0, relu at 0, and exact max ties all take
// subgradient 0. Finite-difference checks must stay away from those kinks.

namespace reflray::ad {

using VarId = std::uint32_t;
inline constexpr VarId kNoVar = 0xffffffffu;
inline constexpr std::uint32_t kNoTensor = 0xffffffffu;

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAddC,   // x + c          (c in pb)
  kMulC,   // c * x          (c in pa)
  kCDiv,   // c / x          (c in pb)
  kExp,
  kLog,
  kLog1p,
  kSin,
  kCos,
  kSqrt,
  kSoftplus,
  kSigmoid,
  kRelu,
  kAbs,
  kMax,
  kMaxC,   // max(x, c)      (c in pb)
  kDetach,
  kDenseOut,  // row of a fused dense op; a = record index, b = row
};

struct Node {
  Op op = Op::kConst;
  VarId a = kNoVar;
  VarId b = kNoVar;
  double pa = 0.0;  // d(value)/d(parent a), or the constant for kMulC
  double pb = 0.0;  // d(value)/d(parent b), or the stored constant
};

// Named flat parameter storage shared by fused dense ops. Gradients are
// accumulated into a caller-provided buffer with the same layout.
struct TensorSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;  // cols == 0 means a bias / flat vector of `rows`
  std::size_t offset = 0;
};

class ParamBook {
 public:
  std::uint32_t add_tensor(const std::string& name, std::size_t rows,
                           std::size_t cols) {
    TensorSpec spec{name, rows, cols, values_.size()};
    tensors_.push_back(spec);
    values_.resize(values_.size() + rows * std::max<std::size_t>(cols, 1), 0.0);
    return static_cast<std::uint32_t>(tensors_.size() - 1);
  }

  std::size_t size() const { return values_.size(); }
  std::size_t tensor_count() const { return tensors_.size(); }
  const TensorSpec& spec(std::uint32_t id) const { return tensors_.at(id); }

  double* data(std::uint32_t id) { return values_.data() + spec(id).offset; }
  const double* data(std::uint32_t id) const {
    return values_.data() + spec(id).offset;
  }

  std::vector<double>& flat() { return values_; }
  const std::vector<double>& flat() const { return values_; }

 private:
  std::vector<TensorSpec> tensors_;
  std::vector<double> values_;
};

struct Seed {
  VarId node;
  double weight;
};

class Tape {
 public:
  explicit Tape(const ParamBook* params = nullptr) : params_(params) {}

  void clear() {
    nodes_.clear();
    values_.clear();
    dense_recs_.clear();
    dense_ids_.clear();
    dense_vals_.clear();
  }

  std::size_t size() const { return nodes_.size(); }
  const ParamBook* params() const { return params_; }

  double value(VarId id) const { return values_[id]; }
  const Node& node(VarId id) const { return nodes_[id]; }

  VarId leaf(double v) { return push(Op::kLeaf, kNoVar, kNoVar, 0, 0, v); }
  VarId constant(double v) { return push(Op::kConst, kNoVar, kNoVar, 0, 0, v); }

  VarId add(VarId a, VarId b) {
    return push(Op::kAdd, a, b, 1.0, 1.0, values_[a] + values_[b]);
  }
  VarId sub(VarId a, VarId b) {
    return push(Op::kSub, a, b, 1.0, -1.0, values_[a] - values_[b]);
  }
  VarId mul(VarId a, VarId b) {
    return push(Op::kMul, a, b, values_[b], values_[a],
                values_[a] * values_[b]);
  }
  VarId div(VarId a, VarId b) {
    const double va = values_[a], vb = values_[b];
    return push(Op::kDiv, a, b, 1.0 / vb, -va / (vb * vb), va / vb);
  }
  VarId add_c(VarId a, double c) {
    return push(Op::kAddC, a, kNoVar, 1.0, c, values_[a] + c);
  }
  VarId mul_c(VarId a, double c) {
    return push(Op::kMulC, a, kNoVar, c, 0.0, c * values_[a]);
  }
  VarId c_div(double c, VarId a) {
    const double va = values_[a];
    return push(Op::kCDiv, a, kNoVar, -c / (va * va), c, c / va);
  }
  VarId exp_(VarId a) {
    const double v = std::exp(values_[a]);
    return push(Op::kExp, a, kNoVar, v, 0.0, v);
  }
  VarId log_(VarId a) {
    return push(Op::kLog, a, kNoVar, 1.0 / values_[a], 0.0,
                std::log(values_[a]));
  }
  VarId log1p_(VarId a) {
    return push(Op::kLog1p, a, kNoVar, 1.0 / (1.0 + values_[a]), 0.0,
                std::log1p(values_[a]));
  }
  VarId sin_(VarId a) {
    return push(Op::kSin, a, kNoVar, std::cos(values_[a]), 0.0,
                std::sin(values_[a]));
  }
  VarId cos_(VarId a) {
    return push(Op::kCos, a, kNoVar, -std::sin(values_[a]), 0.0,
                std::cos(values_[a]));
  }
  VarId sqrt_(VarId a) {
    const double r = std::sqrt(values_[a]);
    return push(Op::kSqrt, a, kNoVar, 0.5 / r, 0.0, r);
  }
  VarId softplus_(VarId a) {
    return push(Op::kSoftplus, a, kNoVar, reflray::sigmoid(values_[a]), 0.0,
                reflray::softplus(values_[a]));
  }
  VarId sigmoid_(VarId a) {
    const double s = reflray::sigmoid(values_[a]);
    return push(Op::kSigmoid, a, kNoVar, s * (1.0 - s), 0.0, s);
  }
  VarId relu_(VarId a) {
    const double v = values_[a];
    return push(Op::kRelu, a, kNoVar, v > 0.0 ? 1.0 : 0.0, 0.0,
                v > 0.0 ? v : 0.0);
  }
  VarId abs_(VarId a) {
    const double v = values_[a];
    return push(Op::kAbs, a, kNoVar, v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0),
                0.0, std::fabs(v));
  }
  VarId max_(VarId a, VarId b) {
    const double va = values_[a], vb = values_[b];
    double pa = 0.0, pb = 0.0;
    if (va > vb) pa = 1.0;
    else if (vb > va) pb = 1.0;
    return push(Op::kMax, a, b, pa, pb, va > vb ? va : vb);
  }
  VarId max_c(VarId a, double c) {
    const double va = values_[a];
    return push(Op::kMaxC, a, kNoVar, va > c ? 1.0 : 0.0, c,
                va > c ? va : c);
  }
  VarId detach(VarId a) {
    return push(Op::kDetach, a, kNoVar, 0.0, 0.0, values_[a]);
  }

  // Fused y = W x (+ bias). Inputs are given as (id, value) pairs; entries
  // with id == kNoVar are literals folded at record time. Returns the id of
  // the first of `rows` consecutive output nodes.
  VarId dense(std::uint32_t w_tensor, std::uint32_t bias_tensor,
              std::span<const VarId> in_ids, std::span<const double> in_vals) {
    const TensorSpec& ws = params_->spec(w_tensor);
    const std::size_t rows = ws.rows, cols = ws.cols;
    require(in_ids.size() == cols && in_vals.size() == cols,
            "dense: input size mismatch with weight tensor");
    DenseRec rec;
    rec.w_tensor = w_tensor;
    rec.bias_tensor = bias_tensor;
    rec.ids_offset = dense_ids_.size();
    rec.vals_offset = dense_vals_.size();
    rec.rows = static_cast<std::uint32_t>(rows);
    rec.cols = static_cast<std::uint32_t>(cols);
    dense_ids_.insert(dense_ids_.end(), in_ids.begin(), in_ids.end());
    dense_vals_.insert(dense_vals_.end(), in_vals.begin(), in_vals.end());

    const double* w = params_->data(w_tensor);
    const double* bias =
        bias_tensor == kNoTensor ? nullptr : params_->data(bias_tensor);
    const double* x = dense_vals_.data() + rec.vals_offset;
    const std::uint32_t rec_idx = static_cast<std::uint32_t>(dense_recs_.size());

    VarId first = kNoVar;
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = bias ? bias[r] : 0.0;
      const double* wr = w + r * cols;
      for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
      const VarId id = push(Op::kDenseOut, rec_idx,
                            static_cast<VarId>(r), 0.0, 0.0, acc);
      if (r == 0) first = id;
    }
    rec.out_first = first;
    dense_recs_.push_back(rec);
    return first;
  }

  // Backward sweep from weighted seeds. Node adjoints are recomputed from
  // scratch; parameter gradients accumulate into param_grad (layout of the
  // ParamBook flat vector) when it is non-null.
  void backward(std::span<const Seed> seeds, double* param_grad = nullptr) {
    adjoints_.assign(nodes_.size(), 0.0);
    VarId top = 0;
    for (const Seed& s : seeds) {
      adjoints_[s.node] += s.weight;
      if (s.node > top) top = s.node;
    }
    if (nodes_.empty()) return;
    for (std::size_t i = top + 1; i-- > 0;) {
      const Node& n = nodes_[i];
      if (n.op == Op::kDenseOut) {
        const DenseRec& rec = dense_recs_[n.a];
        // Groups are consecutive; process the whole record at its top row
        // and skip below.
        backward_dense(rec, param_grad);
        i = rec.out_first;
        continue;
      }
      const double g = adjoints_[i];
      if (g == 0.0) continue;
      switch (n.op) {
        case Op::kLeaf:
        case Op::kConst:
          break;
        case Op::kAdd:
        case Op::kSub:
        case Op::kMul:
        case Op::kDiv:
        case Op::kMax:
          adjoints_[n.a] += n.pa * g;
          adjoints_[n.b] += n.pb * g;
          break;
        default:
          adjoints_[n.a] += n.pa * g;
          break;
      }
    }
  }

  void backward(VarId seed_node, double* param_grad = nullptr) {
    const Seed s{seed_node, 1.0};
    backward(std::span<const Seed>(&s, 1), param_grad);
  }

  double adjoint(VarId id) const { return adjoints_[id]; }

  // Recomputes every node from its parents and compares bit-for-bit against
  // the recorded values. Valid while the ParamBook is unchanged.
  bool replay_matches() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      double v = 0.0;
      switch (n.op) {
        case Op::kLeaf:
        case Op::kConst: v = values_[i]; break;
        case Op::kAdd: v = values_[n.a] + values_[n.b]; break;
        case Op::kSub: v = values_[n.a] - values_[n.b]; break;
        case Op::kMul: v = values_[n.a] * values_[n.b]; break;
        case Op::kDiv: v = values_[n.a] / values_[n.b]; break;
        case Op::kAddC: v = values_[n.a] + n.pb; break;
        case Op::kMulC: v = n.pa * values_[n.a]; break;
        case Op::kCDiv: v = n.pb / values_[n.a]; break;
        case Op::kExp: v = std::exp(values_[n.a]); break;
        case Op::kLog: v = std::log(values_[n.a]); break;
        case Op::kLog1p: v = std::log1p(values_[n.a]); break;
        case Op::kSin: v = std::sin(values_[n.a]); break;
        case Op::kCos: v = std::cos(values_[n.a]); break;
        case Op::kSqrt: v = std::sqrt(values_[n.a]); break;
        case Op::kSoftplus: v = reflray::softplus(values_[n.a]); break;
        case Op::kSigmoid: v = reflray::sigmoid(values_[n.a]); break;
        case Op::kRelu: v = values_[n.a] > 0.0 ? values_[n.a] : 0.0; break;
        case Op::kAbs: v = std::fabs(values_[n.a]); break;
        case Op::kMax: v = std::max(values_[n.a], values_[n.b]); break;
        case Op::kMaxC: v = std::max(values_[n.a], n.pb); break;
        case Op::kDetach: v = values_[n.a]; break;
        case Op::kDenseOut: {
          const DenseRec& rec = dense_recs_[n.a];
          const TensorSpec& ws = params_->spec(rec.w_tensor);
          const double* w = params_->data(rec.w_tensor) + n.b * ws.cols;
          const double* x = dense_vals_.data() + rec.vals_offset;
          double acc = rec.bias_tensor == kNoTensor
                           ? 0.0
                           : params_->data(rec.bias_tensor)[n.b];
          for (std::size_t c = 0; c < ws.cols; ++c) acc += w[c] * x[c];
          v = acc;
          break;
        }
      }
      // Bit-identical: NaN never appears in a healthy tape.
      if (v != values_[i]) return false;
    }
    return true;
  }

 private:
  struct DenseRec {
    std::uint32_t w_tensor = kNoTensor;
    std::uint32_t bias_tensor = kNoTensor;
    std::size_t ids_offset = 0;
    std::size_t vals_offset = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    VarId out_first = kNoVar;
  };

  VarId push(Op op, VarId a, VarId b, double pa, double pb, double value) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.pa = pa;
    n.pb = pb;
    nodes_.push_back(n);
    values_.push_back(value);
    return static_cast<VarId>(nodes_.size() - 1);
  }

  void backward_dense(const DenseRec& rec, double* param_grad) {
    const TensorSpec& ws = params_->spec(rec.w_tensor);
    const double* g = adjoints_.data() + rec.out_first;
    const double* w = params_->data(rec.w_tensor);
    const double* x = dense_vals_.data() + rec.vals_offset;
    const VarId* ids = dense_ids_.data() + rec.ids_offset;
    const std::size_t rows = rec.rows, cols = rec.cols;

    if (param_grad != nullptr) {
      double* gw = param_grad + ws.offset;
      for (std::size_t r = 0; r < rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* gwr = gw + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gwr[c] += gr * x[c];
      }
      if (rec.bias_tensor != kNoTensor) {
        double* gb = param_grad + params_->spec(rec.bias_tensor).offset;
        for (std::size_t r = 0; r < rows; ++r) gb[r] += g[r];
      }
    }
    // Input adjoints; literal columns have no node to receive them.
    for (std::size_t c = 0; c < cols; ++c) {
      if (ids[c] == kNoVar) continue;
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) acc += g[r] * w[r * cols + c];
      adjoints_[ids[c]] += acc;
    }
  }

  const ParamBook* params_;
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
  std::vector<DenseRec> dense_recs_;
  std::vector<VarId> dense_ids_;
  std::vector<double> dense_vals_;
};

// Lightweight handle. A default-constructed or double-initialized Var is a
// literal (no tape); combining a literal with a taped Var records the
// appropriate constant-folded op. This lets templated numeric code treat Var
// exactly like double.
struct Var {
  Tape* tape = nullptr;
  VarId id = kNoVar;
  double v = 0.0;

  Var() = default;
  Var(double value) : v(value) {}  // NOLINT: implicit by design
  Var(Tape* t, VarId i) : tape(t), id(i), v(t->value(i)) {}

  bool is_literal() const { return tape == nullptr; }
};

inline Var make_leaf(Tape& tape, double v) { return Var(&tape, tape.leaf(v)); }
inline Var make_const(Tape& tape, double v) {
  return Var(&tape, tape.constant(v));
}

namespace detail {
inline Tape* tape_of(const Var& a, const Var& b) {
  return a.tape != nullptr ? a.tape : b.tape;
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (t == nullptr) return Var(a.v + b.v);
  if (a.is_literal()) return Var(t, t->add_c(b.id, a.v));
  if (b.is_literal()) return Var(t, t->add_c(a.id, b.v));
  return Var(t, t->add(a.id, b.id));
}

inline Var operator-(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (t == nullptr) return Var(a.v - b.v);
  if (b.is_literal()) return Var(t, t->add_c(a.id, -b.v));
  if (a.is_literal()) {
    // a - b = -b + a
    return Var(t, t->add_c(t->mul_c(b.id, -1.0), a.v));
  }
  return Var(t, t->sub(a.id, b.id));
}

inline Var operator*(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (t == nullptr) return Var(a.v * b.v);
  if (a.is_literal()) return Var(t, t->mul_c(b.id, a.v));
  if (b.is_literal()) return Var(t, t->mul_c(a.id, b.v));
  return Var(t, t->mul(a.id, b.id));
}

inline Var operator/(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (t == nullptr) return Var(a.v / b.v);
  if (b.is_literal()) return Var(t, t->mul_c(a.id, 1.0 / b.v));
  if (a.is_literal()) return Var(t, t->c_div(a.v, b.id));
  return Var(t, t->div(a.id, b.id));
}

inline Var operator-(const Var& a) {
  if (a.is_literal()) return Var(-a.v);
  return Var(a.tape, a.tape->mul_c(a.id, -1.0));
}

inline Var& operator+=(Var& a, const Var& b) { a = a + b; return a; }
inline Var& operator-=(Var& a, const Var& b) { a = a - b; return a; }
inline Var& operator*=(Var& a, const Var& b) { a = a * b; return a; }
inline Var& operator/=(Var& a, const Var& b) { a = a / b; return a; }

inline bool operator<(const Var& a, const Var& b) { return a.v < b.v; }
inline bool operator>(const Var& a, const Var& b) { return a.v > b.v; }
inline bool operator<=(const Var& a, const Var& b) { return a.v <= b.v; }
inline bool operator>=(const Var& a, const Var& b) { return a.v >= b.v; }

inline Var exp(const Var& a) {
  if (a.is_literal()) return Var(std::exp(a.v));
  return Var(a.tape, a.tape->exp_(a.id));
}
inline Var log(const Var& a) {
  if (a.is_literal()) return Var(std::log(a.v));
  return Var(a.tape, a.tape->log_(a.id));
}
inline Var log1p(const Var& a) {
  if (a.is_literal()) return Var(std::log1p(a.v));
  return Var(a.tape, a.tape->log1p_(a.id));
}
inline Var sin(const Var& a) {
  if (a.is_literal()) return Var(std::sin(a.v));
  return Var(a.tape, a.tape->sin_(a.id));
}
inline Var cos(const Var& a) {
  if (a.is_literal()) return Var(std::cos(a.v));
  return Var(a.tape, a.tape->cos_(a.id));
}
inline Var sqrt(const Var& a) {
  if (a.is_literal()) return Var(std::sqrt(a.v));
  return Var(a.tape, a.tape->sqrt_(a.id));
}
inline Var softplus(const Var& a) {
  if (a.is_literal()) return Var(reflray::softplus(a.v));
  return Var(a.tape, a.tape->softplus_(a.id));
}
inline Var sigmoid(const Var& a) {
  if (a.is_literal()) return Var(reflray::sigmoid(a.v));
  return Var(a.tape, a.tape->sigmoid_(a.id));
}
inline Var relu(const Var& a) {
  if (a.is_literal()) return Var(reflray::relu(a.v));
  return Var(a.tape, a.tape->relu_(a.id));
}
inline Var abs(const Var& a) {
  if (a.is_literal()) return Var(std::fabs(a.v));
  return Var(a.tape, a.tape->abs_(a.id));
}
inline Var max(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (t == nullptr) return Var(std::max(a.v, b.v));
  if (a.is_literal()) return Var(t, t->max_c(b.id, a.v));
  if (b.is_literal()) return Var(t, t->max_c(a.id, b.v));
  return Var(t, t->max(a.id, b.id));
}
inline Var detach(const Var& a) {
  if (a.is_literal()) return a;
  return Var(a.tape, a.tape->detach(a.id));
}

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.v; }

// double counterparts so templated code can call these unqualified with a
// `using ad::...` declaration and resolve exactly for every scalar type.
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double log1p(double x) { return std::log1p(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double abs(double x) { return std::fabs(x); }
inline double max(double a, double b) { return a > b ? a : b; }
inline double softplus(double x) { return reflray::softplus(x); }
inline double sigmoid(double x) { return reflray::sigmoid(x); }
inline double relu(double x) { return reflray::relu(x); }
inline double detach(double x) { return x; }

// --------------------------------------------------------------------------
// Forward-mode dual with N tangent directions; T may be double or Var, which
// makes the directional derivatives themselves differentiable by the outer
// tape.
template <class T, int N = 1>
struct Dual {
  T v{};
  std::array<T, N> t{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: literal, zero tangents
  explicit Dual(const T& value) : v(value) {}
};

template <class T, int N>
inline Dual<T, N> operator+(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r;
  r.v = a.v + b.v;
  for (int i = 0; i < N; ++i) r.t[i] = a.t[i] + b.t[i];
  return r;
}
template <class T, int N>
inline Dual<T, N> operator-(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r;
  r.v = a.v - b.v;
  for (int i = 0; i < N; ++i) r.t[i] = a.t[i] - b.t[i];
  return r;
}
template <class T, int N>
inline Dual<T, N> operator-(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = -a.v;
  for (int i = 0; i < N; ++i) r.t[i] = -a.t[i];
  return r;
}
template <class T, int N>
inline Dual<T, N> operator*(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r;
  r.v = a.v * b.v;
  for (int i = 0; i < N; ++i) r.t[i] = a.t[i] * b.v + a.v * b.t[i];
  return r;
}
template <class T, int N>
inline Dual<T, N> operator/(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r;
  r.v = a.v / b.v;
  const T inv_b2 = T(1.0) / (b.v * b.v);
  for (int i = 0; i < N; ++i)
    r.t[i] = (a.t[i] * b.v - a.v * b.t[i]) * inv_b2;
  return r;
}
template <class T, int N>
inline Dual<T, N> operator+(const Dual<T, N>& a, double b) {
  Dual<T, N> r = a;
  r.v = a.v + b;
  return r;
}
template <class T, int N>
inline Dual<T, N> operator+(double a, const Dual<T, N>& b) {
  return b + a;
}
template <class T, int N>
inline Dual<T, N> operator-(const Dual<T, N>& a, double b) {
  Dual<T, N> r = a;
  r.v = a.v - b;
  return r;
}
template <class T, int N>
inline Dual<T, N> operator-(double a, const Dual<T, N>& b) {
  Dual<T, N> r = -b;
  r.v = a - b.v;
  return r;
}
template <class T, int N>
inline Dual<T, N> operator*(const Dual<T, N>& a, double b) {
  Dual<T, N> r;
  r.v = a.v * b;
  for (int i = 0; i < N; ++i) r.t[i] = a.t[i] * b;
  return r;
}
template <class T, int N>
inline Dual<T, N> operator*(double a, const Dual<T, N>& b) {
  return b * a;
}
template <class T, int N>
inline Dual<T, N> operator/(const Dual<T, N>& a, double b) {
  return a * (1.0 / b);
}
template <class T, int N>
inline Dual<T, N>& operator+=(Dual<T, N>& a, const Dual<T, N>& b) {
  a = a + b;
  return a;
}
template <class T, int N>
inline Dual<T, N>& operator-=(Dual<T, N>& a, const Dual<T, N>& b) {
  a = a - b;
  return a;
}
template <class T, int N>
inline Dual<T, N>& operator*=(Dual<T, N>& a, const Dual<T, N>& b) {
  a = a * b;
  return a;
}

template <class T, int N>
inline Dual<T, N> exp(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = exp(a.v);
  for (int i = 0; i < N; ++i) r.t[i] = r.v * a.t[i];
  return r;
}
template <class T, int N>
inline Dual<T, N> log(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = log(a.v);
  const T inv = T(1.0) / a.v;
  for (int i = 0; i < N; ++i) r.t[i] = inv * a.t[i];
  return r;
}
template <class T, int N>
inline Dual<T, N> sin(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = sin(a.v);
  const T c = cos(a.v);
  for (int i = 0; i < N; ++i) r.t[i] = c * a.t[i];
  return r;
}
template <class T, int N>
inline Dual<T, N> cos(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = cos(a.v);
  const T s = -sin(a.v);
  for (int i = 0; i < N; ++i) r.t[i] = s * a.t[i];
  return r;
}
template <class T, int N>
inline Dual<T, N> sqrt(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = sqrt(a.v);
  const T half_inv = T(0.5) / r.v;
  for (int i = 0; i < N; ++i) r.t[i] = half_inv * a.t[i];
  return r;
}
template <class T, int N>
inline Dual<T, N> softplus(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = softplus(a.v);
  const T s = sigmoid(a.v);
  for (int i = 0; i < N; ++i) r.t[i] = s * a.t[i];
  return r;
}

template <class T, int N>
inline double value_of(const Dual<T, N>& x) {
  return value_of(x.v);
}

// --------------------------------------------------------------------------
// grad / spatial_grad / check_grad

// Gradient of a scalar tape node with respect to leaf parameters.
// Unreachable parameters get exact zero (fresh adjoint buffer).
inline std::vector<double> grad(Tape& tape, const Var& loss,
                                std::span<const Var> params) {
  require(!loss.is_literal(), "grad: loss must be a tape node");
  tape.backward(loss.id);
  std::vector<double> out;
  out.reserve(params.size());
  for (const Var& p : params) out.push_back(tape.adjoint(p.id));
  return out;
}

// ∇f(x) of a scalar field evaluated with one forward-mode pass per axis.
// With T = Var the passes are recorded on the outer tape, so the result is
// itself differentiable.
template <class T>
inline std::array<T, 3> spatial_grad(
    const std::function<Dual<T, 1>(const std::array<Dual<T, 1>, 3>&)>& field,
    const std::array<T, 3>& x) {
  std::array<T, 3> g;
  for (int axis = 0; axis < 3; ++axis) {
    std::array<Dual<T, 1>, 3> xd;
    for (int i = 0; i < 3; ++i) {
      xd[i].v = x[i];
      xd[i].t[0] = T(i == axis ? 1.0 : 0.0);
    }
    g[axis] = field(xd).t[0];
  }
  return g;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::ptrdiff_t worst_index = -1;
  bool finite = true;
  std::ptrdiff_t nonfinite_index = -1;
};

// Compares reverse-mode gradients against central finite differences
// (f(x+eps e) - f(x-eps e)) / (2 eps), componentwise. Relative error uses
// denominator max(|analytic|, 1e-8).
inline GradCheckResult check_grad(
    const std::function<Var(Tape&, std::span<const Var>)>& fn,
    std::span<const double> point, double eps) {
  require(eps > 0.0, "check_grad: eps must be positive");
  GradCheckResult result;

  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (double p : point) leaves.push_back(make_leaf(tape, p));
  const Var loss = fn(tape, leaves);
  if (!std::isfinite(loss.v)) {
    result.finite = false;
    result.nonfinite_index = -1;
    return result;
  }
  const std::vector<double> analytic =
      grad(tape, loss, std::span<const Var>(leaves));

  std::vector<double> x(point.begin(), point.end());
  const auto eval = [&fn](std::span<const double> at) {
    Tape t;
    std::vector<Var> vars;
    vars.reserve(at.size());
    for (double p : at) vars.push_back(make_leaf(t, p));
    return fn(t, std::span<const Var>(vars)).v;
  };

  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double fp = eval(x);
    x[i] = keep - eps;
    const double fm = eval(x);
    x[i] = keep;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      result.finite = false;
      result.nonfinite_index = static_cast<std::ptrdiff_t>(i);
      return result;
    }
    const double fd = (fp - fm) / (2.0 * eps);
    const double denom = std::max(std::fabs(analytic[i]), 1e-8);
    const double rel = std::fabs(fd - analytic[i]) / denom;
    if (rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_index = static_cast<std::ptrdiff_t>(i);
    }
  }
  return result;
}

}  // namespace reflray::ad
