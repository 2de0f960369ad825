#pragma once

// Scalar reverse-mode differentiation on a flat tape (Wengert list).
//
// Every node stores its value and a contiguous run of (parent, local partial)
// edges. Nodes are appended in evaluation order, so the tape index is already a
// topological order and the backward sweep is a single reverse loop.
//
// Dense layers and reductions are recorded as one n-ary node instead of a
// chain of binary ones; that keeps the tape about 3x shorter for the network
// sizes used here.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "sacnf/errors.hpp"

namespace sacnf {

class Tape;

// Handle to one node of a Tape. Cheap to copy; only valid while the tape
// that produced it has not been cleared.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t index = 0;

  double value() const;
};

class Tape {
 public:
  Tape() { offsets_.push_back(0); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var leaf(double value) { return finish(value); }

  std::vector<Var> leaves(std::span<const double> values) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(finish(v));
    return out;
  }

  Var unary(double value, Var a, double da) {
    edge(a, da);
    return finish(value);
  }

  Var binary(double value, Var a, double da, Var b, double db) {
    edge(a, da);
    edge(b, db);
    return finish(value);
  }

  // Low-level n-ary construction: queue edges, then close the node.
  void edge(Var parent, double partial) {
    parents_.push_back(parent.index);
    partials_.push_back(partial);
  }
  Var finish(double value) {
    values_.push_back(value);
    offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
    return Var{this, static_cast<std::uint32_t>(values_.size() - 1)};
  }

  double value(Var v) const { return values_[v.index]; }
  double adjoint(Var v) const { return adjoints_.at(v.index); }

  // Reverse sweep from `output`. Afterwards adjoint(x) == d output / d x for
  // every node recorded before `output`.
  void backward(Var output);

  // Adjoints of the given leaves, in order. Requires a prior backward().
  std::vector<double> gradient(std::span<const Var> leaves) const;

  std::size_t size() const { return values_.size(); }
  std::size_t edge_count() const { return parents_.size(); }

  // Drops all nodes but keeps allocated capacity for the next minibatch.
  void clear() {
    values_.clear();
    adjoints_.clear();
    parents_.clear();
    partials_.clear();
    offsets_.assign(1, 0);
  }

 private:
  std::vector<double> values_;
  std::vector<double> adjoints_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
};

inline double Var::value() const { return tape->value(*this); }

template <class T>
inline constexpr bool is_var_v = std::is_same_v<std::remove_cvref_t<T>, Var>;

// Result scalar of mixing a double and a Var.
template <class A, class B>
using promote_t = std::conditional_t<is_var_v<A> || is_var_v<B>, Var, double>;

inline double value_of(double x) { return x; }
inline double value_of(Var x) { return x.value(); }

// ---- arithmetic -----------------------------------------------------------

inline Var operator+(Var a, Var b) { return a.tape->binary(a.value() + b.value(), a, 1.0, b, 1.0); }
inline Var operator+(Var a, double b) { return a.tape->unary(a.value() + b, a, 1.0); }
inline Var operator+(double a, Var b) { return b.tape->unary(a + b.value(), b, 1.0); }

inline Var operator-(Var a, Var b) { return a.tape->binary(a.value() - b.value(), a, 1.0, b, -1.0); }
inline Var operator-(Var a, double b) { return a.tape->unary(a.value() - b, a, 1.0); }
inline Var operator-(double a, Var b) { return b.tape->unary(a - b.value(), b, -1.0); }
inline Var operator-(Var a) { return a.tape->unary(-a.value(), a, -1.0); }

inline Var operator*(Var a, Var b) {
  return a.tape->binary(a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator*(Var a, double b) { return a.tape->unary(a.value() * b, a, b); }
inline Var operator*(double a, Var b) { return b.tape->unary(a * b.value(), b, a); }

inline Var operator/(Var a, Var b) {
  const double inv = 1.0 / b.value();
  return a.tape->binary(a.value() * inv, a, inv, b, -a.value() * inv * inv);
}
inline Var operator/(Var a, double b) { return a.tape->unary(a.value() / b, a, 1.0 / b); }
inline Var operator/(double a, Var b) {
  const double inv = 1.0 / b.value();
  return b.tape->unary(a * inv, b, -a * inv * inv);
}

inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator+=(Var& a, double b) { return a = a + b; }
inline Var& operator-=(Var& a, Var b) { return a = a - b; }
inline Var& operator*=(Var& a, Var b) { return a = a * b; }
inline Var& operator*=(Var& a, double b) { return a = a * b; }

// ---- elementary functions -------------------------------------------------
// The double overloads let templated model code call the same names for both
// plain evaluation and taped evaluation.

inline double square(double x) { return x * x; }
inline Var square(Var x) { return x.tape->unary(x.value() * x.value(), x, 2.0 * x.value()); }

using std::abs;
using std::exp;
using std::log;
using std::sqrt;
using std::tanh;

inline Var exp(Var x) {
  const double e = std::exp(x.value());
  return x.tape->unary(e, x, e);
}
inline Var log(Var x) { return x.tape->unary(std::log(x.value()), x, 1.0 / x.value()); }
inline Var sqrt(Var x) {
  const double s = std::sqrt(x.value());
  return x.tape->unary(s, x, 0.5 / s);
}
inline Var tanh(Var x) {
  const double t = std::tanh(x.value());
  return x.tape->unary(t, x, 1.0 - t * t);
}
inline Var abs(Var x) { return x.tape->unary(std::abs(x.value()), x, x.value() < 0.0 ? -1.0 : 1.0); }

// log(1 + e^x), overflow-free.
inline double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline Var softplus(Var x) { return x.tape->unary(softplus(x.value()), x, sigmoid(x.value())); }

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline Var relu(Var x) { return x.tape->unary(relu(x.value()), x, x.value() > 0.0 ? 1.0 : 0.0); }

// Clamp with zero gradient outside [lo, hi].
inline double clamp(double x, double lo, double hi) { return std::clamp(x, lo, hi); }
inline Var clamp(Var x, double lo, double hi) {
  const double v = x.value();
  if (v < lo || v > hi) return x.tape->leaf(std::clamp(v, lo, hi));
  return x;
}

// Cuts the gradient path: the result is a fresh leaf holding the same value.
inline double stop_gradient(double x) { return x; }
inline Var stop_gradient(Var x) { return x.tape->leaf(x.value()); }

// ---- fused reductions -----------------------------------------------------

template <class T>
T sum(std::span<const T> xs, double scale = 1.0) {
  if constexpr (is_var_v<T>) {
    Tape& tape = *xs.front().tape;
    double acc = 0.0;
    for (Var x : xs) {
      acc += x.value();
      tape.edge(x, scale);
    }
    return tape.finish(acc * scale);
  } else {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc * scale;
  }
}

template <class T>
T mean(std::span<const T> xs) {
  return sum(xs, 1.0 / static_cast<double>(xs.size()));
}

// Euclidean norm. At the origin the (sub)gradient is taken as zero.
template <class T>
T norm(std::span<const T> xs) {
  double sq = 0.0;
  for (const T& x : xs) sq += value_of(x) * value_of(x);
  const double r = std::sqrt(sq);
  if constexpr (is_var_v<T>) {
    Tape& tape = *xs.front().tape;
    for (Var x : xs) tape.edge(x, r > 0.0 ? x.value() / r : 0.0);
    return tape.finish(r);
  } else {
    return r;
  }
}

template <class A, class B>
promote_t<A, B> dot(std::span<const A> a, std::span<const B> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += value_of(a[i]) * value_of(b[i]);
  if constexpr (is_var_v<A> || is_var_v<B>) {
    Tape* tape = nullptr;
    if constexpr (is_var_v<A>) tape = a.front().tape;
    else tape = b.front().tape;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if constexpr (is_var_v<A>) tape->edge(a[i], value_of(b[i]));
      if constexpr (is_var_v<B>) tape->edge(b[i], value_of(a[i]));
    }
    return tape->finish(acc);
  } else {
    return acc;
  }
}

// bias + sum_j weights[j] * input[j] as a single node. Weights and bias share
// the scalar type P (parameters); the input may be plain or taped.
template <class P, class X>
promote_t<P, X> affine(const P& bias, std::span<const P> weights, std::span<const X> input) {
  double acc = value_of(bias);
  for (std::size_t j = 0; j < weights.size(); ++j) acc += value_of(weights[j]) * value_of(input[j]);
  if constexpr (is_var_v<P> || is_var_v<X>) {
    Tape* tape = nullptr;
    if constexpr (is_var_v<P>) tape = bias.tape;
    else tape = input.front().tape;
    if constexpr (is_var_v<P>) tape->edge(bias, 1.0);
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if constexpr (is_var_v<P>) tape->edge(weights[j], value_of(input[j]));
      if constexpr (is_var_v<X>) tape->edge(input[j], value_of(weights[j]));
    }
    return tape->finish(acc);
  } else {
    return acc;
  }
}

// Lifts a plain value into scalar type T. For Var this records a leaf on `tape`.
template <class T>
T lift(double v, Tape* tape) {
  if constexpr (is_var_v<T>) return tape->leaf(v);
  else return v;
}

}  // namespace sacnf
