// Copyright 2026 The NCIS Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NCIS_AUTODIFF_H_
#define NCIS_AUTODIFF_H_

// Minimal reverse-mode automatic differentiation.
//
// A Tape records vector-valued nodes in topological order. The differentiable
// primitives are a closed set:
//
//   add, multiply (elementwise, or scalar * vector), matvec, tanh,
//   log_sigmoid, log_sum_exp, sum_squares
//
// plus the structural operations slice / concat / sum (pure index
// bookkeeping) and the Cayley transform of a skew-symmetric matrix, which
// the orthogonal layers need and which cannot be composed from the above.
//
// Every node's value is checked for finiteness when it is recorded; the first
// non-finite value raises NumericError naming the node index and operation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ncis::ad {

// Handle to a node on a tape.
struct Var {
  std::uint32_t id = 0;
};

enum class Op : std::uint8_t {
  kInput,
  kAdd,
  kMul,
  kMatVec,
  kTanh,
  kLogSigmoid,
  kLogSumExp,
  kSumSquares,
  kSlice,
  kConcat,
  kSum,
  kCayley,
};

const char* op_name(Op op);

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Drops all nodes but keeps allocated storage.
  void clear();

  // Leaf node. Matrices are row-major with the given shape.
  Var input(std::span<const double> values);
  Var input(std::span<const double> values, std::size_t rows, std::size_t cols);
  Var scalar(double value);

  Var add(Var a, Var b);
  // Elementwise product; either operand may be a scalar (size 1).
  Var mul(Var a, Var b);
  Var matvec(Var matrix, Var x);
  Var tanh(Var a);
  Var log_sigmoid(Var a);
  Var log_sum_exp(Var a);
  Var sum_squares(Var a);

  Var slice(Var a, std::size_t offset, std::size_t length);
  Var concat(Var a, Var b);
  Var sum(Var a);
  // Q = (I - S)(I + S)^-1 with S skew-symmetric, built from the strict upper
  // triangle `upper` (row-major order, n(n-1)/2 entries). Output is n x n.
  Var cayley(Var upper, std::size_t n);

  // Convenience compositions.
  Var sub(Var a, Var b);
  Var scale(Var a, double c);

  std::span<const double> value(Var v) const;
  double scalar_value(Var v) const;
  std::size_t size(Var v) const { return nodes_[v.id].size; }
  std::size_t node_count() const { return nodes_.size(); }

  // Reverse sweep from a scalar output. Throws ContractError when `output` is
  // not a scalar.
  void backward(Var output);
  // Adjoint of `v` after backward().
  std::span<const double> grad(Var v) const;

 private:
  struct Node {
    Op op;
    std::uint32_t a;
    std::uint32_t b;
    std::uint32_t offset;
    std::uint32_t size;
    std::uint32_t rows;
    std::uint32_t cols;
    std::uint32_t aux;
  };

  Var push(Op op, std::uint32_t a, std::uint32_t b, std::size_t size,
           std::size_t rows, std::size_t cols, std::size_t aux = 0);
  double* val(std::uint32_t id) { return values_.data() + nodes_[id].offset; }
  const double* val(std::uint32_t id) const {
    return values_.data() + nodes_[id].offset;
  }
  double* adj(std::uint32_t id) { return adjoints_.data() + nodes_[id].offset; }
  void check_finite(std::uint32_t id) const;
  void backward_cayley(const Node& node);

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
  // Per Cayley node: the cached (I + S)^-1, row-major.
  std::vector<double> cayley_cache_;
  bool has_adjoints_ = false;
};

// Per-parameter derivatives; entry i has the shape of parameter i.
using Gradient = std::vector<std::vector<double>>;

struct ValueAndGradient {
  double value = 0.0;
  Gradient gradient;
};

// Builds a graph over `params` (loaded as tape inputs, in order) and returns
// its scalar value together with exact reverse-mode derivatives.
using GraphFn = std::function<Var(Tape&, std::span<const Var>)>;
ValueAndGradient eval_and_grad(const GraphFn& graph,
                               std::span<const std::vector<double>> params);

inline constexpr double kDefaultFdStep = 1e-5;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> point, double h = kDefaultFdStep);

// ||a - b||_inf / max(||a||_inf, ||b||_inf); 0 when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace ncis::ad

#endif  // NCIS_AUTODIFF_H_
