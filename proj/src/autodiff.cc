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

#include "ncis/autodiff.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "ncis/errors.h"

namespace ncis::ad {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// log(sigmoid(x)) = -log(1 + exp(-x)), stable for both signs.
double stable_log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kMatVec: return "matvec";
    case Op::kTanh: return "tanh";
    case Op::kLogSigmoid: return "log_sigmoid";
    case Op::kLogSumExp: return "log_sum_exp";
    case Op::kSumSquares: return "sum_squares";
    case Op::kSlice: return "slice";
    case Op::kConcat: return "concat";
    case Op::kSum: return "sum";
    case Op::kCayley: return "cayley";
  }
  return "?";
}

void Tape::clear() {
  nodes_.clear();
  values_.clear();
  adjoints_.clear();
  cayley_cache_.clear();
  has_adjoints_ = false;
}

Var Tape::push(Op op, std::uint32_t a, std::uint32_t b, std::size_t size,
               std::size_t rows, std::size_t cols, std::size_t aux) {
  const auto offset = static_cast<std::uint32_t>(values_.size());
  values_.resize(values_.size() + size);
  nodes_.push_back({op, a, b, offset, static_cast<std::uint32_t>(size),
                    static_cast<std::uint32_t>(rows),
                    static_cast<std::uint32_t>(cols),
                    static_cast<std::uint32_t>(aux)});
  has_adjoints_ = false;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check_finite(std::uint32_t id) const {
  const Node& n = nodes_[id];
  const double* v = val(id);
  for (std::uint32_t i = 0; i < n.size; ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError("non-finite value at node " + std::to_string(id) +
                         " (" + op_name(n.op) + ")");
    }
  }
}

Var Tape::input(std::span<const double> values) {
  return input(values, values.size(), 1);
}

Var Tape::input(std::span<const double> values, std::size_t rows,
                std::size_t cols) {
  if (rows * cols != values.size()) {
    throw ContractError("input: shape does not match value count");
  }
  Var v = push(Op::kInput, 0, 0, values.size(), rows, cols);
  std::copy(values.begin(), values.end(), val(v.id));
  check_finite(v.id);
  return v;
}

Var Tape::scalar(double value) {
  return input(std::span<const double>(&value, 1));
}

Var Tape::add(Var a, Var b) {
  const std::size_t n = size(a);
  if (size(b) != n) throw ContractError("add: size mismatch");
  Var out = push(Op::kAdd, a.id, b.id, n, n, 1);
  const double* x = val(a.id);
  const double* y = val(b.id);
  double* z = val(out.id);
  for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
  check_finite(out.id);
  return out;
}

Var Tape::mul(Var a, Var b) {
  const std::size_t na = size(a);
  const std::size_t nb = size(b);
  if (na != nb && na != 1 && nb != 1) {
    throw ContractError("mul: size mismatch");
  }
  const std::size_t n = std::max(na, nb);
  Var out = push(Op::kMul, a.id, b.id, n, n, 1);
  const double* x = val(a.id);
  const double* y = val(b.id);
  double* z = val(out.id);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = x[na == 1 ? 0 : i] * y[nb == 1 ? 0 : i];
  }
  check_finite(out.id);
  return out;
}

Var Tape::matvec(Var matrix, Var x) {
  const Node& m = nodes_[matrix.id];
  const std::size_t rows = m.rows;
  const std::size_t cols = m.cols;
  if (size(x) != cols) {
    throw ContractError("matvec: matrix has " + std::to_string(cols) +
                        " columns, vector has " + std::to_string(size(x)));
  }
  Var out = push(Op::kMatVec, matrix.id, x.id, rows, rows, 1);
  const double* w = val(matrix.id);
  const double* v = val(x.id);
  double* z = val(out.id);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * v[c];
    z[r] = acc;
  }
  check_finite(out.id);
  return out;
}

Var Tape::tanh(Var a) {
  const std::size_t n = size(a);
  Var out = push(Op::kTanh, a.id, 0, n, n, 1);
  const double* x = val(a.id);
  double* z = val(out.id);
  for (std::size_t i = 0; i < n; ++i) z[i] = std::tanh(x[i]);
  check_finite(out.id);
  return out;
}

Var Tape::log_sigmoid(Var a) {
  const std::size_t n = size(a);
  Var out = push(Op::kLogSigmoid, a.id, 0, n, n, 1);
  const double* x = val(a.id);
  double* z = val(out.id);
  for (std::size_t i = 0; i < n; ++i) z[i] = stable_log_sigmoid(x[i]);
  check_finite(out.id);
  return out;
}

Var Tape::log_sum_exp(Var a) {
  const std::size_t n = size(a);
  if (n == 0) throw ContractError("log_sum_exp: empty input");
  Var out = push(Op::kLogSumExp, a.id, 0, 1, 1, 1);
  const double* x = val(a.id);
  const double m = *std::max_element(x, x + n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - m);
  *val(out.id) = m + std::log(s);
  check_finite(out.id);
  return out;
}

Var Tape::sum_squares(Var a) {
  const std::size_t n = size(a);
  Var out = push(Op::kSumSquares, a.id, 0, 1, 1, 1);
  const double* x = val(a.id);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  *val(out.id) = s;
  check_finite(out.id);
  return out;
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  if (offset + length > size(a)) throw ContractError("slice: out of range");
  Var out = push(Op::kSlice, a.id, 0, length, length, 1, offset);
  const double* x = val(a.id) + offset;
  std::copy(x, x + length, val(out.id));
  return out;
}

Var Tape::concat(Var a, Var b) {
  const std::size_t na = size(a);
  const std::size_t nb = size(b);
  Var out = push(Op::kConcat, a.id, b.id, na + nb, na + nb, 1);
  std::copy(val(a.id), val(a.id) + na, val(out.id));
  std::copy(val(b.id), val(b.id) + nb, val(out.id) + na);
  return out;
}

Var Tape::sum(Var a) {
  const std::size_t n = size(a);
  Var out = push(Op::kSum, a.id, 0, 1, 1, 1);
  const double* x = val(a.id);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  *val(out.id) = s;
  check_finite(out.id);
  return out;
}

Var Tape::cayley(Var upper, std::size_t n) {
  if (size(upper) != n * (n - 1) / 2) {
    throw ContractError("cayley: expected " + std::to_string(n * (n - 1) / 2) +
                        " skew parameters");
  }
  RowMatrix s = RowMatrix::Zero(n, n);
  const double* p = val(upper.id);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++k) {
      s(i, j) = p[k];
      s(j, i) = -p[k];
    }
  }
  const RowMatrix eye = RowMatrix::Identity(n, n);
  const RowMatrix inv = (eye + s).partialPivLu().inverse();
  const RowMatrix q = (eye - s) * inv;

  const std::size_t cache_offset = cayley_cache_.size();
  cayley_cache_.insert(cayley_cache_.end(), inv.data(), inv.data() + n * n);
  Var out = push(Op::kCayley, upper.id, 0, n * n, n, n, cache_offset);
  std::copy(q.data(), q.data() + n * n, val(out.id));
  check_finite(out.id);
  return out;
}

Var Tape::sub(Var a, Var b) { return add(a, mul(b, scalar(-1.0))); }

Var Tape::scale(Var a, double c) { return mul(a, scalar(c)); }

std::span<const double> Tape::value(Var v) const {
  return {val(v.id), nodes_[v.id].size};
}

double Tape::scalar_value(Var v) const {
  if (nodes_[v.id].size != 1) throw ContractError("scalar_value: not a scalar");
  return *val(v.id);
}

std::span<const double> Tape::grad(Var v) const {
  if (!has_adjoints_) throw ContractError("grad: backward() has not been run");
  return {adjoints_.data() + nodes_[v.id].offset, nodes_[v.id].size};
}

void Tape::backward(Var output) {
  if (nodes_[output.id].size != 1) {
    throw ContractError("backward: output node " + std::to_string(output.id) +
                        " is not a scalar (size " +
                        std::to_string(nodes_[output.id].size) + ")");
  }
  adjoints_.assign(values_.size(), 0.0);
  has_adjoints_ = true;
  *adj(output.id) = 1.0;

  for (std::uint32_t id = output.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    const double* g = adjoints_.data() + node.offset;
    switch (node.op) {
      case Op::kInput:
        break;
      case Op::kAdd: {
        double* ga = adj(node.a);
        double* gb = adj(node.b);
        for (std::uint32_t i = 0; i < node.size; ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kMul: {
        const std::uint32_t na = nodes_[node.a].size;
        const std::uint32_t nb = nodes_[node.b].size;
        const double* x = val(node.a);
        const double* y = val(node.b);
        double* ga = adj(node.a);
        double* gb = adj(node.b);
        for (std::uint32_t i = 0; i < node.size; ++i) {
          const std::uint32_t ia = na == 1 ? 0 : i;
          const std::uint32_t ib = nb == 1 ? 0 : i;
          ga[ia] += g[i] * y[ib];
          gb[ib] += g[i] * x[ia];
        }
        break;
      }
      case Op::kMatVec: {
        const Node& m = nodes_[node.a];
        const double* w = val(node.a);
        const double* x = val(node.b);
        double* gw = adj(node.a);
        double* gx = adj(node.b);
        for (std::uint32_t r = 0; r < m.rows; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          const double* row = w + r * m.cols;
          double* grow = gw + r * m.cols;
          for (std::uint32_t c = 0; c < m.cols; ++c) {
            grow[c] += gr * x[c];
            gx[c] += gr * row[c];
          }
        }
        break;
      }
      case Op::kTanh: {
        const double* z = val(id);
        double* ga = adj(node.a);
        for (std::uint32_t i = 0; i < node.size; ++i) {
          ga[i] += g[i] * (1.0 - z[i] * z[i]);
        }
        break;
      }
      case Op::kLogSigmoid: {
        const double* x = val(node.a);
        double* ga = adj(node.a);
        for (std::uint32_t i = 0; i < node.size; ++i) {
          ga[i] += g[i] * stable_sigmoid(-x[i]);
        }
        break;
      }
      case Op::kLogSumExp: {
        const std::uint32_t n = nodes_[node.a].size;
        const double* x = val(node.a);
        const double lse = *val(id);
        double* ga = adj(node.a);
        for (std::uint32_t i = 0; i < n; ++i) {
          ga[i] += g[0] * std::exp(x[i] - lse);
        }
        break;
      }
      case Op::kSumSquares: {
        const std::uint32_t n = nodes_[node.a].size;
        const double* x = val(node.a);
        double* ga = adj(node.a);
        for (std::uint32_t i = 0; i < n; ++i) ga[i] += 2.0 * g[0] * x[i];
        break;
      }
      case Op::kSlice: {
        double* ga = adj(node.a) + node.aux;
        for (std::uint32_t i = 0; i < node.size; ++i) ga[i] += g[i];
        break;
      }
      case Op::kConcat: {
        const std::uint32_t na = nodes_[node.a].size;
        double* ga = adj(node.a);
        double* gb = adj(node.b);
        for (std::uint32_t i = 0; i < na; ++i) ga[i] += g[i];
        for (std::uint32_t i = na; i < node.size; ++i) gb[i - na] += g[i];
        break;
      }
      case Op::kSum: {
        const std::uint32_t n = nodes_[node.a].size;
        double* ga = adj(node.a);
        for (std::uint32_t i = 0; i < n; ++i) ga[i] += g[0];
        break;
      }
      case Op::kCayley:
        backward_cayley(node);
        break;
    }
  }
}

// With A = (I + S)^-1 and Q = (I - S) A:  dQ = -(I + Q) dS A, hence
// dL/dS = -(I + Q)^T G A^T, folded onto the free upper-triangle entries.
void Tape::backward_cayley(const Node& node) {
  const std::size_t n = node.rows;
  const Eigen::Map<const RowMatrix> inv(cayley_cache_.data() + node.aux, n, n);
  const Eigen::Map<const RowMatrix> q(values_.data() + node.offset, n, n);
  const Eigen::Map<const RowMatrix> g(adjoints_.data() + node.offset, n, n);
  const RowMatrix eye = RowMatrix::Identity(n, n);
  const RowMatrix gs = -(eye + q).transpose() * g * inv.transpose();
  double* gp = adj(node.a);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++k) {
      gp[k] += gs(i, j) - gs(j, i);
    }
  }
}

ValueAndGradient eval_and_grad(const GraphFn& graph,
                               std::span<const std::vector<double>> params) {
  Tape tape;
  std::vector<Var> inputs;
  inputs.reserve(params.size());
  for (const auto& p : params) inputs.push_back(tape.input(p));
  const Var out = graph(tape, inputs);
  if (tape.size(out) != 1) {
    throw ContractError("eval_and_grad: graph output is not a scalar");
  }
  tape.backward(out);
  ValueAndGradient result;
  result.value = tape.scalar_value(out);
  result.gradient.reserve(inputs.size());
  for (Var v : inputs) {
    auto g = tape.grad(v);
    for (double x : g) {
      if (!std::isfinite(x)) throw NumericError("non-finite gradient");
    }
    result.gradient.emplace_back(g.begin(), g.end());
  }
  return result;
}

std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> point, double h) {
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("relative_error: size mismatch");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

}  // namespace ncis::ad
