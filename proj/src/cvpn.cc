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

#include "ncis/cvpn.h"

#include <Eigen/Dense>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "ncis/errors.h"
#include "ncis/random.h"
#include "ncis/text_io.h"

namespace ncis {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr const char* kFormat = "ncis-cvpn";

void matvec_add(const Parameter& w, const Parameter& b,
                std::span<const double> x, std::vector<double>& out) {
  out.assign(b.values.begin(), b.values.end());
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.values.data() + r * w.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    out[r] += acc;
  }
}

std::vector<double> gaussian_values(Rng& rng, std::size_t n, double stddev) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = stddev * normal(rng);
  return v;
}

}  // namespace

std::vector<double> cayley_rotation(std::span<const double> upper,
                                    std::size_t n) {
  if (upper.size() != n * (n - 1) / 2) {
    throw ContractError("cayley_rotation: wrong number of skew parameters");
  }
  RowMatrix s = RowMatrix::Zero(n, n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++k) {
      s(i, j) = upper[k];
      s(j, i) = -upper[k];
    }
  }
  const RowMatrix eye = RowMatrix::Identity(n, n);
  const RowMatrix q = (eye - s) * (eye + s).partialPivLu().inverse();
  return {q.data(), q.data() + n * n};
}

std::vector<double> orthogonal_apply(std::span<const double> rotation,
                                     std::span<const double> x,
                                     Direction direction) {
  const std::size_t n = x.size();
  if (rotation.size() != n * n) {
    throw ContractError("orthogonal_apply: dimension mismatch");
  }
  std::vector<double> out(n, 0.0);
  if (direction == Direction::kForward) {
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += rotation[r * n + c] * x[c];
      out[r] = acc;
    }
  } else {
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += rotation[c * n + r] * x[c];
      out[r] = acc;
    }
  }
  return out;
}

std::vector<double> coupling_forward(std::span<const double> x,
                                     std::size_t split,
                                     const TranslationFn& translation) {
  if (split == 0 || split >= x.size()) {
    throw ContractError("coupling_forward: split must lie inside the vector");
  }
  const auto shift = translation(x.subspan(split));
  if (shift.size() != split) {
    throw ContractError("coupling_forward: translation has wrong size");
  }
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t i = 0; i < split; ++i) y[i] += shift[i];
  return y;
}

std::vector<double> coupling_inverse(std::span<const double> y,
                                     std::size_t split,
                                     const TranslationFn& translation) {
  if (split == 0 || split >= y.size()) {
    throw ContractError("coupling_inverse: split must lie inside the vector");
  }
  const auto shift = translation(y.subspan(split));
  if (shift.size() != split) {
    throw ContractError("coupling_inverse: translation has wrong size");
  }
  std::vector<double> x(y.begin(), y.end());
  for (std::size_t i = 0; i < split; ++i) x[i] -= shift[i];
  return x;
}

CvpnModel CvpnModel::build(const CvpnConfig& config) {
  if (config.dim < 2) throw ContractError("cvpn: dimension must be >= 2");
  if (config.num_invariants < 1 || config.num_invariants >= config.dim) {
    throw ContractError("cvpn: invariant count K=" +
                        std::to_string(config.num_invariants) +
                        " outside [1, D-1] for D=" + std::to_string(config.dim));
  }
  if (config.num_blocks < 1) throw ContractError("cvpn: num_blocks must be >= 1");
  if (config.class_count < 1) throw ContractError("cvpn: class_count must be >= 1");
  if (config.hidden_width < 1) throw ContractError("cvpn: hidden_width must be >= 1");

  CvpnModel model;
  model.config_ = config;
  Rng rng(config.seed);
  const std::size_t D = config.dim;
  const std::size_t d = model.split();
  const std::size_t h = model.class_embed_dim();
  const std::size_t H = config.hidden_width;
  const std::size_t in = (D - d) + h;

  model.class_embed_ = model.params_.add(
      "class_embed", config.class_count, h,
      gaussian_values(rng, config.class_count * h, 0.01));

  for (std::size_t b = 0; b < config.num_blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b) + ".";
    OrthogonalLayer orth;
    orth.skew = model.params_.add(prefix + "skew", 1, D * (D - 1) / 2);
    orth.rotation = b;
    model.layers_.emplace_back(orth);

    CouplingLayer ccl;
    ccl.w1 = model.params_.add(prefix + "t.w1", H, in,
                               gaussian_values(rng, H * in, 1.0 / std::sqrt(in)));
    ccl.b1 = model.params_.add(prefix + "t.b1", H, 1);
    ccl.w2 = model.params_.add(prefix + "t.w2", H, H,
                               gaussian_values(rng, H * H, 1.0 / std::sqrt(H)));
    ccl.b2 = model.params_.add(prefix + "t.b2", H, 1);
    ccl.w3 = model.params_.add(prefix + "t.w3", d, H);
    ccl.b3 = model.params_.add(prefix + "t.b3", d, 1);
    model.layers_.emplace_back(ccl);
  }
  model.refresh_rotations();
  return model;
}

void CvpnModel::set_parameters(ParameterSet params) {
  if (params.size() != params_.size()) {
    throw ContractError("cvpn: parameter block count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != params_[i].name || params[i].rows != params_[i].rows ||
        params[i].cols != params_[i].cols) {
      throw ContractError("cvpn: parameter '" + params[i].name +
                          "' does not match the model layout");
    }
  }
  params_ = std::move(params);
  refresh_rotations();
}

void CvpnModel::refresh_rotations() {
  rotations_.clear();
  for (const auto& layer : layers_) {
    if (const auto* orth = std::get_if<OrthogonalLayer>(&layer)) {
      rotations_.push_back(cayley_rotation(params_[orth->skew].values, dim()));
    }
  }
}

void CvpnModel::check_label(std::size_t label) const {
  if (label >= config_.class_count) {
    throw ContractError("cvpn: unknown class " + std::to_string(label) +
                        " (class_count " + std::to_string(config_.class_count) +
                        ")");
  }
}

void CvpnModel::check_dim(std::size_t n) const {
  if (n != config_.dim) {
    throw ContractError("cvpn: expected dimension " + std::to_string(config_.dim) +
                        ", got " + std::to_string(n));
  }
}

std::span<const double> CvpnModel::class_embedding(std::size_t label) const {
  check_label(label);
  const auto& table = params_[class_embed_];
  return std::span<const double>(table.values).subspan(label * table.cols,
                                                       table.cols);
}

std::vector<double> CvpnModel::translation(const CouplingLayer& layer,
                                           std::span<const double> passive,
                                           std::size_t label) const {
  const auto h = class_embedding(label);
  std::vector<double> in(passive.begin(), passive.end());
  in.insert(in.end(), h.begin(), h.end());
  std::vector<double> a;
  std::vector<double> z;
  matvec_add(params_[layer.w1], params_[layer.b1], in, a);
  for (auto& x : a) x = std::tanh(x);
  matvec_add(params_[layer.w2], params_[layer.b2], a, z);
  for (auto& x : z) x = std::tanh(x);
  std::vector<double> out;
  matvec_add(params_[layer.w3], params_[layer.b3], z, out);
  return out;
}

std::vector<double> CvpnModel::coupling_forward(const CouplingLayer& layer,
                                                std::span<const double> x,
                                                std::size_t label) const {
  check_dim(x.size());
  return ncis::coupling_forward(x, split(), [&](std::span<const double> p) {
    return translation(layer, p, label);
  });
}

std::vector<double> CvpnModel::coupling_inverse(const CouplingLayer& layer,
                                                std::span<const double> y,
                                                std::size_t label) const {
  check_dim(y.size());
  return ncis::coupling_inverse(y, split(), [&](std::span<const double> p) {
    return translation(layer, p, label);
  });
}

std::vector<double> CvpnModel::orthogonal_apply(const OrthogonalLayer& layer,
                                                std::span<const double> x,
                                                Direction direction) const {
  check_dim(x.size());
  return ncis::orthogonal_apply(rotations_[layer.rotation], x, direction);
}

std::vector<double> CvpnModel::forward(std::span<const double> e,
                                       std::size_t label) const {
  check_dim(e.size());
  check_label(label);
  std::vector<double> x(e.begin(), e.end());
  for (const auto& layer : layers_) {
    if (const auto* orth = std::get_if<OrthogonalLayer>(&layer)) {
      x = orthogonal_apply(*orth, x, Direction::kForward);
    } else {
      x = coupling_forward(std::get<CouplingLayer>(layer), x, label);
    }
  }
  return x;
}

std::vector<double> CvpnModel::inverse(std::span<const double> v,
                                       std::size_t label) const {
  check_dim(v.size());
  check_label(label);
  std::vector<double> x(v.begin(), v.end());
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    if (const auto* orth = std::get_if<OrthogonalLayer>(&*it)) {
      x = orthogonal_apply(*orth, x, Direction::kInverse);
    } else {
      x = coupling_inverse(std::get<CouplingLayer>(*it), x, label);
    }
  }
  return x;
}

std::vector<double> CvpnModel::invariants(std::span<const double> e,
                                          std::size_t label) const {
  auto v = forward(e, label);
  v.resize(num_invariants());
  return v;
}

CvpnTapeBinding CvpnModel::bind(ad::Tape& tape) const {
  std::vector<ad::Var> params;
  params.reserve(params_.size());
  for (const auto& p : params_) params.push_back(tape.input(p.values, p.rows, p.cols));
  return bind(tape, params);
}

CvpnTapeBinding CvpnModel::bind(ad::Tape& tape,
                                std::span<const ad::Var> params) const {
  if (params.size() != params_.size()) {
    throw ContractError("cvpn: bind expects one tape input per parameter block");
  }
  CvpnTapeBinding binding;
  binding.params.assign(params.begin(), params.end());
  for (const auto& layer : layers_) {
    if (const auto* orth = std::get_if<OrthogonalLayer>(&layer)) {
      binding.rotations.push_back(tape.cayley(params[orth->skew], dim()));
    }
  }
  return binding;
}

ad::Var CvpnModel::forward(ad::Tape& tape, const CvpnTapeBinding& binding,
                           ad::Var e, std::size_t label) const {
  check_label(label);
  check_dim(tape.size(e));
  const std::size_t D = dim();
  const std::size_t d = split();
  const std::size_t h = class_embed_dim();
  const ad::Var embed = tape.slice(binding.params[class_embed_], label * h, h);
  const auto& p = binding.params;
  ad::Var x = e;
  for (const auto& layer : layers_) {
    if (const auto* orth = std::get_if<OrthogonalLayer>(&layer)) {
      x = tape.matvec(binding.rotations[orth->rotation], x);
    } else {
      const auto& ccl = std::get<CouplingLayer>(layer);
      const ad::Var active = tape.slice(x, 0, d);
      const ad::Var passive = tape.slice(x, d, D - d);
      const ad::Var in = tape.concat(passive, embed);
      const ad::Var a1 = tape.tanh(tape.add(tape.matvec(p[ccl.w1], in), p[ccl.b1]));
      const ad::Var a2 = tape.tanh(tape.add(tape.matvec(p[ccl.w2], a1), p[ccl.b2]));
      const ad::Var shift = tape.add(tape.matvec(p[ccl.w3], a2), p[ccl.b3]);
      x = tape.concat(tape.add(active, shift), passive);
    }
  }
  return x;
}

void CvpnModel::save(std::ostream& out) const {
  out << "format " << kFormat << '\n';
  out << "schema_version " << kSchemaVersion << '\n';
  out << "dim " << config_.dim << '\n';
  out << "num_invariants " << config_.num_invariants << '\n';
  out << "num_blocks " << config_.num_blocks << '\n';
  out << "class_count " << config_.class_count << '\n';
  out << "hidden_width " << config_.hidden_width << '\n';
  out << "seed " << config_.seed << '\n';
  out << "layers";
  for (const auto& layer : layers_) {
    out << (std::holds_alternative<OrthogonalLayer>(layer) ? " orth" : " ccl");
  }
  out << '\n';
  out << "param_count " << params_.size() << '\n';
  params_.write(out);
  out << "end\n";
}

CvpnModel CvpnModel::load(std::istream& in) {
  text::RecordReader reader(in);
  reader.expect_schema(kFormat, kSchemaVersion);
  CvpnConfig config;
  auto read_count = [&](const std::string& key) {
    const auto v = reader.expect_int(key);
    if (v < 0) throw LoadError(key, "must be non-negative");
    return static_cast<std::size_t>(v);
  };
  config.dim = read_count("dim");
  config.num_invariants = read_count("num_invariants");
  config.num_blocks = read_count("num_blocks");
  config.class_count = read_count("class_count");
  config.hidden_width = read_count("hidden_width");
  const auto seed_tokens = reader.expect("seed");
  if (seed_tokens.size() != 1) throw LoadError("seed", "expected one value");
  try {
    config.seed = std::stoull(std::string(seed_tokens[0]));
  } catch (const std::exception&) {
    throw LoadError("seed", "not an unsigned integer");
  }

  CvpnModel model;
  try {
    model = build(config);
  } catch (const ContractError& e) {
    throw LoadError("dim", e.what());
  }
  const auto layer_tokens = reader.expect("layers");
  if (layer_tokens.size() != model.layers_.size()) {
    throw LoadError("layers", "layer count does not match num_blocks");
  }
  for (std::size_t i = 0; i < layer_tokens.size(); ++i) {
    const bool is_orth = std::holds_alternative<OrthogonalLayer>(model.layers_[i]);
    if (layer_tokens[i] != (is_orth ? "orth" : "ccl")) {
      throw LoadError("layers", "unexpected layer kind '" +
                                    std::string(layer_tokens[i]) + "'");
    }
  }
  const std::size_t count = read_count("param_count");
  if (count != model.params_.size()) {
    throw LoadError("param_count", "does not match the layer structure");
  }
  ParameterSet params = ParameterSet::read(in, count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& want = model.params_[i];
    if (params[i].name != want.name || params[i].rows != want.rows ||
        params[i].cols != want.cols) {
      throw LoadError(params[i].name, "parameter does not match model layout");
    }
  }
  reader.expect("end");
  model.set_parameters(std::move(params));
  return model;
}

std::string CvpnModel::to_string() const {
  std::ostringstream out;
  save(out);
  return out.str();
}

CvpnModel CvpnModel::from_string(const std::string& text) {
  std::istringstream in(text);
  return load(in);
}

double jacobian_det_fd(
    const std::function<std::vector<double>(std::span<const double>)>& map,
    std::span<const double> point, double h) {
  const std::size_t n = point.size();
  if (n > 16) throw ContractError("jacobian_det_fd: dimension above 16");
  RowMatrix jac(n, n);
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t j = 0; j < n; ++j) {
    const double orig = x[j];
    x[j] = orig + h;
    const double up = x[j];
    const auto fp = map(x);
    x[j] = orig - h;
    const double down = x[j];
    const auto fm = map(x);
    x[j] = orig;
    const double step = up - down;
    for (std::size_t i = 0; i < n; ++i) jac(i, j) = (fp[i] - fm[i]) / step;
  }
  return jac.partialPivLu().determinant();
}

double jacobian_det_fd(const CvpnModel& model, std::span<const double> e,
                       std::size_t label, double h) {
  if (model.dim() > 16) throw ContractError("jacobian_det_fd: dimension above 16");
  return jacobian_det_fd(
      [&](std::span<const double> x) { return model.forward(x, label); }, e, h);
}

}  // namespace ncis
