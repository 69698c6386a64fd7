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

#ifndef NCIS_CVPN_H_
#define NCIS_CVPN_H_

// Conditional volume-preserving network f : R^D x labels -> R^D.
//
// The network alternates orthogonal layers (Cayley transform of a
// skew-symmetric matrix) and conditional coupling layers
//
//   ccl(x, l)     = join(x[0:d] + t(x[d:D], h(l)), x[d:D])
//   ccl^-1(y, l)  = join(y[0:d] - t(y[d:D], h(l)), y[d:D])
//
// with d = ceil(D/2) and h a learned class-embedding table of width
// ceil(D/2). Every layer has |det J| = 1, so f is bijective in its first
// argument and volume preserving for each class. The first K outputs are the
// invariants g = f[0:K].

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ncis/autodiff.h"
#include "ncis/parameters.h"

namespace ncis {

enum class Direction { kForward, kInverse };

struct CvpnConfig {
  std::size_t dim = 2;
  std::size_t num_invariants = 1;
  std::size_t num_blocks = 4;
  std::size_t class_count = 1;
  std::size_t hidden_width = 32;
  std::uint64_t seed = 0;
};

// Indices into the model's ParameterSet.
struct OrthogonalLayer {
  std::size_t skew = 0;  // strict upper triangle of S, D(D-1)/2 entries
  std::size_t rotation = 0;  // slot in the model's cached rotations
};

struct CouplingLayer {
  std::size_t w1 = 0, b1 = 0;
  std::size_t w2 = 0, b2 = 0;
  std::size_t w3 = 0, b3 = 0;  // zero-initialized output layer
};

using CvpnLayer = std::variant<OrthogonalLayer, CouplingLayer>;

// Q = (I - S)(I + S)^-1 for the skew-symmetric S built from `upper`;
// row-major n x n.
std::vector<double> cayley_rotation(std::span<const double> upper,
                                    std::size_t n);

// Qx (forward) or Q^T x (inverse) for a row-major n x n rotation.
std::vector<double> orthogonal_apply(std::span<const double> rotation,
                                     std::span<const double> x,
                                     Direction direction);

using TranslationFn =
    std::function<std::vector<double>(std::span<const double>)>;

// Additive coupling on the split x = (x[0:split], x[split:]); `translation`
// maps the passive half to a `split`-vector.
std::vector<double> coupling_forward(std::span<const double> x,
                                     std::size_t split,
                                     const TranslationFn& translation);
std::vector<double> coupling_inverse(std::span<const double> y,
                                     std::size_t split,
                                     const TranslationFn& translation);

// Parameters loaded on a tape, with each orthogonal layer's rotation built
// once so many samples can share it.
struct CvpnTapeBinding {
  std::vector<ad::Var> params;
  std::vector<ad::Var> rotations;
};

class CvpnModel {
 public:
  static constexpr std::int64_t kSchemaVersion = 1;

  // Identity map for every class at construction. Throws ContractError
  // unless 1 <= K < D, num_blocks >= 1 and class_count >= 1.
  static CvpnModel build(const CvpnConfig& config);

  const CvpnConfig& config() const { return config_; }
  std::size_t dim() const { return config_.dim; }
  std::size_t num_invariants() const { return config_.num_invariants; }
  std::size_t class_count() const { return config_.class_count; }
  std::size_t split() const { return (config_.dim + 1) / 2; }
  std::size_t class_embed_dim() const { return (config_.dim + 1) / 2; }

  const std::vector<CvpnLayer>& layers() const { return layers_; }
  const ParameterSet& parameters() const { return params_; }
  // Replaces all parameters (shapes must match) and refreshes rotations.
  void set_parameters(ParameterSet params);

  std::span<const double> class_embedding(std::size_t label) const;
  const std::vector<double>& rotation(const OrthogonalLayer& layer) const {
    return rotations_[layer.rotation];
  }

  std::vector<double> translation(const CouplingLayer& layer,
                                  std::span<const double> passive,
                                  std::size_t label) const;
  std::vector<double> coupling_forward(const CouplingLayer& layer,
                                       std::span<const double> x,
                                       std::size_t label) const;
  std::vector<double> coupling_inverse(const CouplingLayer& layer,
                                       std::span<const double> y,
                                       std::size_t label) const;
  std::vector<double> orthogonal_apply(const OrthogonalLayer& layer,
                                       std::span<const double> x,
                                       Direction direction) const;

  std::vector<double> forward(std::span<const double> e,
                              std::size_t label) const;
  std::vector<double> inverse(std::span<const double> v,
                              std::size_t label) const;
  std::vector<double> invariants(std::span<const double> e,
                                 std::size_t label) const;

  // Differentiable forward pass. bind() loads parameters() onto the tape;
  // the overload taking `params` reuses existing tape inputs (one per
  // parameter block, in order).
  CvpnTapeBinding bind(ad::Tape& tape) const;
  CvpnTapeBinding bind(ad::Tape& tape, std::span<const ad::Var> params) const;
  ad::Var forward(ad::Tape& tape, const CvpnTapeBinding& binding, ad::Var e,
                  std::size_t label) const;

  // Self-describing text record; write -> read -> write is byte-identical.
  void save(std::ostream& out) const;
  static CvpnModel load(std::istream& in);
  std::string to_string() const;
  static CvpnModel from_string(const std::string& text);

 private:
  CvpnModel() = default;
  void check_label(std::size_t label) const;
  void check_dim(std::size_t n) const;
  void refresh_rotations();

  CvpnConfig config_;
  ParameterSet params_;
  std::size_t class_embed_ = 0;
  std::vector<CvpnLayer> layers_;
  std::vector<std::vector<double>> rotations_;
};

// Determinant of the central finite-difference Jacobian of `map` at `point`.
// Each column is divided by the representable step actually taken, so an
// exact identity map yields exactly 1. Throws ContractError for D > 16.
double jacobian_det_fd(
    const std::function<std::vector<double>(std::span<const double>)>& map,
    std::span<const double> point, double h = ad::kDefaultFdStep);
double jacobian_det_fd(const CvpnModel& model, std::span<const double> e,
                       std::size_t label, double h = ad::kDefaultFdStep);

}  // namespace ncis

#endif  // NCIS_CVPN_H_
