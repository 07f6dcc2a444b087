// dcsep/container.h

// Copyright 2026 dcsep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcsep/common.h"
#include "dcsep/dsp.h"
#include "dcsep/gmm.h"
#include "dcsep/ivector.h"
#include "dcsep/network.h"

namespace dcsep {

/// Binary model file shared by every trained component.
///
/// Layout (all integers little-endian):
///   8 bytes   magic "DCSEPMC\0"
///   u32       format version (kContainerVersion)
///   u32       metadata entry count, then per entry:
///               u32 key length, key bytes, u32 value length, value bytes
///             (entries sorted by key)
///   u32       tensor count, then per tensor:
///               u32 name length, name bytes, u32 rank, u64 dims[rank],
///               f64 data in row-major order
struct Tensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

inline constexpr std::uint32_t kContainerVersion = 1;

class ModelContainer {
 public:
  std::map<std::string, std::string> metadata;

  void Put(const std::string &name, const MatrixXd &m);
  void Put(const std::string &name, const VectorXd &v);
  MatrixXd GetMatrix(const std::string &name) const;
  VectorXd GetVector(const std::string &name) const;
  bool Has(const std::string &name) const;
  const std::vector<Tensor> &tensors() const { return tensors_; }

  const std::string &Meta(const std::string &key) const;

  std::string Serialize() const;
  static ModelContainer Deserialize(const std::string &bytes);

  void Save(const std::string &path) const;
  static ModelContainer Load(const std::string &path);

  /// FNV-1a of the serialized bytes, as 16 hex digits.
  std::string Hash() const;

 private:
  const Tensor &Find(const std::string &name) const;
  std::vector<Tensor> tensors_;
};

ModelContainer ToContainer(const GmmUbm &ubm);
GmmUbm UbmFromContainer(const ModelContainer &c);

ModelContainer ToContainer(const TotalVariabilityModel &tv);
TotalVariabilityModel TvFromContainer(const ModelContainer &c);

ModelContainer ToContainer(const LdaProjection &lda);
LdaProjection LdaFromContainer(const ModelContainer &c);

/// Network weights together with the feature and i-vector normalisation
/// used at its input.
struct SeparationModel {
  NetworkParameters network;
  NormalizationStats features;
  NormalizationStats ivectors;  // empty for level 0
  int level = 0;
};

ModelContainer ToContainer(const SeparationModel &model);
SeparationModel SeparationModelFromContainer(const ModelContainer &c);

/// Shortest text that parses back to the same double.
std::string FormatDouble(double v);

}  // namespace dcsep
