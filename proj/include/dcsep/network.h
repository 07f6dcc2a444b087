// dcsep/network.h

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
#include <string>

#include "dcsep/affinity.h"
#include "dcsep/common.h"

namespace dcsep {

enum class CellType { kGru, kLstm };

CellType ParseCellType(const std::string &name);
std::string CellTypeName(CellType cell);

struct NetworkConfig {
  int freq_bins = 256;      // F
  int ivector_width = 0;    // C * ivec_dim appended to every frame
  int embedding_dim = 20;   // D
  int hidden = 64;
  int layers = 2;
  CellType cell = CellType::kGru;

  int input_dim() const { return freq_bins + ivector_width; }
  int output_dim() const { return freq_bins * embedding_dim; }
  int gates() const { return cell == CellType::kGru ? 3 : 4; }
};

/// All weights live in one flat vector so that optimizer state, checkpoints
/// and restores are plain vector copies.  Per layer and direction the block
/// is [Wx (G*H x in) | Wh (G*H x H) | b (G*H)], row-major; the output layer
/// [Wo (F*D x 2H) | bo (F*D)] comes last.
struct NetworkParameters {
  NetworkConfig config;
  VectorXd theta;

  static Index Count(const NetworkConfig &config);
};

NetworkParameters InitNetwork(const NetworkConfig &config, std::uint64_t seed);

/// Returns a network with a wider input whose extra first-layer weights are
/// zero, so the output is unchanged until the new inputs are trained.
NetworkParameters WidenInput(const NetworkParameters &params, int ivector_width);

/// Frame-wise network input: features (T x F) with the flattened i-vector
/// block appended to every frame.  `ivectors` may be empty.
RowMatrixXd AssembleInput(const MatrixXd &features, const MatrixXd &ivectors);

/// Pre-normalization embeddings U, N x D with N = T * F, row i = t * F + f.
RowMatrixXd ForwardRaw(const NetworkParameters &params, const RowMatrixXd &input);

/// Unit-norm embeddings V = NormalizeRows(ForwardRaw(...)).
RowMatrixXd Forward(const NetworkParameters &params, const RowMatrixXd &input);
RowMatrixXd Forward(const NetworkParameters &params, const MatrixXd &features,
                    const MatrixXd &ivectors);

/// Raw affinity loss of one utterance and its gradient with respect to
/// theta, both multiplied by `scale`.  `grad` is accumulated into, not
/// overwritten.
double LossAndGradient(const NetworkParameters &params, const RowMatrixXd &input,
                       const AffinityTarget &target, double scale, VectorXd *grad);

}  // namespace dcsep
