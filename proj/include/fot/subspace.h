/*
 * Copyright 2026 The FedOrtho Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FOT_SUBSPACE_H_
#define FOT_SUBSPACE_H_

#include <cstddef>
#include <optional>
#include <vector>

#include "fot/linalg.h"
#include "fot/model.h"

namespace fot {

// Per trunk layer orthonormal basis of the input subspace claimed by
// previous tasks. Layer l's basis lives in R^{d_l}, d_l = in_l + 1.
struct OrthogonalSet {
  std::vector<OrthonormalBasis> layers;

  static OrthogonalSet EmptyFor(const MlpModel& model);
  std::size_t layer_count() const { return layers.size(); }
  // Throws InvalidInput if the layer dimensions disagree with the model.
  void CheckCompatible(const MlpModel& model) const;
};

// One layer's GPSE contribution. For a client this is its own sketch; for
// the server it is the secure sum over clients.
struct LayerSketch {
  Matrix a;                  // d x s
  double residual_sq = 0.0;  // ||X*||_F^2
  double total_sq = 0.0;     // ||X||_F^2
};

// Layers skipped by the protocol (a frozen first layer) hold nullopt.
struct Sketch {
  std::vector<std::optional<LayerSketch>> layers;
  std::size_t sample_count = 0;
};

}  // namespace fot

#endif  // FOT_SUBSPACE_H_
