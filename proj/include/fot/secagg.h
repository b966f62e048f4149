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

#ifndef FOT_SECAGG_H_
#define FOT_SECAGG_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fot/linalg.h"

namespace fot {

// Signed fixed point in Z_{2^64}: value v maps to round(v * 2^f) taken
// modulo 2^64. Sums decode correctly while |sum| * 2^f < 2^63.
class FixedPointCodec {
 public:
  static constexpr int kDefaultFractionBits = 24;

  explicit FixedPointCodec(int fraction_bits = kDefaultFractionBits);

  int fraction_bits() const { return fraction_bits_; }
  double resolution() const { return 1.0 / scale_; }

  // Throws InvalidInput for non-finite or out-of-range values.
  uint64_t Encode(double value) const;
  double Decode(uint64_t word) const;

 private:
  int fraction_bits_;
  double scale_;
};

// Identifies one aggregation round and its participants. Every client in
// the round must be given the same RoundSpec.
struct RoundSpec {
  uint64_t master_seed = 0;
  uint64_t round_id = 0;
  std::vector<std::size_t> participants;
};

struct MaskedPayload {
  std::size_t client_id = 0;
  uint64_t round_id = 0;
  // Participant list this client masked against.
  std::vector<std::size_t> peers;
  std::vector<uint64_t> masked;
};

// The pairwise mask stream shared by clients lo < hi in one round.
std::vector<uint64_t> PairwiseMask(uint64_t master_seed, std::size_t lo, std::size_t hi,
                                   uint64_t round_id, std::size_t length);

// encode(payload) + sum_{j > self} PRG(self, j) - sum_{j < self} PRG(j, self).
MaskedPayload Mask(std::span<const double> payload, std::size_t self_id,
                   const RoundSpec& round, const FixedPointCodec& codec = FixedPointCodec());

// Server side. Verifies that exactly the round's participants reported with
// a consistent peer list and equal lengths, then decodes the modular sum.
// Throws ProtocolError otherwise.
std::vector<double> Aggregate(std::span<const MaskedPayload> payloads,
                              const RoundSpec& round,
                              const FixedPointCodec& codec = FixedPointCodec());

// Modular sum and decode with no protocol checks. Exposed so tests can show
// what an incomplete round reveals (nothing useful).
std::vector<double> DecodeModularSum(std::span<const MaskedPayload> payloads,
                                     const FixedPointCodec& codec = FixedPointCodec());

// Wire layout shared by clients and server: for each block in order, one
// length word holding the block's element count, then its entries row-major.
// After aggregation over n contributors every length word reads n * count,
// which Unpack checks.
class PayloadLayout {
 public:
  struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;
  };

  explicit PayloadLayout(std::vector<Shape> shapes);

  std::size_t length() const { return length_; }
  const std::vector<Shape>& shapes() const { return shapes_; }

  std::vector<double> Pack(std::span<const Matrix> blocks) const;
  // Throws ProtocolError if a length word does not equal contributors * count.
  std::vector<Matrix> Unpack(std::span<const double> flat, std::size_t contributors) const;

 private:
  std::vector<Shape> shapes_;
  std::size_t length_ = 0;
};

}  // namespace fot

#endif  // FOT_SECAGG_H_
