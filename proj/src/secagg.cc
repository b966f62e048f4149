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

#include "fot/secagg.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <utility>

#include "fot/error.h"
#include "fot/rng.h"

namespace fot {

FixedPointCodec::FixedPointCodec(int fraction_bits)
    : fraction_bits_(fraction_bits), scale_(std::ldexp(1.0, fraction_bits)) {
  if (fraction_bits < 0 || fraction_bits > 52) {
    throw Error(ErrorCode::kInvalidInput, "fraction bits must lie in [0, 52]");
  }
}

uint64_t FixedPointCodec::Encode(double value) const {
  const double scaled = value * scale_;
  // Leave headroom so that sums over many participants still decode.
  if (!std::isfinite(scaled) || std::abs(scaled) >= 0x1p62) {
    throw Error(ErrorCode::kInvalidInput,
                "value " + std::to_string(value) + " not representable in fixed point");
  }
  return static_cast<uint64_t>(static_cast<int64_t>(std::llround(scaled)));
}

double FixedPointCodec::Decode(uint64_t word) const {
  return static_cast<double>(static_cast<int64_t>(word)) / scale_;
}

std::vector<uint64_t> PairwiseMask(uint64_t master_seed, std::size_t lo, std::size_t hi,
                                   uint64_t round_id, std::size_t length) {
  std::mt19937_64 prg(DeriveSeed({master_seed, stream::kPairMask, lo, hi, round_id}));
  std::vector<uint64_t> mask(length);
  for (uint64_t& w : mask) w = prg();
  return mask;
}

MaskedPayload Mask(std::span<const double> payload, std::size_t self_id,
                   const RoundSpec& round, const FixedPointCodec& codec) {
  MaskedPayload out;
  out.client_id = self_id;
  out.round_id = round.round_id;
  out.peers = round.participants;
  out.masked.resize(payload.size());
  for (std::size_t i = 0; i < payload.size(); ++i) out.masked[i] = codec.Encode(payload[i]);
  for (std::size_t peer : round.participants) {
    if (peer == self_id) continue;
    const std::size_t lo = std::min(self_id, peer);
    const std::size_t hi = std::max(self_id, peer);
    const std::vector<uint64_t> m =
        PairwiseMask(round.master_seed, lo, hi, round.round_id, payload.size());
    // Unsigned arithmetic wraps modulo 2^64.
    if (self_id == lo) {
      for (std::size_t i = 0; i < m.size(); ++i) out.masked[i] += m[i];
    } else {
      for (std::size_t i = 0; i < m.size(); ++i) out.masked[i] -= m[i];
    }
  }
  return out;
}

std::vector<double> DecodeModularSum(std::span<const MaskedPayload> payloads,
                                     const FixedPointCodec& codec) {
  if (payloads.empty()) return {};
  const std::size_t n = payloads.front().masked.size();
  std::vector<uint64_t> sum(n, 0);
  for (const MaskedPayload& p : payloads) {
    if (p.masked.size() != n) {
      throw Error(ErrorCode::kProtocolError, "payload lengths differ");
    }
    for (std::size_t i = 0; i < n; ++i) sum[i] += p.masked[i];
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = codec.Decode(sum[i]);
  return out;
}

std::vector<double> Aggregate(std::span<const MaskedPayload> payloads,
                              const RoundSpec& round, const FixedPointCodec& codec) {
  const std::set<std::size_t> expected(round.participants.begin(),
                                       round.participants.end());
  if (expected.size() != round.participants.size()) {
    throw Error(ErrorCode::kProtocolError, "duplicate participant ids");
  }
  std::set<std::size_t> seen;
  for (const MaskedPayload& p : payloads) {
    if (p.round_id != round.round_id) {
      throw Error(ErrorCode::kProtocolError,
                  "payload from client " + std::to_string(p.client_id) +
                      " belongs to another round");
    }
    if (p.peers != round.participants) {
      throw Error(ErrorCode::kProtocolError,
                  "client " + std::to_string(p.client_id) + " used an inconsistent peer list");
    }
    if (!expected.contains(p.client_id) || !seen.insert(p.client_id).second) {
      throw Error(ErrorCode::kProtocolError,
                  "unexpected or duplicate payload from client " +
                      std::to_string(p.client_id));
    }
  }
  if (seen.size() != expected.size()) {
    throw Error(ErrorCode::kProtocolError,
                "missing payloads: got " + std::to_string(seen.size()) + " of " +
                    std::to_string(expected.size()));
  }
  return DecodeModularSum(payloads, codec);
}

PayloadLayout::PayloadLayout(std::vector<Shape> shapes) : shapes_(std::move(shapes)) {
  for (const Shape& s : shapes_) length_ += 1 + s.rows * s.cols;
}

std::vector<double> PayloadLayout::Pack(std::span<const Matrix> blocks) const {
  if (blocks.size() != shapes_.size()) {
    throw Error(ErrorCode::kInvalidInput, "block count does not match layout");
  }
  std::vector<double> flat;
  flat.reserve(length_);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].rows() != shapes_[b].rows || blocks[b].cols() != shapes_[b].cols) {
      throw Error(ErrorCode::kInvalidInput,
                  "block " + std::to_string(b) + " does not match layout shape");
    }
    flat.push_back(static_cast<double>(blocks[b].size()));
    flat.insert(flat.end(), blocks[b].values().begin(), blocks[b].values().end());
  }
  return flat;
}

std::vector<Matrix> PayloadLayout::Unpack(std::span<const double> flat,
                                          std::size_t contributors) const {
  if (flat.size() != length_) {
    throw Error(ErrorCode::kProtocolError, "payload length does not match layout");
  }
  std::vector<Matrix> blocks;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < shapes_.size(); ++b) {
    const std::size_t count = shapes_[b].rows * shapes_[b].cols;
    const double expected = static_cast<double>(contributors * count);
    if (std::abs(flat[pos] - expected) > 0.5) {
      throw Error(ErrorCode::kProtocolError,
                  "length word of block " + std::to_string(b) + " reads " +
                      std::to_string(flat[pos]) + ", expected " +
                      std::to_string(expected));
    }
    ++pos;
    std::vector<double> data(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                             flat.begin() + static_cast<std::ptrdiff_t>(pos + count));
    blocks.emplace_back(shapes_[b].rows, shapes_[b].cols, std::move(data));
    pos += count;
  }
  return blocks;
}

}  // namespace fot
