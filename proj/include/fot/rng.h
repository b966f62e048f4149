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

#ifndef FOT_RNG_H_
#define FOT_RNG_H_

#include <cstdint>
#include <initializer_list>

namespace fot {

inline constexpr uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a tuple of identifiers into one 64-bit seed. Order matters.
inline constexpr uint64_t DeriveSeed(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x6a09e667f3bcc909ULL;
  for (uint64_t p : parts) h = SplitMix64(h ^ SplitMix64(p));
  return h;
}

// Stream tags so that seeds derived for different purposes never collide.
namespace stream {
inline constexpr uint64_t kInit = 0x11;
inline constexpr uint64_t kHead = 0x12;
inline constexpr uint64_t kTrain = 0x13;
inline constexpr uint64_t kSketch = 0x14;
inline constexpr uint64_t kDpNoise = 0x15;
inline constexpr uint64_t kPartition = 0x16;
inline constexpr uint64_t kParticipants = 0x17;
inline constexpr uint64_t kPairMask = 0x18;
inline constexpr uint64_t kData = 0x19;
}  // namespace stream

}  // namespace fot

#endif  // FOT_RNG_H_
