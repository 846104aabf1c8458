// Copyright 2026 The petrecon Authors. All Rights Reserved.
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

#ifndef PETRECON_RNG_HPP
#define PETRECON_RNG_HPP

#include <cstdint>
#include <limits>

namespace petrecon {

/// Counter-based generator: output n is a SplitMix64 finalization of
/// (key, n). Streams split deterministically by id, so sample generation
/// is reproducible regardless of order or threading. Satisfies
/// UniformRandomBitGenerator for use with <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Independent child stream; the parent's position is unaffected.
  CounterRng split(std::uint64_t stream_id) const;

  double uniform(double lo, double hi);
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace petrecon

#endif  // PETRECON_RNG_HPP
