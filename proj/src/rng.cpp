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

#include "petrecon/rng.hpp"

namespace petrecon {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::result_type CounterRng::operator()() { return mix64(key_ ^ mix64(counter_++)); }

CounterRng CounterRng::split(std::uint64_t stream_id) const {
  return CounterRng(mix64(key_ + 0x632be59bd9b4e019ULL * (stream_id + 1)));
}

double CounterRng::uniform(double lo, double hi) {
  const double u = static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace petrecon
