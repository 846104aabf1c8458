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


#ifndef PETRECON_PARALLEL_HPP
#define PETRECON_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace petrecon {

/// Worker count from PETRECON_THREADS, defaulting to 1.
std::size_t configured_threads();

/// Runs fn(i) for i in [0, n) on up to configured_threads() workers. Each
/// index runs exactly once; the first exception is rethrown after all
/// workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace petrecon

#endif  // PETRECON_PARALLEL_HPP
