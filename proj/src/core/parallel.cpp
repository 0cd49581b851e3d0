// Copyright 2026 The rm3d Authors
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

#include "rm3d/core/parallel.hpp"

#include <cstdlib>

#include "rm3d/core/error.hpp"
#include "rm3d/core/text.hpp"

namespace rm3d {

std::size_t default_threads() {
  if (const char* env = std::getenv("RM3D_THREADS"); env != nullptr && *env != '\0') {
    long long n = 0;
    try {
      n = parse_int(env);
    } catch (const ParseError&) {
      throw ValidationError("RM3D_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    if (n < 1) throw ValidationError("RM3D_THREADS must be a positive integer, got '" + std::string(env) + "'");
    return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace rm3d
