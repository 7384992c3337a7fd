// Copyright 2026 The turbovaed Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "turbovaed/tensor.hpp"

#include <atomic>
#include <sstream>

namespace turbovaed {

std::string to_string(const Shape5& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::int64_t checked_numel(const Shape5& shape) {
  // Keep the byte count of a double buffer addressable.
  constexpr std::int64_t kLimit = std::numeric_limits<std::int64_t>::max() / 16;
  std::int64_t n = 1;
  for (const auto e : shape) {
    if (e < 0) throw ShapeError("negative extent in " + to_string(shape));
    if (e == 0) return 0;
  }
  for (const auto e : shape) {
    if (n > kLimit / e) throw AllocationError("element count of " + to_string(shape) + " overflows");
    n *= e;
  }
  return n;
}

namespace debug {
namespace {
#ifdef NDEBUG
std::atomic<bool> g_finite_checks{false};
#else
std::atomic<bool> g_finite_checks{true};
#endif
}  // namespace

bool finite_checks_enabled() { return g_finite_checks.load(std::memory_order_relaxed); }
void set_finite_checks(bool enabled) { g_finite_checks.store(enabled, std::memory_order_relaxed); }
}  // namespace debug

}  // namespace turbovaed
