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

// Command-line front end. The executables in tools/ forward argv here.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace turbovaed {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;  // bad flags, configs, shapes or files
inline constexpr int kExitRuntime = 2;     // failures while running, failed verification

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Fixture generator: random weights, latents and synthetic videos.
int run_gen(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace turbovaed
