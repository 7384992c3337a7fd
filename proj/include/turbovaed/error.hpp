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

#pragma once

#include <stdexcept>
#include <string>

namespace turbovaed {

// Every error the engine raises derives from Error, so callers (the CLI in
// particular) can map failures to exit codes without catching std::exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define TURBOVAED_DEFINE_ERROR(Name, Kind)                    \
  class Name : public Error {                                 \
   public:                                                    \
    using Error::Error;                                       \
    const char* kind() const noexcept override { return Kind; } \
  };

TURBOVAED_DEFINE_ERROR(ShapeError, "shape")
TURBOVAED_DEFINE_ERROR(ConfigError, "config")
TURBOVAED_DEFINE_ERROR(DomainError, "domain")
TURBOVAED_DEFINE_ERROR(AllocationError, "allocation")
TURBOVAED_DEFINE_ERROR(FormatError, "format")
TURBOVAED_DEFINE_ERROR(CorruptionError, "corruption")
TURBOVAED_DEFINE_ERROR(ValidationError, "validation")
TURBOVAED_DEFINE_ERROR(LoadError, "load")
TURBOVAED_DEFINE_ERROR(NumericError, "numeric")
TURBOVAED_DEFINE_ERROR(IoError, "io")

#undef TURBOVAED_DEFINE_ERROR

}  // namespace turbovaed
