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

#include "turbovaed/parallel.hpp"

#include <omp.h>

namespace turbovaed::parallel {

int max_threads() { return omp_get_max_threads(); }

void set_num_threads(int n) { omp_set_num_threads(n < 1 ? 1 : n); }

ScopedThreads::ScopedThreads(int n) : previous_(omp_get_max_threads()) { set_num_threads(n); }

ScopedThreads::~ScopedThreads() { omp_set_num_threads(previous_); }

}  // namespace turbovaed::parallel
