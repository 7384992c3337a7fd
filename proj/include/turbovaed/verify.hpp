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

// Oracle suites: exhaustive upsampler equivalence, index-formula probes,
// depthwise separable factorisation and finite-difference gradient checks.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "turbovaed/tensor.hpp"
#include "turbovaed/upsample.hpp"

namespace turbovaed {

struct PropertyResult {
  std::string suite;
  std::string property;
  bool passed = true;
  std::int64_t cases = 0;
  std::int64_t failures = 0;
  double worst_error = 0.0;  // largest relative error seen, 0 for exact checks
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string counterexample;  // first (smallest) failing case
};

struct VerifyReport {
  std::vector<PropertyResult> properties;

  bool passed() const;
  const PropertyResult& property(const std::string& name) const;  // throws ConfigError if absent
  void append(const VerifyReport& other);
  std::string to_text() const;
  std::string to_json() const;
};

// Implementations under test. Faulty variants can be swapped in.
struct UpsampleImpls {
  std::function<Tensor<double>(const Tensor<double>&, const UpsampleFactors&)> decoupled;
  std::function<Tensor<double>(const Tensor<double>&, std::int64_t)> shuffle_2d;

  static UpsampleImpls library();
};

// Channel permutation perm with
//   decoupled(x) == pixel_shuffle_3d(permute_channels(x, perm)),
// derived by tracing channel indices through the serial reference ops.
std::vector<std::int64_t> derive_decoupled_permutation(std::int64_t out_channels, const UpsampleFactors& f);

struct UpsampleSuiteOptions {
  std::int64_t max_channels = 3;
  std::int64_t max_extent = 4;  // T, H, W each in 1..max_extent
  std::int64_t max_factor = 2;  // r_t, r_s each in 1..max_factor
  std::int64_t index_probes = 1000;
  std::uint64_t seed = 0;
};

VerifyReport verify_upsample(const UpsampleImpls& impls = UpsampleImpls::library(),
                             const UpsampleSuiteOptions& opt = {});

VerifyReport verify_dwsep(std::int64_t instances = 200, std::uint64_t seed = 0, double tolerance = 1e-5);

VerifyReport verify_grad(std::int64_t instances = 100, std::uint64_t seed = 0, double tolerance = 1e-4);

enum class VerifySuite { upsample, dwsep, grad, all };
VerifySuite parse_verify_suite(const std::string& s);
VerifyReport run_verify(VerifySuite suite, std::uint64_t seed = 0);

}  // namespace turbovaed
