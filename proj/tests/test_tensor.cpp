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

#include <gtest/gtest.h>

#include <cstring>
#include <limits>

#include "test_util.hpp"
#include "turbovaed/error.hpp"
#include "turbovaed/parallel.hpp"
#include "turbovaed/tensor.hpp"

namespace turbovaed {
namespace {

using testing::random_tensor;

TEST(Tensor, ZerosHaveExpectedSize) {
  const auto one = zeros<float>({1, 1, 1, 1, 1});
  ASSERT_EQ(one.numel(), 1);
  EXPECT_EQ(one[0], 0.0f);

  const auto empty = zeros<float>({0, 3, 1, 1, 1});
  EXPECT_EQ(empty.numel(), 0);
  EXPECT_TRUE(empty.empty());

  const auto full = zeros<float>({2, 3, 4, 5, 6});
  EXPECT_EQ(full.numel(), 720);
  for (const float v : full.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Tensor, OverflowingShapeIsAllocationError) {
  const std::int64_t big = std::int64_t{1} << 40;
  EXPECT_THROW(zeros<float>({big, big, 1, 1, 1}), AllocationError);
  EXPECT_THROW(zeros<float>({-1, 1, 1, 1, 1}), ShapeError);
}

TEST(Tensor, RowMajorIndexing) {
  const auto x = testing::iota<float>({2, 3, 4, 5, 6});
  EXPECT_EQ(x(1, 2, 3, 4, 5), 719.0f);
  EXPECT_EQ(x(0, 1, 0, 0, 0), 120.0f);
  EXPECT_EQ(x.offset(1, 0, 0, 0, 1), 361);
}

TEST(Tensor, ElementwiseIdentities) {
  const auto x = random_tensor({2, 3, 2, 3, 4}, 1);
  EXPECT_EQ(add(x, Tensor<float>::zeros_like(x)), x);
  EXPECT_EQ(scale(x, 1.0f), x);
  const auto d = sub(x, x);
  for (const float v : d.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Tensor, ShapeMismatchIsShapeError) {
  const auto a = zeros<float>({1, 2, 1, 1, 1});
  const auto b = zeros<float>({1, 3, 1, 1, 1});
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(sub(a, b), ShapeError);
  EXPECT_THROW(zip(a, b, [](float u, float v) { return u + v; }, "zip"), ShapeError);
}

TEST(Tensor, ReduceMeanAbs) {
  EXPECT_DOUBLE_EQ(reduce_mean_abs(Tensor<float>({2, 1, 3, 1, 2}, -2.0f)), 2.0);
  const Tensor<float> v({1, 1, 1, 1, 4}, std::vector<float>{1.0f, -1.0f, 0.0f, 0.0f});
  EXPECT_DOUBLE_EQ(reduce_mean_abs(v), 0.5);
  EXPECT_DOUBLE_EQ(reduce_mean_abs(zeros<float>({1, 2, 2, 2, 2})), 0.0);
  EXPECT_THROW(reduce_mean_abs(zeros<float>({0, 1, 1, 1, 1})), DomainError);
}

TEST(TensorProperty, FlattenReshapeRoundTripIsBitExact) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> ext(1, 5);
    const Shape5 s{ext(rng), ext(rng), ext(rng), ext(rng), ext(rng)};
    const auto x = random_tensor(s, seed);
    const auto y = Tensor<float>::from_flat({1, 1, 1, 1, x.numel()}, x.flatten()).reshaped(s);
    ASSERT_EQ(std::memcmp(x.raw(), y.raw(), sizeof(float) * static_cast<std::size_t>(x.numel())), 0);
  }
}

TEST(TensorProperty, ScaleDistributesOverAdd) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = random_tensor({1, 2, 3, 4, 5}, seed);
    const auto b = random_tensor({1, 2, 3, 4, 5}, seed + 1000);
    const float k = 0.37f + static_cast<float>(seed);
    const auto lhs = scale(add(a, b), k);
    const auto rhs = add(scale(a, k), scale(b, k));
    for (std::int64_t i = 0; i < lhs.numel(); ++i) {
      const float tol = 4.0f * std::numeric_limits<float>::epsilon() * (std::abs(lhs[i]) + k * (std::abs(a[i]) + std::abs(b[i])));
      ASSERT_NEAR(lhs[i], rhs[i], tol);
    }
  }
}

TEST(TensorProperty, MeanAbsIsPermutationInvariant) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto x = random_tensor({2, 3, 4, 5, 6}, seed);
    const double before = reduce_mean_abs(x);
    std::vector<float> v = x.flatten();
    std::mt19937_64 rng(seed);
    std::shuffle(v.begin(), v.end(), rng);
    const double after = reduce_mean_abs(Tensor<float>::from_flat(x.shape(), v));
    EXPECT_NEAR(before, after, 1e-12 * std::max(1.0, before));
  }
}

TEST(TensorProperty, ReductionsIgnoreThreadCount) {
  const auto x = random_tensor({3, 7, 5, 11, 13}, 7);
  double single = 0.0, many = 0.0;
  {
    parallel::ScopedThreads one(1);
    single = reduce_mean_abs(x);
  }
  {
    parallel::ScopedThreads four(4);
    many = reduce_mean_abs(x);
  }
  EXPECT_EQ(single, many);
}

TEST(Tensor, SliceAlongTime) {
  const auto x = testing::iota<float>({1, 2, 4, 1, 1});
  const auto s = slice(x, 2, 1, 3);
  ASSERT_EQ(s.shape(), (Shape5{1, 2, 2, 1, 1}));
  EXPECT_EQ(s(0, 0, 0, 0, 0), 1.0f);
  EXPECT_EQ(s(0, 1, 1, 0, 0), 6.0f);
  EXPECT_THROW(slice(x, 2, 3, 5), ShapeError);
}

}  // namespace
}  // namespace turbovaed
