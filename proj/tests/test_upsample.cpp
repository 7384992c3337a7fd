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

#include "test_util.hpp"
#include "turbovaed/error.hpp"
#include "turbovaed/reference/reference_ops.hpp"
#include "turbovaed/upsample.hpp"
#include "turbovaed/verify.hpp"

namespace turbovaed {
namespace {

using testing::iota;
using testing::random_tensor;
using testing::sorted_values;

TEST(PixelShuffle3d, UnitFactorIsIdentity) {
  const auto x = random_tensor<float>({2, 3, 2, 3, 4}, 1);
  EXPECT_EQ(pixel_shuffle_3d(x, 1, 1), x);
}

TEST(PixelShuffle3d, EightChannelIndexMap) {
  const auto y = pixel_shuffle_3d(iota<float>({1, 8, 1, 1, 1}), 2, 2);
  ASSERT_EQ(y.shape(), (Shape5{1, 1, 2, 2, 2}));
  for (std::int64_t dt = 0; dt < 2; ++dt)
    for (std::int64_t dh = 0; dh < 2; ++dh)
      for (std::int64_t dw = 0; dw < 2; ++dw) EXPECT_EQ(y(0, 0, dt, dh, dw), 4 * dt + 2 * dh + dw);
}

TEST(PixelShuffle3d, PreservesMultiset) {
  const auto x = random_tensor<float>({1, 16, 2, 3, 3}, 2);
  EXPECT_EQ(sorted_values(pixel_shuffle_3d(x, 2, 2)), sorted_values(x));
}

TEST(PixelShuffle3d, IndivisibleChannelsIsShapeError) {
  EXPECT_THROW(pixel_shuffle_3d(Tensor<float>({1, 6, 1, 1, 1}), 2, 2), ShapeError);
  EXPECT_THROW(channel_to_time(Tensor<float>({1, 3, 1, 1, 1}), 2), ShapeError);
  EXPECT_THROW(pixel_shuffle_2d_video(Tensor<float>({1, 6, 1, 1, 1}), 2), ShapeError);
  EXPECT_THROW(decoupled_upsample(Tensor<float>({1, 12, 1, 1, 1}), UpsampleFactors{2, 2}), ShapeError);
}

TEST(PixelShuffle3d, MatchesReferenceAndInverts) {
  const auto x = random_tensor<double>({2, 24, 2, 3, 2}, 3);
  const auto y = pixel_shuffle_3d(x, 3, 2);
  EXPECT_EQ(y, reference::pixel_shuffle_3d(x, 3, 2));
  EXPECT_EQ(pixel_unshuffle_3d(y, 3, 2), x);
}

TEST(ChannelToTime, UnitFactorIsIdentity) {
  const auto x = random_tensor<float>({1, 4, 2, 2, 2}, 4);
  EXPECT_EQ(channel_to_time(x, 1), x);
}

TEST(ChannelToTime, FrameJIsChannelBlockJ) {
  const auto x = iota<float>({1, 4, 1, 2, 2});
  const auto y = channel_to_time(x, 2);
  ASSERT_EQ(y.shape(), (Shape5{1, 2, 2, 2, 2}));
  for (std::int64_t c = 0; c < 2; ++c)
    for (std::int64_t j = 0; j < 2; ++j)
      for (std::int64_t h = 0; h < 2; ++h)
        for (std::int64_t w = 0; w < 2; ++w) EXPECT_EQ(y(0, c, j, h, w), x(0, j * 2 + c, 0, h, w));
}

TEST(ChannelToTime, RoundTrip) {
  const auto x = random_tensor<float>({2, 6, 3, 2, 2}, 5);
  EXPECT_EQ(time_to_channel(channel_to_time(x, 3), 3), x);
  EXPECT_EQ(channel_to_time(x, 3), reference::channel_to_time(x, 3));
}

TEST(PixelShuffle2d, UnitFactorIsIdentity) {
  const auto x = random_tensor<float>({1, 3, 2, 2, 2}, 6);
  EXPECT_EQ(pixel_shuffle_2d_video(x, 1), x);
}

TEST(PixelShuffle2d, ClosedFormIndex) {
  const auto x = iota<float>({1, 4, 3, 1, 1});
  const auto y = pixel_shuffle_2d_video(x, 2);
  ASSERT_EQ(y.shape(), (Shape5{1, 1, 3, 2, 2}));
  for (std::int64_t t = 0; t < 3; ++t) {
    EXPECT_EQ(y(0, 0, t, 1, 1), x(0, 3, t, 0, 0));
    EXPECT_EQ(y(0, 0, t, 1, 0), x(0, 1, t, 0, 0));
    EXPECT_EQ(y(0, 0, t, 0, 1), x(0, 2, t, 0, 0));
    EXPECT_EQ(y(0, 0, t, 0, 0), x(0, 0, t, 0, 0));
  }
  EXPECT_EQ(reference::shuffle_2d_source_channel(1, 2, 0, 1, 1), 3);
}

TEST(PixelShuffle2d, PreservesMultisetAndInverts) {
  const auto x = random_tensor<float>({1, 4, 2, 2, 3}, 7);
  const auto y = pixel_shuffle_2d_video(x, 2);
  EXPECT_EQ(sorted_values(y), sorted_values(x));
  EXPECT_EQ(pixel_unshuffle_2d_video(y, 2), x);
  EXPECT_EQ(y, reference::pixel_shuffle_2d_video(x, 2));
}

TEST(Decoupled, UnitFactorsIsIdentity) {
  const auto x = random_tensor<float>({1, 3, 2, 2, 2}, 8);
  EXPECT_EQ(decoupled_upsample(x, UpsampleFactors{1, 1}), x);
}

TEST(Decoupled, ComposesTheTwoSteps) {
  const auto x = random_tensor<float>({2, 24, 2, 3, 3}, 9);
  const UpsampleFactors f{2, 2};
  const auto y = decoupled_upsample(x, f);
  EXPECT_EQ(y, pixel_shuffle_2d_video(channel_to_time(x, 2), 2));
  EXPECT_EQ(y, decoupled_upsample_two_step(x, f));
  EXPECT_EQ(y.shape(), pixel_shuffle_3d(x, 2, 2).shape());
  EXPECT_EQ(decoupled_downsample(y, f), x);
}

TEST(Decoupled, PreservesMultiset) {
  const auto x = random_tensor<float>({1, 8, 2, 3, 3}, 10);
  EXPECT_EQ(sorted_values(decoupled_upsample(x, UpsampleFactors{2, 2})), sorted_values(x));
}

TEST(Decoupled, EqualsPermuted3dShuffleExhaustively) {
  for (std::int64_t c = 1; c <= 3; ++c)
    for (std::int64_t rt = 1; rt <= 2; ++rt)
      for (std::int64_t rs = 1; rs <= 2; ++rs) {
        const UpsampleFactors f{rt, rs};
        const auto perm = derive_decoupled_permutation(c, f);
        for (std::int64_t t = 1; t <= 4; ++t)
          for (std::int64_t h = 1; h <= 4; ++h)
            for (std::int64_t w = 1; w <= 4; ++w) {
              const auto x = iota<double>({1, c * f.channel_multiplier(), t, h, w});
              ASSERT_EQ(decoupled_upsample(x, f), pixel_shuffle_3d(permute_channels(x, perm), rt, rs))
                  << "C'=" << c << " r_t=" << rt << " r_s=" << rs << " T=" << t << " H=" << h << " W=" << w;
            }
      }
}

TEST(Decoupled, ShapeLawForLargerFactors) {
  const auto x = random_tensor<float>({1, 3 * 2 * 4 * 4, 2, 3, 3}, 11);
  const UpsampleFactors f{2, 4};
  const Shape5 want{1, 3, 4, 12, 12};
  EXPECT_EQ(decoupled_upsample(x, f).shape(), want);
  EXPECT_EQ(pixel_shuffle_3d(x, 2, 4).shape(), want);
  EXPECT_EQ(upsampled_shape(x.shape(), f, true), want);
}

TEST(Interpolate, NearestReplicatesSingleElement) {
  const auto y = interpolate_3d(Tensor<float>({1, 1, 1, 1, 1}, 5.0f), UpsampleFactors{2, 2}, InterpolationMode::nearest);
  ASSERT_EQ(y.numel(), 8);
  for (const float v : y.data()) EXPECT_EQ(v, 5.0f);
}

TEST(Interpolate, TrilinearKeepsConstants) {
  const auto y = interpolate_3d(Tensor<float>({1, 2, 3, 4, 5}, 0.75f), UpsampleFactors{2, 3},
                                InterpolationMode::trilinear);
  EXPECT_EQ(y.shape(), (Shape5{1, 2, 6, 12, 15}));
  for (const float v : y.data()) EXPECT_NEAR(v, 0.75f, 1e-6f);
}

TEST(Interpolate, NearestThenStrideSubsampleIsIdentity) {
  const auto x = random_tensor<float>({1, 2, 3, 4, 5}, 12);
  const auto y = interpolate_3d(x, UpsampleFactors{2, 2}, InterpolationMode::nearest);
  Tensor<float> back(x.shape());
  for (std::int64_t c = 0; c < 2; ++c)
    for (std::int64_t t = 0; t < 3; ++t)
      for (std::int64_t h = 0; h < 4; ++h)
        for (std::int64_t w = 0; w < 5; ++w) back(0, c, t, h, w) = y(0, c, 2 * t, 2 * h, 2 * w);
  EXPECT_EQ(back, x);
}

TEST(Interpolate, TrilinearAlignCornersFalse) {
  const Tensor<double> x({1, 1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
  const auto y = interpolate_3d(x, UpsampleFactors{1, 2}, InterpolationMode::trilinear);
  ASSERT_EQ(y.shape(), (Shape5{1, 1, 1, 2, 4}));
  const double want[] = {0.0, 0.25, 0.75, 1.0};
  for (std::int64_t w = 0; w < 4; ++w) EXPECT_DOUBLE_EQ(y(0, 0, 0, 0, w), want[w]);
}

TEST(Interpolate, BadFactorsIsConfigError) {
  EXPECT_THROW(interpolate_3d(Tensor<float>({1, 1, 1, 1, 1}), UpsampleFactors{0, 2}, InterpolationMode::nearest),
               ConfigError);
}

// The closed-form 2D index with the h and w offsets swapped: a plausible
// transcription slip that the verifier has to catch.
Tensor<double> transposed_shuffle_2d(const Tensor<double>& x, std::int64_t r) {
  const std::int64_t c_out = x.c() / (r * r);
  Tensor<double> y({x.n(), c_out, x.t(), x.h() * r, x.w() * r});
  for (std::int64_t n = 0; n < x.n(); ++n)
    for (std::int64_t c = 0; c < c_out; ++c)
      for (std::int64_t t = 0; t < x.t(); ++t)
        for (std::int64_t h = 0; h < y.h(); ++h)
          for (std::int64_t w = 0; w < y.w(); ++w)
            y(n, c, t, h, w) = x(n, c_out * r * (h % r) + c_out * (w % r) + c, t, h / r, w / r);
  return y;
}

TEST(VerifyUpsample, LibraryPasses) {
  const auto report = verify_upsample();
  EXPECT_TRUE(report.passed()) << report.to_text();
  EXPECT_GE(report.property("decoupled_equals_permuted_3d_shuffle").cases, 768);
  EXPECT_EQ(report.property("shuffle_2d_index_formula").cases, 1000);
}

TEST(VerifyUpsample, CatchesTransposedFormulaWithMinimalCounterexample) {
  UpsampleImpls bad;
  bad.shuffle_2d = transposed_shuffle_2d;
  bad.decoupled = [](const Tensor<double>& x, const UpsampleFactors& f) {
    return transposed_shuffle_2d(channel_to_time(x, f.r_t), f.r_s);
  };
  const auto report = verify_upsample(bad);
  EXPECT_FALSE(report.passed());
  const auto& equiv = report.property("decoupled_equals_permuted_3d_shuffle");
  EXPECT_FALSE(equiv.passed);
  EXPECT_EQ(equiv.counterexample.rfind("C'=1 T=1 H=1 W=1 r_t=1 r_s=2", 0), 0u) << equiv.counterexample;
  EXPECT_FALSE(report.property("shuffle_2d_index_formula").passed);
  EXPECT_TRUE(report.property("pixel_shuffle_3d_matches_reference").passed);
  // The swapped map is still a bijection, so the round trip through the
  // library inverse is what fails.
  EXPECT_FALSE(report.property("decoupled_downsample_inverts_upsample").passed);
}

TEST(DecoupledPermutation, IsABijection) {
  for (std::int64_t c = 1; c <= 4; ++c) {
    const UpsampleFactors f{2, 3};
    auto perm = derive_decoupled_permutation(c, f);
    std::sort(perm.begin(), perm.end());
    for (std::int64_t i = 0; i < c * f.channel_multiplier(); ++i) EXPECT_EQ(perm[static_cast<std::size_t>(i)], i);
  }
}

}  // namespace
}  // namespace turbovaed
