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

#include <json.hpp>

#include "test_util.hpp"
#include "turbovaed/decoder.hpp"
#include "turbovaed/error.hpp"
#include "turbovaed/profiler.hpp"

namespace turbovaed {
namespace {

DecoderConfig small_config() { return with_scaled_widths(default_config(4, 8, 8), 16, 4); }

TEST(Summarize, Statistics) {
  const auto s = summarize_samples({5, 1, 4, 2, 3});
  EXPECT_DOUBLE_EQ(s.mean_ns, 3.0);
  EXPECT_DOUBLE_EQ(s.median_ns, 3.0);
  EXPECT_DOUBLE_EQ(s.min_ns, 1.0);
  EXPECT_DOUBLE_EQ(s.max_ns, 5.0);
  EXPECT_DOUBLE_EQ(s.p95_ns, 5.0);
  std::vector<double> hundred(100);
  for (int i = 0; i < 100; ++i) hundred[static_cast<std::size_t>(i)] = i + 1;
  EXPECT_DOUBLE_EQ(summarize_samples(hundred).p95_ns, 95.0);
  EXPECT_DOUBLE_EQ(summarize_samples({1, 2, 3, 4}).median_ns, 2.5);
  EXPECT_THROW(summarize_samples({}), DomainError);
}

TEST(ProfileOptions, Validation) {
  ProfileOptions opt;
  EXPECT_EQ(opt.warmup, 5);
  EXPECT_EQ(opt.repeats, 20);
  EXPECT_EQ(opt.threads, 1);
  opt.warmup = 0;
  EXPECT_THROW(opt.validate(), ConfigError);
  opt = {};
  opt.repeats = 2;
  EXPECT_THROW(opt.validate(), ConfigError);
  opt = {};
  opt.threads = 0;
  EXPECT_THROW(opt.validate(), ConfigError);
}

TEST(ProfileDecoder, OneEntryPerBlockAndSharesSumTo100) {
  const auto cfg = small_config();
  const auto dec = Decoder<float>::initialized(cfg, 1);
  ProfileOptions opt;
  opt.warmup = 1;
  opt.repeats = 3;
  const Shape5 latent{1, cfg.latent_channels, 3, 4, 4};
  const auto r = profile_decoder(dec, latent, opt);
  ASSERT_EQ(r.blocks.size(), cfg.block_names().size());
  double share = 0.0;
  for (std::size_t i = 0; i < r.blocks.size(); ++i) {
    EXPECT_EQ(r.blocks[i].name, cfg.block_names()[i]);
    share += r.blocks[i].share_percent;
  }
  EXPECT_NEAR(share, 100.0, 1.0);
  EXPECT_GT(r.fps, 0.0);
  EXPECT_EQ(r.output_shape, video_shape_for_latent(cfg, latent));
  EXPECT_NEAR(r.fps, r.output_shape[2] / (r.end_to_end.mean_ns * 1e-9), 1e-6 * r.fps);
  EXPECT_EQ(r.repeats, 3);
  EXPECT_EQ(r.warmup, 1);
  EXPECT_EQ(r.threads, 1);
}

TEST(ProfileDecoder, InstrumentationAccountsForEndToEnd) {
  const auto cfg = small_config();
  const auto dec = Decoder<float>::initialized(cfg, 2);
  ProfileOptions opt;
  opt.warmup = 2;
  opt.repeats = 10;
  const auto r = profile_decoder(dec, {1, cfg.latent_channels, 3, 8, 8}, opt);
  EXPECT_LT(r.instrumentation_gap(), 0.10) << r.to_text();
}

TEST(ProfileDecoder, LargerLatentTakesLonger) {
  const auto cfg = small_config();
  const auto dec = Decoder<float>::initialized(cfg, 3);
  ProfileOptions opt;
  opt.warmup = 1;
  opt.repeats = 5;
  const auto small = profile_decoder(dec, {1, cfg.latent_channels, 2, 4, 4}, opt);
  const auto big = profile_decoder(dec, {1, cfg.latent_channels, 2, 8, 8}, opt);
  EXPECT_GT(big.end_to_end.median_ns, small.end_to_end.median_ns);
}

TEST(ProfileDecoder, StoreOverloadMatchesAndRejectsBadWeights) {
  const auto cfg = small_config();
  const auto store = Decoder<float>::initialized(cfg, 4).to_store();
  ProfileOptions opt;
  opt.warmup = 1;
  opt.repeats = 3;
  EXPECT_EQ(profile_decoder(cfg, store, {1, cfg.latent_channels, 2, 2, 2}, opt).blocks.size(),
            cfg.block_names().size());
  auto broken = store;
  broken.erase(store.names().front());
  EXPECT_THROW(profile_decoder(cfg, broken, {1, cfg.latent_channels, 2, 2, 2}, opt), LoadError);
  opt.repeats = 1;
  EXPECT_THROW(profile_decoder(cfg, store, {1, cfg.latent_channels, 2, 2, 2}, opt), ConfigError);
}

TEST(ProfileDecoder, ProfilingDoesNotChangeOutputs) {
  const auto cfg = small_config();
  const auto dec = Decoder<float>::initialized(cfg, 5);
  const auto latent = testing::random_tensor<float>({1, cfg.latent_channels, 2, 2, 2}, 6);
  const auto before = dec.forward(latent).video;
  ProfileOptions opt;
  opt.warmup = 1;
  opt.repeats = 3;
  profile_decoder(dec, latent.shape(), opt);
  EXPECT_EQ(dec.forward(latent).video, before);
}

TEST(ProfileDecoder, ReportsAreSchemaStable) {
  const auto cfg = small_config();
  ProfileOptions opt;
  opt.warmup = 1;
  opt.repeats = 3;
  const auto r = profile_decoder(Decoder<float>::initialized(cfg, 7), {1, cfg.latent_channels, 2, 2, 2}, opt);
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j.at("kind"), "decoder_profile");
  EXPECT_EQ(j.at("environment").at("repeats"), 3);
  EXPECT_EQ(j.at("environment").at("threads"), 1);
  EXPECT_EQ(j.at("blocks").size(), r.blocks.size());
  for (const auto& b : j.at("blocks")) {
    for (const char* key : {"name", "mean_ns", "median_ns", "p95_ns", "share_percent"}) EXPECT_TRUE(b.contains(key)) << key;
  }
  EXPECT_TRUE(j.contains("fps"));
  const auto csv = r.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(r.blocks.size()) + 2);
  EXPECT_NE(r.to_text().find("FPS"), std::string::npos);
}

TEST(BenchUpsamplers, RowsShareOutputShape) {
  ProfileOptions opt;
  opt.warmup = 1;
  opt.repeats = 3;
  const Shape5 shape{1, 16, 2, 4, 4};
  const UpsampleFactors f{2, 2};
  const auto b = bench_upsamplers({shape}, {f}, opt);
  ASSERT_EQ(b.rows.size(), 4u);
  for (const auto& row : b.rows) EXPECT_EQ(row.output_shape, (Shape5{1, 2, 4, 8, 8})) << row.op;
  EXPECT_EQ(b.row("decoupled_upsample", shape, f).op, "decoupled_upsample");
  EXPECT_THROW(b.row("bogus", shape, f), ConfigError);
  const auto j = nlohmann::json::parse(b.to_json());
  EXPECT_EQ(j.at("kind"), "upsampler_bench");
  EXPECT_EQ(j.at("rows").size(), 4u);
}

TEST(BenchUpsamplers, RepeatedMeasurementIsStable) {
  ProfileOptions opt;
  opt.warmup = 3;
  opt.repeats = 30;
  const Shape5 shape{1, 128 * 8, 3, 8, 8};
  const UpsampleFactors f{2, 2};
  const auto a = bench_upsamplers({shape}, {f}, opt).row("pixel_shuffle_3d", shape, f).stats.median_ns;
  const auto b = bench_upsamplers({shape}, {f}, opt).row("pixel_shuffle_3d", shape, f).stats.median_ns;
  EXPECT_LT(std::abs(a - b), 0.25 * std::max(a, b)) << a << " vs " << b;
}

TEST(BenchUpsamplers, UnitFactorIsCheapest) {
  ProfileOptions opt;
  opt.warmup = 3;
  opt.repeats = 20;
  const Shape5 shape{1, 64, 3, 16, 16};
  const auto b = bench_upsamplers({shape}, {{1, 1}, {2, 2}}, opt);
  const double unit = b.row("pixel_shuffle_3d", shape, {1, 1}).stats.median_ns;
  for (const auto& row : b.rows) {
    if (row.factors == UpsampleFactors{2, 2}) {
      EXPECT_LT(unit, row.stats.median_ns) << row.op;
    }
  }
}

TEST(BenchUpsamplers, DecoupledWithinBudgetOfReference) {
  ProfileOptions opt;
  opt.warmup = 5;
  opt.repeats = 30;
  const Shape5 shape{1, 128 * 8, 3, 8, 8};
  const UpsampleFactors f{2, 2};
  const auto b = bench_upsamplers({shape}, {f}, opt);
  const double dec = b.row("decoupled_upsample", shape, f).stats.median_ns;
  const double ref = b.row("pixel_shuffle_3d", shape, f).stats.median_ns;
  EXPECT_LE(dec, 1.2 * ref) << b.to_text();
}

}  // namespace
}  // namespace turbovaed
