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

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "test_util.hpp"
#include "turbovaed/cli.hpp"
#include "turbovaed/decoder.hpp"
#include "turbovaed/weights_io.hpp"

namespace turbovaed {
namespace {

using nlohmann::json;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

Run gen(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_gen(args, out, err);
  return {code, out.str(), err.str()};
}

const std::vector<std::string> kSmall{"--factors", "4,8,8", "--width-divisor", "8", "--norm-groups", "4"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.begin() + 1, kSmall.begin(), kSmall.end());
  return args;
}

class CliFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    ASSERT_EQ(gen(with_small({"weights", "--seed", "1", "--out", weights})).code, kExitOk);
    ASSERT_EQ(gen(with_small({"latent", "--frames", "9", "--height", "16", "--width", "16", "--seed", "2", "--out",
                              latent}))
                  .code,
              kExitOk);
  }

  testing::TempDir dir{"cli"};
  std::string weights = dir.file("w.tvwd");
  std::string latent = dir.file("l.tvt");
};

TEST_F(CliFiles, DecodeHappyPathAndDeterminism) {
  const auto a = dir.file("a.tvt"), b = dir.file("b.tvt");
  const auto r = cli(with_small({"decode", "--weights", weights, "--latent", latent, "--out", a}));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  ASSERT_EQ(cli(with_small({"decode", "--weights", weights, "--latent", latent, "--out", b})).code, kExitOk);
  const auto va = load_tensor(a);
  EXPECT_EQ(va.shape(), (Shape5{1, 3, 9, 16, 16}));
  EXPECT_EQ(read_file(a), read_file(b));
}

TEST_F(CliFiles, DecodeRawRgbAndSidecar) {
  const auto out = dir.file("v.tvt"), rgb = dir.file("v.rgb");
  const auto r = cli(with_small({"decode", "--weights", weights, "--latent", latent, "--out", out, "--raw-rgb", rgb}));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto video = load_tensor(out);
  const auto bytes = read_file(rgb);
  ASSERT_EQ(bytes.size(), static_cast<std::size_t>(9 * 16 * 16 * 3));
  // First pixel of frame 0, then the green channel of pixel (0, 1).
  auto expect_byte = [&](std::size_t at, float v) {
    EXPECT_EQ(static_cast<unsigned char>(bytes[at]), static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255)));
  };
  expect_byte(0, video(0, 0, 0, 0, 0));
  expect_byte(4, video(0, 1, 0, 0, 1));
  expect_byte(static_cast<std::size_t>(16 * 16 * 3) + 2, video(0, 2, 1, 0, 0));
  const auto sidecar = json::parse(read_file(rgb + ".json"));
  EXPECT_EQ(sidecar.at("frames"), 9);
  EXPECT_EQ(sidecar.at("height"), 16);
  EXPECT_EQ(sidecar.at("width"), 16);
}

TEST_F(CliFiles, WrongLatentChannelsIsValidationExit) {
  const auto bad = dir.file("bad.tvt");
  save_tensor(Tensor5({1, 7, 3, 2, 2}), bad);
  const auto r = cli(with_small({"decode", "--weights", weights, "--latent", bad, "--out", dir.file("x.tvt")}));
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("channel extent is 7"), std::string::npos) << r.err;
}

TEST_F(CliFiles, MismatchedWeightsPrintReport) {
  const auto r = cli({"decode", "--factors", "4,8,8", "--width-divisor", "4", "--norm-groups", "4", "--weights",
                      weights, "--latent", latent, "--out", dir.file("x.tvt")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("shape"), std::string::npos) << r.err;
}

TEST_F(CliFiles, MetricsSelfComparison) {
  const auto out = dir.file("v.tvt");
  ASSERT_EQ(cli(with_small({"decode", "--weights", weights, "--latent", latent, "--out", out})).code, kExitOk);
  const auto r = cli({"metrics", "--ref", out, "--test", out});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("PSNR identical"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("SSIM 1.000000"), std::string::npos) << r.out;
  const auto j = json::parse(cli({"metrics", "--ref", out, "--test", out, "--json"}).out);
  EXPECT_TRUE(j.at("psnr_db").is_null());
  EXPECT_EQ(j.at("ssim"), 1.0);
}

TEST_F(CliFiles, InspectListsEntries) {
  const auto j = json::parse(cli({"inspect", weights, "--json"}).out);
  EXPECT_EQ(j.at("entries").size(), load(weights).size());
  EXPECT_EQ(j.at("version"), 1);
  const auto bad = dir.file("junk.bin");
  std::ofstream(bad) << "not a weights file";
  EXPECT_EQ(cli({"inspect", bad}).code, kExitValidation);
}

TEST(Cli, ParamsTotalMatchesCounter) {
  const auto j = json::parse(cli({"params", "--factors", "8,32,32", "--json"}).out);
  EXPECT_EQ(j.at("total").get<std::int64_t>(), count_params(default_config(8, 32, 32)).total);
  std::int64_t sum = 0;
  for (const auto& b : j.at("blocks")) sum += b.at("params").get<std::int64_t>();
  EXPECT_EQ(sum, j.at("total").get<std::int64_t>());
}

TEST(Cli, SweepMatchesLibrary) {
  const auto j = json::parse(cli({"sweep", "--factors", "8,32,32", "--upto", "up_1", "--json"}).out);
  const auto lib = redundancy_sweep(default_config(8, 32, 32), "up_1");
  ASSERT_EQ(j.at("variants").size(), lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) EXPECT_EQ(j.at("variants")[i].at("params"), lib[i].params.total);
  EXPECT_EQ(cli({"sweep", "--factors", "8,32,32", "--upto", "up_9"}).code, kExitValidation);
}

TEST(Cli, ConfigFileWithOverrides) {
  testing::TempDir dir("clicfg");
  const auto path = dir.file("c.json");
  std::ofstream(path) << config_to_json(default_config(4, 8, 8));
  const auto base = json::parse(cli({"params", "--config", path, "--json"}).out);
  const auto over = json::parse(cli({"params", "--config", path, "--set", "blocks.up_1.conv_kind=dwsep", "--json"}).out);
  EXPECT_LT(over.at("total").get<std::int64_t>(), base.at("total").get<std::int64_t>());
  EXPECT_EQ(cli({"params", "--config", path, "--factors", "4,8,8"}).code, kExitValidation);
  EXPECT_EQ(cli({"params"}).code, kExitValidation);
}

TEST(Cli, VerifyPassesAndReportsJson) {
  const auto r = cli({"verify", "--suite", "dwsep"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  const auto j = json::parse(cli({"verify", "--suite", "upsample", "--json"}).out);
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_EQ(cli({"verify", "--suite", "nope"}).code, kExitValidation);
}

TEST(Cli, BenchSmall) {
  auto r = cli(with_small({"bench", "--frames", "5", "--height", "16", "--width", "16", "--warmup", "1", "--repeats",
                           "3", "--json"}));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j.at("kind"), "decoder_profile");
  EXPECT_GT(j.at("fps").get<double>(), 0.0);
  r = cli({"bench-ops", "--shape", "1,64,2,4,4", "--factors", "2,2", "--warmup", "1", "--repeats", "3", "--json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(json::parse(r.out).at("rows").size(), 4u);
  EXPECT_EQ(cli(with_small({"bench", "--repeats", "2"})).code, kExitValidation);
}

TEST(Cli, DistillToySmallRun) {
  testing::TempDir dir("clidistill");
  const auto csv = dir.file("log.csv");
  const auto r = cli({"distill-toy", "--steps", "2", "--eval-every", "1", "--teacher-steps", "1", "--train-videos",
                      "2", "--out", csv, "--json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j.at("rows").size(), 2u);
  EXPECT_EQ(read_file(csv).rfind("step,L1,L_distill,L_kl,total,eval_psnr\n", 0), 0u);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitValidation);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitValidation);
  EXPECT_EQ(cli({"params", "--factors", "4,8,8", "--bogus-flag"}).code, kExitValidation);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({"decode", "--factors", "4,8,8"}).code, kExitValidation);
}

TEST(Cli, RuntimeErrorsExitTwo) {
  testing::TempDir dir("clirt");
  const auto l = dir.file("l.tvt");
  save_tensor(Tensor5({1, 16, 2, 1, 1}), l);
  save(Decoder<float>::initialized(with_scaled_widths(default_config(4, 8, 8), 8, 4), 1).to_store(), dir.file("w.tvwd"));
  // Output directory does not exist: an I/O failure, not a validation one.
  const auto r = cli(with_small({"decode", "--weights", dir.file("w.tvwd"), "--latent", l, "--out",
                                 dir.file("missing/dir/v.tvt")}));
  EXPECT_EQ(r.code, kExitRuntime) << r.err;
}

}  // namespace
}  // namespace turbovaed
