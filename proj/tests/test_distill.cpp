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

#include <cmath>

#include "test_util.hpp"
#include "turbovaed/distill.hpp"
#include "turbovaed/error.hpp"
#include "turbovaed/parallel.hpp"

namespace turbovaed {
namespace {

using testing::random_tensor;

ToySetup tiny_setup() {
  auto s = default_toy_setup();
  s.video = {5, 16, 16, 2};
  s.train_videos = 4;
  s.eval_videos = 1;
  s.teacher_steps = 4;
  return s;
}

struct Tiny {
  ToySetup setup = tiny_setup();
  ToyTeacher teacher = make_toy_teacher(setup, 1);
  ToyDataset data = make_toy_dataset(setup, teacher, 1);
};

const Tiny& tiny() {
  static const Tiny t;
  return t;
}

Tensor<double> identity_weight(std::int64_t c) {
  Tensor<double> w({c, c, 1, 1, 1});
  for (std::int64_t i = 0; i < c; ++i) w(i, i, 0, 0, 0) = 1.0;
  return w;
}

TEST(DistillLoss, PerfectAlignmentIsZero) {
  const auto f = random_tensor<double>({1, 4, 2, 3, 3}, 1);
  std::map<std::string, ProjectionHead<double>> heads{{"mid", ProjectionHead<double>::pass_through()}};
  const auto loss = distill_loss<double>({{"mid", f}}, {{"mid", f}}, heads, {"mid"});
  EXPECT_EQ(loss.value, 0.0);
}

TEST(DistillLoss, IdentityPointwiseHeadIsZero) {
  // Two pointwise layers with identity weights: SiLU sits between them, so
  // feed a feature map whose teacher copy went through the same head.
  const auto f = random_tensor<double>({1, 3, 2, 2, 2}, 2);
  ProjectionHead<double> head;
  head.w1 = identity_weight(3);
  head.b1.assign(3, 0.0);
  head.w2 = identity_weight(3);
  head.b2.assign(3, 0.0);
  const std::map<std::string, ProjectionHead<double>> heads{{"mid", head}};
  const auto loss = distill_loss<double>({{"mid", f}}, {{"mid", head.forward(f)}}, heads, {"mid"});
  EXPECT_EQ(loss.value, 0.0);
}

TEST(DistillLoss, ConstantOffsetIsOne) {
  const Tensor<double> s({1, 2, 3, 2, 2}, 0.0);
  const Tensor<double> t({1, 2, 3, 2, 2}, 1.0);
  std::map<std::string, ProjectionHead<double>> heads{{"up_0", ProjectionHead<double>::pass_through()}};
  const auto loss = distill_loss<double>({{"up_0", s}}, {{"up_0", t}}, heads, {"up_0"});
  EXPECT_DOUBLE_EQ(loss.value, 1.0);
  for (const double g : loss.feature_grads.at("up_0").data()) EXPECT_DOUBLE_EQ(g, -1.0 / 24.0);
}

TEST(DistillLoss, SumsOverBlocks) {
  std::map<std::string, Tensor<double>> s, t;
  std::map<std::string, ProjectionHead<double>> heads;
  for (const std::string b : {"mid", "up_0", "up_1"}) {
    s[b] = Tensor<double>({1, 2, 1, 2, 2}, 0.0);
    t[b] = Tensor<double>({1, 2, 1, 2, 2}, 0.5);
    heads[b] = ProjectionHead<double>::pass_through();
  }
  const auto loss = distill_loss(s, t, heads, {"mid", "up_0", "up_1"});
  EXPECT_DOUBLE_EQ(loss.value, 1.5);
  EXPECT_EQ(loss.per_block.size(), 3u);
}

TEST(DistillLoss, Errors) {
  const auto f = random_tensor<double>({1, 4, 2, 3, 3}, 3);
  std::map<std::string, ProjectionHead<double>> heads{{"mid", ProjectionHead<double>::pass_through()}};
  EXPECT_THROW(distill_loss<double>({{"mid", f}}, {{"mid", f}}, heads, {"up_0"}), ConfigError);
  const auto wide = random_tensor<double>({1, 5, 2, 3, 3}, 4);
  EXPECT_THROW(distill_loss<double>({{"mid", f}}, {{"mid", wide}}, heads, {"mid"}), ShapeError);
}

TEST(DistillLoss, NonNegativeAndZeroOnlyWhenEqual) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_tensor<double>({1, 3, 2, 2, 2}, rng());
    auto t = s;
    std::map<std::string, ProjectionHead<double>> heads{{"mid", ProjectionHead<double>::pass_through()}};
    EXPECT_EQ(distill_loss<double>({{"mid", s}}, {{"mid", t}}, heads, {"mid"}).value, 0.0);
    t[static_cast<std::int64_t>(rng() % 24)] += 1e-3;
    EXPECT_GT(distill_loss<double>({{"mid", s}}, {{"mid", t}}, heads, {"mid"}).value, 0.0);
    const auto head = ProjectionHead<double>::random(3, 4, 3, rng());
    heads["mid"] = head;
    EXPECT_GE(distill_loss<double>({{"mid", s}}, {{"mid", t}}, heads, {"mid"}).value, 0.0);
  }
}

TEST(ProjectionHead, KeepsExtentsChangesChannels) {
  const auto head = ProjectionHead<float>::random(4, 8, 8, 6);
  const auto y = head.forward(random_tensor<float>({2, 4, 3, 5, 6}, 7));
  EXPECT_EQ(y.shape(), (Shape5{2, 8, 3, 5, 6}));
  EXPECT_EQ(head.num_parameters(), 8 * 4 + 8 + 8 * 8 + 8);
}

TEST(Kl, ClosedForms) {
  const Tensor<double> zero({1, 1, 1, 1, 1}, 0.0);
  const Tensor<double> one({1, 1, 1, 1, 1}, 1.0);
  EXPECT_DOUBLE_EQ(kl_divergence(zero, zero), 0.0);
  EXPECT_DOUBLE_EQ(kl_divergence(one, zero), 0.5);
}

TEST(TotalLoss, PerfectReconstructionIsAllZero) {
  const auto x = random_tensor<double>({1, 3, 2, 4, 4}, 8);
  const Tensor<double> mu({1, 4, 1, 1, 1}, 0.0);
  const auto f = random_tensor<double>({1, 2, 1, 1, 1}, 9);
  DistillConfig<double> cfg;
  cfg.align_blocks = {"mid"};
  std::map<std::string, ProjectionHead<double>> heads{{"mid", ProjectionHead<double>::pass_through()}};
  const auto loss = total_loss<double>(x, x, mu, mu, {{"mid", f}}, {{"mid", f}}, heads, cfg);
  EXPECT_EQ(loss.parts.l1, 0.0);
  EXPECT_EQ(loss.parts.distill, 0.0);
  EXPECT_EQ(loss.parts.kl, 0.0);
  EXPECT_EQ(loss.parts.lpips, 0.0);
  EXPECT_EQ(loss.parts.adv, 0.0);
  EXPECT_EQ(loss.parts.total, 0.0);
}

TEST(TotalLoss, NoDistillNoHooksIsL1PlusKl) {
  const auto x = random_tensor<double>({1, 3, 2, 4, 4}, 10);
  const auto y = random_tensor<double>({1, 3, 2, 4, 4}, 11);
  const auto mu = random_tensor<double>({1, 4, 1, 2, 2}, 12);
  const auto lv = random_tensor<double>({1, 4, 1, 2, 2}, 13, 0.1);
  DistillConfig<double> cfg;
  cfg.weights.distill = 0.0;
  const auto loss = total_loss<double>(x, y, mu, lv, {}, {}, {}, cfg);
  EXPECT_DOUBLE_EQ(loss.parts.l1, reduce_mean_abs(sub(x, y)));
  EXPECT_DOUBLE_EQ(loss.parts.total, loss.parts.l1 + 1e-7 * loss.parts.kl);
  cfg.weights.kl = 0.0;
  EXPECT_DOUBLE_EQ(total_loss<double>(x, y, mu, lv, {}, {}, {}, cfg).parts.total, loss.parts.l1);
}

TEST(TotalLoss, HooksCountOnlyWhenSet) {
  const auto x = random_tensor<double>({1, 3, 1, 2, 2}, 14);
  const auto y = random_tensor<double>({1, 3, 1, 2, 2}, 15);
  const Tensor<double> mu({1, 1, 1, 1, 1}, 0.0);
  DistillConfig<double> cfg;
  cfg.weights.distill = 0.0;
  const LossHook<double> two = [](const Tensor<double>& t, const Tensor<double>&, Tensor<double>* g) {
    if (g) *g = Tensor<double>(t.shape(), 0.0);
    return 2.0;
  };
  cfg.lpips_hook = two;
  cfg.adv_hook = two;
  cfg.adv_start_step = 10;
  const double l1 = reduce_mean_abs(sub(x, y));
  EXPECT_DOUBLE_EQ(total_loss<double>(x, y, mu, mu, {}, {}, {}, cfg, 9).parts.total, l1 + 2.0);
  EXPECT_DOUBLE_EQ(total_loss<double>(x, y, mu, mu, {}, {}, {}, cfg, 10).parts.total, l1 + 2.0 + 0.05 * 2.0);
}

TEST(DistillConfig, Validation) {
  DistillConfig<float> cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.align_blocks.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.weights.kl = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  EXPECT_EQ(cfg.align_blocks, (std::set<std::string>{"mid", "up_0", "up_1"}));
  EXPECT_EQ(cfg.weights.lpips, 1.0);
  EXPECT_EQ(cfg.weights.distill, 1.0);
  EXPECT_EQ(cfg.weights.kl, 1e-7);
  EXPECT_EQ(cfg.weights.adv, 0.05);
  EXPECT_EQ(cfg.optimizer.lr, 2e-4);
  EXPECT_EQ(cfg.optimizer.beta1, 0.9);
  EXPECT_EQ(cfg.optimizer.beta2, 0.95);
}

TEST(Adam, ZeroGradLeavesParamsAndDecaysMoments) {
  std::vector<float> p{1.0f, -2.0f};
  const std::vector<float> g1{1.0f, 1.0f}, g0{0.0f, 0.0f};
  AdamState st;
  AdamWConfig cfg;
  adamw_step<float>(p, g1, st, cfg);
  const auto after_one = p;
  const auto m = st.m, v = st.v;
  adamw_step<float>(p, g0, st, AdamWConfig{0.0, 0.9, 0.95, 1e-8, 0.0});
  EXPECT_EQ(p, after_one);
  EXPECT_DOUBLE_EQ(st.m[0], 0.9 * m[0]);
  EXPECT_DOUBLE_EQ(st.v[0], 0.95 * v[0]);
  EXPECT_EQ(st.step, 2);
}

TEST(Adam, FirstStepMovesByLr) {
  std::vector<double> p{0.5};
  const std::vector<double> g{1.0};
  AdamState st;
  AdamWConfig cfg;
  cfg.lr = 1e-3;
  adamw_step<double>(p, g, st, cfg);
  EXPECT_NEAR(p[0], 0.5 - 1e-3, 1e-10);
}

TEST(Adam, IdenticalParamsStayIdentical) {
  std::vector<float> p{0.3f, 0.3f};
  AdamState st;
  std::mt19937_64 rng(16);
  std::normal_distribution<float> nd;
  for (int i = 0; i < 50; ++i) {
    const float gi = nd(rng);
    const std::vector<float> g{gi, gi};
    adamw_step<float>(p, g, st, AdamWConfig{});
    ASSERT_EQ(p[0], p[1]);
  }
}

TEST(Synthetic, DeterministicAndInRange) {
  std::mt19937_64 a(3), b(3);
  const SyntheticVideoSpec spec{17, 32, 32, 3};
  const auto va = synthetic_video(spec, a);
  EXPECT_EQ(va, synthetic_video(spec, b));
  EXPECT_EQ(va.shape(), (Shape5{1, 3, 17, 32, 32}));
  for (const float v : va.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  // Moving content: consecutive frames differ.
  EXPECT_NE(slice(va, 2, 0, 1), slice(va, 2, 1, 2));
}

TEST(ToyEncoder, LatentShapeAndWhitening) {
  std::mt19937_64 rng(4);
  std::vector<Tensor<float>> videos;
  for (int i = 0; i < 6; ++i) videos.push_back(synthetic_video({9, 16, 16, 2}, rng));
  const auto enc = ToyEncoder<float>::fit_pca(videos, 8, 4, 4, 5);
  const auto out = enc.encode(videos[0]);
  EXPECT_EQ(out.mean.shape(), (Shape5{1, 8, 3, 4, 4}));
  EXPECT_EQ(out.logvar.shape(), out.mean.shape());
  // Zero mean and unit variance per channel over the fitting set.
  for (std::int64_t c = 0; c < 8; ++c) {
    double s = 0.0, sq = 0.0, n = 0.0;
    for (const auto& v : videos) {
      const auto m = enc.encode(v).mean;
      for (std::int64_t i = 0; i < 3 * 4 * 4; ++i) {
        const double x = m.volume(0, c)[i];
        s += x;
        sq += x * x;
        n += 1.0;
      }
    }
    EXPECT_NEAR(s / n, 0.0, 1e-3);
    EXPECT_NEAR(sq / n, 1.0, 1e-2);
  }
}

TEST(Train, ZeroStepsIsEmptyLogAndInitialWeights) {
  const auto& t = tiny();
  TrainOptions opt;
  opt.steps = 0;
  opt.seed = 3;
  const auto r = train_toy(DistillConfig<float>{}, t.setup.student, t.teacher, t.data, opt);
  EXPECT_TRUE(r.log.rows.empty());
  EXPECT_EQ(r.student.to_store(), Decoder<float>::initialized(t.setup.student, 3 * 7919 + 1).to_store());
}

TEST(Train, ZeroLrKeepsLossConstantPerSample) {
  const auto& t = tiny();
  DistillConfig<float> cfg;
  cfg.optimizer.lr = 0.0;
  cfg.batch_size = static_cast<std::int64_t>(t.data.videos.size());
  TrainOptions opt;
  opt.steps = 3;
  opt.eval_every = 0;
  const auto r = train_toy(cfg, t.setup.student, t.teacher, t.data, opt);
  ASSERT_EQ(r.log.rows.size(), 3u);
  for (const auto& row : r.log.rows) {
    EXPECT_EQ(row.l1, r.log.rows[0].l1);
    EXPECT_EQ(row.total, r.log.rows[0].total);
  }
}

TEST(Train, TeacherIsUntouched) {
  const auto& t = tiny();
  const auto before = t.teacher.decoder.to_store();
  TrainOptions opt;
  opt.steps = 3;
  opt.eval_every = 0;
  train_toy(DistillConfig<float>{}, t.setup.student, t.teacher, t.data, opt);
  EXPECT_EQ(t.teacher.decoder.to_store(), before);
}

TEST(Train, DeterministicLogSingleThreaded) {
  const auto& t = tiny();
  parallel::ScopedThreads threads(1);
  TrainOptions opt;
  opt.steps = 4;
  opt.eval_every = 2;
  opt.seed = 9;
  DistillConfig<float> cfg;
  cfg.optimizer.lr = 2e-3;
  const auto a = train_toy(cfg, t.setup.student, t.teacher, t.data, opt);
  const auto b = train_toy(cfg, t.setup.student, t.teacher, t.data, opt);
  EXPECT_EQ(a.log.to_csv(), b.log.to_csv());
  EXPECT_EQ(a.student.to_store(), b.student.to_store());
}

TEST(Train, NoDistillDegeneratesToReconstruction) {
  const auto& t = tiny();
  DistillConfig<float> cfg;
  cfg.weights.distill = 0.0;
  TrainOptions opt;
  opt.steps = 3;
  opt.eval_every = 0;
  const auto r = train_toy(cfg, t.setup.student, t.teacher, t.data, opt);
  for (const auto& row : r.log.rows) {
    EXPECT_EQ(row.distill, 0.0);
    EXPECT_DOUBLE_EQ(row.total, row.l1 + 1e-7 * row.kl);
  }
}

TEST(Train, CsvLogHeaderAndEvalRows) {
  const auto& t = tiny();
  TrainOptions opt;
  opt.steps = 3;
  opt.eval_every = 2;
  const auto r = train_toy(DistillConfig<float>{}, t.setup.student, t.teacher, t.data, opt);
  const auto csv = r.log.to_csv();
  EXPECT_EQ(csv.rfind("step,L1,L_distill,L_kl,total,eval_psnr\n", 0), 0u);
  EXPECT_TRUE(std::isnan(r.log.rows[0].eval_psnr));
  EXPECT_FALSE(std::isnan(r.log.rows[1].eval_psnr));
  EXPECT_FALSE(std::isnan(r.log.rows[2].eval_psnr));
}

TEST(Train, NegativeStepsIsConfigError) {
  const auto& t = tiny();
  TrainOptions opt;
  opt.steps = -1;
  EXPECT_THROW(train_toy(DistillConfig<float>{}, t.setup.student, t.teacher, t.data, opt), ConfigError);
}

TEST(Train, DivergenceIsNumericError) {
  const auto& t = tiny();
  DistillConfig<float> cfg;
  cfg.optimizer.lr = 1e30;
  TrainOptions opt;
  opt.steps = 20;
  opt.eval_every = 0;
  EXPECT_THROW(train_toy(cfg, t.setup.student, t.teacher, t.data, opt), NumericError);
}

TEST(Threshold, SmoothingAndFirstCrossing) {
  TrainLog log;
  for (int i = 1; i <= 6; ++i) log.rows.push_back({i, 1.0 / i, 0, 0, 0, 0});
  const auto s = smoothed_l1(log, 2);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 0.75);
  EXPECT_EQ(steps_to_threshold(log, 0.3, 2), 4);
  EXPECT_EQ(steps_to_threshold(log, 0.01, 2), std::nullopt);
  EXPECT_THROW(smoothed_l1(log, 0), ConfigError);
}

}  // namespace
}  // namespace turbovaed
