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


// Toy-scale decoder distillation: synthetic videos, a frozen toy encoder and
// teacher decoder, projection heads, the feature-alignment and composite
// losses, AdamW, and the training loop.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "turbovaed/decoder.hpp"
#include "turbovaed/tensor.hpp"

namespace turbovaed {

// ---- Synthetic data ----------------------------------------------------------

struct SyntheticVideoSpec {
  std::int64_t frames = 17;  // 1 + 4k for the causal temporal factor
  std::int64_t height = 32;
  std::int64_t width = 32;
  int blobs = 3;
};

// (1, 3, frames, H, W) video in [0, 1]: translating Gaussian blobs over a
// drifting sinusoidal texture.
Tensor5 synthetic_video(const SyntheticVideoSpec& spec, std::mt19937_64& rng);

// Concatenates tensors along N.
template <typename T>
Tensor<T> concat_batch(const std::vector<const Tensor<T>*>& parts);

// ---- Frozen toy encoder ------------------------------------------------------

// Replicate-pads d_t - 1 leading frames, folds (d_t, d_s, d_s) patches into
// channels, then two fixed pointwise maps produce mean and log-variance.
template <typename T>
struct ToyEncoder {
  std::int64_t d_t = 1;
  std::int64_t d_s = 1;
  Tensor<T> mean_weight;  // (C, 3 d_t d_s^2, 1, 1, 1)
  std::vector<T> mean_bias;
  Tensor<T> logvar_weight;  // same shape as mean_weight

  // Gaussian random projection.
  static ToyEncoder random(std::int64_t latent_channels, std::int64_t d_t, std::int64_t d_s, std::uint64_t seed);
  // Whitened projection onto the leading principal components of the patches
  // of `videos`, mixed by a seeded random rotation. Latents come out with
  // zero mean and identity covariance over the fitting set.
  static ToyEncoder fit_pca(const std::vector<Tensor<T>>& videos, std::int64_t latent_channels, std::int64_t d_t,
                            std::int64_t d_s, std::uint64_t seed);

  struct Output {
    Tensor<T> mean;
    Tensor<T> logvar;
  };
  Output encode(const Tensor<T>& video) const;
};

// ---- Projection head -----------------------------------------------------------

// pointwise (C_s -> hidden) -> SiLU -> pointwise (hidden -> C_t). An identity
// head passes features through unchanged.
template <typename T>
struct ProjectionHead {
  bool identity = false;
  Tensor<T> w1;  // (hidden, C_s, 1, 1, 1)
  std::vector<T> b1;
  Tensor<T> w2;  // (C_t, hidden, 1, 1, 1)
  std::vector<T> b2;

  static ProjectionHead random(std::int64_t c_student, std::int64_t hidden, std::int64_t c_teacher,
                               std::uint64_t seed);
  static ProjectionHead pass_through() { return ProjectionHead{true, {}, {}, {}, {}}; }

  struct Cache {
    Tensor<T> x, a;  // input and pre-activation
  };
  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  struct Grads {
    Tensor<T> input;
    Tensor<T> w1;
    std::vector<T> b1;
    Tensor<T> w2;
    std::vector<T> b2;
  };
  Grads backward(const Cache& cache, const Tensor<T>& upstream) const;

  std::vector<std::span<T>> parameters();
  std::int64_t num_parameters() const;
};

// ---- Losses ------------------------------------------------------------------

// Optional loss plug-ins. Returns the loss and writes d loss / d prediction.
template <typename T>
using LossHook = std::function<double(const Tensor<T>& target, const Tensor<T>& prediction, Tensor<T>* grad)>;

struct LossWeights {
  double lpips = 1.0;
  double distill = 1.0;
  double kl = 1e-7;
  double adv = 0.05;
};

struct AdamWConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename T = float>
struct DistillConfig {
  std::set<std::string> align_blocks{"mid", "up_0", "up_1"};
  LossWeights weights;
  LossHook<T> lpips_hook;  // off when empty
  LossHook<T> adv_hook;    // off when empty; applied from adv_start_step on
  std::int64_t adv_start_step = -1;  // never
  AdamWConfig optimizer;
  std::int64_t batch_size = 2;

  void validate() const;
};

template <typename T>
struct DistillLoss {
  double value = 0.0;
  std::map<std::string, double> per_block;
  // d loss / d student feature, per aligned block.
  std::map<std::string, Tensor<T>> feature_grads;
  // Parameter gradients of the heads, keyed by block.
  std::map<std::string, typename ProjectionHead<T>::Grads> head_grads;
};

// Sum over aligned blocks of mean |head(f_student) - f_teacher|.
template <typename T>
DistillLoss<T> distill_loss(const std::map<std::string, Tensor<T>>& student_feats,
                            const std::map<std::string, Tensor<T>>& teacher_feats,
                            const std::map<std::string, ProjectionHead<T>>& heads,
                            const std::set<std::string>& align_blocks);

// 0.5 * sum(mean^2 + exp(logvar) - 1 - logvar) / N.
template <typename T>
double kl_divergence(const Tensor<T>& mean, const Tensor<T>& logvar);

struct LossBreakdown {
  double l1 = 0.0;
  double lpips = 0.0;
  double distill = 0.0;
  double kl = 0.0;
  double adv = 0.0;
  double total = 0.0;
};

template <typename T>
struct TotalLoss {
  LossBreakdown parts;
  Tensor<T> video_grad;  // d total / d prediction
  DistillLoss<T> distill;
};

// L1 + a_lpips L_lpips + a_distill L_distill + a_kl L_kl + a_adv L_adv. Hook
// terms count only when their hook is set (and, for adv, once `step` reaches
// adv_start_step).
template <typename T>
TotalLoss<T> total_loss(const Tensor<T>& target, const Tensor<T>& prediction, const Tensor<T>& latent_mean,
                        const Tensor<T>& latent_logvar, const std::map<std::string, Tensor<T>>& student_feats,
                        const std::map<std::string, Tensor<T>>& teacher_feats,
                        const std::map<std::string, ProjectionHead<T>>& heads, const DistillConfig<T>& cfg,
                        std::int64_t step = 0);

// ---- Optimizer ---------------------------------------------------------------

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

// One AdamW update (decoupled weight decay); increments state.step.
template <typename T>
void adamw_step(std::span<T> params, std::span<const T> grads, AdamState& state, const AdamWConfig& cfg);

// ---- Toy experiment ----------------------------------------------------------

struct ToySetup {
  DecoderConfig student;
  DecoderConfig teacher;
  SyntheticVideoSpec video;
  std::int64_t train_videos = 24;
  std::int64_t eval_videos = 2;
  std::int64_t teacher_steps = 1200;
  double teacher_lr = 2e-3;  // peak; cosine-decayed to zero over teacher_steps
  // Aligned blocks for toy runs: the two lowest-resolution blocks. up_1 here
  // already sits at half the output resolution.
  std::set<std::string> align_blocks{"mid", "up_0"};
};

// Small configs with factors (4, 4, 4): 17 x 32 x 32 videos, 5 x 8 x 8 latents.
ToySetup default_toy_setup();

struct ToyTeacher {
  ToyEncoder<float> encoder;
  DecoderConfig config;
  Decoder<float> decoder;
};

// Builds the frozen encoder and pre-trains the teacher decoder on L1 for
// setup.teacher_steps with a cosine learning-rate decay, then freezes it.
ToyTeacher make_toy_teacher(const ToySetup& setup, std::uint64_t seed);

// Fixed pool of synthetic videos with their latents and teacher features.
struct ToyDataset {
  std::vector<Tensor5> videos;
  std::vector<Tensor5> latent_mean;
  std::vector<Tensor5> latent_logvar;
  std::vector<std::map<std::string, Tensor5>> teacher_features;
  std::vector<Tensor5> eval_videos;
  std::vector<Tensor5> eval_latents;
};

ToyDataset make_toy_dataset(const ToySetup& setup, const ToyTeacher& teacher, std::uint64_t seed);

struct TrainRow {
  std::int64_t step = 0;
  double l1 = 0.0;
  double distill = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double eval_psnr = 0.0;  // NaN on steps without an evaluation
};

struct TrainLog {
  std::vector<TrainRow> rows;
  std::string to_csv() const;
};

struct TrainOptions {
  std::int64_t steps = 300;
  std::int64_t eval_every = 50;  // evaluation also runs after the last step
  std::uint64_t seed = 0;
};

struct TrainResult {
  TrainLog log;
  Decoder<float> student;
  std::map<std::string, ProjectionHead<float>> heads;
};

// Trains a freshly initialized student. Throws NumericError if the loss
// becomes non-finite.
TrainResult train_toy(const DistillConfig<float>& cfg, const DecoderConfig& student_cfg, const ToyTeacher& teacher,
                      const ToyDataset& data, const TrainOptions& opt);

// Trailing mean of the training L1 over `window` steps.
std::vector<double> smoothed_l1(const TrainLog& log, std::int64_t window);
// First step whose smoothed L1 is <= tau, or nullopt.
std::optional<std::int64_t> steps_to_threshold(const TrainLog& log, double tau, std::int64_t window);

struct ConvergenceRun {
  std::uint64_t seed = 0;
  double tau = 0.0;
  std::optional<std::int64_t> baseline_steps;
  std::optional<std::int64_t> distill_steps;
  double baseline_psnr = 0.0;
  double distill_psnr = 0.0;
  double baseline_seconds = 0.0;  // wall time of each training run
  double distill_seconds = 0.0;
  TrainLog baseline_log;
  TrainLog distill_log;
};

struct ConvergenceOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};  // student init and data order
  std::uint64_t teacher_seed = 0;                    // one frozen teacher and data pool for all seeds
  std::int64_t steps = 300;
  std::int64_t tau_step = 200;
  std::int64_t window = 10;
  double lr = 2e-3;
};

struct ConvergenceSummary {
  std::vector<ConvergenceRun> runs;
  double median_baseline_steps = 0.0;  // unreached runs count as steps + 1
  double median_distill_steps = 0.0;
  double median_baseline_psnr = 0.0;
  double median_distill_psnr = 0.0;
};

// Paired runs with the distillation weight at 0 and at its configured value.
ConvergenceSummary convergence_experiment(const ToySetup& setup, const ConvergenceOptions& opt);

}  // namespace turbovaed
