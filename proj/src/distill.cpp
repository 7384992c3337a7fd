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


#include "turbovaed/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "turbovaed/metrics.hpp"
#include "turbovaed/nn_ops.hpp"
#include "turbovaed/upsample.hpp"

namespace turbovaed {

// ---- Synthetic data ----------------------------------------------------------

Tensor5 synthetic_video(const SyntheticVideoSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double two_pi = 2.0 * std::numbers::pi;
  const double H = static_cast<double>(spec.height), W = static_cast<double>(spec.width);

  struct Wave {
    double amp, kx, ky, omega, phase;
  };
  std::array<Wave, 3> waves{};
  for (auto& w : waves) {
    const double angle = uni(0.0, two_pi);
    const double freq = uni(0.5, 2.0) * two_pi / W;
    w = {uni(0.05, 0.2), freq * std::cos(angle), freq * std::sin(angle), uni(-0.6, 0.6), uni(0.0, two_pi)};
  }
  struct Blob {
    double x0, y0, vx, vy, sigma;
    std::array<double, 3> color;
  };
  std::vector<Blob> blobs(static_cast<std::size_t>(spec.blobs));
  for (auto& b : blobs) {
    b = {uni(0.0, W), uni(0.0, H), uni(-1.0, 1.0), uni(-1.0, 1.0), uni(1.5, 3.0),
         {uni(-0.4, 0.4), uni(-0.4, 0.4), uni(-0.4, 0.4)}};
  }

  Tensor5 v({1, 3, spec.frames, spec.height, spec.width});
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t t = 0; t < spec.frames; ++t)
      for (std::int64_t h = 0; h < spec.height; ++h)
        for (std::int64_t w = 0; w < spec.width; ++w) {
          const auto& wave = waves[static_cast<std::size_t>(c)];
          double val = 0.5 + wave.amp * std::sin(wave.kx * static_cast<double>(w) +
                                                 wave.ky * static_cast<double>(h) +
                                                 wave.omega * static_cast<double>(t) + wave.phase);
          for (const auto& b : blobs) {
            const double dx = static_cast<double>(w) - (b.x0 + b.vx * static_cast<double>(t));
            const double dy = static_cast<double>(h) - (b.y0 + b.vy * static_cast<double>(t));
            val += b.color[static_cast<std::size_t>(c)] * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
          }
          v(0, c, t, h, w) = static_cast<float>(std::clamp(val, 0.0, 1.0));
        }
  return v;
}

template <typename T>
Tensor<T> concat_batch(const std::vector<const Tensor<T>*>& parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no tensors");
  Shape5 s = parts.front()->shape();
  std::int64_t n = 0;
  for (const auto* p : parts) {
    Shape5 q = p->shape();
    q[0] = s[0];
    if (q != s) throw ShapeError("concat_batch: mismatched shapes " + to_string(p->shape()));
    n += p->n();
  }
  s[0] = n;
  std::vector<T> data;
  data.reserve(static_cast<std::size_t>(checked_numel(s)));
  for (const auto* p : parts) data.insert(data.end(), p->data().begin(), p->data().end());
  return Tensor<T>(s, std::move(data));
}

// ---- Toy encoder ---------------------------------------------------------------

namespace {

template <typename T>
Tensor<T> random_normal(const Shape5& shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> pad_leading_frames(const Tensor<T>& x, std::int64_t extra) {
  if (extra == 0) return x;
  Tensor<T> out({x.n(), x.c(), x.t() + extra, x.h(), x.w()});
  const std::int64_t frame = x.h() * x.w();
  for (std::int64_t n = 0; n < x.n(); ++n)
    for (std::int64_t c = 0; c < x.c(); ++c) {
      const T* src = x.volume(n, c);
      T* dst = out.volume(n, c);
      for (std::int64_t e = 0; e < extra; ++e) std::copy(src, src + frame, dst + e * frame);
      std::copy(src, src + x.t() * frame, dst + extra * frame);
    }
  return out;
}

template <typename T>
std::vector<T> zero_bias(std::int64_t n) {
  return std::vector<T>(static_cast<std::size_t>(n), T(0));
}

}  // namespace

template <typename T>
ToyEncoder<T> ToyEncoder<T>::random(std::int64_t latent_channels, std::int64_t d_t, std::int64_t d_s,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::int64_t patch = 3 * d_t * d_s * d_s;
  ToyEncoder e;
  e.d_t = d_t;
  e.d_s = d_s;
  e.mean_weight = random_normal<T>({latent_channels, patch, 1, 1, 1}, 1.0 / std::sqrt(static_cast<double>(patch)), rng);
  e.mean_bias.assign(static_cast<std::size_t>(latent_channels), T(0));
  e.logvar_weight =
      random_normal<T>({latent_channels, patch, 1, 1, 1}, 0.1 / std::sqrt(static_cast<double>(patch)), rng);
  return e;
}

template <typename T>
ToyEncoder<T> ToyEncoder<T>::fit_pca(const std::vector<Tensor<T>>& videos, std::int64_t latent_channels,
                                     std::int64_t d_t, std::int64_t d_s, std::uint64_t seed) {
  if (videos.empty()) throw ConfigError("fit_pca: no videos");
  const std::int64_t P = 3 * d_t * d_s * d_s;
  if (latent_channels > P) throw ConfigError("fit_pca: more latent channels than patch dimensions");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(P);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(P, P);
  double count = 0.0;
  for (const auto& v : videos) {
    const Tensor<T> patches = pixel_unshuffle_3d(pad_leading_frames(v, d_t - 1), d_t, d_s);
    const std::int64_t vol = patches.t() * patches.h() * patches.w();
    for (std::int64_t n = 0; n < patches.n(); ++n)
      for (std::int64_t i = 0; i < vol; ++i) {
        Eigen::VectorXd x(P);
        for (std::int64_t c = 0; c < P; ++c) x[c] = static_cast<double>(patches.volume(n, c)[i]);
        mean += x;
        second.noalias() += x * x.transpose();
        count += 1.0;
      }
  }
  mean /= count;
  const Eigen::MatrixXd cov = second / count - mean * mean.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend; keep the last latent_channels.
  Eigen::MatrixXd proj(latent_channels, P);
  for (std::int64_t k = 0; k < latent_channels; ++k) {
    const std::int64_t src = P - 1 - k;
    const double lambda = std::max(eig.eigenvalues()[src], 1e-12);
    proj.row(k) = eig.eigenvectors().col(src).transpose() / std::sqrt(lambda);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd gauss(latent_channels, latent_channels);
  for (std::int64_t i = 0; i < gauss.size(); ++i) gauss.data()[i] = nd(rng);
  const Eigen::MatrixXd rotation = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  const Eigen::MatrixXd w = rotation * proj;
  const Eigen::VectorXd b = -w * mean;

  ToyEncoder e = random(latent_channels, d_t, d_s, seed + 1);
  for (std::int64_t r = 0; r < latent_channels; ++r) {
    for (std::int64_t c = 0; c < P; ++c) e.mean_weight.raw()[r * P + c] = static_cast<T>(w(r, c));
    e.mean_bias[static_cast<std::size_t>(r)] = static_cast<T>(b[r]);
  }
  return e;
}

template <typename T>
typename ToyEncoder<T>::Output ToyEncoder<T>::encode(const Tensor<T>& video) const {
  const Tensor<T> padded = pad_leading_frames(video, d_t - 1);
  const Tensor<T> patches = pixel_unshuffle_3d(padded, d_t, d_s);
  return {pointwise_conv3d(patches, mean_weight, mean_bias), pointwise_conv3d(patches, logvar_weight, {})};
}

// ---- Projection head -----------------------------------------------------------

template <typename T>
ProjectionHead<T> ProjectionHead<T>::random(std::int64_t c_student, std::int64_t hidden, std::int64_t c_teacher,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ProjectionHead h;
  h.w1 = random_normal<T>({hidden, c_student, 1, 1, 1}, 1.0 / std::sqrt(static_cast<double>(c_student)), rng);
  h.b1 = zero_bias<T>(hidden);
  h.w2 = random_normal<T>({c_teacher, hidden, 1, 1, 1}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  h.b2 = zero_bias<T>(c_teacher);
  return h;
}

template <typename T>
Tensor<T> ProjectionHead<T>::forward(const Tensor<T>& x, Cache* cache) const {
  if (identity) {
    if (cache) cache->x = x;
    return x;
  }
  Tensor<T> a = pointwise_conv3d(x, w1, b1);
  Tensor<T> y = pointwise_conv3d(silu(a), w2, b2);
  if (cache) {
    cache->x = x;
    cache->a = std::move(a);
  }
  return y;
}

template <typename T>
typename ProjectionHead<T>::Grads ProjectionHead<T>::backward(const Cache& cache, const Tensor<T>& upstream) const {
  Grads g;
  if (identity) {
    g.input = upstream;
    return g;
  }
  auto second = pointwise_conv3d_grad(silu(cache.a), w2, b2, upstream);
  auto first = pointwise_conv3d_grad(cache.x, w1, b1, silu_grad(cache.a, second.input));
  g.input = std::move(first.input);
  g.w1 = std::move(first.weight);
  g.b1 = std::move(first.bias);
  g.w2 = std::move(second.weight);
  g.b2 = std::move(second.bias);
  return g;
}

template <typename T>
std::vector<std::span<T>> ProjectionHead<T>::parameters() {
  if (identity) return {};
  return {w1.data(), std::span<T>(b1), w2.data(), std::span<T>(b2)};
}

template <typename T>
std::int64_t ProjectionHead<T>::num_parameters() const {
  if (identity) return 0;
  return w1.numel() + static_cast<std::int64_t>(b1.size()) + w2.numel() + static_cast<std::int64_t>(b2.size());
}

// ---- Losses ------------------------------------------------------------------

template <typename T>
void DistillConfig<T>::validate() const {
  if (align_blocks.empty()) throw ConfigError("align_blocks must not be empty");
  for (const double w : {weights.lpips, weights.distill, weights.kl, weights.adv}) {
    if (!(w >= 0.0)) throw ConfigError("loss weights must be non-negative");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(optimizer.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

namespace {

template <typename T>
T sign(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

// mean |a - b| and its gradient with respect to a.
template <typename T>
double mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>* grad_a) {
  require_same_shape(a, b, "mean_abs_diff");
  const auto n = static_cast<double>(a.numel());
  double s = 0.0;
  if (grad_a) *grad_a = Tensor<T>(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += std::abs(d);
    if (grad_a) (*grad_a)[i] = static_cast<T>(sign(d) / n);
  }
  return s / n;
}

template <typename T>
void scale_in_place(Tensor<T>& t, double k) {
  for (auto& v : t.data()) v = static_cast<T>(static_cast<double>(v) * k);
}

template <typename T>
void scale_in_place(std::vector<T>& t, double k) {
  for (auto& v : t) v = static_cast<T>(static_cast<double>(v) * k);
}

}  // namespace

template <typename T>
DistillLoss<T> distill_loss(const std::map<std::string, Tensor<T>>& student_feats,
                            const std::map<std::string, Tensor<T>>& teacher_feats,
                            const std::map<std::string, ProjectionHead<T>>& heads,
                            const std::set<std::string>& align_blocks) {
  if (align_blocks.empty()) throw ConfigError("distill_loss: no aligned blocks");
  DistillLoss<T> out;
  for (const auto& block : align_blocks) {
    const auto s = student_feats.find(block);
    const auto t = teacher_feats.find(block);
    const auto h = heads.find(block);
    if (s == student_feats.end()) throw ConfigError("distill_loss: no student feature for block '" + block + "'");
    if (t == teacher_feats.end()) throw ConfigError("distill_loss: no teacher feature for block '" + block + "'");
    if (h == heads.end()) throw ConfigError("distill_loss: no projection head for block '" + block + "'");
    typename ProjectionHead<T>::Cache cache;
    const Tensor<T> projected = h->second.forward(s->second, &cache);
    if (projected.shape() != t->second.shape()) {
      throw ShapeError("distill_loss: block '" + block + "' projects to " + to_string(projected.shape()) +
                       " but the teacher feature is " + to_string(t->second.shape()));
    }
    Tensor<T> g;
    const double v = mean_abs_diff(projected, t->second, &g);
    out.per_block[block] = v;
    out.value += v;
    auto hg = h->second.backward(cache, g);
    out.feature_grads[block] = std::move(hg.input);
    out.head_grads[block] = std::move(hg);
  }
  return out;
}

template <typename T>
double kl_divergence(const Tensor<T>& mean, const Tensor<T>& logvar) {
  require_same_shape(mean, logvar, "kl_divergence");
  if (mean.numel() == 0) throw DomainError("kl_divergence: empty latent");
  double s = 0.0;
  for (std::int64_t i = 0; i < mean.numel(); ++i) {
    const double m = static_cast<double>(mean[i]);
    const double lv = static_cast<double>(logvar[i]);
    s += m * m + std::exp(lv) - 1.0 - lv;
  }
  return 0.5 * s / static_cast<double>(std::max<std::int64_t>(mean.n(), 1));
}

template <typename T>
TotalLoss<T> total_loss(const Tensor<T>& target, const Tensor<T>& prediction, const Tensor<T>& latent_mean,
                        const Tensor<T>& latent_logvar, const std::map<std::string, Tensor<T>>& student_feats,
                        const std::map<std::string, Tensor<T>>& teacher_feats,
                        const std::map<std::string, ProjectionHead<T>>& heads, const DistillConfig<T>& cfg,
                        std::int64_t step) {
  cfg.validate();
  TotalLoss<T> out;
  auto& p = out.parts;
  p.l1 = mean_abs_diff(prediction, target, &out.video_grad);
  p.total = p.l1;

  auto apply_hook = [&](const LossHook<T>& hook, double weight, double& slot) {
    Tensor<T> g(prediction.shape());
    slot = hook(target, prediction, &g);
    p.total += weight * slot;
    scale_in_place(g, weight);
    accumulate(out.video_grad, g);
  };
  if (cfg.lpips_hook) apply_hook(cfg.lpips_hook, cfg.weights.lpips, p.lpips);
  if (cfg.adv_hook && cfg.adv_start_step >= 0 && step >= cfg.adv_start_step) {
    apply_hook(cfg.adv_hook, cfg.weights.adv, p.adv);
  }

  if (cfg.weights.distill > 0.0) {
    out.distill = distill_loss(student_feats, teacher_feats, heads, cfg.align_blocks);
    p.distill = out.distill.value;
    p.total += cfg.weights.distill * p.distill;
    for (auto& [name, g] : out.distill.feature_grads) scale_in_place(g, cfg.weights.distill);
    for (auto& [name, hg] : out.distill.head_grads) {
      scale_in_place(hg.input, cfg.weights.distill);
      scale_in_place(hg.w1, cfg.weights.distill);
      scale_in_place(hg.b1, cfg.weights.distill);
      scale_in_place(hg.w2, cfg.weights.distill);
      scale_in_place(hg.b2, cfg.weights.distill);
    }
  }
  p.kl = kl_divergence(latent_mean, latent_logvar);
  p.total += cfg.weights.kl * p.kl;
  return out;
}

// ---- Optimizer ---------------------------------------------------------------

template <typename T>
void adamw_step(std::span<T> params, std::span<const T> grads, AdamState& state, const AdamWConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adamw_step: parameter and gradient sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ShapeError("adamw_step: optimizer state size differs");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    double p = static_cast<double>(params[i]);
    p -= cfg.lr * cfg.weight_decay * p;
    p -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    params[i] = static_cast<T>(p);
  }
}

// ---- Toy experiment ----------------------------------------------------------

ToySetup default_toy_setup() {
  auto block = [](std::string name, std::int64_t ch, std::int64_t rt, std::int64_t rs, ConvKind kind) {
    BlockConfig b;
    b.name = std::move(name);
    b.channels = ch;
    b.num_resblocks = 1;
    b.upsample = {rt, rs};
    b.conv_kind = kind;
    return b;
  };
  ToySetup s;
  s.student.latent_channels = 16;
  s.student.norm_groups = 4;
  s.student.blocks = {block("mid", 16, 1, 1, ConvKind::dwsep), block("up_0", 16, 1, 1, ConvKind::dwsep),
                      block("up_1", 8, 2, 2, ConvKind::standard), block("up_2", 8, 2, 2, ConvKind::standard)};
  s.student.head.upsample_spatial = 1;
  s.student.validate();

  s.teacher = s.student;
  s.teacher.norm_groups = 8;
  for (auto& b : s.teacher.blocks) {
    b.channels *= 2;
    b.conv_kind = ConvKind::standard;
  }
  s.teacher.validate();
  return s;
}

namespace {

struct Trainable {
  std::vector<std::span<float>> params;
  std::vector<AdamState> states;
};

double eval_psnr(const Decoder<float>& dec, const std::vector<Tensor5>& videos, const std::vector<Tensor5>& latents) {
  double total = 0.0;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const Tensor5 out = map(dec.forward(latents[i]).video, [](float v) { return std::clamp(v, 0.0f, 1.0f); });
    const PsnrValue p = psnr(out, videos[i], 1.0);
    total += p.identical ? 100.0 : p.db;
  }
  return total / static_cast<double>(videos.size());
}

std::vector<std::size_t> data_order(std::size_t pool, std::uint64_t seed) {
  std::vector<std::size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  for (std::size_t i = pool; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

void check_loss(double v, std::int64_t step) {
  if (!std::isfinite(v)) {
    throw NumericError("training diverged: loss is " + std::to_string(v) + " at step " + std::to_string(step));
  }
}

}  // namespace

ToyTeacher make_toy_teacher(const ToySetup& setup, std::uint64_t seed) {
  const auto f = setup.teacher.factors();
  if (f != setup.student.factors()) throw ConfigError("teacher and student factors differ");
  if (f[1] != f[2]) throw ConfigError("toy encoder needs d_h == d_w");
  std::mt19937_64 rng(seed * 1000003 + 17);
  std::vector<Tensor5> videos, latents;
  for (std::int64_t i = 0; i < setup.train_videos; ++i) videos.push_back(synthetic_video(setup.video, rng));
  ToyTeacher teacher{
      ToyEncoder<float>::fit_pca(videos, setup.teacher.latent_channels, f[0], f[1], seed * 1000003 + 11),
      setup.teacher, Decoder<float>::initialized(setup.teacher, seed * 1000003 + 13)};
  for (const auto& v : videos) latents.push_back(teacher.encoder.encode(v).mean);
  AdamWConfig opt;
  opt.lr = setup.teacher_lr;
  auto params = teacher.decoder.parameters();
  std::vector<AdamState> states(params.size());
  const auto order = data_order(videos.size(), seed);
  for (std::int64_t step = 0; step < setup.teacher_steps; ++step) {
    // Cosine decay to zero over the pre-training budget.
    opt.lr = setup.teacher_lr * 0.5 *
             (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(setup.teacher_steps)));
    const std::size_t i = order[static_cast<std::size_t>(step) % order.size()];
    ForwardTape<float> tape;
    const auto res = teacher.decoder.forward_train(latents[i], tape);
    Tensor5 g;
    check_loss(mean_abs_diff(res.video, videos[i], &g), step);
    auto grads = teacher.decoder.backward(tape, g);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& gk = grads.at(params[k].name);
      adamw_step<float>(params[k].values, gk, states[k], opt);
    }
  }
  return teacher;
}

ToyDataset make_toy_dataset(const ToySetup& setup, const ToyTeacher& teacher, std::uint64_t seed) {
  ToyDataset d;
  std::mt19937_64 rng(seed * 2000003 + 29);
  for (std::int64_t i = 0; i < setup.train_videos; ++i) {
    d.videos.push_back(synthetic_video(setup.video, rng));
    auto enc = teacher.encoder.encode(d.videos.back());
    d.teacher_features.push_back(teacher.decoder.forward(enc.mean).features);
    d.latent_mean.push_back(std::move(enc.mean));
    d.latent_logvar.push_back(std::move(enc.logvar));
  }
  for (std::int64_t i = 0; i < setup.eval_videos; ++i) {
    d.eval_videos.push_back(synthetic_video(setup.video, rng));
    d.eval_latents.push_back(teacher.encoder.encode(d.eval_videos.back()).mean);
  }
  return d;
}

TrainResult train_toy(const DistillConfig<float>& cfg, const DecoderConfig& student_cfg, const ToyTeacher& teacher,
                      const ToyDataset& data, const TrainOptions& opt) {
  cfg.validate();
  if (opt.steps < 0) throw ConfigError("steps must be >= 0");
  if (data.videos.empty()) throw ConfigError("empty training pool");
  TrainResult result{{}, Decoder<float>::initialized(student_cfg, opt.seed * 7919 + 1), {}};
  auto& student = result.student;

  std::uint64_t head_seed = opt.seed * 7919 + 2;
  for (const auto& block : cfg.align_blocks) {
    const std::int64_t cs = student_cfg.block(block).channels;
    const std::int64_t ct = teacher.config.block(block).channels;
    result.heads.emplace(block, ProjectionHead<float>::random(cs, ct, ct, head_seed++));
  }

  auto student_params = student.parameters();
  std::vector<AdamState> student_states(student_params.size());
  std::map<std::string, std::vector<AdamState>> head_states;
  for (auto& [name, h] : result.heads) head_states[name].resize(h.parameters().size());

  const auto order = data_order(data.videos.size(), opt.seed);
  std::size_t cursor = 0;
  for (std::int64_t step = 1; step <= opt.steps; ++step) {
    std::vector<const Tensor5*> xs, mus, lvs;
    std::map<std::string, std::vector<const Tensor5*>> tf_parts;
    for (std::int64_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t i = order[cursor++ % order.size()];
      xs.push_back(&data.videos[i]);
      mus.push_back(&data.latent_mean[i]);
      lvs.push_back(&data.latent_logvar[i]);
      for (const auto& block : cfg.align_blocks) tf_parts[block].push_back(&data.teacher_features[i].at(block));
    }
    const Tensor5 x = concat_batch(xs);
    const Tensor5 mu = concat_batch(mus);
    const Tensor5 lv = concat_batch(lvs);
    std::map<std::string, Tensor5> teacher_feats;
    if (cfg.weights.distill > 0.0) {
      for (const auto& [block, parts] : tf_parts) teacher_feats[block] = concat_batch(parts);
    }

    ForwardTape<float> tape;
    const auto res = student.forward_train(mu, tape);
    const auto loss = total_loss(x, res.video, mu, lv, res.features, teacher_feats, result.heads, cfg, step);
    check_loss(loss.parts.total, step);
    const auto grads = student.backward(tape, loss.video_grad, loss.distill.feature_grads);

    for (std::size_t k = 0; k < student_params.size(); ++k) {
      adamw_step<float>(student_params[k].values, grads.at(student_params[k].name), student_states[k],
                        cfg.optimizer);
    }
    for (auto& [block, hg] : loss.distill.head_grads) {
      auto params = result.heads.at(block).parameters();
      const std::vector<std::span<const float>> gs{hg.w1.data(), std::span<const float>(hg.b1), hg.w2.data(),
                                                   std::span<const float>(hg.b2)};
      for (std::size_t k = 0; k < params.size(); ++k) adamw_step<float>(params[k], gs[k], head_states[block][k], cfg.optimizer);
    }

    TrainRow row;
    row.step = step;
    row.l1 = loss.parts.l1;
    row.distill = loss.parts.distill;
    row.kl = loss.parts.kl;
    row.total = loss.parts.total;
    row.eval_psnr = std::numeric_limits<double>::quiet_NaN();
    if ((opt.eval_every > 0 && step % opt.eval_every == 0) || step == opt.steps) {
      row.eval_psnr = eval_psnr(student, data.eval_videos, data.eval_latents);
    }
    result.log.rows.push_back(row);
  }
  return result;
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "step,L1,L_distill,L_kl,total,eval_psnr\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.l1 << ',' << r.distill << ',' << r.kl << ',' << r.total << ',';
    if (!std::isnan(r.eval_psnr)) os << r.eval_psnr;
    os << '\n';
  }
  return os.str();
}

std::vector<double> smoothed_l1(const TrainLog& log, std::int64_t window) {
  if (window < 1) throw ConfigError("smoothing window must be >= 1");
  std::vector<double> out;
  double running = 0.0;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    running += log.rows[i].l1;
    if (i >= static_cast<std::size_t>(window)) running -= log.rows[i - static_cast<std::size_t>(window)].l1;
    out.push_back(running / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window))));
  }
  return out;
}

std::optional<std::int64_t> steps_to_threshold(const TrainLog& log, double tau, std::int64_t window) {
  const auto s = smoothed_l1(log, window);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] <= tau) return log.rows[i].step;
  }
  return std::nullopt;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ConvergenceSummary convergence_experiment(const ToySetup& setup, const ConvergenceOptions& opt) {
  if (opt.tau_step < 1 || opt.tau_step > opt.steps) throw ConfigError("tau_step must lie within the run");
  ConvergenceSummary summary;
  std::vector<double> bs, ds, bp, dp;
  const ToyTeacher teacher = make_toy_teacher(setup, opt.teacher_seed);
  const ToyDataset data = make_toy_dataset(setup, teacher, opt.teacher_seed);
  for (const auto seed : opt.seeds) {
    DistillConfig<float> cfg;
    cfg.optimizer.lr = opt.lr;
    cfg.align_blocks = setup.align_blocks;
    TrainOptions topt;
    topt.steps = opt.steps;
    topt.seed = seed;

    ConvergenceRun run;
    run.seed = seed;
    DistillConfig<float> base_cfg = cfg;
    base_cfg.weights.distill = 0.0;
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    run.baseline_log = train_toy(base_cfg, setup.student, teacher, data, topt).log;
    const auto t1 = Clock::now();
    run.distill_log = train_toy(cfg, setup.student, teacher, data, topt).log;
    run.baseline_seconds = std::chrono::duration<double>(t1 - t0).count();
    run.distill_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
    run.tau = smoothed_l1(run.baseline_log, opt.window)[static_cast<std::size_t>(opt.tau_step - 1)];
    run.baseline_steps = steps_to_threshold(run.baseline_log, run.tau, opt.window);
    run.distill_steps = steps_to_threshold(run.distill_log, run.tau, opt.window);
    run.baseline_psnr = run.baseline_log.rows.back().eval_psnr;
    run.distill_psnr = run.distill_log.rows.back().eval_psnr;
    const auto unreached = static_cast<double>(opt.steps + 1);
    bs.push_back(run.baseline_steps ? static_cast<double>(*run.baseline_steps) : unreached);
    ds.push_back(run.distill_steps ? static_cast<double>(*run.distill_steps) : unreached);
    bp.push_back(run.baseline_psnr);
    dp.push_back(run.distill_psnr);
    summary.runs.push_back(std::move(run));
  }
  summary.median_baseline_steps = median(bs);
  summary.median_distill_steps = median(ds);
  summary.median_baseline_psnr = median(bp);
  summary.median_distill_psnr = median(dp);
  return summary;
}

#define TURBOVAED_INSTANTIATE(T)                                                                               \
  template Tensor<T> concat_batch(const std::vector<const Tensor<T>*>&);                                       \
  template struct ToyEncoder<T>;                                                                               \
  template struct ProjectionHead<T>;                                                                           \
  template struct DistillConfig<T>;                                                                            \
  template DistillLoss<T> distill_loss(const std::map<std::string, Tensor<T>>&,                                \
                                       const std::map<std::string, Tensor<T>>&,                                \
                                       const std::map<std::string, ProjectionHead<T>>&,                        \
                                       const std::set<std::string>&);                                          \
  template double kl_divergence(const Tensor<T>&, const Tensor<T>&);                                           \
  template TotalLoss<T> total_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                   const std::map<std::string, Tensor<T>>&,                                    \
                                   const std::map<std::string, Tensor<T>>&,                                    \
                                   const std::map<std::string, ProjectionHead<T>>&, const DistillConfig<T>&,   \
                                   std::int64_t);                                                              \
  template void adamw_step(std::span<T>, std::span<const T>, AdamState&, const AdamWConfig&);

TURBOVAED_INSTANTIATE(float)
TURBOVAED_INSTANTIATE(double)

#undef TURBOVAED_INSTANTIATE

}  // namespace turbovaed
