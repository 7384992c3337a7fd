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


#include "turbovaed/decoder.hpp"

#include <cmath>
#include <random>
#include <unordered_map>

#include "turbovaed/upsample.hpp"

namespace turbovaed {

namespace {

template <typename T>
void add_grad(ParamGrads<T>& grads, const std::string& name, std::span<const T> g) {
  auto& dst = grads[name];
  if (dst.empty()) {
    dst.assign(g.begin(), g.end());
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

template <typename T>
std::span<const T> as_span(const Tensor<T>& t) {
  return t.data();
}

template <typename T>
std::span<const T> as_span(const std::vector<T>& v) {
  return {v.data(), v.size()};
}

// Storage slots of every parameter, keyed by parameter name.
template <typename T, typename ConvMap, typename NormMap>
auto slots(ConvMap& convs, NormMap& norms) {
  using Elem = std::conditional_t<std::is_const_v<std::remove_reference_t<ConvMap>>, const T, T>;
  std::unordered_map<std::string, std::span<Elem>> out;
  auto vec = [](auto& v) { return std::span<Elem>(v.data(), v.size()); };
  for (auto& [name, m] : convs) {
    if (m.spec.kind == ConvKind::dwsep) {
      out[name + "/depthwise/weight"] = m.dwsep.depthwise.data();
      out[name + "/depthwise/bias"] = vec(m.dwsep.depthwise_bias);
      out[name + "/pointwise/weight"] = m.dwsep.pointwise.data();
      out[name + "/pointwise/bias"] = vec(m.dwsep.pointwise_bias);
    } else {
      out[name + "/weight"] = m.standard.weight.data();
      out[name + "/bias"] = vec(m.standard.bias);
    }
  }
  for (auto& [name, m] : norms) {
    out[name + "/gamma"] = vec(m.params.gamma);
    out[name + "/beta"] = vec(m.params.beta);
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> conv_forward(const ConvModule<T>& m, const Tensor<T>& x) {
  if (m.spec.kind == ConvKind::dwsep) return dwsep_conv3d(x, m.dwsep);
  if (m.spec.pointwise_only) return pointwise_conv3d(x, m.standard.weight, m.standard.bias);
  return conv3d(x, m.standard);
}

template <typename T>
Tensor<T> conv_backward(const ConvModule<T>& m, const Tensor<T>& x, const Tensor<T>& upstream, ParamGrads<T>& grads) {
  const std::string& n = m.spec.name;
  if (m.spec.kind == ConvKind::dwsep) {
    auto g = dwsep_conv3d_grad(x, m.dwsep, upstream);
    add_grad(grads, n + "/depthwise/weight", as_span(g.depthwise));
    add_grad(grads, n + "/depthwise/bias", as_span(g.depthwise_bias));
    add_grad(grads, n + "/pointwise/weight", as_span(g.pointwise));
    add_grad(grads, n + "/pointwise/bias", as_span(g.pointwise_bias));
    return std::move(g.input);
  }
  auto g = m.spec.pointwise_only ? pointwise_conv3d_grad(x, m.standard.weight, m.standard.bias, upstream)
                                 : conv3d_grad(x, m.standard, upstream);
  add_grad(grads, n + "/weight", as_span(g.weight));
  add_grad(grads, n + "/bias", as_span(g.bias));
  return std::move(g.input);
}

template <typename T>
Decoder<T>::Decoder(const DecoderConfig& cfg) : cfg_(cfg), layout_(make_layout(cfg)) {
  auto add_conv = [this](const ConvSpec& s) {
    ConvModule<T> m;
    m.spec = s;
    if (s.kind == ConvKind::dwsep) {
      m.dwsep.depthwise = Tensor<T>({s.c_in, 1, s.kernel, s.kernel, s.kernel});
      m.dwsep.depthwise_bias.assign(static_cast<std::size_t>(s.c_in), T(0));
      m.dwsep.pointwise = Tensor<T>({s.c_out, s.c_in, 1, 1, 1});
      m.dwsep.pointwise_bias.assign(static_cast<std::size_t>(s.c_out), T(0));
      m.dwsep.temporal = cfg_.temporal_padding;
    } else {
      m.standard.weight = Tensor<T>({s.c_out, s.c_in, s.kernel, s.kernel, s.kernel});
      m.standard.bias.assign(static_cast<std::size_t>(s.c_out), T(0));
      m.standard.temporal = cfg_.temporal_padding;
    }
    convs_.emplace(s.name, std::move(m));
  };
  auto add_norm = [this](const NormSpec& s) {
    NormModule<T> m;
    m.spec = s;
    m.params.num_groups = cfg_.norm_groups;
    m.params.epsilon = cfg_.norm_eps;
    m.params.gamma.assign(static_cast<std::size_t>(s.channels), T(1));
    m.params.beta.assign(static_cast<std::size_t>(s.channels), T(0));
    norms_.emplace(s.name, std::move(m));
  };
  for (const auto& bl : layout_) {
    if (bl.entry_conv) add_conv(*bl.entry_conv);
    for (const auto& rb : bl.resblocks) {
      add_norm(rb.norm1);
      add_conv(rb.conv1);
      add_norm(rb.norm2);
      add_conv(rb.conv2);
      if (rb.skip) add_conv(*rb.skip);
    }
    if (bl.head_norm) add_norm(*bl.head_norm);
    if (bl.head_conv) add_conv(*bl.head_conv);
  }
}

template <typename T>
Decoder<T>::Decoder(const DecoderConfig& cfg, const WeightStore& weights) : Decoder(cfg) {
  const ValidationReport report = validate_against(weights, cfg);
  if (!report.ok()) throw LoadError("weights do not match the config:\n" + report.to_string());
  auto table = slots<T>(convs_, norms_);
  for (auto& [name, dst] : table) {
    const auto& e = weights.at(name);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e.data[i]);
  }
}

template <typename T>
Decoder<T> Decoder<T>::initialized(const DecoderConfig& cfg, std::uint64_t seed) {
  Decoder d(cfg);
  std::mt19937_64 rng(seed);
  auto table = slots<T>(d.convs_, d.norms_);
  for (const auto& spec : param_specs(cfg)) {
    const auto& shape = spec.shape;
    if (shape.size() != 5) continue;  // biases, gammas and betas keep their defaults
    const std::int64_t fan_in = shape[1] == 1 && spec.name.find("/depthwise/") != std::string::npos
                                    ? shape[2] * shape[3] * shape[4]
                                    : shape[1] * shape[2] * shape[3] * shape[4];
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    for (auto& v : table.at(spec.name)) v = static_cast<T>(dist(rng));
  }
  return d;
}

template <typename T>
std::vector<ParamView<T>> Decoder<T>::parameters() {
  auto table = slots<T>(convs_, norms_);
  std::vector<ParamView<T>> out;
  for (const auto& spec : param_specs(cfg_)) out.push_back({spec.name, spec.shape, table.at(spec.name)});
  return out;
}

template <typename T>
std::vector<ParamView<const T>> Decoder<T>::parameters() const {
  auto table = slots<T>(convs_, norms_);
  std::vector<ParamView<const T>> out;
  for (const auto& spec : param_specs(cfg_)) out.push_back({spec.name, spec.shape, table.at(spec.name)});
  return out;
}

template <typename T>
std::int64_t Decoder<T>::num_parameters() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += static_cast<std::int64_t>(p.values.size());
  return n;
}

template <typename T>
WeightStore Decoder<T>::to_store() const {
  WeightStore s;
  for (const auto& p : parameters()) {
    s.insert(p.name, p.shape, std::vector<float>(p.values.begin(), p.values.end()));
  }
  return s;
}

template <typename T>
template <typename U>
Decoder<U> Decoder<T>::cast() const {
  Decoder<U> d(cfg_);
  auto src = parameters();
  auto dst = d.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < src[i].values.size(); ++j) dst[i].values[j] = static_cast<U>(src[i].values[j]);
  }
  return d;
}

template <typename T>
Tensor<T> Decoder<T>::upsample(const Tensor<T>& x, const UpsampleFactors& f) const {
  Tensor<T> up = cfg_.upsample_mode == UpsampleMode::decoupled ? decoupled_upsample(x, f)
                                                                : pixel_shuffle_3d(x, f.r_t, f.r_s);
  if (f.r_t == 1) return up;
  return slice(up, kT, f.r_t - 1, up.t());
}

template <typename T>
Tensor<T> Decoder<T>::upsample_grad(const Tensor<T>& g, const UpsampleFactors& f) const {
  Tensor<T> full = g;
  if (f.r_t > 1) {
    Shape5 s = g.shape();
    s[kT] += f.r_t - 1;
    full = Tensor<T>(s);
    const std::int64_t lead = f.r_t - 1;
    for (std::int64_t n = 0; n < g.n(); ++n)
      for (std::int64_t c = 0; c < g.c(); ++c) {
        const std::int64_t frame = g.h() * g.w();
        std::copy(g.volume(n, c), g.volume(n, c) + g.t() * frame, full.volume(n, c) + lead * frame);
      }
  }
  return cfg_.upsample_mode == UpsampleMode::decoupled ? decoupled_downsample(full, f)
                                                        : pixel_unshuffle_3d(full, f.r_t, f.r_s);
}

template <typename T>
DecodeResult<T> Decoder<T>::run(const Tensor<T>& latent, ForwardObserver* observer, ForwardTape<T>* tape) const {
  const Shape5 video_shape = video_shape_for_latent(cfg_, latent.shape());
  DecodeResult<T> result;
  Tensor<T> h = latent;
  if (tape) tape->blocks.clear();

  for (const auto& bl : layout_) {
    if (observer) observer->block_begin(bl.name);
    typename ForwardTape<T>::Block tb;
    tb.name = bl.name;
    if (tape) tb.input = h;

    if (bl.name == "head") {
      const auto& norm = norms_.at(bl.head_norm->name);
      Tensor<T> a = group_norm(h, norm.params);
      Tensor<T> s = silu(a);
      h = conv_forward(convs_.at(bl.head_conv->name), s);
      if (bl.upsample.r_s > 1) h = pixel_shuffle_2d_video(h, bl.upsample.r_s);
      if (tape) {
        tb.head_a = std::move(a);
        tb.head_s = std::move(s);
      }
    } else {
      if (bl.entry_conv) {
        h = conv_forward(convs_.at(bl.entry_conv->name), h);
        if (bl.entry_conv->name.ends_with("/upsample_conv")) h = upsample(h, bl.upsample);
      }
      for (const auto& rb : bl.resblocks) {
        typename ForwardTape<T>::Res r;
        Tensor<T> a1 = group_norm(h, norms_.at(rb.norm1.name).params);
        Tensor<T> s1 = silu(a1);
        Tensor<T> c1 = conv_forward(convs_.at(rb.conv1.name), s1);
        Tensor<T> a2 = group_norm(c1, norms_.at(rb.norm2.name).params);
        Tensor<T> s2 = silu(a2);
        Tensor<T> out = conv_forward(convs_.at(rb.conv2.name), s2);
        if (rb.skip) {
          accumulate(out, conv_forward(convs_.at(rb.skip->name), h));
        } else {
          accumulate(out, h);
        }
        check_finite(out, "resblock");
        if (tape) r = {std::move(h), std::move(a1), std::move(s1), std::move(c1), std::move(a2), std::move(s2)};
        h = std::move(out);
        if (tape) tb.res.push_back(std::move(r));
      }
    }
    if (tape) tape->blocks.push_back(std::move(tb));
    result.features[bl.name] = h;
    if (observer) observer->block_end(bl.name);
  }
  if (h.shape() != video_shape) {
    throw ShapeError("decoder produced " + to_string(h.shape()) + ", expected " + to_string(video_shape));
  }
  result.video = std::move(h);
  return result;
}

template <typename T>
DecodeResult<T> Decoder<T>::forward(const Tensor<T>& latent, ForwardObserver* observer) const {
  return run(latent, observer, nullptr);
}

template <typename T>
DecodeResult<T> Decoder<T>::forward_train(const Tensor<T>& latent, ForwardTape<T>& tape) const {
  return run(latent, nullptr, &tape);
}

template <typename T>
ParamGrads<T> Decoder<T>::backward(const ForwardTape<T>& tape, const Tensor<T>& grad_video,
                                   const std::map<std::string, Tensor<T>>& feature_grads,
                                   Tensor<T>* input_grad) const {
  if (tape.blocks.size() != layout_.size()) throw ShapeError("tape does not belong to this decoder");
  for (const auto& [name, g] : feature_grads) {
    bool known = false;
    for (const auto& bl : layout_) known = known || bl.name == name;
    if (!known) throw ConfigError("feature gradient for unknown block '" + name + "'");
  }
  ParamGrads<T> grads;
  Tensor<T> g = grad_video;

  for (std::size_t bi = layout_.size(); bi-- > 0;) {
    const auto& bl = layout_[bi];
    const auto& tb = tape.blocks[bi];
    if (auto it = feature_grads.find(bl.name); it != feature_grads.end()) {
      accumulate(g, it->second);
    }
    if (bl.name == "head") {
      if (bl.upsample.r_s > 1) g = pixel_unshuffle_2d_video(g, bl.upsample.r_s);
      Tensor<T> gs = conv_backward(convs_.at(bl.head_conv->name), tb.head_s, g, grads);
      Tensor<T> ga = silu_grad(tb.head_a, gs);
      const auto& norm = norms_.at(bl.head_norm->name);
      auto gn = group_norm_grad(tb.input, norm.params, ga);
      add_grad(grads, norm.spec.name + "/gamma", as_span(gn.gamma));
      add_grad(grads, norm.spec.name + "/beta", as_span(gn.beta));
      g = std::move(gn.input);
      continue;
    }
    for (std::size_t ri = bl.resblocks.size(); ri-- > 0;) {
      const auto& rb = bl.resblocks[ri];
      const auto& r = tb.res[ri];
      Tensor<T> g_skip = rb.skip ? conv_backward(convs_.at(rb.skip->name), r.x, g, grads) : g;
      Tensor<T> gs2 = conv_backward(convs_.at(rb.conv2.name), r.s2, g, grads);
      Tensor<T> ga2 = silu_grad(r.a2, gs2);
      auto gn2 = group_norm_grad(r.c1, norms_.at(rb.norm2.name).params, ga2);
      add_grad(grads, rb.norm2.name + "/gamma", as_span(gn2.gamma));
      add_grad(grads, rb.norm2.name + "/beta", as_span(gn2.beta));
      Tensor<T> gs1 = conv_backward(convs_.at(rb.conv1.name), r.s1, gn2.input, grads);
      Tensor<T> ga1 = silu_grad(r.a1, gs1);
      auto gn1 = group_norm_grad(r.x, norms_.at(rb.norm1.name).params, ga1);
      add_grad(grads, rb.norm1.name + "/gamma", as_span(gn1.gamma));
      add_grad(grads, rb.norm1.name + "/beta", as_span(gn1.beta));
      g = std::move(gn1.input);
      accumulate(g, g_skip);
    }
    if (bl.entry_conv) {
      if (bl.entry_conv->name.ends_with("/upsample_conv")) g = upsample_grad(g, bl.upsample);
      g = conv_backward(convs_.at(bl.entry_conv->name), tb.input, g, grads);
    }
  }
  if (input_grad) *input_grad = std::move(g);
  return grads;
}

#define TURBOVAED_INSTANTIATE(T)                                                                          \
  template class Decoder<T>;                                                                              \
  template Tensor<T> conv_forward(const ConvModule<T>&, const Tensor<T>&);                                \
  template Tensor<T> conv_backward(const ConvModule<T>&, const Tensor<T>&, const Tensor<T>&, ParamGrads<T>&);

TURBOVAED_INSTANTIATE(float)
TURBOVAED_INSTANTIATE(double)

#undef TURBOVAED_INSTANTIATE

template Decoder<double> Decoder<float>::cast<double>() const;
template Decoder<float> Decoder<double>::cast<float>() const;
template Decoder<float> Decoder<float>::cast<float>() const;
template Decoder<double> Decoder<double>::cast<double>() const;

}  // namespace turbovaed
