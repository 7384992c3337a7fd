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


// Runtime decoder: holds weights for a DecoderConfig and runs the forward
// pass, optionally recording a tape for the reverse pass used in training.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "turbovaed/decoder_config.hpp"
#include "turbovaed/nn_ops.hpp"
#include "turbovaed/tensor.hpp"
#include "turbovaed/weights_io.hpp"

namespace turbovaed {

// Block boundary callbacks, fired from inside forward(). Used by the profiler.
class ForwardObserver {
 public:
  virtual ~ForwardObserver() = default;
  virtual void block_begin(const std::string& /*block*/) {}
  virtual void block_end(const std::string& /*block*/) {}
};

template <typename T>
struct ConvModule {
  ConvSpec spec;
  Conv3dParams<T> standard;    // kind == standard (incl. 1x1x1 skips)
  DwSepConv3dParams<T> dwsep;  // kind == dwsep
};

template <typename T>
struct NormModule {
  NormSpec spec;
  GroupNormParams<T> params;
};

template <typename T>
struct ParamView {
  std::string name;
  std::vector<std::int64_t> shape;
  std::span<T> values;
};

template <typename T>
using ParamGrads = std::map<std::string, std::vector<T>>;

template <typename T>
struct DecodeResult {
  Tensor<T> video;
  // Post-block output of every block, head included.
  std::map<std::string, Tensor<T>> features;
};

// Intermediates kept by forward_train for the reverse pass.
template <typename T>
struct ForwardTape {
  struct Res {
    Tensor<T> x, a1, s1, c1, a2, s2;
  };
  struct Block {
    std::string name;
    Tensor<T> input;
    std::vector<Res> res;
    Tensor<T> head_a, head_s;  // head only
  };
  std::vector<Block> blocks;
};

template <typename T>
class Decoder {
 public:
  // Throws LoadError carrying the validation report if `weights` does not
  // match the config.
  Decoder(const DecoderConfig& cfg, const WeightStore& weights);

  // Normal(0, 1/sqrt(fan_in)) weights, zero biases, unit gammas.
  static Decoder initialized(const DecoderConfig& cfg, std::uint64_t seed);

  const DecoderConfig& config() const { return cfg_; }
  const std::vector<BlockLayout>& layout() const { return layout_; }

  DecodeResult<T> forward(const Tensor<T>& latent, ForwardObserver* observer = nullptr) const;
  DecodeResult<T> forward_train(const Tensor<T>& latent, ForwardTape<T>& tape) const;

  // Reverse pass. `feature_grads` adds upstream gradients at block outputs
  // (keys are block names); `input_grad`, if non-null, receives d/d latent.
  ParamGrads<T> backward(const ForwardTape<T>& tape, const Tensor<T>& grad_video,
                         const std::map<std::string, Tensor<T>>& feature_grads = {},
                         Tensor<T>* input_grad = nullptr) const;

  // Views in param_specs(cfg) order.
  std::vector<ParamView<T>> parameters();
  std::vector<ParamView<const T>> parameters() const;
  std::int64_t num_parameters() const;

  WeightStore to_store() const;

  template <typename U>
  Decoder<U> cast() const;

 private:
  explicit Decoder(const DecoderConfig& cfg);
  template <typename U>
  friend class Decoder;

  DecodeResult<T> run(const Tensor<T>& latent, ForwardObserver* observer, ForwardTape<T>* tape) const;
  Tensor<T> upsample(const Tensor<T>& x, const UpsampleFactors& f) const;
  Tensor<T> upsample_grad(const Tensor<T>& g, const UpsampleFactors& f) const;

  DecoderConfig cfg_;
  std::vector<BlockLayout> layout_;
  std::map<std::string, ConvModule<T>> convs_;
  std::map<std::string, NormModule<T>> norms_;
};

// Forward of a single conv module (any kind).
template <typename T>
Tensor<T> conv_forward(const ConvModule<T>& m, const Tensor<T>& x);
// Reverse of conv_forward; parameter gradients are accumulated into `grads`.
template <typename T>
Tensor<T> conv_backward(const ConvModule<T>& m, const Tensor<T>& x, const Tensor<T>& upstream, ParamGrads<T>& grads);

}  // namespace turbovaed
