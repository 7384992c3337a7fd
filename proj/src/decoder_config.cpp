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

#include "turbovaed/decoder_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace turbovaed {

using nlohmann::json;

const char* to_string(ConvKind k) { return k == ConvKind::dwsep ? "dwsep" : "standard"; }
const char* to_string(UpsampleMode m) { return m == UpsampleMode::decoupled ? "decoupled" : "pixel_shuffle_3d"; }

namespace {

ConvKind parse_conv_kind(const std::string& s) {
  if (s == "standard") return ConvKind::standard;
  if (s == "dwsep") return ConvKind::dwsep;
  throw ConfigError("unknown conv_kind '" + s + "'");
}

UpsampleMode parse_upsample_mode(const std::string& s) {
  if (s == "decoupled") return UpsampleMode::decoupled;
  if (s == "pixel_shuffle_3d") return UpsampleMode::pixel_shuffle_3d;
  throw ConfigError("unknown upsample_mode '" + s + "'");
}

std::string up_name(std::size_t i) { return "up_" + std::to_string(i); }

void require_odd(std::int64_t k, const std::string& what) {
  if (k < 1 || k % 2 == 0) throw ConfigError(what + " must be a positive odd integer, got " + std::to_string(k));
}

}  // namespace

std::array<std::int64_t, 3> DecoderConfig::factors() const {
  std::int64_t dt = 1, ds = 1;
  for (const auto& b : blocks) {
    dt *= b.upsample.r_t;
    ds *= b.upsample.r_s;
  }
  ds *= head.upsample_spatial;
  return {dt, ds, ds};
}

std::vector<std::string> DecoderConfig::block_names() const {
  std::vector<std::string> names;
  for (const auto& b : blocks) names.push_back(b.name);
  names.emplace_back("head");
  return names;
}

const BlockConfig& DecoderConfig::block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw ConfigError("unknown block '" + name + "'");
}

BlockConfig& DecoderConfig::block(const std::string& name) {
  return const_cast<BlockConfig&>(static_cast<const DecoderConfig&>(*this).block(name));
}

void DecoderConfig::validate() const {
  if (latent_channels < 1) throw ConfigError("latent_channels must be >= 1");
  if (out_channels < 1) throw ConfigError("out_channels must be >= 1");
  if (norm_groups < 1) throw ConfigError("norm_groups must be >= 1");
  if (!(norm_eps > 0.0)) throw ConfigError("norm_eps must be positive");
  if (blocks.empty()) throw ConfigError("decoder needs at least the mid block");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string expected = i == 0 ? "mid" : up_name(i - 1);
    if (b.name != expected) throw ConfigError("block " + std::to_string(i) + " must be named '" + expected + "'");
    if (b.channels < 1) throw ConfigError(b.name + ": channels must be >= 1");
    if (b.num_resblocks < 0) throw ConfigError(b.name + ": num_resblocks must be >= 0");
    b.upsample.validate();
    if (i == 0 && (b.upsample.r_t != 1 || b.upsample.r_s != 1)) throw ConfigError("mid block cannot upsample");
    require_odd(b.kernel_size, b.name + ".kernel_size");
    require_odd(b.dwsep_kernel_size, b.name + ".dwsep_kernel_size");
    if (b.channels % norm_groups != 0) {
      throw ConfigError(b.name + ": " + std::to_string(b.channels) + " channels not divisible by norm_groups " +
                        std::to_string(norm_groups));
    }
  }
  if (head.upsample_spatial < 1) throw ConfigError("head.upsample_spatial must be >= 1");
  require_odd(head.kernel_size, "head.kernel_size");
}

LatentSpec latent_spec_for_video(const DecoderConfig& cfg, std::int64_t video_frames, std::int64_t height,
                                 std::int64_t width) {
  const auto [dt, dh, dw] = cfg.factors();
  const std::int64_t t = video_frames - 1;
  if (t < 0 || t % dt || height % dh || width % dw || height < dh || width < dw) {
    throw ShapeError("video (" + std::to_string(video_frames) + " frames, " + std::to_string(height) + "x" +
                     std::to_string(width) + ") incompatible with factors (" + std::to_string(dt) + "," +
                     std::to_string(dh) + "," + std::to_string(dw) + ")");
  }
  return {cfg.latent_channels, t / dt + 1, height / dh, width / dw};
}

Shape5 video_shape_for_latent(const DecoderConfig& cfg, const Shape5& latent) {
  if (latent[1] != cfg.latent_channels) {
    throw ShapeError("latent channel extent is " + std::to_string(latent[1]) + ", config expects " +
                     std::to_string(cfg.latent_channels));
  }
  for (int a = 0; a < 5; ++a) {
    if (latent[static_cast<std::size_t>(a)] < 1) throw ShapeError("latent " + to_string(latent) + " has an empty extent");
  }
  const auto [dt, dh, dw] = cfg.factors();
  return {latent[0], cfg.out_channels, dt * (latent[2] - 1) + 1, dh * latent[3], dw * latent[4]};
}

std::vector<std::pair<std::string, Shape5>> feature_shapes(const DecoderConfig& cfg, const Shape5& latent) {
  video_shape_for_latent(cfg, latent);
  std::vector<std::pair<std::string, Shape5>> out;
  Shape5 s = latent;
  for (const auto& b : cfg.blocks) {
    s[1] = b.channels;
    s[2] = b.upsample.r_t * (s[2] - 1) + 1;
    s[3] *= b.upsample.r_s;
    s[4] *= b.upsample.r_s;
    out.emplace_back(b.name, s);
  }
  s[1] = cfg.out_channels;
  s[3] *= cfg.head.upsample_spatial;
  s[4] *= cfg.head.upsample_spatial;
  out.emplace_back("head", s);
  return out;
}

DecoderConfig default_config(std::int64_t d_t, std::int64_t d_h, std::int64_t d_w) {
  auto block = [](std::string name, std::int64_t ch, std::int64_t res, std::int64_t rt, std::int64_t rs,
                  ConvKind kind) {
    BlockConfig b;
    b.name = std::move(name);
    b.channels = ch;
    b.num_resblocks = res;
    b.upsample = {rt, rs};
    b.conv_kind = kind;
    return b;
  };
  constexpr auto dws = ConvKind::dwsep;
  constexpr auto std_ = ConvKind::standard;
  DecoderConfig cfg;
  if (d_t == 8 && d_h == 32 && d_w == 32) {
    cfg.latent_channels = 128;
    cfg.blocks = {block("mid", 512, 1, 1, 1, dws), block("up_0", 512, 2, 1, 1, dws),
                  block("up_1", 256, 2, 2, 2, std_), block("up_2", 128, 2, 2, 2, std_),
                  block("up_3", 128, 2, 2, 2, std_)};
    cfg.head.upsample_spatial = 4;
  } else if (d_t == 4 && d_h == 32 && d_w == 32) {
    cfg.latent_channels = 128;
    cfg.blocks = {block("mid", 512, 1, 1, 1, dws), block("up_0", 512, 2, 1, 1, dws),
                  block("up_1", 256, 2, 2, 2, std_), block("up_2", 128, 2, 2, 2, std_),
                  block("up_3", 128, 2, 1, 2, std_)};
    cfg.head.upsample_spatial = 4;
  } else if (d_t == 4 && d_h == 8 && d_w == 8) {
    cfg.latent_channels = 16;
    cfg.blocks = {block("mid", 512, 1, 1, 1, dws), block("up_0", 512, 2, 1, 1, dws),
                  block("up_1", 256, 2, 2, 2, std_), block("up_2", 128, 2, 2, 2, std_),
                  block("up_3", 128, 2, 1, 2, std_)};
    cfg.head.upsample_spatial = 1;
  } else {
    throw ConfigError("no built-in config for factors (" + std::to_string(d_t) + "," + std::to_string(d_h) + "," +
                      std::to_string(d_w) + ")");
  }
  cfg.validate();
  return cfg;
}

DecoderConfig with_scaled_widths(DecoderConfig cfg, std::int64_t divisor, std::int64_t norm_groups) {
  if (divisor < 1) throw ConfigError("width divisor must be >= 1");
  for (auto& b : cfg.blocks) {
    if (b.channels % divisor) throw ConfigError(b.name + ": width not divisible by " + std::to_string(divisor));
    b.channels /= divisor;
  }
  cfg.norm_groups = norm_groups;
  cfg.validate();
  return cfg;
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename V>
V get_or(const json& j, const char* key, V fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

json to_json(const DecoderConfig& cfg) {
  json blocks = json::array();
  for (const auto& b : cfg.blocks) {
    blocks.push_back({{"name", b.name},
                      {"channels", b.channels},
                      {"num_resblocks", b.num_resblocks},
                      {"upsample", {b.upsample.r_t, b.upsample.r_s}},
                      {"conv_kind", to_string(b.conv_kind)},
                      {"kernel_size", b.kernel_size},
                      {"dwsep_kernel_size", b.dwsep_kernel_size}});
  }
  const auto f = cfg.factors();
  return {{"latent_channels", cfg.latent_channels},
          {"out_channels", cfg.out_channels},
          {"norm_groups", cfg.norm_groups},
          {"norm_eps", cfg.norm_eps},
          {"temporal_padding", to_string(cfg.temporal_padding)},
          {"upsample_mode", to_string(cfg.upsample_mode)},
          {"factors", {f[0], f[1], f[2]}},
          {"blocks", blocks},
          {"head", {{"upsample_spatial", cfg.head.upsample_spatial}, {"kernel_size", cfg.head.kernel_size}}}};
}

DecoderConfig from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("decoder config must be a JSON object");
  reject_unknown_keys(j,
                      {"latent_channels", "out_channels", "norm_groups", "norm_eps", "temporal_padding",
                       "upsample_mode", "factors", "blocks", "head"},
                      "decoder config");
  DecoderConfig cfg;
  cfg.latent_channels = get_or<std::int64_t>(j, "latent_channels", cfg.latent_channels);
  cfg.out_channels = get_or<std::int64_t>(j, "out_channels", cfg.out_channels);
  cfg.norm_groups = get_or<std::int64_t>(j, "norm_groups", cfg.norm_groups);
  cfg.norm_eps = get_or<double>(j, "norm_eps", cfg.norm_eps);
  cfg.temporal_padding =
      parse_temporal_padding(get_or<std::string>(j, "temporal_padding", to_string(cfg.temporal_padding)));
  cfg.upsample_mode = parse_upsample_mode(get_or<std::string>(j, "upsample_mode", to_string(cfg.upsample_mode)));
  if (!j.contains("blocks") || !j.at("blocks").is_array()) throw ConfigError("config needs a 'blocks' array");
  for (const auto& jb : j.at("blocks")) {
    if (!jb.is_object()) throw ConfigError("each block must be an object");
    reject_unknown_keys(jb,
                        {"name", "channels", "num_resblocks", "upsample", "conv_kind", "kernel_size",
                         "dwsep_kernel_size"},
                        "block");
    BlockConfig b;
    b.name = get_or<std::string>(jb, "name", "");
    b.channels = get_or<std::int64_t>(jb, "channels", 0);
    b.num_resblocks = get_or<std::int64_t>(jb, "num_resblocks", b.num_resblocks);
    if (jb.contains("upsample")) {
      const auto up = get_or<std::vector<std::int64_t>>(jb, "upsample", {});
      if (up.size() != 2) throw ConfigError(b.name + ": upsample must be [r_t, r_s]");
      b.upsample = {up[0], up[1]};
    }
    const bool low_res = b.name == "mid" || b.name == "up_0";
    b.conv_kind = parse_conv_kind(get_or<std::string>(jb, "conv_kind", low_res ? "dwsep" : "standard"));
    b.kernel_size = get_or<std::int64_t>(jb, "kernel_size", b.kernel_size);
    b.dwsep_kernel_size = get_or<std::int64_t>(jb, "dwsep_kernel_size", b.dwsep_kernel_size);
    cfg.blocks.push_back(std::move(b));
  }
  if (j.contains("head")) {
    const auto& jh = j.at("head");
    if (!jh.is_object()) throw ConfigError("'head' must be an object");
    reject_unknown_keys(jh, {"upsample_spatial", "kernel_size"}, "head");
    cfg.head.upsample_spatial = get_or<std::int64_t>(jh, "upsample_spatial", cfg.head.upsample_spatial);
    cfg.head.kernel_size = get_or<std::int64_t>(jh, "kernel_size", cfg.head.kernel_size);
  }
  cfg.validate();
  if (j.contains("factors")) {
    const auto f = get_or<std::vector<std::int64_t>>(j, "factors", {});
    const auto actual = cfg.factors();
    if (f.size() != 3 || f[0] != actual[0] || f[1] != actual[1] || f[2] != actual[2]) {
      throw ConfigError("declared factors do not equal the product of per-block upsample factors (" +
                        std::to_string(actual[0]) + "," + std::to_string(actual[1]) + "," +
                        std::to_string(actual[2]) + ")");
    }
  }
  return cfg;
}

}  // namespace

DecoderConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

DecoderConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str());
}

std::string config_to_json(const DecoderConfig& cfg, int indent) { return to_json(cfg).dump(indent); }

DecoderConfig apply_overrides(const DecoderConfig& cfg, const std::vector<std::string>& overrides) {
  json j = to_json(cfg);
  j.erase("factors");
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not key=value");
    const std::string path = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    std::vector<std::string> keys;
    std::stringstream ps(path);
    for (std::string k; std::getline(ps, k, '.');) keys.push_back(k);
    json* node = &j;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const bool last = i + 1 == keys.size();
      if (node->is_array()) {
        json* found = nullptr;
        for (auto& el : *node) {
          if (el.is_object() && el.value("name", "") == keys[i]) found = &el;
        }
        if (!found) throw ConfigError("override '" + ov + "': no element named '" + keys[i] + "'");
        if (last) throw ConfigError("override '" + ov + "' must name a field of the block");
        node = found;
        continue;
      }
      if (!node->is_object()) throw ConfigError("override '" + ov + "': '" + keys[i] + "' is not a container");
      if (last) {
        (*node)[keys[i]] = value;
      } else {
        if (!node->contains(keys[i])) throw ConfigError("override '" + ov + "': unknown key '" + keys[i] + "'");
        node = &(*node)[keys[i]];
      }
    }
  }
  return from_json(j);
}

// ---- Layout ----------------------------------------------------------------

std::vector<BlockLayout> make_layout(const DecoderConfig& cfg) {
  cfg.validate();
  std::vector<BlockLayout> layout;
  std::int64_t prev = cfg.latent_channels;

  auto conv = [](std::string name, ConvKind kind, std::int64_t ci, std::int64_t co, std::int64_t k) {
    ConvSpec s;
    s.name = std::move(name);
    s.kind = kind;
    s.c_in = ci;
    s.c_out = co;
    s.kernel = k;
    return s;
  };

  for (const auto& b : cfg.blocks) {
    BlockLayout bl;
    bl.name = b.name;
    bl.upsample = b.upsample;
    const std::int64_t k = b.active_kernel();
    if (b.name == "mid") {
      bl.entry_conv = conv(b.name + "/conv_in", b.conv_kind, prev, b.channels, k);
      prev = b.channels;
    } else if (b.upsample.channel_multiplier() > 1) {
      bl.entry_conv =
          conv(b.name + "/upsample_conv", b.conv_kind, prev, b.upsample.channel_multiplier() * b.channels, k);
      prev = b.channels;
    }
    for (std::int64_t r = 0; r < b.num_resblocks; ++r) {
      ResBlockSpec rb;
      rb.name = b.name + "/res" + std::to_string(r);
      rb.norm1 = {rb.name + "/norm1", prev};
      rb.conv1 = conv(rb.name + "/conv1", b.conv_kind, prev, b.channels, k);
      rb.norm2 = {rb.name + "/norm2", b.channels};
      rb.conv2 = conv(rb.name + "/conv2", b.conv_kind, b.channels, b.channels, k);
      if (prev != b.channels) {
        ConvSpec skip = conv(rb.name + "/skip", ConvKind::standard, prev, b.channels, 1);
        skip.pointwise_only = true;
        rb.skip = skip;
      }
      rb.norm1.channels = prev;
      prev = b.channels;
      bl.resblocks.push_back(std::move(rb));
    }
    if (prev != b.channels) {
      // num_resblocks == 0 without an entry conv: a pointwise projection keeps
      // the declared width.
      ConvSpec proj = conv(b.name + "/proj", ConvKind::standard, prev, b.channels, 1);
      proj.pointwise_only = true;
      bl.entry_conv = proj;
      prev = b.channels;
    }
    bl.out_channels = prev;
    layout.push_back(std::move(bl));
  }

  BlockLayout head;
  head.name = "head";
  head.head_norm = NormSpec{"head/norm", prev};
  const std::int64_t r = cfg.head.upsample_spatial;
  head.head_conv = conv("head/conv", ConvKind::standard, prev, cfg.out_channels * r * r, cfg.head.kernel_size);
  head.upsample = {1, r};
  head.out_channels = cfg.out_channels;
  layout.push_back(std::move(head));
  return layout;
}

std::int64_t ParamSpec::numel() const {
  std::int64_t n = 1;
  for (const auto e : shape) n *= e;
  return n;
}

std::vector<ParamSpec> param_specs(const ConvSpec& c) {
  if (c.kind == ConvKind::dwsep) {
    return {{c.name + "/depthwise/weight", {c.c_in, 1, c.kernel, c.kernel, c.kernel}},
            {c.name + "/depthwise/bias", {c.c_in}},
            {c.name + "/pointwise/weight", {c.c_out, c.c_in, 1, 1, 1}},
            {c.name + "/pointwise/bias", {c.c_out}}};
  }
  return {{c.name + "/weight", {c.c_out, c.c_in, c.kernel, c.kernel, c.kernel}}, {c.name + "/bias", {c.c_out}}};
}

std::vector<ParamSpec> param_specs(const NormSpec& n) {
  return {{n.name + "/gamma", {n.channels}}, {n.name + "/beta", {n.channels}}};
}

namespace {

std::vector<ParamSpec> block_param_specs(const BlockLayout& bl) {
  std::vector<ParamSpec> out;
  auto append = [&out](std::vector<ParamSpec> v) { out.insert(out.end(), v.begin(), v.end()); };
  if (bl.entry_conv) append(param_specs(*bl.entry_conv));
  for (const auto& rb : bl.resblocks) {
    append(param_specs(rb.norm1));
    append(param_specs(rb.conv1));
    append(param_specs(rb.norm2));
    append(param_specs(rb.conv2));
    if (rb.skip) append(param_specs(*rb.skip));
  }
  if (bl.head_norm) append(param_specs(*bl.head_norm));
  if (bl.head_conv) append(param_specs(*bl.head_conv));
  return out;
}

}  // namespace

std::vector<ParamSpec> param_specs(const DecoderConfig& cfg) {
  std::vector<ParamSpec> out;
  for (const auto& bl : make_layout(cfg)) {
    auto v = block_param_specs(bl);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

ParamCount count_params(const DecoderConfig& cfg) {
  ParamCount pc;
  for (const auto& bl : make_layout(cfg)) {
    std::int64_t n = 0;
    for (const auto& s : block_param_specs(bl)) n += s.numel();
    pc.per_block.emplace_back(bl.name, n);
    pc.total += n;
  }
  return pc;
}

std::vector<SweepVariant> redundancy_sweep(const DecoderConfig& cfg, const std::string& replace_upto) {
  cfg.validate();
  std::size_t last = cfg.blocks.size();
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    if (cfg.blocks[i].name == replace_upto) last = i;
  }
  if (last == cfg.blocks.size()) throw ConfigError("unknown block '" + replace_upto + "' for redundancy sweep");

  DecoderConfig base = cfg;
  for (auto& b : base.blocks) b.conv_kind = ConvKind::standard;
  std::vector<SweepVariant> out;
  out.push_back({"none", base, count_params(base)});
  DecoderConfig v = base;
  for (std::size_t i = 0; i <= last; ++i) {
    v.blocks[i].conv_kind = ConvKind::dwsep;
    out.push_back({v.blocks[i].name, v, count_params(v)});
  }
  return out;
}

}  // namespace turbovaed
