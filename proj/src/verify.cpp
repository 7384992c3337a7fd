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

#include "turbovaed/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "turbovaed/decoder.hpp"
#include "turbovaed/decoder_config.hpp"
#include "turbovaed/distill.hpp"
#include "turbovaed/error.hpp"
#include "turbovaed/nn_ops.hpp"
#include "turbovaed/reference/reference_ops.hpp"

namespace turbovaed {

namespace {

using Clock = std::chrono::steady_clock;
using TensorD = Tensor<double>;

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

 private:
  Clock::time_point start_ = Clock::now();
};

std::string index_str(const Shape5& shape, std::int64_t flat) {
  Shape5 idx{};
  for (int a = 4; a >= 0; --a) {
    const auto ext = shape[static_cast<std::size_t>(a)];
    idx[static_cast<std::size_t>(a)] = flat % ext;
    flat /= ext;
  }
  return to_string(idx);
}

// Empty string when equal, otherwise a description of the first difference.
std::string first_difference(const TensorD& got, const TensorD& want) {
  if (got.shape() != want.shape()) return "shape " + to_string(got.shape()) + " != " + to_string(want.shape());
  for (std::int64_t i = 0; i < got.numel(); ++i) {
    if (got[i] != want[i]) {
      std::ostringstream os;
      os << "at " << index_str(got.shape(), i) << " got " << got[i] << " expected " << want[i];
      return os.str();
    }
  }
  return {};
}

TensorD iota_tensor(const Shape5& shape) {
  TensorD x(shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<double>(i);
  return x;
}

TensorD random_tensor(const Shape5& shape, std::mt19937_64& rng, double scale = 1.0) {
  TensorD x(shape);
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& v : x.data()) v = nd(rng);
  return x;
}

std::vector<double> random_vector(std::int64_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& e : v) e = nd(rng);
  return v;
}

std::int64_t uniform(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

PropertyResult make_property(std::string suite, std::string name) {
  PropertyResult r;
  r.suite = std::move(suite);
  r.property = std::move(name);
  return r;
}

void record_failure(PropertyResult& r, const std::string& what) {
  if (r.failures == 0) r.counterexample = what;
  ++r.failures;
  r.passed = false;
}

// ---- finite differences ------------------------------------------------------

struct GradArg {
  std::string name;
  std::span<double> values;
  std::vector<double> grad;
};

struct GradCheck {
  double worst = 0.0;
  std::string detail;
};

constexpr double kStep = 1e-5;
// Directional derivatives below kFloor * max(1, |loss|) are compared in
// absolute terms; central differences carry roundoff near 1e-11 * |loss|.
constexpr double kFloor = 1e-5;

// Compares <grad, v> with a central difference of `loss` along random unit
// directions v, separately for each argument.
GradCheck check_directions(const std::function<double()>& loss, std::vector<GradArg>& args, std::mt19937_64& rng,
                           int directions) {
  GradCheck out;
  const double floor = kFloor * std::max(1.0, std::abs(loss()));
  for (auto& arg : args) {
    if (arg.values.empty()) continue;
    if (arg.grad.size() != arg.values.size()) {
      out.worst = std::numeric_limits<double>::infinity();
      out.detail = arg.name + ": gradient has " + std::to_string(arg.grad.size()) + " entries for " +
                   std::to_string(arg.values.size()) + " values";
      return out;
    }
    for (int d = 0; d < directions; ++d) {
      std::vector<double> v = random_vector(static_cast<std::int64_t>(arg.values.size()), rng);
      const double norm = std::sqrt(dot(v, v));
      for (auto& e : v) e /= norm;
      const std::vector<double> saved(arg.values.begin(), arg.values.end());
      for (std::size_t i = 0; i < v.size(); ++i) arg.values[i] = saved[i] + kStep * v[i];
      const double plus = loss();
      for (std::size_t i = 0; i < v.size(); ++i) arg.values[i] = saved[i] - kStep * v[i];
      const double minus = loss();
      std::copy(saved.begin(), saved.end(), arg.values.begin());
      const double numeric = (plus - minus) / (2.0 * kStep);
      const double analytic = dot(arg.grad, v);
      const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), floor});
      if (rel > out.worst || std::isnan(rel)) {
        out.worst = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
        std::ostringstream os;
        os << arg.name << ": analytic " << analytic << " numeric " << numeric << " rel " << rel;
        out.detail = os.str();
      }
    }
  }
  return out;
}

std::vector<double> to_vec(const TensorD& t) { return t.flatten(); }

// Target at least 0.5 away from `base` in every element, so L1 terms stay
// differentiable across the finite-difference stencil.
TensorD offset_from(const TensorD& base, std::mt19937_64& rng) {
  TensorD out = base;
  std::normal_distribution<double> nd;
  for (auto& v : out.data()) {
    const double d = nd(rng);
    v += (d < 0 ? -1.0 : 1.0) * (0.5 + std::abs(d));
  }
  return out;
}

// Runs `instances` random cases of one gradient property.
PropertyResult grad_property(const std::string& name, std::int64_t instances, double tolerance, std::mt19937_64& rng,
                             const std::function<GradCheck(std::mt19937_64&, std::string&)>& one) {
  Stopwatch sw;
  PropertyResult r = make_property("grad", name);
  r.tolerance = tolerance;
  for (std::int64_t i = 0; i < instances; ++i) {
    std::string desc;
    GradCheck c;
    try {
      c = one(rng, desc);
    } catch (const Error& e) {
      record_failure(r, "instance " + std::to_string(i) + " (" + desc + "): " + e.what());
      ++r.cases;
      continue;
    }
    ++r.cases;
    r.worst_error = std::max(r.worst_error, c.worst);
    if (!(c.worst < tolerance)) record_failure(r, "instance " + std::to_string(i) + " (" + desc + "): " + c.detail);
  }
  r.seconds = sw.seconds();
  return r;
}

TemporalPadding random_padding(std::mt19937_64& rng) {
  return uniform(rng, 0, 1) ? TemporalPadding::causal_replicate : TemporalPadding::zero;
}

Shape5 random_shape(std::mt19937_64& rng, std::int64_t channels) {
  return {uniform(rng, 1, 2), channels, uniform(rng, 1, 3), uniform(rng, 1, 4), uniform(rng, 1, 4)};
}

// Loss <f(x), g> for a fixed random g.
struct Projection {
  TensorD g;
  double operator()(const TensorD& y) const {
    if (y.shape() != g.shape()) throw ShapeError("probe shape changed");
    return dot(y.data(), g.data());
  }
};

}  // namespace

// ---- report ------------------------------------------------------------------

bool VerifyReport::passed() const {
  return std::all_of(properties.begin(), properties.end(), [](const PropertyResult& p) { return p.passed; });
}

const PropertyResult& VerifyReport::property(const std::string& name) const {
  for (const auto& p : properties) {
    if (p.property == name) return p;
  }
  throw ConfigError("no property named " + name);
}

void VerifyReport::append(const VerifyReport& other) {
  properties.insert(properties.end(), other.properties.begin(), other.properties.end());
}

std::string VerifyReport::to_text() const {
  std::ostringstream os;
  for (const auto& p : properties) {
    os << (p.passed ? "PASS " : "FAIL ") << p.suite << '/' << p.property << "  cases=" << p.cases;
    if (p.tolerance > 0.0) os << " worst=" << p.worst_error << " tol=" << p.tolerance;
    os << " time=" << p.seconds << "s\n";
    if (!p.passed) os << "     " << p.failures << " failing case(s); first: " << p.counterexample << "\n";
  }
  os << (passed() ? "all properties hold\n" : "verification FAILED\n");
  return os.str();
}

std::string VerifyReport::to_json() const {
  nlohmann::json j;
  j["kind"] = "verify";
  j["passed"] = passed();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : properties) {
    nlohmann::json e{{"suite", p.suite},
                     {"property", p.property},
                     {"passed", p.passed},
                     {"cases", p.cases},
                     {"failures", p.failures},
                     {"worst_error", p.worst_error},
                     {"tolerance", p.tolerance},
                     {"seconds", p.seconds}};
    e["counterexample"] = p.passed ? nlohmann::json(nullptr) : nlohmann::json(p.counterexample);
    arr.push_back(std::move(e));
  }
  j["properties"] = std::move(arr);
  return j.dump(2);
}

// ---- upsample suite ----------------------------------------------------------

UpsampleImpls UpsampleImpls::library() {
  return {[](const TensorD& x, const UpsampleFactors& f) { return decoupled_upsample(x, f); },
          [](const TensorD& x, std::int64_t r) { return pixel_shuffle_2d_video(x, r); }};
}

std::vector<std::int64_t> derive_decoupled_permutation(std::int64_t out_channels, const UpsampleFactors& f) {
  f.validate();
  if (out_channels < 1) throw ShapeError("out_channels must be >= 1");
  const std::int64_t in_channels = out_channels * f.channel_multiplier();
  const TensorD x = iota_tensor({1, in_channels, 1, 1, 1});
  const TensorD via_decoupled =
      reference::pixel_shuffle_2d_video(reference::channel_to_time(x, f.r_t), f.r_s);
  const TensorD via_3d = reference::pixel_shuffle_3d(x, f.r_t, f.r_s);
  std::vector<std::int64_t> perm(static_cast<std::size_t>(in_channels), -1);
  for (std::int64_t i = 0; i < via_3d.numel(); ++i) {
    perm[static_cast<std::size_t>(via_3d[i])] = static_cast<std::int64_t>(via_decoupled[i]);
  }
  std::vector<bool> seen(perm.size(), false);
  for (const auto p : perm) {
    if (p < 0 || seen[static_cast<std::size_t>(p)]) throw ShapeError("reference rearrangements are not a bijection");
    seen[static_cast<std::size_t>(p)] = true;
  }
  return perm;
}

VerifyReport verify_upsample(const UpsampleImpls& impls, const UpsampleSuiteOptions& opt) {
  VerifyReport report;

  struct Case {
    std::int64_t c, t, h, w;
    UpsampleFactors f;
    std::int64_t size() const { return c * t * h * w * f.channel_multiplier(); }
  };
  std::vector<Case> cases;
  for (std::int64_t c = 1; c <= opt.max_channels; ++c)
    for (std::int64_t t = 1; t <= opt.max_extent; ++t)
      for (std::int64_t h = 1; h <= opt.max_extent; ++h)
        for (std::int64_t w = 1; w <= opt.max_extent; ++w)
          for (std::int64_t rt = 1; rt <= opt.max_factor; ++rt)
            for (std::int64_t rs = 1; rs <= opt.max_factor; ++rs) cases.push_back({c, t, h, w, {rt, rs}});
  // Smallest cases first, so the first failure is a minimal counterexample.
  std::stable_sort(cases.begin(), cases.end(), [](const Case& a, const Case& b) { return a.size() < b.size(); });

  auto describe = [](const Case& k) {
    std::ostringstream os;
    os << "C'=" << k.c << " T=" << k.t << " H=" << k.h << " W=" << k.w << " r_t=" << k.f.r_t << " r_s=" << k.f.r_s;
    return os.str();
  };

  PropertyResult equiv = make_property("upsample", "decoupled_equals_permuted_3d_shuffle");
  PropertyResult two_step = make_property("upsample", "two_step_equals_permuted_3d_shuffle");
  PropertyResult shuffle_ref = make_property("upsample", "pixel_shuffle_3d_matches_reference");
  PropertyResult inverse = make_property("upsample", "decoupled_downsample_inverts_upsample");
  Stopwatch sw;
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::int64_t>> perms;
  for (const auto& k : cases) {
    auto& perm = perms[{k.f.r_t, k.f.r_s}];
    if (perm.size() != static_cast<std::size_t>(k.c * k.f.channel_multiplier())) {
      perm = derive_decoupled_permutation(k.c, k.f);
    }
    const TensorD x = iota_tensor({1, k.c * k.f.channel_multiplier(), k.t, k.h, k.w});
    const TensorD want = pixel_shuffle_3d(permute_channels(x, perm), k.f.r_t, k.f.r_s);

    auto check = [&](PropertyResult& r, const std::function<TensorD()>& fn) {
      ++r.cases;
      std::string diff;
      try {
        diff = first_difference(fn(), want);
      } catch (const Error& e) {
        diff = e.what();
      }
      if (!diff.empty()) record_failure(r, describe(k) + ": " + diff);
    };
    check(equiv, [&] { return impls.decoupled(x, k.f); });
    check(two_step, [&] { return decoupled_upsample_two_step(x, k.f); });

    ++shuffle_ref.cases;
    const std::string d3 = first_difference(pixel_shuffle_3d(x, k.f.r_t, k.f.r_s),
                                            reference::pixel_shuffle_3d(x, k.f.r_t, k.f.r_s));
    if (!d3.empty()) record_failure(shuffle_ref, describe(k) + ": " + d3);

    ++inverse.cases;
    std::string dinv;
    try {
      dinv = first_difference(decoupled_downsample(impls.decoupled(x, k.f), k.f), x);
    } catch (const Error& e) {
      dinv = e.what();
    }
    if (!dinv.empty()) record_failure(inverse, describe(k) + ": " + dinv);
  }
  const double t_exhaustive = sw.seconds();
  for (auto* r : {&equiv, &two_step, &shuffle_ref, &inverse}) {
    r->seconds = t_exhaustive / 4.0;
    report.properties.push_back(*r);
  }

  // Closed-form 2D index formula, one random output element per probe.
  Stopwatch sw3;
  PropertyResult index_check = make_property("upsample", "shuffle_2d_index_formula");
  std::mt19937_64 rng(opt.seed * 0x9e3779b97f4a7c15ULL + 3);
  for (std::int64_t p = 0; p < opt.index_probes; ++p) {
    const std::int64_t C = uniform(rng, 1, 4), r = uniform(rng, 1, 3);
    const std::int64_t T = uniform(rng, 1, 3), Hin = uniform(rng, 1, 4), Win = uniform(rng, 1, 4);
    const TensorD x = iota_tensor({1, C * r * r, T, Hin, Win});
    const std::int64_t c = uniform(rng, 0, C - 1), t = uniform(rng, 0, T - 1);
    const std::int64_t h = uniform(rng, 0, Hin * r - 1), w = uniform(rng, 0, Win * r - 1);
    const double want = x(0, reference::shuffle_2d_source_channel(C, r, c, h, w), t, h / r, w / r);
    ++index_check.cases;
    std::ostringstream os;
    os << "C=" << C << " r=" << r << " T=" << T << " H=" << Hin * r << " W=" << Win * r << " output (c,t,h,w)=(" << c
       << ',' << t << ',' << h << ',' << w << ")";
    try {
      const TensorD y = impls.shuffle_2d(x, r);
      if (y.shape() != Shape5{1, C, T, Hin * r, Win * r}) {
        record_failure(index_check, os.str() + ": output shape " + to_string(y.shape()));
      } else if (y(0, c, t, h, w) != want) {
        os << ": got " << y(0, c, t, h, w) << " expected " << want;
        record_failure(index_check, os.str());
      }
    } catch (const Error& e) {
      record_failure(index_check, os.str() + ": " + e.what());
    }
  }
  index_check.seconds = sw3.seconds();
  report.properties.push_back(index_check);
  return report;
}

// ---- dwsep suite -------------------------------------------------------------

VerifyReport verify_dwsep(std::int64_t instances, std::uint64_t seed, double tolerance) {
  VerifyReport report;
  PropertyResult fast = make_property("dwsep", "dwsep_equals_factorized_conv3d");
  PropertyResult ref = make_property("dwsep", "dwsep_equals_reference_factorized_conv3d");
  fast.tolerance = ref.tolerance = tolerance;
  Stopwatch sw;
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 5);
  const std::int64_t kernels[] = {1, 3, 5};
  for (std::int64_t i = 0; i < instances; ++i) {
    const std::int64_t ci = uniform(rng, 1, 4), co = uniform(rng, 1, 4);
    const std::int64_t kt = kernels[uniform(rng, 0, 2)], kh = kernels[uniform(rng, 0, 2)],
                       kw = kernels[uniform(rng, 0, 2)];
    const Shape5 xs{uniform(rng, 1, 2), ci, uniform(rng, 1, 4), uniform(rng, 1, 5), uniform(rng, 1, 5)};
    DwSepConv3dParams<double> p;
    p.depthwise = random_tensor({ci, 1, kt, kh, kw}, rng);
    p.pointwise = random_tensor({co, ci, 1, 1, 1}, rng);
    if (uniform(rng, 0, 1)) p.depthwise_bias = random_vector(ci, rng);
    if (uniform(rng, 0, 1)) p.pointwise_bias = random_vector(co, rng);
    p.temporal = random_padding(rng);
    const TensorD x = random_tensor(xs, rng);

    const TensorD y = dwsep_conv3d(x, p);
    const Conv3dParams<double> full = factorized_full_kernel(p);
    std::ostringstream os;
    os << "instance " << i << ": x " << to_string(xs) << " C_out=" << co << " k=(" << kt << ',' << kh << ',' << kw
       << ") padding " << to_string(p.temporal);
    auto compare = [&](PropertyResult& r, const TensorD& want) {
      ++r.cases;
      if (want.shape() != y.shape()) {
        record_failure(r, os.str() + ": shape " + to_string(y.shape()) + " vs " + to_string(want.shape()));
        return;
      }
      double scale = 0.0;
      for (const double v : want.data()) scale = std::max(scale, std::abs(v));
      const double rel = max_abs_diff(y, want) / std::max(scale, 1e-30);
      r.worst_error = std::max(r.worst_error, rel);
      if (!(rel < tolerance)) record_failure(r, os.str() + ": relative error " + std::to_string(rel));
    };
    compare(fast, conv3d(x, full));
    compare(ref, reference::conv3d(x, full));
  }
  fast.seconds = ref.seconds = sw.seconds() / 2.0;
  report.properties.push_back(fast);
  report.properties.push_back(ref);
  return report;
}

// ---- gradient suite ----------------------------------------------------------

namespace {

DecoderConfig tiny_decoder_config(std::mt19937_64& rng) {
  DecoderConfig cfg;
  cfg.latent_channels = 2;
  cfg.norm_groups = 2;
  cfg.upsample_mode = uniform(rng, 0, 1) ? UpsampleMode::decoupled : UpsampleMode::pixel_shuffle_3d;
  cfg.temporal_padding = random_padding(rng);
  auto block = [&](std::string name, std::int64_t ch, UpsampleFactors f, ConvKind kind) {
    BlockConfig b;
    b.name = std::move(name);
    b.channels = ch;
    b.num_resblocks = 1;
    b.upsample = f;
    b.conv_kind = kind;
    b.kernel_size = 3;
    b.dwsep_kernel_size = 3;
    return b;
  };
  const std::int64_t rt = uniform(rng, 1, 2), rs = uniform(rng, 1, 2);
  cfg.blocks = {block("mid", 4, {1, 1}, ConvKind::dwsep), block("up_0", 2, {1, 1}, ConvKind::dwsep),
                block("up_1", 2, {rt, rs}, ConvKind::standard)};
  cfg.head.upsample_spatial = uniform(rng, 1, 2);
  cfg.validate();
  return cfg;
}

}  // namespace

VerifyReport verify_grad(std::int64_t instances, std::uint64_t seed, double tolerance) {
  VerifyReport report;
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 7);
  auto add = [&](const std::string& name, const std::function<GradCheck(std::mt19937_64&, std::string&)>& one) {
    report.properties.push_back(grad_property(name, instances, tolerance, rng, one));
  };

  add("conv3d", [](std::mt19937_64& g, std::string& desc) {
    const std::int64_t ci = uniform(g, 1, 3), co = uniform(g, 1, 3);
    Conv3dParams<double> p;
    p.weight = random_tensor({co, ci, 2 * uniform(g, 0, 1) + 1, 2 * uniform(g, 0, 1) + 1, 2 * uniform(g, 0, 1) + 1}, g);
    if (uniform(g, 0, 1)) p.bias = random_vector(co, g);
    p.temporal = random_padding(g);
    TensorD x = random_tensor(random_shape(g, ci), g);
    desc = "x " + to_string(x.shape()) + " w " + to_string(p.weight.shape());
    const Projection proj{random_tensor(conv3d(x, p).shape(), g)};
    const auto grads = conv3d_grad(x, p, proj.g);
    std::vector<GradArg> args{{"input", x.data(), to_vec(grads.input)}, {"weight", p.weight.data(), to_vec(grads.weight)}};
    if (!p.bias.empty()) args.push_back({"bias", p.bias, grads.bias});
    return check_directions([&] { return proj(conv3d(x, p)); }, args, g, 2);
  });

  add("pointwise_conv3d", [](std::mt19937_64& g, std::string& desc) {
    const std::int64_t ci = uniform(g, 1, 4), co = uniform(g, 1, 4);
    TensorD w = random_tensor({co, ci, 1, 1, 1}, g);
    std::vector<double> b = uniform(g, 0, 1) ? random_vector(co, g) : std::vector<double>{};
    TensorD x = random_tensor(random_shape(g, ci), g);
    desc = "x " + to_string(x.shape()) + " C_out=" + std::to_string(co);
    const Projection proj{random_tensor(pointwise_conv3d(x, w, b).shape(), g)};
    const auto grads = pointwise_conv3d_grad(x, w, b, proj.g);
    std::vector<GradArg> args{{"input", x.data(), to_vec(grads.input)}, {"weight", w.data(), to_vec(grads.weight)}};
    if (!b.empty()) args.push_back({"bias", b, grads.bias});
    return check_directions([&] { return proj(pointwise_conv3d(x, w, b)); }, args, g, 2);
  });

  add("dwsep_conv3d", [](std::mt19937_64& g, std::string& desc) {
    const std::int64_t ci = uniform(g, 1, 3), co = uniform(g, 1, 3);
    DwSepConv3dParams<double> p;
    p.depthwise = random_tensor({ci, 1, 2 * uniform(g, 0, 1) + 1, 2 * uniform(g, 0, 1) + 1, 2 * uniform(g, 0, 1) + 1}, g);
    p.pointwise = random_tensor({co, ci, 1, 1, 1}, g);
    p.depthwise_bias = random_vector(ci, g);
    p.pointwise_bias = random_vector(co, g);
    p.temporal = random_padding(g);
    TensorD x = random_tensor(random_shape(g, ci), g);
    desc = "x " + to_string(x.shape()) + " depthwise " + to_string(p.depthwise.shape());
    const Projection proj{random_tensor(dwsep_conv3d(x, p).shape(), g)};
    const auto grads = dwsep_conv3d_grad(x, p, proj.g);
    std::vector<GradArg> args{{"input", x.data(), to_vec(grads.input)},
                              {"depthwise", p.depthwise.data(), to_vec(grads.depthwise)},
                              {"depthwise_bias", p.depthwise_bias, grads.depthwise_bias},
                              {"pointwise", p.pointwise.data(), to_vec(grads.pointwise)},
                              {"pointwise_bias", p.pointwise_bias, grads.pointwise_bias}};
    return check_directions([&] { return proj(dwsep_conv3d(x, p)); }, args, g, 2);
  });

  add("group_norm", [](std::mt19937_64& g, std::string& desc) {
    const std::int64_t groups = uniform(g, 1, 3), per = uniform(g, 1, 3);
    GroupNormParams<double> p;
    p.num_groups = groups;
    p.gamma = random_vector(groups * per, g);
    p.beta = random_vector(groups * per, g);
    Shape5 xs = random_shape(g, groups * per);
    if (per * xs[2] * xs[3] * xs[4] < 2) xs[4] = 2;
    TensorD x = random_tensor(xs, g);
    desc = "x " + to_string(xs) + " groups " + std::to_string(groups);
    const Projection proj{random_tensor(xs, g)};
    const auto grads = group_norm_grad(x, p, proj.g);
    std::vector<GradArg> args{{"input", x.data(), to_vec(grads.input)},
                              {"gamma", p.gamma, grads.gamma},
                              {"beta", p.beta, grads.beta}};
    return check_directions([&] { return proj(group_norm(x, p)); }, args, g, 2);
  });

  add("silu", [](std::mt19937_64& g, std::string& desc) {
    TensorD x = random_tensor(random_shape(g, uniform(g, 1, 3)), g, 3.0);
    desc = "x " + to_string(x.shape());
    const Projection proj{random_tensor(x.shape(), g)};
    std::vector<GradArg> args{{"input", x.data(), to_vec(silu_grad(x, proj.g))}};
    return check_directions([&] { return proj(silu(x)); }, args, g, 2);
  });

  // Rearrangements: the gradient is the inverse rearrangement.
  // `channels_per_output` gives the input channels consumed per output channel.
  auto rearrangement = [&](const std::string& name, auto forward, auto backward, auto channels_per_output) {
    add(name, [=](std::mt19937_64& g, std::string& desc) {
      const UpsampleFactors f{uniform(g, 1, 2), uniform(g, 1, 3)};
      const std::int64_t c = uniform(g, 1, 3);
      TensorD x = random_tensor(random_shape(g, c * channels_per_output(f)), g);
      desc = "x " + to_string(x.shape()) + " r_t=" + std::to_string(f.r_t) + " r_s=" + std::to_string(f.r_s);
      const Projection proj{random_tensor(forward(x, f).shape(), g)};
      std::vector<GradArg> args{{"input", x.data(), to_vec(backward(x, f, proj.g))}};
      return check_directions([&] { return proj(forward(x, f)); }, args, g, 2);
    });
  };
  const auto all_factors = [](const UpsampleFactors& f) { return f.channel_multiplier(); };
  const auto no_factor = [](const UpsampleFactors&) { return std::int64_t{1}; };
  rearrangement(
      "pixel_shuffle_3d", [](const TensorD& x, const UpsampleFactors& f) { return pixel_shuffle_3d(x, f.r_t, f.r_s); },
      [](const TensorD&, const UpsampleFactors& f, const TensorD& u) { return pixel_unshuffle_3d(u, f.r_t, f.r_s); },
      all_factors);
  rearrangement(
      "channel_to_time", [](const TensorD& x, const UpsampleFactors& f) { return channel_to_time(x, f.r_t); },
      [](const TensorD&, const UpsampleFactors& f, const TensorD& u) { return time_to_channel(u, f.r_t); },
      [](const UpsampleFactors& f) { return f.r_t; });
  rearrangement(
      "pixel_shuffle_2d_video",
      [](const TensorD& x, const UpsampleFactors& f) { return pixel_shuffle_2d_video(x, f.r_s); },
      [](const TensorD&, const UpsampleFactors& f, const TensorD& u) { return pixel_unshuffle_2d_video(u, f.r_s); },
      [](const UpsampleFactors& f) { return f.r_s * f.r_s; });
  rearrangement(
      "decoupled_upsample", [](const TensorD& x, const UpsampleFactors& f) { return decoupled_upsample(x, f); },
      [](const TensorD&, const UpsampleFactors& f, const TensorD& u) { return decoupled_downsample(u, f); },
      all_factors);
  rearrangement(
      "interpolate_nearest",
      [](const TensorD& x, const UpsampleFactors& f) { return interpolate_3d(x, f, InterpolationMode::nearest); },
      [](const TensorD& x, const UpsampleFactors& f, const TensorD& u) {
        return interpolate_3d_grad(x.shape(), f, InterpolationMode::nearest, u);
      },
      no_factor);
  rearrangement(
      "interpolate_trilinear",
      [](const TensorD& x, const UpsampleFactors& f) { return interpolate_3d(x, f, InterpolationMode::trilinear); },
      [](const TensorD& x, const UpsampleFactors& f, const TensorD& u) {
        return interpolate_3d_grad(x.shape(), f, InterpolationMode::trilinear, u);
      },
      no_factor);

  add("projection_head", [](std::mt19937_64& g, std::string& desc) {
    const std::int64_t cs = uniform(g, 1, 4), ct = uniform(g, 1, 4), hidden = uniform(g, 1, 4);
    auto head = ProjectionHead<double>::random(cs, hidden, ct, g());
    TensorD x = random_tensor(random_shape(g, cs), g);
    desc = "x " + to_string(x.shape()) + " hidden " + std::to_string(hidden) + " C_t=" + std::to_string(ct);
    typename ProjectionHead<double>::Cache cache;
    const Projection proj{random_tensor(head.forward(x, &cache).shape(), g)};
    const auto grads = head.backward(cache, proj.g);
    auto params = head.parameters();
    std::vector<GradArg> args{{"input", x.data(), to_vec(grads.input)},
                              {"w1", params[0], to_vec(grads.w1)},
                              {"b1", params[1], grads.b1},
                              {"w2", params[2], to_vec(grads.w2)},
                              {"b2", params[3], grads.b2}};
    return check_directions([&] { return proj(head.forward(x)); }, args, g, 2);
  });

  // Random aligned feature maps with heads.
  struct FeatureCase {
    std::map<std::string, TensorD> student, teacher;
    std::map<std::string, ProjectionHead<double>> heads;
    std::set<std::string> blocks;
  };
  auto feature_case = [](std::mt19937_64& g, std::string& desc) {
    FeatureCase fc;
    const std::int64_t count = uniform(g, 1, 3);
    const std::int64_t n = uniform(g, 1, 2);
    for (std::int64_t b = 0; b < count; ++b) {
      const std::string name = "b" + std::to_string(b);
      const std::int64_t cs = uniform(g, 1, 3), ct = uniform(g, 1, 3);
      const Shape5 s{n, cs, uniform(g, 1, 3), uniform(g, 1, 3), uniform(g, 1, 3)};
      fc.student[name] = random_tensor(s, g);
      auto head = ProjectionHead<double>::random(cs, ct, ct, g());
      fc.teacher[name] = offset_from(head.forward(fc.student[name]), g);
      fc.heads.emplace(name, std::move(head));
      fc.blocks.insert(name);
      desc += name + " " + to_string(s) + "->" + std::to_string(ct) + " ";
    }
    return fc;
  };
  auto feature_args = [](FeatureCase& fc, const DistillLoss<double>& d, double weight) {
    std::vector<GradArg> args;
    auto scaled = [&](std::vector<double> v) {
      for (auto& e : v) e *= weight;
      return v;
    };
    for (auto& [name, t] : fc.student) args.push_back({name + "/feature", t.data(), scaled(to_vec(d.feature_grads.at(name)))});
    for (auto& [name, h] : fc.heads) {
      auto params = h.parameters();
      const auto& hg = d.head_grads.at(name);
      args.push_back({name + "/w1", params[0], scaled(to_vec(hg.w1))});
      args.push_back({name + "/b1", params[1], scaled(hg.b1)});
      args.push_back({name + "/w2", params[2], scaled(to_vec(hg.w2))});
      args.push_back({name + "/b2", params[3], scaled(hg.b2)});
    }
    return args;
  };

  add("distill_loss", [&](std::mt19937_64& g, std::string& desc) {
    FeatureCase fc = feature_case(g, desc);
    const auto d = distill_loss(fc.student, fc.teacher, fc.heads, fc.blocks);
    auto args = feature_args(fc, d, 1.0);
    return check_directions([&] { return distill_loss(fc.student, fc.teacher, fc.heads, fc.blocks).value; }, args, g,
                            2);
  });

  add("total_loss", [&](std::mt19937_64& g, std::string& desc) {
    FeatureCase fc = feature_case(g, desc);
    const Shape5 vs{uniform(g, 1, 2), 3, uniform(g, 1, 3), uniform(g, 1, 4), uniform(g, 1, 4)};
    TensorD pred = random_tensor(vs, g);
    const TensorD target = offset_from(pred, g);
    const TensorD mu = random_tensor({vs[0], 2, 1, 2, 2}, g), lv = random_tensor({vs[0], 2, 1, 2, 2}, g, 0.3);
    DistillConfig<double> cfg;
    cfg.align_blocks = fc.blocks;
    cfg.weights.distill = 0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(g);
    cfg.weights.kl = 1e-3;
    // Smooth stand-in for a perceptual term.
    cfg.lpips_hook = [](const TensorD& t, const TensorD& p, TensorD* grad) {
      const TensorD diff = sub(p, t);
      if (grad) *grad = scale(diff, 2.0 / static_cast<double>(diff.numel()));
      return dot(diff.data(), diff.data()) / static_cast<double>(diff.numel());
    };
    desc += "video " + to_string(vs);
    const auto loss = total_loss(target, pred, mu, lv, fc.student, fc.teacher, fc.heads, cfg);
    auto args = feature_args(fc, loss.distill, 1.0);
    args.push_back({"prediction", pred.data(), to_vec(loss.video_grad)});
    return check_directions(
        [&] { return total_loss(target, pred, mu, lv, fc.student, fc.teacher, fc.heads, cfg).parts.total; }, args, g,
        2);
  });

  add("decoder_end_to_end", [](std::mt19937_64& g, std::string& desc) {
    const DecoderConfig cfg = tiny_decoder_config(g);
    auto dec = Decoder<double>::initialized(cfg, g());
    for (auto& p : dec.parameters()) {
      std::normal_distribution<double> nd(0.0, 0.2);
      for (auto& v : p.values) v += nd(g);
    }
    TensorD latent = random_tensor({1, cfg.latent_channels, uniform(g, 1, 2), uniform(g, 1, 2), uniform(g, 1, 2)}, g);
    const auto initial = dec.forward(latent);
    const TensorD target = offset_from(initial.video, g);
    const TensorD mu = latent, lv = random_tensor(latent.shape(), g, 0.3);
    DistillConfig<double> dcfg;
    dcfg.align_blocks = {"mid", "up_1"};
    dcfg.weights.kl = 1e-3;
    std::map<std::string, TensorD> teacher;
    std::map<std::string, ProjectionHead<double>> heads;
    for (const auto& name : dcfg.align_blocks) {
      const TensorD& feat = initial.features.at(name);
      const std::int64_t ct = uniform(g, 1, 3);
      auto head = ProjectionHead<double>::random(feat.c(), ct, ct, g());
      teacher[name] = offset_from(head.forward(feat), g);
      heads.emplace(name, std::move(head));
    }
    desc = "latent " + to_string(latent.shape()) + " mode " + to_string(cfg.upsample_mode) + " head r_s " +
           std::to_string(cfg.head.upsample_spatial);

    auto full_loss = [&] {
      const auto res = dec.forward(latent);
      return total_loss(target, res.video, mu, lv, res.features, teacher, heads, dcfg).parts.total;
    };
    ForwardTape<double> tape;
    const auto res = dec.forward_train(latent, tape);
    const auto loss = total_loss(target, res.video, mu, lv, res.features, teacher, heads, dcfg);
    TensorD latent_grad;
    const auto grads = dec.backward(tape, loss.video_grad, loss.distill.feature_grads, &latent_grad);
    std::vector<GradArg> args{{"latent", latent.data(), to_vec(latent_grad)}};
    for (auto& p : dec.parameters()) args.push_back({p.name, p.values, grads.at(p.name)});
    return check_directions(full_loss, args, g, 1);
  });

  return report;
}

VerifySuite parse_verify_suite(const std::string& s) {
  if (s == "upsample") return VerifySuite::upsample;
  if (s == "dwsep") return VerifySuite::dwsep;
  if (s == "grad") return VerifySuite::grad;
  if (s == "all") return VerifySuite::all;
  throw ConfigError("unknown verify suite '" + s + "' (expected upsample, dwsep, grad or all)");
}

VerifyReport run_verify(VerifySuite suite, std::uint64_t seed) {
  VerifyReport report;
  if (suite == VerifySuite::upsample || suite == VerifySuite::all) {
    UpsampleSuiteOptions opt;
    opt.seed = seed;
    report.append(verify_upsample(UpsampleImpls::library(), opt));
  }
  if (suite == VerifySuite::dwsep || suite == VerifySuite::all) report.append(verify_dwsep(200, seed));
  if (suite == VerifySuite::grad || suite == VerifySuite::all) report.append(verify_grad(100, seed));
  return report;
}

}  // namespace turbovaed
