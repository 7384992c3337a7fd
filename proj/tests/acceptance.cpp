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
// Acceptance runner: one PASS/FAIL line per criterion, exit 1 on any FAIL.

#include <CLI11.hpp>
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "turbovaed/decoder.hpp"
#include "turbovaed/decoder_config.hpp"
#include "turbovaed/distill.hpp"
#include "turbovaed/error.hpp"
#include "turbovaed/metrics.hpp"
#include "turbovaed/nn_ops.hpp"
#include "turbovaed/profiler.hpp"
#include "turbovaed/verify.hpp"
#include "turbovaed/weights_io.hpp"

namespace turbovaed {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool passed = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string shape_text(const Shape5& s) {
  return fmt("(%lld,%lld,%lld,%lld,%lld)", static_cast<long long>(s[0]), static_cast<long long>(s[1]),
             static_cast<long long>(s[2]), static_cast<long long>(s[3]), static_cast<long long>(s[4]));
}

Outcome upsample_equivalence() {
  const auto t0 = Clock::now();
  const auto r = verify_upsample();
  const double secs = seconds_since(t0);
  const auto& p = r.property("decoupled_equals_permuted_3d_shuffle");
  return {p.passed && secs < 30.0,
          fmt("%lld exhaustive shapes, %lld mismatches, %.2f s (limit 30 s)", static_cast<long long>(p.cases),
              static_cast<long long>(p.failures), secs)};
}

Outcome shuffle_2d_index_fidelity() {
  UpsampleSuiteOptions opt;
  opt.index_probes = 1000;
  const auto r = verify_upsample(UpsampleImpls::library(), opt);
  const auto& p = r.property("shuffle_2d_index_formula");
  return {p.passed && p.cases >= 1000 && p.seconds < 5.0,
          fmt("%lld probes, %lld mismatches, %.3f s (limit 5 s)", static_cast<long long>(p.cases),
              static_cast<long long>(p.failures), p.seconds)};
}

Outcome dwsep_factorization() {
  const auto t0 = Clock::now();
  const auto r = verify_dwsep(200, 0, 1e-5);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::int64_t cases = 0;
  bool ok = true;
  for (const auto& p : r.properties) {
    worst = std::max(worst, p.worst_error);
    cases = std::max(cases, p.cases);
    ok = ok && p.passed;
  }
  return {ok && cases >= 200 && worst < 1e-5 && secs < 60.0,
          fmt("%lld instances, worst rel err %.3g (limit 1e-5), %.2f s (limit 60 s)", static_cast<long long>(cases),
              worst, secs)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto r = verify_grad(100, 0, 1e-4);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::int64_t fewest = -1;
  std::string failed;
  for (const auto& p : r.properties) {
    worst = std::max(worst, p.worst_error);
    fewest = fewest < 0 ? p.cases : std::min(fewest, p.cases);
    if (!p.passed || p.cases < 100) failed += " " + p.property;
  }
  return {failed.empty() && secs < 300.0,
          fmt("%zu properties, >= %lld instances each, worst rel err %.3g (limit 1e-4), %.1f s (limit 300 s)%s%s",
              r.properties.size(), static_cast<long long>(fewest), worst, secs, failed.empty() ? "" : ", failing:",
              failed.c_str())};
}

// Sum over the layout using the per-conv closed forms only.
std::int64_t closed_form_total(const DecoderConfig& cfg) {
  std::int64_t total = 0;
  auto conv = [](const ConvSpec& c) {
    return c.kind == ConvKind::dwsep ? dwsep_param_count(c.c_in, c.c_out, c.kernel, c.kernel, c.kernel, true)
                                     : conv3d_param_count(c.c_in, c.c_out, c.kernel, c.kernel, c.kernel, true);
  };
  for (const auto& bl : make_layout(cfg)) {
    if (bl.entry_conv) total += conv(*bl.entry_conv);
    for (const auto& rb : bl.resblocks) {
      total += 2 * rb.norm1.channels + 2 * rb.norm2.channels + conv(rb.conv1) + conv(rb.conv2);
      if (rb.skip) total += conv(*rb.skip);
    }
    if (bl.head_norm) total += 2 * bl.head_norm->channels;
    if (bl.head_conv) total += conv(*bl.head_conv);
  }
  return total;
}

Outcome parameter_accounting() {
  bool ok = true;
  std::string detail;
  for (const auto& f : std::vector<std::array<std::int64_t, 3>>{{4, 8, 8}, {4, 32, 32}, {8, 32, 32}}) {
    const auto cfg = default_config(f[0], f[1], f[2]);
    const auto sweep = redundancy_sweep(cfg, "up_0");
    bool exact = true;
    bool monotone = true;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      exact = exact && count_params(sweep[i].config).total == closed_form_total(sweep[i].config) &&
              sweep[i].params.total == count_params(sweep[i].config).total;
      if (i > 0) monotone = monotone && sweep[i].params.total <= sweep[i - 1].params.total;
    }
    const auto& none = sweep.front().params;
    const auto& both = sweep.back().params;
    const bool reduces = both.total < none.total;
    std::int64_t before = 0;
    std::int64_t after = 0;
    for (const char* name : {"mid", "up_0"}) {
      for (const auto& [n, c] : none.per_block)
        if (n == name) before += c;
      for (const auto& [n, c] : both.per_block)
        if (n == name) after += c;
    }
    const double layer_reduction = 100.0 * static_cast<double>(before - after) / static_cast<double>(before);
    const double reduction =
        100.0 * static_cast<double>(none.total - both.total) / static_cast<double>(none.total);
    const bool near_reference = std::abs(reduction - 41.6) <= 15.0;
    ok = ok && exact && monotone && reduces && near_reference;
    detail += fmt("%s(%lld,%lld,%lld) exact=%d monotone=%d total %lld->%lld, decoder reduction %.1f%% (ref 41.6 +-15), "
                  "within mid+up_0 %.1f%%",
                  detail.empty() ? "" : "; ", static_cast<long long>(f[0]), static_cast<long long>(f[1]),
                  static_cast<long long>(f[2]), exact, monotone, static_cast<long long>(none.total),
                  static_cast<long long>(both.total), reduction, layer_reduction);
  }
  return {ok, detail};
}

// Widths divided by 8 so the 17x256x256 forward passes fit the time budget
// on one core; factors, block graph and latent shapes are unchanged.
Outcome shape_laws() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (const auto& f : std::vector<std::array<std::int64_t, 3>>{{4, 8, 8}, {4, 32, 32}, {8, 32, 32}}) {
    const auto full = default_config(f[0], f[1], f[2]);
    const auto cfg = with_scaled_widths(full, 8, 8);
    const auto latent = latent_spec_for_video(full, 17, 256, 256);
    Shape5 lshape = latent.shape();
    lshape[1] = cfg.latent_channels;
    const auto dec = Decoder<float>::initialized(cfg, 1);
    Tensor<float> z(lshape, 0.1f);
    const auto out = dec.forward(z).video.shape();
    const Shape5 want{1, 3, 17, 256, 256};
    ok = ok && out == want && video_shape_for_latent(full, latent.shape()) == want;
    detail += fmt("%s(%lld,%lld,%lld) latent %s -> %s", detail.empty() ? "" : "; ", static_cast<long long>(f[0]),
                  static_cast<long long>(f[1]), static_cast<long long>(f[2]), shape_text(latent.shape()).c_str(),
                  shape_text(out).c_str());
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 120.0, detail + fmt(", %.1f s (limit 120 s)", secs)};
}

Outcome distillation_direction() {
  const auto setup = default_toy_setup();
  const auto summary = convergence_experiment(setup, ConvergenceOptions{});
  double slowest = 0.0;
  std::string per_seed;
  for (const auto& r : summary.runs) {
    slowest = std::max({slowest, r.baseline_seconds, r.distill_seconds});
    per_seed += fmt(" [seed %llu steps %lld/%lld psnr %.2f/%.2f]", static_cast<unsigned long long>(r.seed),
                    static_cast<long long>(r.baseline_steps.value_or(-1)),
                    static_cast<long long>(r.distill_steps.value_or(-1)), r.baseline_psnr, r.distill_psnr);
  }
  const bool faster = summary.median_distill_steps < summary.median_baseline_steps;
  const bool quality = summary.median_distill_psnr >= summary.median_baseline_psnr;
  return {faster && quality && slowest <= 180.0,
          fmt("median steps distill %.0f vs baseline %.0f (need <), median psnr %.2f vs %.2f dB (need >=), "
              "slowest run %.1f s (limit 180 s); baseline/distill, -1 = threshold not reached:",
              summary.median_distill_steps, summary.median_baseline_steps, summary.median_distill_psnr,
              summary.median_baseline_psnr, slowest) +
              per_seed};
}

Outcome profiler_consistency() {
  auto cfg = with_scaled_widths(default_config(4, 8, 8), 16, 4);
  const auto dec = Decoder<float>::initialized(cfg, 2);
  ProfileOptions popt;
  popt.warmup = 2;
  popt.repeats = 10;
  const auto prof = profile_decoder(dec, {1, cfg.latent_channels, 3, 8, 8}, popt);
  const double gap = prof.instrumentation_gap();

  ProfileOptions bopt;
  bopt.warmup = 5;
  bopt.repeats = 30;
  const Shape5 shape{1, 128 * 8, 3, 8, 8};
  const UpsampleFactors f{2, 2};
  const auto first = bench_upsamplers({shape}, {f}, bopt);
  const auto second = bench_upsamplers({shape}, {f}, bopt);
  double worst_dev = 0.0;
  for (const auto& row : first.rows) {
    const double a = row.stats.median_ns;
    const double b = second.row(row.op, row.input_shape, f).stats.median_ns;
    worst_dev = std::max(worst_dev, std::abs(a - b) / std::min(a, b));
  }
  const double ratio = first.row("decoupled_upsample", shape, f).stats.median_ns /
                       first.row("pixel_shuffle_3d", shape, f).stats.median_ns;
  return {gap < 0.10 && worst_dev < 0.25 && ratio <= 1.2,
          fmt("block-sum gap %.2f%% (limit 10%%), back-to-back median deviation %.1f%% (limit 25%%), "
              "decoupled/3d-shuffle %.3fx on %s (limit 1.2x)",
              100.0 * gap, 100.0 * worst_dev, ratio, shape_text(shape).c_str())};
}

Outcome metric_closed_forms() {
  Tensor<double> a({1, 3, 2, 16, 16});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 0.9);
  for (auto& v : a.data()) v = u(rng);
  Tensor<double> b = a;
  for (auto& v : b.data()) v += 0.1;
  const double db = psnr(a, b).db;
  const double self = ssim(a, a);
  const Tensor<double> zeros({1, 1, 1, 11, 11}, 0.0);
  const Tensor<double> ones({1, 1, 1, 11, 11}, 1.0);
  const double c1 = 1e-4;  // (0.01 * max_val)^2
  const double constant = ssim(zeros, ones);
  const double expected = c1 / (1.0 + c1);
  return {std::abs(db - 20.0) <= 1e-6 && self == 1.0 && std::abs(constant - expected) <= 1e-6,
          fmt("psnr(+0.1) %.9f dB (want 20 +-1e-6), ssim(a,a) %.17g (want 1 exactly), ssim(0,1) %.9g vs %.9g "
              "(tol 1e-6)",
              db, self, constant, expected)};
}

WeightStore random_store(std::mt19937_64& rng) {
  WeightStore s;
  std::uniform_int_distribution<int> count(1, 4), rank(0, 5), extent(0, 4);
  std::uniform_int_distribution<std::uint32_t> bits;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    std::vector<std::int64_t> shape(static_cast<std::size_t>(rank(rng)));
    std::int64_t numel = 1;
    for (auto& e : shape) numel *= (e = extent(rng));
    std::vector<float> data(static_cast<std::size_t>(numel));
    for (auto& v : data) v = std::bit_cast<float>(bits(rng));
    s.insert("layer_" + std::to_string(i) + "/weight", shape, std::move(data));
  }
  return s;
}

Outcome format_robustness() {
  std::mt19937_64 rng(11);
  const auto dec = Decoder<float>::initialized(with_scaled_widths(default_config(4, 8, 8), 16, 4), 5);
  const auto store = dec.to_store();
  const auto bytes = serialize(store);
  const bool bitwise = serialize(deserialize(bytes)) == bytes && deserialize(bytes) == store;

  int rejected = 0;
  int accepted_equal = 0;
  int escaped = 0;
  int wrong_accept = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_store(rng);
    std::string b = serialize(s);
    const bool truncate = i % 2 == 0;
    if (truncate) {
      b.resize(std::uniform_int_distribution<std::size_t>(0, b.size() - 1)(rng));
    } else {
      const auto at = std::uniform_int_distribution<std::size_t>(0, b.size() - 1)(rng);
      b[at] ^= static_cast<char>(1 << std::uniform_int_distribution<int>(0, 7)(rng));
    }
    try {
      if (deserialize(b) == s && !truncate)
        ++accepted_equal;
      else
        ++wrong_accept;
    } catch (const Error&) {
      ++rejected;
    } catch (...) {
      ++escaped;
    }
  }
  return {bitwise && escaped == 0 && wrong_accept == 0,
          fmt("round-trip bitwise=%d (%zu bytes); fuzz 1000 cases: %d structured errors, %d benign flips loaded "
              "intact, %d silent corruptions, %d non-structured exceptions",
              bitwise, bytes.size(), rejected, accepted_equal, wrong_accept, escaped)};
}

}  // namespace
}  // namespace turbovaed

int main(int argc, char** argv) {
  using namespace turbovaed;
  CLI::App app{"turbovaed acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criterion numbers")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"upsampling equivalence", upsample_equivalence},
      {"shuffle_2d index formula", shuffle_2d_index_fidelity},
      {"dwsep factorization", dwsep_factorization},
      {"gradient suite", gradient_suite},
      {"parameter accounting", parameter_accounting},
      {"shape laws", shape_laws},
      {"distillation direction", distillation_direction},
      {"profiler consistency", profiler_consistency},
      {"metric closed forms", metric_closed_forms},
      {"format robustness", format_robustness},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all = all && o.passed;
    std::printf("%s %2d %s: %s\n", o.passed ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
