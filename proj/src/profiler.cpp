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

#include "turbovaed/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "turbovaed/error.hpp"
#include "turbovaed/parallel.hpp"

namespace turbovaed {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ns(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::nano>(b - a).count();
}

class BlockClock final : public ForwardObserver {
 public:
  void block_begin(const std::string&) override { start_ = Clock::now(); }
  void block_end(const std::string& block) override {
    const auto now = Clock::now();
    if (recording) samples[block].push_back(elapsed_ns(start_, now));
  }

  bool recording = false;
  std::map<std::string, std::vector<double>> samples;

 private:
  Clock::time_point start_;
};

nlohmann::json stats_json(const TimingStats& s) {
  return {{"mean_ns", s.mean_ns}, {"median_ns", s.median_ns}, {"p95_ns", s.p95_ns},
          {"min_ns", s.min_ns},   {"max_ns", s.max_ns}};
}

nlohmann::json environment_json(int warmup, int repeats, int threads) {
  return {{"warmup", warmup}, {"repeats", repeats}, {"threads", threads}, {"clock", "steady_clock"}};
}

std::string shape_str(const Shape5& s) { return to_string(s); }

std::string ms(double ns) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << ns / 1e6;
  return os.str();
}

template <typename T>
Tensor<T> random_tensor(const Shape5& shape, std::uint64_t seed) {
  Tensor<T> x(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (auto& v : x.data()) v = static_cast<T>(nd(rng));
  return x;
}

}  // namespace

TimingStats summarize_samples(std::vector<double> samples_ns) {
  if (samples_ns.empty()) throw DomainError("no timing samples");
  std::sort(samples_ns.begin(), samples_ns.end());
  const std::size_t n = samples_ns.size();
  TimingStats s;
  double sum = 0.0;
  for (double v : samples_ns) sum += v;
  s.mean_ns = sum / static_cast<double>(n);
  s.median_ns = n % 2 ? samples_ns[n / 2] : 0.5 * (samples_ns[n / 2 - 1] + samples_ns[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_ns = samples_ns[std::max<std::size_t>(rank, 1) - 1];
  s.min_ns = samples_ns.front();
  s.max_ns = samples_ns.back();
  return s;
}

void ProfileOptions::validate() const {
  if (warmup < 1) throw ConfigError("warmup must be >= 1");
  if (repeats < 3) throw ConfigError("repeats must be >= 3");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

double BlockTimingReport::instrumentation_gap() const {
  if (end_to_end.mean_ns <= 0.0) return 0.0;
  return std::abs(instrumented_ns - end_to_end.mean_ns) / end_to_end.mean_ns;
}

std::string BlockTimingReport::to_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "block,mean_ns,median_ns,p95_ns,share_percent\n";
  for (const auto& b : blocks) {
    os << b.name << ',' << b.stats.mean_ns << ',' << b.stats.median_ns << ',' << b.stats.p95_ns << ','
       << b.share_percent << '\n';
  }
  os << "total," << end_to_end.mean_ns << ',' << end_to_end.median_ns << ',' << end_to_end.p95_ns << ",100\n";
  return os.str();
}

std::string BlockTimingReport::to_text() const {
  std::ostringstream os;
  os << "decoder profile " << label << "\n";
  os << "  latent " << shape_str(latent_shape) << " -> video " << shape_str(output_shape) << "\n";
  os << "  warmup " << warmup << ", repeats " << repeats << ", threads " << threads << "\n\n";
  os << std::left << std::setw(10) << "block" << std::right << std::setw(12) << "mean ms" << std::setw(12)
     << "median ms" << std::setw(12) << "p95 ms" << std::setw(10) << "share" << "\n";
  for (const auto& b : blocks) {
    std::ostringstream share;
    share << std::fixed << std::setprecision(1) << b.share_percent << '%';
    os << std::left << std::setw(10) << b.name << std::right << std::setw(12) << ms(b.stats.mean_ns) << std::setw(12)
       << ms(b.stats.median_ns) << std::setw(12) << ms(b.stats.p95_ns) << std::setw(10) << share.str() << "\n";
  }
  os << std::left << std::setw(10) << "total" << std::right << std::setw(12) << ms(end_to_end.mean_ns)
     << std::setw(12) << ms(end_to_end.median_ns) << std::setw(12) << ms(end_to_end.p95_ns) << "\n\n";
  os << "  FPS " << std::fixed << std::setprecision(2) << fps << "  (instrumented/end-to-end gap "
     << std::setprecision(2) << 100.0 * instrumentation_gap() << "%)\n";
  return os.str();
}

std::string BlockTimingReport::to_json() const {
  nlohmann::json j;
  j["kind"] = "decoder_profile";
  j["label"] = label;
  j["latent_shape"] = latent_shape;
  j["output_shape"] = output_shape;
  j["environment"] = environment_json(warmup, repeats, threads);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : blocks) {
    auto e = stats_json(b.stats);
    e["name"] = b.name;
    e["share_percent"] = b.share_percent;
    arr.push_back(std::move(e));
  }
  j["blocks"] = std::move(arr);
  j["end_to_end"] = stats_json(end_to_end);
  j["instrumented_ns"] = instrumented_ns;
  j["fps"] = fps;
  return j.dump(2);
}

template <typename T>
BlockTimingReport profile_decoder(const Decoder<T>& decoder, const Shape5& latent_shape, const ProfileOptions& opt) {
  opt.validate();
  const auto& cfg = decoder.config();
  const Shape5 out_shape = video_shape_for_latent(cfg, latent_shape);
  const Tensor<T> latent = random_tensor<T>(latent_shape, opt.seed);

  parallel::ScopedThreads threads(opt.threads);
  BlockClock clock;
  for (int i = 0; i < opt.warmup; ++i) decoder.forward(latent, &clock);
  clock.recording = true;
  std::vector<double> totals;
  for (int i = 0; i < opt.repeats; ++i) {
    const auto t0 = Clock::now();
    decoder.forward(latent, &clock);
    totals.push_back(elapsed_ns(t0, Clock::now()));
  }

  BlockTimingReport r;
  const auto f = cfg.factors();
  r.label = "factors (" + std::to_string(f[0]) + "," + std::to_string(f[1]) + "," + std::to_string(f[2]) + ")";
  r.latent_shape = latent_shape;
  r.output_shape = out_shape;
  r.warmup = opt.warmup;
  r.repeats = opt.repeats;
  r.threads = opt.threads;
  for (const auto& name : cfg.block_names()) {
    BlockTiming b;
    b.name = name;
    b.stats = summarize_samples(clock.samples.at(name));
    r.instrumented_ns += b.stats.mean_ns;
    r.blocks.push_back(std::move(b));
  }
  for (auto& b : r.blocks) b.share_percent = r.instrumented_ns > 0.0 ? 100.0 * b.stats.mean_ns / r.instrumented_ns : 0.0;
  r.end_to_end = summarize_samples(totals);
  r.fps = static_cast<double>(out_shape[2]) / (r.end_to_end.mean_ns * 1e-9);
  return r;
}

BlockTimingReport profile_decoder(const DecoderConfig& cfg, const WeightStore& weights, const Shape5& latent_shape,
                                  const ProfileOptions& opt) {
  return profile_decoder(Decoder<float>(cfg, weights), latent_shape, opt);
}

const UpsamplerTiming& UpsamplerBench::row(const std::string& op, const Shape5& input_shape,
                                           const UpsampleFactors& f) const {
  for (const auto& r : rows) {
    if (r.op == op && r.input_shape == input_shape && r.factors == f) return r;
  }
  throw ConfigError("no benchmark row for " + op + " on " + to_string(input_shape));
}

std::string UpsamplerBench::to_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "op,input_shape,output_shape,r_t,r_s,mean_ns,median_ns,p95_ns\n";
  for (const auto& r : rows) {
    os << r.op << ",\"" << shape_str(r.input_shape) << "\",\"" << shape_str(r.output_shape) << "\"," << r.factors.r_t
       << ',' << r.factors.r_s << ',' << r.stats.mean_ns << ',' << r.stats.median_ns << ',' << r.stats.p95_ns << '\n';
  }
  return os.str();
}

std::string UpsamplerBench::to_text() const {
  std::ostringstream os;
  os << "upsampler latency (warmup " << warmup << ", repeats " << repeats << ", threads " << threads << ")\n\n";
  os << std::left << std::setw(24) << "op" << std::setw(28) << "input" << std::setw(8) << "r_t,r_s" << std::right
     << std::setw(12) << "median ms" << std::setw(12) << "p95 ms" << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << r.op << std::setw(28) << shape_str(r.input_shape) << std::setw(8)
       << (std::to_string(r.factors.r_t) + "," + std::to_string(r.factors.r_s)) << std::right << std::setw(12)
       << ms(r.stats.median_ns) << std::setw(12) << ms(r.stats.p95_ns) << "\n";
  }
  return os.str();
}

std::string UpsamplerBench::to_json() const {
  nlohmann::json j;
  j["kind"] = "upsampler_bench";
  j["environment"] = environment_json(warmup, repeats, threads);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    auto e = stats_json(r.stats);
    e["op"] = r.op;
    e["input_shape"] = r.input_shape;
    e["output_shape"] = r.output_shape;
    e["r_t"] = r.factors.r_t;
    e["r_s"] = r.factors.r_s;
    arr.push_back(std::move(e));
  }
  j["rows"] = std::move(arr);
  return j.dump(2);
}

UpsamplerBench bench_upsamplers(const std::vector<Shape5>& shapes, const std::vector<UpsampleFactors>& factors,
                                const ProfileOptions& opt) {
  opt.validate();
  parallel::ScopedThreads threads(opt.threads);
  UpsamplerBench bench;
  bench.warmup = opt.warmup;
  bench.repeats = opt.repeats;
  bench.threads = opt.threads;

  auto time_op = [&](const auto& fn) {
    for (int i = 0; i < opt.warmup; ++i) fn();
    std::vector<double> samples;
    Shape5 out{};
    for (int i = 0; i < opt.repeats; ++i) {
      const auto t0 = Clock::now();
      const Tensor<float> y = fn();
      samples.push_back(elapsed_ns(t0, Clock::now()));
      out = y.shape();
    }
    return std::make_pair(summarize_samples(std::move(samples)), out);
  };

  for (const auto& shape : shapes) {
    for (const auto& f : factors) {
      f.validate();
      const std::int64_t mult = f.channel_multiplier();
      if (shape[1] % mult != 0) {
        throw ShapeError("channels of " + to_string(shape) + " not divisible by " + std::to_string(mult));
      }
      const Tensor<float> x = random_tensor<float>(shape, opt.seed);
      const Tensor<float> narrow = random_tensor<float>({shape[0], shape[1] / mult, shape[2], shape[3], shape[4]},
                                                        opt.seed + 1);
      auto add = [&](std::string op, const Shape5& in, const auto& fn) {
        auto [stats, out] = time_op(fn);
        bench.rows.push_back({std::move(op), in, out, f, stats});
      };
      add("pixel_shuffle_3d", shape, [&] { return pixel_shuffle_3d(x, f.r_t, f.r_s); });
      add("decoupled_upsample", shape, [&] { return decoupled_upsample(x, f); });
      add("interpolate_nearest", narrow.shape(),
          [&] { return interpolate_3d(narrow, f, InterpolationMode::nearest); });
      add("interpolate_trilinear", narrow.shape(),
          [&] { return interpolate_3d(narrow, f, InterpolationMode::trilinear); });
    }
  }
  return bench;
}

template BlockTimingReport profile_decoder(const Decoder<float>&, const Shape5&, const ProfileOptions&);
template BlockTimingReport profile_decoder(const Decoder<double>&, const Shape5&, const ProfileOptions&);

}  // namespace turbovaed
