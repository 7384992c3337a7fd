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

#include "turbovaed/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "turbovaed/decoder.hpp"
#include "turbovaed/decoder_config.hpp"
#include "turbovaed/distill.hpp"
#include "turbovaed/error.hpp"
#include "turbovaed/metrics.hpp"
#include "turbovaed/profiler.hpp"
#include "turbovaed/verify.hpp"
#include "turbovaed/weights_io.hpp"

namespace turbovaed {

namespace {

using nlohmann::json;

std::vector<std::int64_t> parse_int_list(const std::string& text, std::size_t expected, const std::string& what) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + text + "' is not a comma-separated integer list");
    }
  }
  if (expected && out.size() != expected) {
    throw ConfigError(what + ": expected " + std::to_string(expected) + " values, got '" + text + "'");
  }
  return out;
}

Shape5 parse_shape5(const std::string& text, const std::string& what) {
  const auto v = parse_int_list(text, 5, what);
  return {v[0], v[1], v[2], v[3], v[4]};
}

// --config FILE | --factors dt,dh,dw, then --width-divisor and --set.
struct ConfigArgs {
  std::string path;
  std::string factors;
  std::int64_t width_divisor = 1;
  std::int64_t norm_groups = 0;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", path, "decoder config JSON")->check(CLI::ExistingFile);
    app->add_option("--factors", factors, "built-in config for dt,dh,dw (8,32,32 | 4,32,32 | 4,8,8)");
    app->add_option("--width-divisor", width_divisor, "divide every block width (built-in configs)")
        ->check(CLI::PositiveNumber);
    app->add_option("--norm-groups", norm_groups, "GroupNorm groups after --width-divisor");
    app->add_option("--set", overrides, "override, e.g. blocks.mid.channels=64 (repeatable)");
  }

  DecoderConfig resolve() const {
    if (!path.empty() && !factors.empty()) throw ConfigError("give either --config or --factors, not both");
    DecoderConfig cfg;
    if (!path.empty()) {
      cfg = load_config(path);
    } else if (!factors.empty()) {
      const auto f = parse_int_list(factors, 3, "--factors");
      cfg = default_config(f[0], f[1], f[2]);
    } else {
      throw ConfigError("a config is required: --config FILE or --factors dt,dh,dw");
    }
    if (width_divisor > 1 || norm_groups > 0) {
      cfg = with_scaled_widths(cfg, width_divisor, norm_groups > 0 ? norm_groups : cfg.norm_groups);
    }
    if (!overrides.empty()) cfg = apply_overrides(cfg, overrides);
    cfg.validate();
    return cfg;
  }
};

json shape_json(const Shape5& s) { return json(std::vector<std::int64_t>(s.begin(), s.end())); }

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

// Interleaved RGB24, frames in (n, t) order, rows top to bottom.
void write_raw_rgb(const Tensor5& video, const std::string& path) {
  if (video.c() != 3) throw ShapeError("raw RGB export needs 3 channels, got " + std::to_string(video.c()));
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(video.numel()));
  for (std::int64_t n = 0; n < video.n(); ++n)
    for (std::int64_t t = 0; t < video.t(); ++t)
      for (std::int64_t h = 0; h < video.h(); ++h)
        for (std::int64_t w = 0; w < video.w(); ++w)
          for (std::int64_t c = 0; c < 3; ++c) bytes.push_back(static_cast<char>(to_byte(video(n, c, t, h, w))));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  const json sidecar{{"format", "rgb24"},
                     {"layout", "frame-major, row-major, interleaved RGB"},
                     {"batch", video.n()},
                     {"frames", video.t()},
                     {"height", video.h()},
                     {"width", video.w()},
                     {"value_mapping", "round(clamp(v, 0, 1) * 255)"}};
  std::ofstream side(path + ".json", std::ios::trunc);
  if (!side) throw IoError("cannot open '" + path + ".json' for writing");
  side << sidecar.dump(2) << "\n";
  if (!out || !side) throw IoError("write to '" + path + "' failed");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

Decoder<float> make_decoder(const DecoderConfig& cfg, const std::string& weights_path, std::uint64_t seed) {
  if (weights_path.empty()) return Decoder<float>::initialized(cfg, seed);
  return Decoder<float>(cfg, load(weights_path));
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ---- subcommands --------------------------------------------------------------

struct DecodeArgs {
  ConfigArgs config;
  std::string weights, latent, output, raw_rgb;
  bool as_json = false;
};

int cmd_decode(const DecodeArgs& a, std::ostream& out) {
  const DecoderConfig cfg = a.config.resolve();
  const WeightStore store = load(a.weights);
  const ValidationReport report = validate_against(store, cfg);
  if (!report.ok()) throw LoadError("weights do not match the config:\n" + report.to_string());
  const Tensor5 latent = load_tensor(a.latent);
  const Shape5 expected = video_shape_for_latent(cfg, latent.shape());
  const Decoder<float> decoder(cfg, store);
  const Tensor5 video = decoder.forward(latent).video;
  if (video.shape() != expected) throw ShapeError("decoded shape " + to_string(video.shape()));
  save_tensor(video, a.output);
  if (!a.raw_rgb.empty()) write_raw_rgb(video, a.raw_rgb);
  if (a.as_json) {
    json j{{"kind", "decode"},
           {"latent_shape", shape_json(latent.shape())},
           {"output_shape", shape_json(video.shape())},
           {"output", a.output},
           {"raw_rgb", a.raw_rgb.empty() ? json(nullptr) : json(a.raw_rgb)}};
    out << j.dump(2) << "\n";
  } else {
    out << "decoded " << to_string(latent.shape()) << " -> " << to_string(video.shape()) << " into " << a.output
        << "\n";
    if (!a.raw_rgb.empty()) out << "raw RGB24 frames in " << a.raw_rgb << " (sidecar " << a.raw_rgb << ".json)\n";
  }
  return kExitOk;
}

struct BenchArgs {
  ConfigArgs config;
  std::string weights;
  std::string latent_shape;
  std::int64_t frames = 17, height = 256, width = 256;
  ProfileOptions profile;
  bool csv = false;
  bool as_json = false;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  const DecoderConfig cfg = a.config.resolve();
  const Shape5 latent = a.latent_shape.empty() ? latent_spec_for_video(cfg, a.frames, a.height, a.width).shape()
                                               : parse_shape5(a.latent_shape, "--latent-shape");
  const Decoder<float> decoder = make_decoder(cfg, a.weights, a.profile.seed);
  const BlockTimingReport report = profile_decoder(decoder, latent, a.profile);
  out << (a.as_json ? report.to_json() + "\n" : a.csv ? report.to_csv() : report.to_text());
  return kExitOk;
}

struct BenchOpsArgs {
  std::vector<std::string> shapes;
  std::vector<std::string> factors;
  ProfileOptions profile;
  bool csv = false;
  bool as_json = false;
};

int cmd_bench_ops(const BenchOpsArgs& a, std::ostream& out) {
  std::vector<Shape5> shapes;
  for (const auto& s : a.shapes) shapes.push_back(parse_shape5(s, "--shape"));
  if (shapes.empty()) shapes.push_back({1, 128 * 8, 3, 8, 8});
  std::vector<UpsampleFactors> factors;
  for (const auto& f : a.factors) {
    const auto v = parse_int_list(f, 2, "--factors");
    factors.push_back({v[0], v[1]});
  }
  if (factors.empty()) factors.push_back({2, 2});
  const UpsamplerBench bench = bench_upsamplers(shapes, factors, a.profile);
  out << (a.as_json ? bench.to_json() + "\n" : a.csv ? bench.to_csv() : bench.to_text());
  return kExitOk;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, bool as_json, std::ostream& out, std::ostream& err) {
  const VerifyReport report = run_verify(parse_verify_suite(suite), seed);
  out << (as_json ? report.to_json() + "\n" : report.to_text());
  if (report.passed()) return kExitOk;
  for (const auto& p : report.properties) {
    if (!p.passed) err << "counterexample " << p.suite << '/' << p.property << ": " << p.counterexample << "\n";
  }
  return kExitRuntime;
}

int cmd_params(const ConfigArgs& c, bool per_param, bool as_json, std::ostream& out) {
  const DecoderConfig cfg = c.resolve();
  const ParamCount count = count_params(cfg);
  const auto specs = param_specs(cfg);
  if (as_json) {
    json blocks = json::array();
    for (const auto& [name, n] : count.per_block) blocks.push_back({{"block", name}, {"params", n}});
    json j{{"kind", "params"}, {"blocks", blocks}, {"total", count.total}};
    if (per_param) {
      json params = json::array();
      for (const auto& s : specs) params.push_back({{"name", s.name}, {"shape", s.shape}, {"numel", s.numel()}});
      j["parameters"] = std::move(params);
    }
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << std::left << std::setw(10) << "block" << std::right << std::setw(14) << "params" << std::setw(9) << "share"
      << "\n";
  for (const auto& [name, n] : count.per_block) {
    out << std::left << std::setw(10) << name << std::right << std::setw(14) << n << std::setw(8)
        << fixed(100.0 * static_cast<double>(n) / static_cast<double>(count.total), 1) << "%\n";
  }
  out << std::left << std::setw(10) << "total" << std::right << std::setw(14) << count.total << "\n";
  if (per_param) {
    out << "\n";
    for (const auto& s : specs) out << s.name << "  " << shape_to_string(s.shape) << "  " << s.numel() << "\n";
  }
  return kExitOk;
}

int cmd_sweep(const ConfigArgs& c, const std::string& upto, bool as_json, std::ostream& out) {
  const DecoderConfig cfg = c.resolve();
  const auto variants = redundancy_sweep(cfg, upto);
  const double base = static_cast<double>(variants.front().params.total);
  if (as_json) {
    json arr = json::array();
    for (const auto& v : variants) {
      arr.push_back({{"replaced_upto", v.replaced_upto},
                     {"params", v.params.total},
                     {"reduction_percent", 100.0 * (1.0 - static_cast<double>(v.params.total) / base)}});
    }
    out << json{{"kind", "sweep"}, {"upto", upto}, {"variants", arr}}.dump(2) << "\n";
    return kExitOk;
  }
  out << std::left << std::setw(16) << "dwsep through" << std::right << std::setw(14) << "params" << std::setw(12)
      << "reduction" << "\n";
  for (const auto& v : variants) {
    out << std::left << std::setw(16) << v.replaced_upto << std::right << std::setw(14) << v.params.total
        << std::setw(11) << fixed(100.0 * (1.0 - static_cast<double>(v.params.total) / base), 2) << "%\n";
  }
  return kExitOk;
}

struct DistillArgs {
  std::uint64_t seed = 1;
  std::uint64_t teacher_seed = 0;
  std::int64_t steps = 300;
  std::int64_t eval_every = 50;
  double alpha = 1.0;
  double lr = 2e-3;
  bool no_distill = false;
  bool paired = false;
  std::int64_t tau_step = 200;
  std::int64_t teacher_steps = default_toy_setup().teacher_steps;
  std::int64_t train_videos = default_toy_setup().train_videos;
  std::vector<std::string> align;
  std::string out_csv;
  bool as_json = false;
};

json log_json(const TrainLog& log) {
  json rows = json::array();
  for (const auto& r : log.rows) {
    rows.push_back({{"step", r.step},
                    {"L1", r.l1},
                    {"L_distill", r.distill},
                    {"L_kl", r.kl},
                    {"total", r.total},
                    {"eval_psnr", std::isnan(r.eval_psnr) ? json(nullptr) : json(r.eval_psnr)}});
  }
  return rows;
}

int cmd_distill(const DistillArgs& a, std::ostream& out) {
  ToySetup setup = default_toy_setup();
  setup.teacher_steps = a.teacher_steps;
  setup.train_videos = a.train_videos;
  if (!a.align.empty()) setup.align_blocks = {a.align.begin(), a.align.end()};
  if (a.paired) {
    ConvergenceOptions opt;
    opt.seeds = {a.seed};
    opt.teacher_seed = a.teacher_seed;
    opt.steps = a.steps;
    opt.tau_step = a.tau_step;
    opt.lr = a.lr;
    const auto summary = convergence_experiment(setup, opt);
    const auto& run = summary.runs.front();
    auto steps_json = [](const std::optional<std::int64_t>& s) { return s ? json(*s) : json(nullptr); };
    if (!a.out_csv.empty()) {
      write_text(a.out_csv + ".baseline.csv", run.baseline_log.to_csv());
      write_text(a.out_csv + ".distill.csv", run.distill_log.to_csv());
    }
    if (a.as_json) {
      out << json{{"kind", "distill_toy_paired"},
                  {"seed", a.seed},
                  {"teacher_seed", a.teacher_seed},
                  {"steps", a.steps},
                  {"tau", run.tau},
                  {"baseline_steps_to_tau", steps_json(run.baseline_steps)},
                  {"distill_steps_to_tau", steps_json(run.distill_steps)},
                  {"baseline_final_psnr", run.baseline_psnr},
                  {"distill_final_psnr", run.distill_psnr}}
                 .dump(2)
          << "\n";
    } else {
      auto show = [](const std::optional<std::int64_t>& s) { return s ? std::to_string(*s) : std::string("never"); };
      out << "tau (baseline smoothed L1 at step " << a.tau_step << ") = " << run.tau << "\n"
          << "steps to tau: baseline " << show(run.baseline_steps) << ", distilled " << show(run.distill_steps)
          << "\n"
          << "final eval PSNR: baseline " << fixed(run.baseline_psnr, 3) << " dB, distilled "
          << fixed(run.distill_psnr, 3) << " dB\n";
    }
    return kExitOk;
  }

  const ToyTeacher teacher = make_toy_teacher(setup, a.teacher_seed);
  const ToyDataset data = make_toy_dataset(setup, teacher, a.teacher_seed);
  DistillConfig<float> cfg;
  cfg.optimizer.lr = a.lr;
  cfg.align_blocks = setup.align_blocks;
  cfg.weights.distill = a.no_distill ? 0.0 : a.alpha;
  TrainOptions topt;
  topt.steps = a.steps;
  topt.eval_every = a.eval_every;
  topt.seed = a.seed;
  const TrainResult result = train_toy(cfg, setup.student, teacher, data, topt);
  if (!a.out_csv.empty()) write_text(a.out_csv, result.log.to_csv());
  if (a.as_json) {
    out << json{{"kind", "distill_toy"},
                {"seed", a.seed},
                {"teacher_seed", a.teacher_seed},
                {"steps", a.steps},
                {"distill_weight", cfg.weights.distill},
                {"rows", log_json(result.log)}}
               .dump(2)
        << "\n";
  } else if (a.out_csv.empty()) {
    out << result.log.to_csv();
  } else {
    const auto& last = result.log.rows.back();
    out << "wrote " << a.out_csv << " (" << result.log.rows.size() << " steps, final L1 " << last.l1
        << ", eval PSNR " << fixed(last.eval_psnr, 3) << " dB)\n";
  }
  return kExitOk;
}

int cmd_metrics(const std::string& ref_path, const std::string& test_path, double max_val, bool per_frame,
                bool as_json, std::ostream& out) {
  const Tensor5 ref = load_tensor(ref_path);
  const Tensor5 test = load_tensor(test_path);
  if (ref.shape() != test.shape()) {
    throw ShapeError("reference " + to_string(ref.shape()) + " and test " + to_string(test.shape()) + " differ");
  }
  const MetricReport r = evaluate(ref, test, max_val);
  if (as_json) {
    json j{{"kind", "metrics"},
           {"shape", shape_json(ref.shape())},
           {"psnr_db", r.identical ? json(nullptr) : json(r.psnr)},
           {"identical", r.identical},
           {"ssim", r.ssim}};
    if (per_frame) {
      json p = json::array();
      for (const double v : r.psnr_per_frame) p.push_back(std::isinf(v) ? json(nullptr) : json(v));
      j["psnr_per_frame"] = std::move(p);
      j["ssim_per_frame"] = r.ssim_per_frame;
    }
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << "PSNR " << (r.identical ? std::string("identical") : fixed(r.psnr, 4) + " dB") << "\n";
  out << "SSIM " << fixed(r.ssim, 6) << "\n";
  if (per_frame) {
    for (std::size_t i = 0; i < r.psnr_per_frame.size(); ++i) {
      out << "  frame " << i << "  PSNR "
          << (std::isinf(r.psnr_per_frame[i]) ? std::string("identical") : fixed(r.psnr_per_frame[i], 4))
          << "  SSIM " << fixed(r.ssim_per_frame[i], 6) << "\n";
    }
  }
  return kExitOk;
}

int cmd_inspect(const std::string& path, bool as_json, std::ostream& out) {
  const TvwdInfo info = describe(read_file(path));
  if (as_json) {
    json entries = json::array();
    for (const auto& e : info.entries) {
      entries.push_back(
          {{"name", e.name}, {"dtype", "f32"}, {"shape", e.shape}, {"offset", e.offset}, {"nbytes", e.nbytes}});
    }
    out << json{{"kind", "inspect"},
                {"path", path},
                {"version", info.version},
                {"header_bytes", info.header_bytes},
                {"payload_bytes", info.payload_bytes},
                {"payload_crc32", info.payload_crc32},
                {"file_bytes", info.file_bytes},
                {"entries", entries}}
               .dump(2)
        << "\n";
    return kExitOk;
  }
  std::int64_t total = 0;
  out << path << ": TVWD v" << info.version << ", " << info.entries.size() << " entries, header " << info.header_bytes
      << " B, payload " << info.payload_bytes << " B, crc32 0x" << std::hex << std::setw(8) << std::setfill('0')
      << info.payload_crc32 << std::dec << std::setfill(' ') << " (verified)\n";
  for (const auto& e : info.entries) {
    std::int64_t n = 1;
    for (const auto d : e.shape) n *= d;
    total += n;
    out << "  " << std::left << std::setw(44) << e.name << std::setw(22) << shape_to_string(e.shape) << std::right
        << " @" << e.offset << "\n";
  }
  out << "  total elements " << total << "\n";
  return kExitOk;
}

// Bad inputs map to exit 1; io, numeric and allocation failures to exit 2.
bool is_input_error(const Error& e) {
  return dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
         dynamic_cast<const DomainError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
         dynamic_cast<const CorruptionError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
         dynamic_cast<const LoadError*>(&e);
}

// Parses with CLI11 and maps errors onto exit codes.
int dispatch(CLI::App& app, const std::string& name, const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err, const std::function<int()>& run) {
  std::vector<std::string> argv_store{name};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "run '" << name << (sub == &app ? "" : " " + sub->get_name()) << " --help' for usage\n";
    return kExitValidation;
  }
  try {
    return run();
  } catch (const Error& e) {
    err << "error (" << e.kind() << "): " << e.what() << "\n";
    return is_input_error(e) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

void add_profile_options(CLI::App* app, ProfileOptions& p) {
  app->add_option("--warmup", p.warmup, "untimed iterations (>= 1)");
  app->add_option("--repeats", p.repeats, "timed iterations (>= 3)");
  app->add_option("--threads", p.threads, "OpenMP threads for the timed runs");
  app->add_option("--seed", p.seed, "seed for random inputs and weights");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"turbovaed: mobile video VAE decoder engine"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  DecodeArgs decode;
  auto* sd = app.add_subcommand("decode", "decode a latent tensor into a video tensor");
  decode.config.attach(sd);
  sd->add_option("--weights", decode.weights, "TVWD weights")->required()->check(CLI::ExistingFile);
  sd->add_option("--latent", decode.latent, "latent .tvt")->required()->check(CLI::ExistingFile);
  sd->add_option("--out", decode.output, "output video .tvt")->required();
  sd->add_option("--raw-rgb", decode.raw_rgb, "also write raw RGB24 frames plus a JSON sidecar");
  sd->add_flag("--json", decode.as_json, "machine-readable output");

  BenchArgs bench;
  auto* sb = app.add_subcommand("bench", "per-block decoder timing and FPS");
  bench.config.attach(sb);
  sb->add_option("--weights", bench.weights, "TVWD weights (default: seeded random init)")
      ->check(CLI::ExistingFile);
  sb->add_option("--latent-shape", bench.latent_shape, "N,C,T,H,W (overrides the video size)");
  sb->add_option("--frames", bench.frames, "output frames");
  sb->add_option("--height", bench.height, "output height");
  sb->add_option("--width", bench.width, "output width");
  add_profile_options(sb, bench.profile);
  sb->add_flag("--csv", bench.csv, "CSV output");
  sb->add_flag("--json", bench.as_json, "machine-readable output");

  BenchOpsArgs bench_ops;
  auto* so = app.add_subcommand("bench-ops", "upsampler latency table");
  so->add_option("--shape", bench_ops.shapes, "shuffle input N,C,T,H,W (repeatable)");
  so->add_option("--factors", bench_ops.factors, "r_t,r_s (repeatable)");
  add_profile_options(so, bench_ops.profile);
  so->add_flag("--csv", bench_ops.csv, "CSV output");
  so->add_flag("--json", bench_ops.as_json, "machine-readable output");

  std::string suite = "all";
  std::uint64_t verify_seed = 0;
  bool verify_json = false;
  auto* sv = app.add_subcommand("verify", "run the oracle suites");
  sv->add_option("--suite", suite, "upsample | dwsep | grad | all")
      ->check(CLI::IsMember({"upsample", "dwsep", "grad", "all"}));
  sv->add_option("--seed", verify_seed, "seed for the random instances");
  sv->add_flag("--json", verify_json, "machine-readable output");

  ConfigArgs params_cfg;
  bool per_param = false, params_json = false;
  auto* sp = app.add_subcommand("params", "parameter counts per block");
  params_cfg.attach(sp);
  sp->add_flag("--per-param", per_param, "list every parameter tensor");
  sp->add_flag("--json", params_json, "machine-readable output");

  ConfigArgs sweep_cfg;
  std::string upto;
  bool sweep_json = false;
  auto* ss = app.add_subcommand("sweep", "parameter counts as dwsep replacement extends block by block");
  sweep_cfg.attach(ss);
  ss->add_option("--upto", upto, "last block to replace")->required();
  ss->add_flag("--json", sweep_json, "machine-readable output");

  DistillArgs distill;
  auto* st = app.add_subcommand("distill-toy", "toy-scale decoder distillation run");
  st->add_option("--seed", distill.seed, "student init and data order");
  st->add_option("--teacher-seed", distill.teacher_seed, "teacher, encoder and data pool");
  st->add_option("--steps", distill.steps, "training steps")->check(CLI::NonNegativeNumber);
  st->add_option("--eval-every", distill.eval_every, "steps between eval PSNR rows");
  st->add_option("--alpha", distill.alpha, "feature-alignment weight")->check(CLI::NonNegativeNumber);
  st->add_option("--lr", distill.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  st->add_flag("--no-distill", distill.no_distill, "train with the alignment weight at 0");
  st->add_flag("--paired", distill.paired, "run with and without alignment and compare steps to tau");
  st->add_option("--teacher-steps", distill.teacher_steps, "teacher pre-training steps")
      ->check(CLI::NonNegativeNumber);
  st->add_option("--train-videos", distill.train_videos, "synthetic training pool size")->check(CLI::PositiveNumber);
  st->add_option("--align", distill.align, "aligned blocks, comma separated (default mid,up_0)")->delimiter(',');
  st->add_option("--tau-step", distill.tau_step, "baseline step whose smoothed L1 defines tau (--paired)");
  st->add_option("--out", distill.out_csv, "CSV log path (--paired writes PATH.baseline.csv and PATH.distill.csv)");
  st->add_flag("--json", distill.as_json, "machine-readable output");

  std::string ref_path, test_path;
  double max_val = 1.0;
  bool per_frame = false, metrics_json = false;
  auto* sm = app.add_subcommand("metrics", "PSNR and SSIM between two video tensors");
  sm->add_option("--ref", ref_path, "reference .tvt")->required()->check(CLI::ExistingFile);
  sm->add_option("--test", test_path, "test .tvt")->required()->check(CLI::ExistingFile);
  sm->add_option("--max", max_val, "peak value")->check(CLI::PositiveNumber);
  sm->add_flag("--per-frame", per_frame, "list per-frame values");
  sm->add_flag("--json", metrics_json, "machine-readable output");

  std::string inspect_path;
  bool inspect_json = false;
  auto* si = app.add_subcommand("inspect", "summarize and verify a TVWD file");
  si->add_option("file", inspect_path, "TVWD weights or .tvt tensor")->required()->check(CLI::ExistingFile);
  si->add_flag("--json", inspect_json, "machine-readable output");

  return dispatch(app, "turbovaed", args, out, err, [&]() -> int {
    if (sd->parsed()) return cmd_decode(decode, out);
    if (sb->parsed()) return cmd_bench(bench, out);
    if (so->parsed()) return cmd_bench_ops(bench_ops, out);
    if (sv->parsed()) return cmd_verify(suite, verify_seed, verify_json, out, err);
    if (sp->parsed()) return cmd_params(params_cfg, per_param, params_json, out);
    if (ss->parsed()) return cmd_sweep(sweep_cfg, upto, sweep_json, out);
    if (st->parsed()) return cmd_distill(distill, out);
    if (sm->parsed()) return cmd_metrics(ref_path, test_path, max_val, per_frame, metrics_json, out);
    if (si->parsed()) return cmd_inspect(inspect_path, inspect_json, out);
    throw ConfigError("no subcommand");
  });
}

int run_gen(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"turbovaed-gen: write configs, random weights, latents and synthetic videos"};
  app.require_subcommand(1);

  ConfigArgs config_cfg;
  std::string config_out;
  auto* sc = app.add_subcommand("config", "resolved decoder config as JSON");
  config_cfg.attach(sc);
  sc->add_option("--out", config_out, "JSON path (default: stdout)");

  ConfigArgs weights_cfg;
  std::uint64_t weights_seed = 0;
  std::string weights_out;
  auto* sw = app.add_subcommand("weights", "seeded random decoder weights");
  weights_cfg.attach(sw);
  sw->add_option("--seed", weights_seed, "init seed");
  sw->add_option("--out", weights_out, "TVWD path")->required();

  ConfigArgs latent_cfg;
  std::uint64_t latent_seed = 0;
  std::int64_t frames = 17, height = 256, width = 256;
  std::string latent_shape, latent_out;
  auto* sl = app.add_subcommand("latent", "standard normal latent for a video size");
  latent_cfg.attach(sl);
  sl->add_option("--frames", frames, "video frames");
  sl->add_option("--height", height, "video height");
  sl->add_option("--width", width, "video width");
  sl->add_option("--shape", latent_shape, "explicit N,C,T,H,W (no config needed)");
  sl->add_option("--seed", latent_seed, "seed");
  sl->add_option("--out", latent_out, ".tvt path")->required();

  SyntheticVideoSpec video;
  std::uint64_t video_seed = 0;
  std::string video_out;
  auto* sv = app.add_subcommand("video", "synthetic moving-pattern video in [0, 1]");
  sv->add_option("--frames", video.frames, "frames");
  sv->add_option("--height", video.height, "height");
  sv->add_option("--width", video.width, "width");
  sv->add_option("--blobs", video.blobs, "moving blobs");
  sv->add_option("--seed", video_seed, "seed");
  sv->add_option("--out", video_out, ".tvt path")->required();

  return dispatch(app, "turbovaed-gen", args, out, err, [&]() -> int {
    if (sc->parsed()) {
      const std::string text = config_to_json(config_cfg.resolve()) + "\n";
      if (config_out.empty()) {
        out << text;
      } else {
        write_text(config_out, text);
        out << "wrote " << config_out << "\n";
      }
      return kExitOk;
    }
    if (sw->parsed()) {
      const DecoderConfig cfg = weights_cfg.resolve();
      save(Decoder<float>::initialized(cfg, weights_seed).to_store(), weights_out);
      out << "wrote " << weights_out << " (" << count_params(cfg).total << " parameters)\n";
      return kExitOk;
    }
    if (sl->parsed()) {
      const Shape5 shape = latent_shape.empty()
                               ? latent_spec_for_video(latent_cfg.resolve(), frames, height, width).shape()
                               : parse_shape5(latent_shape, "--shape");
      Tensor5 t(shape);
      std::mt19937_64 rng(latent_seed);
      std::normal_distribution<float> nd;
      for (auto& v : t.data()) v = nd(rng);
      save_tensor(t, latent_out);
      out << "wrote " << latent_out << " " << to_string(shape) << "\n";
      return kExitOk;
    }
    std::mt19937_64 rng(video_seed);
    const Tensor5 v = synthetic_video(video, rng);
    save_tensor(v, video_out);
    out << "wrote " << video_out << " " << to_string(v.shape()) << "\n";
    return kExitOk;
  });
}

}  // namespace turbovaed
