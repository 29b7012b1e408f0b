/* Copyright 2026 The kvroof Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "kvroof/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "kvroof/analytics.h"
#include "kvroof/catalog.h"
#include "kvroof/errors.h"
#include "kvroof/report_io.h"
#include "kvroof/roofline.h"
#include "kvroof/simulator.h"
#include "kvroof/workload.h"

namespace kvroof {

namespace {

// Bad flags or names on the command line (exit 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kKilo = 1.0e3;
constexpr double kGiga = 1.0e9;

struct LoadedCatalog {
  Catalog catalog;
  std::string hash;
  std::string path;  // empty for the bundled catalog
};

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read {} '{}'", what, path));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Precedence: explicit flag, then the given fallback (e.g. a config file
// entry), then $KVROOF_CATALOG, then the bundled catalog.
LoadedCatalog open_catalog(const std::string& flag, const std::optional<std::string>& fallback = {}) {
  std::string path = flag;
  if (path.empty() && fallback) path = *fallback;
  if (path.empty()) {
    if (const char* env = std::getenv("KVROOF_CATALOG"); env && *env) path = env;
  }
  if (path.empty()) {
    return {default_catalog(), content_hash(default_catalog_text()), ""};
  }
  std::string text = read_file(path, "catalog file");
  return {parse_catalog(text, path), content_hash(text), path};
}

std::ostream& open_output(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError(fmt::format("cannot write '{}'", path));
  return file;
}

void require_models(const Catalog& c, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    try {
      c.model(n);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
}

void require_hardware(const Catalog& c, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    try {
      c.hw(n);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
}

std::string join_args(const std::vector<std::string>& args) {
  std::string s;
  for (const auto& a : args) {
    if (!s.empty()) s += ' ';
    s += a;
  }
  return s;
}

struct Common {
  std::string catalog;
  std::string bandwidth = "peak";
  std::string out;
  std::optional<uint64_t> seed;  // recorded in the manifest; only synth draws from it
};

// --- kappa --------------------------------------------------------------------

struct KappaArgs {
  std::vector<std::string> models;
  std::vector<std::string> hardware;
  bool si = false;
};

void cmd_kappa(const Common& common, const KappaArgs& a, const std::string& cmdline,
               std::ostream& stdout_) {
  auto cat = open_catalog(common.catalog);
  const BandwidthMode mode = parse_bandwidth_mode(common.bandwidth);
  require_models(cat.catalog, a.models);
  require_hardware(cat.catalog, a.hardware);

  std::vector<const ModelSpec*> models;
  std::vector<const HardwareSpec*> hws;
  if (a.models.empty()) {
    for (const auto& m : cat.catalog.models()) models.push_back(&m);
  } else {
    for (const auto& n : a.models) models.push_back(&cat.catalog.model(n));
  }
  if (a.hardware.empty()) {
    for (const auto& h : cat.catalog.hardware()) hws.push_back(&h);
  } else {
    for (const auto& n : a.hardware) hws.push_back(&cat.catalog.hw(n));
  }

  std::ofstream file;
  std::ostream& out = open_output(common.out, file, stdout_);
  RunManifest manifest{cmdline, cat.path.empty() ? std::vector<std::string>{} : std::vector{cat.path},
                       common.seed, KVROOF_VERSION, cat.hash};
  out << manifest_comment(manifest) << '\n';
  if (a.si) {
    out << "model,hardware,bandwidth_mode,kv_bytes_per_token,kappa_m_flop_per_byte,"
           "kappa_hw_byte_per_flop,kappa_crit\n";
  } else {
    out << "model,hardware,bandwidth_mode,kv_kb_per_token,kappa_m_gflop_per_kb,"
           "kappa_hw_kb_per_gflop,kappa_crit\n";
  }
  for (const auto* m : models) {
    for (const auto* h : hws) {
      double b = kv_bytes_per_token(*m);
      double km = kappa_model(*m);
      double kh = kappa_hw(*h, mode);
      double kc = kappa_crit(*m, *h, mode);
      if (a.si) {
        out << fmt::format("{},{},{},{:.6g},{:.6g},{:.6g},{:.6g}\n", m->name, h->name,
                           to_string(mode), b, km, kh, kc);
      } else {
        out << fmt::format("{},{},{},{:.6g},{:.6g},{:.6g},{:.6g}\n", m->name, h->name,
                           to_string(mode), b / kKilo, km * kKilo / kGiga, kh * kGiga / kKilo, kc);
      }
    }
  }
}

// --- roofline -----------------------------------------------------------------

struct RooflineArgs {
  std::string model;
  std::vector<std::string> hardware;
  KappaRange range;
};

void cmd_roofline(const Common& common, const RooflineArgs& a, const std::string& cmdline,
                  std::ostream& stdout_) {
  auto cat = open_catalog(common.catalog);
  const BandwidthMode mode = parse_bandwidth_mode(common.bandwidth);
  require_models(cat.catalog, {a.model});
  require_hardware(cat.catalog, a.hardware);
  std::vector<HardwareSpec> hws;
  if (a.hardware.empty()) {
    hws = cat.catalog.hardware();
  } else {
    for (const auto& n : a.hardware) hws.push_back(cat.catalog.hw(n));
  }
  auto series = roofline_sweep(cat.catalog.model(a.model), hws, a.range, mode);

  std::ofstream file;
  std::ostream& out = open_output(common.out, file, stdout_);
  RunManifest manifest{cmdline, cat.path.empty() ? std::vector<std::string>{} : std::vector{cat.path},
                       common.seed, KVROOF_VERSION, cat.hash};
  out << manifest_comment(manifest) << '\n';
  write_roofline_csv(out, series);
  if (!file.is_open()) return;
  file.close();
  if (!file) throw DataError(fmt::format("failed writing '{}'", common.out));
  for (const auto& s : series) {
    stdout_ << fmt::format("{} on {}: kappa_crit={:.4g}", s.model_name, s.hw_name,
                           s.kappa_crit_marker);
    if (s.flip_index) {
      stdout_ << fmt::format(" (first bandwidth-bound grid point kappa_ratio={:.4g})",
                             s.points[*s.flip_index].kappa_ratio);
    }
    stdout_ << '\n';
  }
}

// --- analyze ------------------------------------------------------------------

struct AnalyzeArgs {
  std::string trace;
  std::string kind;
};

void print_percentiles(std::ostream& out, std::string_view label, const Percentiles& p) {
  out << fmt::format("{},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g}\n", label, p.p10,
                     p.p50, p.p90, p.p95, p.p99, p.mean, p.min, p.max);
}

void cmd_analyze(const Common& common, const AnalyzeArgs& a, const std::string& cmdline,
                 std::ostream& stdout_) {
  TraceKind kind;
  try {
    kind = parse_trace_kind(a.kind);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  std::ifstream in(a.trace, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read trace file '{}'", a.trace));
  auto records = read_trace_records(in, kind, a.trace);
  auto summary = summarize(records);

  RunManifest manifest{cmdline, {a.trace}, common.seed, KVROOF_VERSION, ""};
  stdout_ << manifest_comment(manifest) << '\n';
  stdout_ << fmt::format("# records: {}\n", summary.count);
  stdout_ << "quantity,p10,p50,p90,p95,p99,mean,min,max\n";
  print_percentiles(stdout_, "prefill_tokens", summary.prefill_tokens);
  print_percentiles(stdout_, "cached_tokens", summary.cached_tokens);
  print_percentiles(stdout_, "kappa_ratio", summary.kappa_ratio);

  if (!common.out.empty()) {
    std::ofstream file;
    std::ostream& out = open_output(common.out, file, stdout_);
    out << manifest_comment(manifest) << '\n';
    write_records_csv(out, records);
  }
}

// --- synth --------------------------------------------------------------------

struct SynthArgs {
  std::string profile = "sharegpt";
  std::string profiles_path;
  double rps = 70.0;
  double duration = 60.0;
};

void cmd_synth(const Common& common, const SynthArgs& a, const std::string& cmdline,
               std::ostream& stdout_) {
  std::vector<StreamProfile> profiles =
      a.profiles_path.empty() ? default_profiles() : load_profiles(a.profiles_path);
  const StreamProfile* profile = nullptr;
  try {
    profile = &find_profile(profiles, a.profile);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const uint64_t seed = common.seed.value_or(0);
  auto records = synthesize_stream(*profile, a.rps, a.duration, seed);

  std::ofstream file;
  std::ostream& out = open_output(common.out, file, stdout_);
  RunManifest manifest{cmdline,
                       a.profiles_path.empty() ? std::vector<std::string>{}
                                               : std::vector{a.profiles_path},
                       seed, KVROOF_VERSION, ""};
  nlohmann::ordered_json header;
  header["manifest"] = nlohmann::ordered_json::parse(manifest_json(manifest));
  header["profile"] = profile->name;
  header["rps"] = a.rps;
  header["duration_s"] = a.duration;
  out << header.dump() << '\n';
  write_stream_jsonl(out, records);
}

// --- simulate -----------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string stream;
  std::string policy = "fifo";
  bool compare = false;
};

void cmd_simulate(const Common& common, const SimulateArgs& a, const std::string& cmdline,
                  std::ostream& stdout_) {
  Policy policy;
  try {
    policy = parse_policy(a.policy);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (common.out.empty()) throw UsageError("simulate requires --out <directory>");

  auto cfg = load_sim_config(a.config);
  auto cat = open_catalog(common.catalog, cfg.catalog_path);
  SimSetup setup = resolve(cfg.config, cat.catalog);

  std::ifstream in(a.stream, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read stream file '{}'", a.stream));
  auto records = read_stream_jsonl(in, a.stream);

  std::filesystem::path dir(common.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(fmt::format("cannot create output directory '{}'", common.out));

  std::vector<std::string> paths{a.config, a.stream};
  if (!cat.path.empty()) paths.push_back(cat.path);
  RunManifest manifest{cmdline, paths, common.seed, KVROOF_VERSION, cat.hash};

  auto write_csv = [&](const SimReport& rep, const std::string& name) {
    std::ofstream f;
    write_iterations_csv(open_output((dir / name).string(), f, stdout_), rep, manifest);
  };
  auto print_summary = [&](const SimReport& rep) {
    size_t done = 0;
    for (const auto& r : rep.requests) done += r.ttft ? 1 : 0;
    stdout_ << fmt::format(
        "{}: iterations={} completed={} rejected={} mean_sched_tokens={:.6g} "
        "compute_busy={:.4f} mean_ttft_s={:.6g}\n",
        to_string(rep.policy), rep.iterations.size(), done, rep.rejections.size(),
        rep.mean_sched_tokens, rep.compute_busy_fraction, rep.mean_ttft);
  };

  if (a.compare) {
    std::vector<Policy> policies{Policy::kFifo, Policy::kUtilizationAware};
    auto cmp = compare_policies(setup, records, policies);
    std::ofstream f;
    write_comparison_json(open_output((dir / "comparison.json").string(), f, stdout_), cmp, setup,
                          manifest);
    write_csv(cmp.reports[0], "iterations_fifo.csv");
    write_csv(cmp.reports[1], "iterations_ua.csv");
    for (const auto& rep : cmp.reports) print_summary(rep);
    return;
  }
  auto rep = run_sim(setup, records, policy);
  std::ofstream f;
  write_report_json(open_output((dir / "report.json").string(), f, stdout_), rep, setup, manifest);
  write_csv(rep, "iterations.csv");
  print_summary(rep);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"kvroof: KV-offload prefill performance modeling", "kvroof"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(KVROOF_VERSION));

  Common common;
  auto add_common = [&](CLI::App* sub, bool bandwidth) {
    sub->add_option("--catalog", common.catalog,
                    "Catalog JSON (default: $KVROOF_CATALOG, else the bundled catalog)");
    sub->add_option("--out", common.out, "Output path");
    if (bandwidth) {
      sub->add_option("--bandwidth", common.bandwidth, "Link bandwidth: peak or sustained")
          ->check(CLI::IsMember({"peak", "sustained"}));
    }
    sub->add_option("--seed", common.seed, "Random seed");
  };

  KappaArgs kappa;
  auto* kappa_cmd = app.add_subcommand("kappa", "Print kappa_M, kappa_HW and kappa_crit");
  add_common(kappa_cmd, true);
  kappa_cmd->add_option("--model", kappa.models, "Model name (repeatable; default all)");
  kappa_cmd->add_option("--hardware", kappa.hardware, "Hardware name (repeatable; default all)");
  kappa_cmd->add_flag("--si", kappa.si, "Print raw byte/FLOP units");

  RooflineArgs roof;
  auto* roof_cmd = app.add_subcommand("roofline", "Write roofline series as CSV");
  add_common(roof_cmd, true);
  roof_cmd->add_option("--model", roof.model, "Model name")->required();
  roof_cmd->add_option("--hardware", roof.hardware, "Hardware name (repeatable; default all)");
  roof_cmd->add_option("--min", roof.range.min, "Smallest kappa_ratio");
  roof_cmd->add_option("--max", roof.range.max, "Largest kappa_ratio");
  roof_cmd->add_option("--points-per-decade", roof.range.points_per_decade, "Grid density");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Summarize a trace file");
  add_common(analyze_cmd, false);
  analyze_cmd->add_option("trace", analyze.trace, "JSON Lines trace file")->required();
  analyze_cmd->add_option("--kind", analyze.kind, "conversation or document")->required();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Synthesize a timed request stream");
  add_common(synth_cmd, false);
  synth_cmd->add_option("--profile", synth.profile, "Profile name");
  synth_cmd->add_option("--profiles", synth.profiles_path, "Profile JSON (default bundled)");
  synth_cmd->add_option("--rps", synth.rps, "Mean arrival rate (requests/s)");
  synth_cmd->add_option("--duration", synth.duration, "Stream length (s)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Replay a stream through the scheduler");
  add_common(sim_cmd, false);
  sim_cmd->add_option("--config", sim.config, "Simulation config JSON")->required();
  sim_cmd->add_option("--stream", sim.stream, "Stream JSON Lines file")->required();
  sim_cmd->add_option("--policy", sim.policy, "fifo or ua");
  sim_cmd->add_flag("--compare", sim.compare, "Run both policies on the same stream");

  std::vector<std::string> argv_storage = args;
  if (argv_storage.empty()) argv_storage.push_back("kvroof");
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::vector<std::string> tail(args.begin() + (args.empty() ? 0 : 1), args.end());
  const std::string cmdline = "kvroof " + join_args(tail);
  try {
    if (*kappa_cmd) cmd_kappa(common, kappa, cmdline, out);
    if (*roof_cmd) cmd_roofline(common, roof, cmdline, out);
    if (*analyze_cmd) cmd_analyze(common, analyze, cmdline, out);
    if (*synth_cmd) cmd_synth(common, synth, cmdline, out);
    if (*sim_cmd) cmd_simulate(common, sim, cmdline, out);
  } catch (const UsageError& e) {
    err << "kvroof: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "kvroof: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "kvroof: " << e.what() << '\n';
    return kExitData;
  } catch (const DomainError& e) {
    err << "kvroof: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace kvroof
