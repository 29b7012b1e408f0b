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

#include "kvroof/report_io.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "kvroof/analytics.h"
#include "kvroof/errors.h"

namespace kvroof {

using ojson = nlohmann::ordered_json;

namespace {

ojson manifest_object(const RunManifest& m) {
  ojson j;
  j["tool"] = "kvroof";
  j["tool_version"] = m.tool_version;
  j["command_line"] = m.command_line;
  j["config_paths"] = m.config_paths;
  j["seed"] = m.seed ? ojson(*m.seed) : ojson(nullptr);
  j["catalog_hash"] = m.catalog_hash;
  return j;
}

ojson config_object(const SimSetup& setup) {
  const auto& c = setup.config;
  ojson j;
  j["model"] = c.model_name;
  j["hardware"] = c.hw_name;
  j["bandwidth_mode"] = std::string(to_string(c.bandwidth_mode));
  j["bandwidth_bytes_per_s"] = setup.hw.bandwidth(c.bandwidth_mode);
  j["token_budget"] = c.token_budget;
  j["overlap_alpha"] = c.overlap_alpha;
  j["allow_chunked_prefill"] = c.allow_chunked_prefill;
  j["vram_effective"] = setup.vram_capacity();
  j["kv_bytes_per_token"] = kv_bytes_per_token(setup.model);
  j["flops_per_token"] = flops_per_token(setup.model);
  j["aging"] = {{"credit_per_second", c.aging.credit_per_second},
                {"credit_weight", c.aging.credit_weight}};
  if (c.power_proxy) {
    j["power_proxy"] = {{"idle_watts", c.power_proxy->idle_watts},
                        {"peak_watts", c.power_proxy->peak_watts}};
  }
  return j;
}

ojson summary_object(const SimReport& r) {
  size_t completed = 0;
  for (const auto& q : r.requests) completed += q.ttft ? 1 : 0;
  ojson j;
  j["policy"] = std::string(to_string(r.policy));
  j["requests"] = r.requests.size();
  j["completed"] = completed;
  j["rejected"] = r.rejections.size();
  j["iterations"] = r.iterations.size();
  j["mean_sched_tokens"] = r.mean_sched_tokens;
  j["p50_sched_tokens"] = r.p50_sched_tokens;
  j["p90_sched_tokens"] = r.p90_sched_tokens;
  j["makespan_s"] = r.makespan;
  j["compute_busy_fraction"] = r.compute_busy_fraction;
  j["transfer_busy_fraction"] = r.transfer_busy_fraction;
  j["mean_power_watts"] = r.mean_power_watts ? ojson(*r.mean_power_watts) : ojson(nullptr);
  j["mean_ttft_s"] = r.mean_ttft;
  j["p50_ttft_s"] = r.p50_ttft;
  j["p99_ttft_s"] = r.p99_ttft;
  return j;
}

ojson requests_array(const SimReport& r) {
  ojson arr = ojson::array();
  for (const auto& q : r.requests) {
    ojson e;
    e["id"] = q.id;
    e["source_id"] = q.source_id;
    e["arrival_time"] = q.arrival_time;
    e["cached_tokens"] = q.cached_tokens;
    e["prefill_tokens"] = q.prefill_tokens;
    // Routing tag: above 100 favors high-bandwidth hosts, below 1 is
    // compute-heavy prefill.
    double kappa = static_cast<double>(q.cached_tokens) / static_cast<double>(q.prefill_tokens);
    e["routing_class"] = kappa > 100.0 ? "high_kappa" : (kappa < 1.0 ? "compute_heavy" : "mixed");
    e["ttft_s"] = q.ttft ? ojson(*q.ttft) : ojson(nullptr);
    arr.push_back(std::move(e));
  }
  return arr;
}

ojson rejections_array(const SimReport& r) {
  ojson arr = ojson::array();
  for (const auto& x : r.rejections) {
    arr.push_back({{"id", x.id}, {"source_id", x.source_id}, {"reason", x.reason}});
  }
  return arr;
}

double number_or(const ojson& obj, const char* key, double fallback, std::string_view source) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw ConfigError(fmt::format("{}: field '{}' must be a number", source, key));
  return it->get<double>();
}

std::string string_of(const ojson& obj, const char* key, std::string_view source) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ConfigError(fmt::format("{}: field '{}' must be a string", source, key));
  }
  return it->get<std::string>();
}

}  // namespace

std::string manifest_json(const RunManifest& manifest) { return manifest_object(manifest).dump(); }

std::string manifest_comment(const RunManifest& manifest) {
  return "# manifest: " + manifest_json(manifest);
}

SimConfigFile parse_sim_config(std::string_view text, std::string_view source,
                               const std::string& base_dir) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ConfigError(fmt::format("{}: config parse error: {}", source, e.what()));
  }
  if (!doc.is_object() || !doc.contains("simulation") || !doc["simulation"].is_object()) {
    throw ConfigError(fmt::format("{}: expected an object with a 'simulation' section", source));
  }
  SimConfigFile out;
  if (doc.contains("catalog")) {
    std::filesystem::path p = string_of(doc, "catalog", source);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    out.catalog_path = p.lexically_normal().string();
  }
  const ojson& s = doc["simulation"];
  static const std::set<std::string> known = {
      "model", "hardware", "bandwidth_mode", "token_budget", "overlap_alpha",
      "allow_chunked_prefill", "vram_effective", "power_proxy", "aging"};
  for (const auto& [key, value] : s.items()) {
    if (!known.count(key)) {
      throw ConfigError(fmt::format("{}: unknown simulation field '{}'", source, key));
    }
  }
  SimConfig& c = out.config;
  c.model_name = string_of(s, "model", source);
  c.hw_name = string_of(s, "hardware", source);
  if (s.contains("bandwidth_mode")) {
    c.bandwidth_mode = parse_bandwidth_mode(string_of(s, "bandwidth_mode", source));
  }
  double budget = number_or(s, "token_budget", static_cast<double>(c.token_budget), source);
  if (std::floor(budget) != budget) {
    throw ConfigError(fmt::format("{}: token_budget must be an integer", source));
  }
  c.token_budget = static_cast<int64_t>(budget);
  c.overlap_alpha = number_or(s, "overlap_alpha", c.overlap_alpha, source);
  if (auto it = s.find("allow_chunked_prefill"); it != s.end()) {
    if (!it->is_boolean()) {
      throw ConfigError(fmt::format("{}: allow_chunked_prefill must be a boolean", source));
    }
    c.allow_chunked_prefill = it->get<bool>();
  }
  if (s.contains("vram_effective")) c.vram_effective = number_or(s, "vram_effective", 0.0, source);
  if (auto it = s.find("power_proxy"); it != s.end()) {
    if (!it->is_object()) throw ConfigError(fmt::format("{}: power_proxy must be an object", source));
    c.power_proxy = PowerProxyConfig{number_or(*it, "idle_watts", 0.0, source),
                                     number_or(*it, "peak_watts", 0.0, source)};
  }
  if (auto it = s.find("aging"); it != s.end()) {
    if (!it->is_object()) throw ConfigError(fmt::format("{}: aging must be an object", source));
    c.aging.credit_per_second =
        number_or(*it, "credit_per_second", c.aging.credit_per_second, source);
    c.aging.credit_weight = number_or(*it, "credit_weight", c.aging.credit_weight, source);
  }
  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
  return out;
}

SimConfigFile load_sim_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  auto dir = std::filesystem::path(path).parent_path();
  return parse_sim_config(buf.str(), path, dir.empty() ? "." : dir.string());
}

void write_iterations_csv(std::ostream& out, const SimReport& report,
                          const std::optional<RunManifest>& manifest) {
  if (manifest) out << manifest_comment(*manifest) << '\n';
  out << "iter,t_start,t_end,scheduled_tokens,vram_used_bytes,queue_depth,busy\n";
  for (const auto& it : report.iterations) {
    out << fmt::format("{},{:.17g},{:.17g},{},{:.17g},{},{}\n", it.index, it.t_start, it.t_end,
                       it.scheduled_tokens, it.vram_used, it.queue_depth, it.busy ? 1 : 0);
  }
}

void write_report_json(std::ostream& out, const SimReport& report, const SimSetup& setup,
                       const RunManifest& manifest) {
  ojson doc;
  doc["manifest"] = manifest_object(manifest);
  doc["config"] = config_object(setup);
  doc["summary"] = summary_object(report);
  doc["rejections"] = rejections_array(report);
  doc["requests"] = requests_array(report);
  out << doc.dump(2) << '\n';
}

void write_comparison_json(std::ostream& out, const PolicyComparison& comparison,
                           const SimSetup& setup, const RunManifest& manifest) {
  ojson doc;
  doc["manifest"] = manifest_object(manifest);
  doc["config"] = config_object(setup);
  ojson policies = ojson::array();
  for (size_t i = 0; i < comparison.reports.size(); ++i) {
    const auto& rep = comparison.reports[i];
    ojson p;
    p["summary"] = summary_object(rep);
    ojson deltas = ojson::array();
    for (size_t r = 0; r < rep.requests.size(); ++r) {
      double d = comparison.ttft_deltas[i][r];
      deltas.push_back({{"id", r},
                        {"source_id", rep.requests[r].source_id},
                        {"ttft_delta_s", std::isnan(d) ? ojson(nullptr) : ojson(d)}});
    }
    p["ttft_delta_vs_first"] = std::move(deltas);
    policies.push_back(std::move(p));
  }
  doc["policies"] = std::move(policies);
  out << doc.dump(2) << '\n';
}

}  // namespace kvroof
