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

#include "kvroof/workload.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "json.hpp"
#include "kvroof/errors.h"

namespace kvroof {

namespace embedded {
extern const std::string_view kProfilesJson;
}  // namespace embedded

using nlohmann::json;

RequestRecord make_record(std::string source_id, int64_t cached_tokens, int64_t prefill_tokens,
                          std::optional<double> arrival_time) {
  if (cached_tokens < 0 || prefill_tokens < 1) {
    throw DataError(fmt::format("request '{}': need cached >= 0 and prefill >= 1, got K={} T={}",
                                source_id, cached_tokens, prefill_tokens));
  }
  RequestRecord r;
  r.source_id = std::move(source_id);
  r.cached_tokens = cached_tokens;
  r.prefill_tokens = prefill_tokens;
  r.kappa_ratio = static_cast<double>(cached_tokens) / static_cast<double>(prefill_tokens);
  r.arrival_time = arrival_time;
  return r;
}

void validate(const ConversationTrace& trace) {
  if (trace.turns.empty()) {
    throw DataError(fmt::format("conversation '{}' has no turns", trace.conversation_id));
  }
  for (size_t i = 0; i < trace.turns.size(); ++i) {
    const auto& t = trace.turns[i];
    if (t.query_tokens < 1 || t.response_tokens < 0) {
      throw DataError(fmt::format("conversation '{}' turn {}: query_tokens must be >= 1 and "
                                  "response_tokens >= 0",
                                  trace.conversation_id, i + 1));
    }
  }
}

void validate(const DocumentTrace& trace) {
  if (trace.doc_tokens < 1) {
    throw DataError(fmt::format("document '{}': doc_tokens must be >= 1", trace.doc_id));
  }
  for (size_t i = 0; i < trace.question_tokens.size(); ++i) {
    if (trace.question_tokens[i] < 1) {
      throw DataError(fmt::format("document '{}' question {}: question_tokens must be >= 1",
                                  trace.doc_id, i + 1));
    }
  }
}

std::vector<RequestRecord> expand_conversation(const ConversationTrace& trace) {
  validate(trace);
  std::vector<RequestRecord> out;
  out.reserve(trace.turns.size());
  int64_t history = 0;
  for (const auto& turn : trace.turns) {
    out.push_back(make_record(trace.conversation_id, history, turn.query_tokens));
    history += turn.query_tokens + turn.response_tokens;
  }
  return out;
}

std::vector<RequestRecord> expand_document(const DocumentTrace& trace) {
  validate(trace);
  std::vector<RequestRecord> out;
  out.reserve(trace.question_tokens.size());
  for (int64_t q : trace.question_tokens) out.push_back(make_record(trace.doc_id, trace.doc_tokens, q));
  return out;
}

double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DataError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw DomainError(fmt::format("percentile {} outside [0, 100]", p));
  auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  return sorted[rank == 0 ? 0 : rank - 1];
}

Percentiles percentiles(std::vector<double> values) {
  if (values.empty()) throw DataError("cannot summarize an empty sample");
  std::sort(values.begin(), values.end());
  Percentiles p;
  p.p10 = nearest_rank(values, 10);
  p.p50 = nearest_rank(values, 50);
  p.p90 = nearest_rank(values, 90);
  p.p95 = nearest_rank(values, 95);
  p.p99 = nearest_rank(values, 99);
  p.min = values.front();
  p.max = values.back();
  p.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return p;
}

DistributionSummary summarize(std::span<const RequestRecord> records) {
  if (records.empty()) throw DataError("cannot summarize an empty record set");
  std::vector<double> t, k, ratio;
  t.reserve(records.size());
  k.reserve(records.size());
  ratio.reserve(records.size());
  for (const auto& r : records) {
    t.push_back(static_cast<double>(r.prefill_tokens));
    k.push_back(static_cast<double>(r.cached_tokens));
    ratio.push_back(r.kappa_ratio);
  }
  DistributionSummary s;
  s.count = records.size();
  s.prefill_tokens = percentiles(std::move(t));
  s.cached_tokens = percentiles(std::move(k));
  s.kappa_ratio = percentiles(std::move(ratio));
  return s;
}

// ---------------------------------------------------------------------------
// Profiles and stream synthesis

double LogNormal::mean() const { return median * std::exp(0.5 * sigma * sigma); }

void validate(const StreamProfile& profile) {
  auto check = [&](const LogNormal& d, std::string_view which) {
    if (!std::isfinite(d.median) || d.median <= 0.0 || !std::isfinite(d.sigma) || d.sigma < 0.0) {
      throw ConfigError(fmt::format("profile '{}': {} needs median > 0 and sigma >= 0, got "
                                    "median={} sigma={}",
                                    profile.name, which, d.median, d.sigma));
    }
  };
  check(profile.cached_tokens, "cached_tokens");
  check(profile.prefill_tokens, "prefill_tokens");
}

namespace {

LogNormal read_lognormal(const json& obj, std::string_view profile, std::string_view field) {
  if (!obj.is_object() || !obj.contains("median") || !obj.contains("sigma") ||
      !obj["median"].is_number() || !obj["sigma"].is_number()) {
    throw ConfigError(fmt::format("profile '{}': field '{}' needs numeric median and sigma",
                                  profile, field));
  }
  return {obj["median"].get<double>(), obj["sigma"].get<double>()};
}

}  // namespace

std::vector<StreamProfile> parse_profiles(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: profile parse error: {}", source, e.what()));
  }
  if (!doc.is_object() || !doc.contains("profiles") || !doc["profiles"].is_array()) {
    throw ConfigError(fmt::format("{}: expected an object with a 'profiles' array", source));
  }
  std::vector<StreamProfile> out;
  for (const auto& p : doc["profiles"]) {
    if (!p.is_object() || !p.contains("name") || !p["name"].is_string()) {
      throw ConfigError(fmt::format("{}: every profile needs a string 'name'", source));
    }
    StreamProfile sp;
    sp.name = p["name"].get<std::string>();
    sp.description = p.value("description", "");
    sp.cached_tokens = read_lognormal(p.value("cached_tokens", json()), sp.name, "cached_tokens");
    sp.prefill_tokens = read_lognormal(p.value("prefill_tokens", json()), sp.name, "prefill_tokens");
    validate(sp);
    out.push_back(std::move(sp));
  }
  return out;
}

std::vector<StreamProfile> load_profiles(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read profile file '{}'", path));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_profiles(text, path);
}

const std::vector<StreamProfile>& default_profiles() {
  static const std::vector<StreamProfile> profiles =
      parse_profiles(embedded::kProfilesJson, "<bundled profiles>");
  return profiles;
}

const StreamProfile& find_profile(std::span<const StreamProfile> profiles, std::string_view name) {
  for (const auto& p : profiles) {
    if (p.name == name) return p;
  }
  std::string names;
  for (const auto& p : profiles) names += (names.empty() ? "" : ", ") + p.name;
  throw ConfigError(fmt::format("unknown profile '{}'; available: {}", name, names));
}

namespace {

int64_t draw_tokens(const LogNormal& d, std::mt19937_64& rng) {
  double x = d.median;
  if (d.sigma > 0.0) {
    std::lognormal_distribution<double> dist(std::log(d.median), d.sigma);
    x = dist(rng);
  }
  return std::max<int64_t>(1, std::llround(x));
}

}  // namespace

std::vector<RequestRecord> synthesize_stream(const StreamProfile& profile, double rps,
                                             double duration, uint64_t seed) {
  validate(profile);
  if (!(rps > 0.0) || !std::isfinite(rps)) throw ConfigError(fmt::format("rps must be > 0, got {}", rps));
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError(fmt::format("duration must be > 0, got {}", duration));
  }
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rps);
  std::vector<RequestRecord> out;
  out.reserve(static_cast<size_t>(rps * duration * 1.1) + 16);
  double t = 0.0;
  for (size_t i = 0;; ++i) {
    t += gap(rng);
    if (t >= duration) break;
    int64_t k = draw_tokens(profile.cached_tokens, rng);
    int64_t n = draw_tokens(profile.prefill_tokens, rng);
    out.push_back(make_record(fmt::format("{}-{}", profile.name, i), k, n, t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

TraceKind parse_trace_kind(std::string_view text) {
  if (text == "conversation") return TraceKind::kConversation;
  if (text == "document") return TraceKind::kDocument;
  throw ConfigError(fmt::format("trace kind must be 'conversation' or 'document', got '{}'", text));
}

namespace {

int64_t token_field(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_number_integer()) {
    throw DataError(fmt::format("field '{}' must be an integer", field));
  }
  return it->get<int64_t>();
}

std::string string_field(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    throw DataError(fmt::format("field '{}' must be a string", field));
  }
  return it->get<std::string>();
}

json parse_object(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("invalid JSON: {}", e.what()));
  }
  if (!obj.is_object()) throw DataError("each line must be a JSON object");
  return obj;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace

ConversationTrace parse_conversation(std::string_view line) {
  json obj = parse_object(line);
  ConversationTrace trace;
  trace.conversation_id = string_field(obj, "conversation_id");
  auto it = obj.find("turns");
  if (it == obj.end() || !it->is_array()) throw DataError("field 'turns' must be an array");
  for (const auto& t : *it) {
    if (!t.is_object()) throw DataError("each turn must be an object");
    trace.turns.push_back({token_field(t, "query_tokens"), token_field(t, "response_tokens")});
  }
  validate(trace);
  return trace;
}

DocumentTrace parse_document(std::string_view line) {
  json obj = parse_object(line);
  DocumentTrace trace;
  trace.doc_id = string_field(obj, "doc_id");
  trace.doc_tokens = token_field(obj, "doc_tokens");
  auto it = obj.find("question_tokens");
  if (it == obj.end() || !it->is_array()) throw DataError("field 'question_tokens' must be an array");
  for (const auto& q : *it) {
    if (!q.is_number_integer()) throw DataError("question_tokens entries must be integers");
    trace.question_tokens.push_back(q.get<int64_t>());
  }
  validate(trace);
  return trace;
}

std::vector<RequestRecord> read_trace_records(std::istream& in, TraceKind kind,
                                              std::string_view source) {
  std::vector<RequestRecord> out;
  std::string line;
  size_t line_no = 0;
  size_t traces = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      auto records = kind == TraceKind::kConversation ? expand_conversation(parse_conversation(line))
                                                      : expand_document(parse_document(line));
      out.insert(out.end(), records.begin(), records.end());
      ++traces;
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  if (traces == 0) throw DataError(fmt::format("{}: no traces found", source));
  return out;
}

void write_stream_jsonl(std::ostream& out, std::span<const RequestRecord> records) {
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["source_id"] = r.source_id;
    obj["cached_tokens"] = r.cached_tokens;
    obj["prefill_tokens"] = r.prefill_tokens;
    obj["kappa_ratio"] = r.kappa_ratio;
    if (r.arrival_time) obj["arrival_time"] = *r.arrival_time;
    out << obj.dump() << '\n';
  }
}

std::vector<RequestRecord> read_stream_jsonl(std::istream& in, std::string_view source) {
  std::vector<RequestRecord> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      json obj = parse_object(line);
      if (obj.contains("manifest")) continue;
      std::optional<double> arrival;
      if (auto it = obj.find("arrival_time"); it != obj.end() && !it->is_null()) {
        if (!it->is_number()) throw DataError("field 'arrival_time' must be a number");
        arrival = it->get<double>();
      }
      std::string id = obj.contains("source_id") ? string_field(obj, "source_id")
                                                 : fmt::format("line-{}", line_no);
      auto rec = make_record(std::move(id), token_field(obj, "cached_tokens"),
                             token_field(obj, "prefill_tokens"), arrival);
      if (!out.empty() && rec.arrival_time && out.back().arrival_time &&
          *rec.arrival_time < *out.back().arrival_time) {
        throw DataError("arrival times must be nondecreasing");
      }
      out.push_back(std::move(rec));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  return out;
}

void write_records_csv(std::ostream& out, std::span<const RequestRecord> records) {
  out << "source_id,cached_tokens,prefill_tokens,kappa_ratio,arrival_time\n";
  for (const auto& r : records) {
    out << fmt::format("{},{},{},{:.17g},", r.source_id, r.cached_tokens, r.prefill_tokens,
                       r.kappa_ratio);
    if (r.arrival_time) out << fmt::format("{:.17g}", *r.arrival_time);
    out << '\n';
  }
}

}  // namespace kvroof
