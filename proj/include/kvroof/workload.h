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

// Turns conversation and document-QA traces into (cached, prefill) request
// records, summarizes their distributions, and synthesizes timed streams.

#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kvroof {

struct Turn {
  int64_t query_tokens = 1;
  int64_t response_tokens = 0;
};

struct ConversationTrace {
  std::string conversation_id;
  std::vector<Turn> turns;
};

struct DocumentTrace {
  std::string doc_id;
  int64_t doc_tokens = 1;
  std::vector<int64_t> question_tokens;
};

struct RequestRecord {
  std::string source_id;
  int64_t cached_tokens = 0;
  int64_t prefill_tokens = 1;
  double kappa_ratio = 0.0;
  std::optional<double> arrival_time;

  bool operator==(const RequestRecord&) const = default;
};

RequestRecord make_record(std::string source_id, int64_t cached_tokens, int64_t prefill_tokens,
                          std::optional<double> arrival_time = std::nullopt);

void validate(const ConversationTrace& trace);
void validate(const DocumentTrace& trace);

// Turn i computes its query and reuses every earlier query and response.
std::vector<RequestRecord> expand_conversation(const ConversationTrace& trace);

// Each question reuses the whole document.
std::vector<RequestRecord> expand_document(const DocumentTrace& trace);

struct Percentiles {
  double p10 = 0, p50 = 0, p90 = 0, p95 = 0, p99 = 0;
  double mean = 0, min = 0, max = 0;
};

struct DistributionSummary {
  size_t count = 0;
  Percentiles prefill_tokens;
  Percentiles cached_tokens;
  Percentiles kappa_ratio;
};

// Nearest-rank percentile of ascending data: element ceil(p/100 * n) - 1
// (clamped to the first element for p == 0). Throws DataError when empty.
double nearest_rank(std::span<const double> sorted, double p);

Percentiles percentiles(std::vector<double> values);

// Throws DataError on an empty input.
DistributionSummary summarize(std::span<const RequestRecord> records);

// --- synthetic streams ------------------------------------------------------

struct LogNormal {
  double median = 1.0;
  double sigma = 0.0;  // log-space standard deviation

  double mean() const;
};

struct StreamProfile {
  std::string name;
  std::string description;
  LogNormal cached_tokens;
  LogNormal prefill_tokens;
};

void validate(const StreamProfile& profile);

std::vector<StreamProfile> parse_profiles(std::string_view text, std::string_view source);
std::vector<StreamProfile> load_profiles(const std::string& path);
const std::vector<StreamProfile>& default_profiles();
const StreamProfile& find_profile(std::span<const StreamProfile> profiles, std::string_view name);

// Poisson arrivals at `rps` over [0, duration); K and T drawn independently
// and rounded to at least one token. Deterministic for a given seed.
std::vector<RequestRecord> synthesize_stream(const StreamProfile& profile, double rps,
                                             double duration, uint64_t seed);

// --- trace and stream files (JSON Lines) -----------------------------------

enum class TraceKind { kConversation, kDocument };

TraceKind parse_trace_kind(std::string_view text);

// Parses one trace per line; blank lines are skipped. Errors carry the
// 1-based line number. A file with no traces is a DataError.
std::vector<RequestRecord> read_trace_records(std::istream& in, TraceKind kind,
                                              std::string_view source = "<trace>");

ConversationTrace parse_conversation(std::string_view line);
DocumentTrace parse_document(std::string_view line);

void write_stream_jsonl(std::ostream& out, std::span<const RequestRecord> records);
std::vector<RequestRecord> read_stream_jsonl(std::istream& in, std::string_view source = "<stream>");

void write_records_csv(std::ostream& out, std::span<const RequestRecord> records);

}  // namespace kvroof
