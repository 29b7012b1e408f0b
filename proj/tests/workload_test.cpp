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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "kvroof/errors.h"
#include "kvroof/workload.h"

namespace kvroof {
namespace {

using Pair = std::pair<int64_t, int64_t>;

std::vector<Pair> shape_of(const std::vector<RequestRecord>& rs) {
  std::vector<Pair> out;
  for (const auto& r : rs) out.emplace_back(r.cached_tokens, r.prefill_tokens);
  return out;
}

TEST(Expand, ConversationAccumulatesHistory) {
  ConversationTrace c{"c1", {{3, 1}, {2, 2}, {3, 0}}};
  auto rs = expand_conversation(c);
  EXPECT_EQ(shape_of(rs), (std::vector<Pair>{{0, 3}, {4, 2}, {8, 3}}));
  EXPECT_DOUBLE_EQ(rs[1].kappa_ratio, 2.0);
  EXPECT_EQ(rs[0].source_id, "c1");
}

TEST(Expand, DocumentQuestionsShareContext) {
  DocumentTrace d{"d1", 57000, {12, 9}};
  EXPECT_EQ(shape_of(expand_document(d)), (std::vector<Pair>{{57000, 12}, {57000, 9}}));
}

TEST(Expand, SingleQuestionDocument) {
  std::istringstream in("{\"doc_id\":\"d\",\"doc_tokens\":900,\"question_tokens\":[7]}\n");
  auto rs = read_trace_records(in, TraceKind::kDocument);
  EXPECT_EQ(shape_of(rs), (std::vector<Pair>{{900, 7}}));
}

TEST(Expand, InvalidTracesRejected) {
  EXPECT_THROW(expand_conversation({"c", {{0, 1}}}), DataError);
  EXPECT_THROW(expand_conversation({"c", {{3, -1}}}), DataError);
  EXPECT_THROW(expand_conversation({"c", {}}), DataError);
  EXPECT_THROW(expand_document({"d", 100, {0}}), DataError);
  EXPECT_THROW(make_record("x", 5, 0), DataError);
}

TEST(TraceFile, ConversationFixture) {
  std::ifstream in(KVROOF_FIXTURE_DIR "/conversation.jsonl");
  auto rs = read_trace_records(in, TraceKind::kConversation, "conversation.jsonl");
  EXPECT_EQ(shape_of(rs), (std::vector<Pair>{{0, 3}, {4, 2}, {8, 3}}));
}

TEST(TraceFile, ErrorsCarryLineNumbers) {
  std::istringstream in("{\"doc_id\":\"a\",\"doc_tokens\":5,\"question_tokens\":[1]}\n\n"
                        "{\"doc_id\":\"b\",\"doc_tokens\":-5,\"question_tokens\":[1]}\n");
  try {
    read_trace_records(in, TraceKind::kDocument, "docs");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("docs:3:"), std::string::npos) << e.what();
  }
}

TEST(TraceFile, EmptyInputRejected) {
  std::istringstream in("\n\n");
  EXPECT_THROW(read_trace_records(in, TraceKind::kDocument), DataError);
}

// Independent nearest-rank oracle: smallest value with at least p% at or below it.
double oracle_rank(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  for (size_t i = 0; i < v.size(); ++i) {
    if (100.0 * static_cast<double>(i + 1) >= p * static_cast<double>(v.size()) - 1e-9) return v[i];
  }
  return v.back();
}

TEST(Summarize, MatchesSortOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 1 + rng() % 300;
    std::vector<RequestRecord> rs;
    std::vector<double> ks, ts, rs_kappa;
    for (size_t i = 0; i < n; ++i) {
      const int64_t k = static_cast<int64_t>(rng() % 100000);
      const int64_t t = 1 + static_cast<int64_t>(rng() % 5000);
      rs.push_back(make_record("r", k, t));
      ks.push_back(static_cast<double>(k));
      ts.push_back(static_cast<double>(t));
      rs_kappa.push_back(static_cast<double>(k) / static_cast<double>(t));
    }
    auto s = summarize(rs);
    ASSERT_EQ(s.count, n);
    for (auto [got, data] : {std::pair{&s.cached_tokens, &ks}, std::pair{&s.prefill_tokens, &ts},
                             std::pair{&s.kappa_ratio, &rs_kappa}}) {
      EXPECT_EQ(got->p10, oracle_rank(*data, 10));
      EXPECT_EQ(got->p50, oracle_rank(*data, 50));
      EXPECT_EQ(got->p90, oracle_rank(*data, 90));
      EXPECT_EQ(got->p95, oracle_rank(*data, 95));
      EXPECT_EQ(got->p99, oracle_rank(*data, 99));
      EXPECT_EQ(got->min, *std::min_element(data->begin(), data->end()));
      EXPECT_EQ(got->max, *std::max_element(data->begin(), data->end()));
      const double mean = std::accumulate(data->begin(), data->end(), 0.0) / n;
      EXPECT_NEAR(got->mean, mean, 1e-9 * std::max(1.0, mean));
      EXPECT_LE(got->p10, got->p50);
      EXPECT_LE(got->p50, got->p90);
      EXPECT_LE(got->p90, got->p99);
    }
  }
}

TEST(Summarize, SingleRecord) {
  std::vector<RequestRecord> rs{make_record("x", 40, 8)};
  auto s = summarize(rs);
  for (double v : {s.kappa_ratio.p10, s.kappa_ratio.p50, s.kappa_ratio.p99, s.kappa_ratio.min,
                   s.kappa_ratio.max, s.kappa_ratio.mean}) {
    EXPECT_EQ(v, 5.0);
  }
}

TEST(Summarize, EmptyRejected) {
  std::vector<RequestRecord> none;
  EXPECT_THROW(summarize(none), DataError);
}

TEST(Profiles, BundledProfilesLoad) {
  const auto& ps = default_profiles();
  ASSERT_GE(ps.size(), 3u);
  EXPECT_NO_THROW(find_profile(ps, "sharegpt"));
  EXPECT_NO_THROW(find_profile(ps, "narrativeqa"));
  EXPECT_NO_THROW(find_profile(ps, "finqa"));
  EXPECT_THROW(find_profile(ps, "nope"), ConfigError);
}

TEST(Profiles, InvalidProfileRejected) {
  EXPECT_THROW(parse_profiles(R"({"profiles":[{"name":"x",
      "cached_tokens":{"median":-1,"sigma":1},"prefill_tokens":{"median":1,"sigma":0}}]})", "p"),
               ConfigError);
}

TEST(Synth, DeterministicPerSeed) {
  const auto& p = find_profile(default_profiles(), "sharegpt");
  auto a = synthesize_stream(p, 50, 20, 123);
  auto b = synthesize_stream(p, 50, 20, 123);
  auto c = synthesize_stream(p, 50, 20, 124);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (size_t i = 1; i < a.size(); ++i) EXPECT_LE(*a[i - 1].arrival_time, *a[i].arrival_time);
  for (const auto& r : a) {
    EXPECT_GE(r.prefill_tokens, 1);
    EXPECT_GE(r.cached_tokens, 1);
    EXPECT_LT(*r.arrival_time, 20.0);
  }
}

TEST(Synth, ZeroSigmaIsConstant) {
  StreamProfile p{"flat", "", {1000, 0.0}, {10, 0.0}};
  for (const auto& r : synthesize_stream(p, 20, 10, 1)) {
    EXPECT_EQ(r.cached_tokens, 1000);
    EXPECT_EQ(r.prefill_tokens, 10);
  }
}

TEST(Synth, InterarrivalsAreExponential) {
  // One-sample Kolmogorov-Smirnov at the 1% level.
  StreamProfile p{"flat", "", {1, 0.0}, {1, 0.0}};
  const double rps = 100.0;
  auto rs = synthesize_stream(p, rps, 100.0, 77);
  std::vector<double> gaps;
  double prev = 0.0;
  for (const auto& r : rs) {
    gaps.push_back(*r.arrival_time - prev);
    prev = *r.arrival_time;
  }
  ASSERT_GT(gaps.size(), 9000u);
  std::sort(gaps.begin(), gaps.end());
  const double n = static_cast<double>(gaps.size());
  double d = 0.0;
  for (size_t i = 0; i < gaps.size(); ++i) {
    const double f = 1.0 - std::exp(-rps * gaps[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  EXPECT_LT(d, 1.628 / std::sqrt(n));
  EXPECT_NEAR(n / 100.0, rps, 5.0);
}

TEST(Synth, ChatProfileMoments) {
  const auto& p = find_profile(default_profiles(), "sharegpt");
  auto rs = synthesize_stream(p, 1000, 300, 5);
  auto s = summarize(rs);
  EXPECT_NEAR(s.cached_tokens.mean, 11115.0, 0.10 * 11115.0);
  EXPECT_NEAR(s.prefill_tokens.mean, 82.0, 0.10 * 82.0);
  EXPECT_GE(s.kappa_ratio.p50, 70.0);
  EXPECT_LE(s.kappa_ratio.p50, 140.0);
  EXPECT_NEAR(p.cached_tokens.mean(), 11115.0, 0.02 * 11115.0);
  EXPECT_NEAR(p.prefill_tokens.mean(), 82.0, 0.02 * 82.0);
}

TEST(Synth, DocumentProfilesHaveHighKappa) {
  for (const char* name : {"narrativeqa", "finqa"}) {
    auto rs = synthesize_stream(find_profile(default_profiles(), name), 100, 50, 3);
    EXPECT_GT(summarize(rs).kappa_ratio.p50, 1000.0) << name;
  }
}

TEST(Synth, BadArgumentsRejected) {
  const auto& p = find_profile(default_profiles(), "sharegpt");
  EXPECT_THROW(synthesize_stream(p, 0.0, 10, 1), ConfigError);
  EXPECT_THROW(synthesize_stream(p, 1.0, -1, 1), ConfigError);
}

TEST(StreamFile, RoundTripAndManifestSkipped) {
  const auto& p = find_profile(default_profiles(), "narrativeqa");
  auto rs = synthesize_stream(p, 30, 10, 8);
  std::ostringstream out;
  out << "{\"manifest\":{\"tool\":\"kvroof\"}}\n";
  write_stream_jsonl(out, rs);
  std::istringstream in(out.str());
  auto back = read_stream_jsonl(in);
  ASSERT_EQ(back.size(), rs.size());
  for (size_t i = 0; i < rs.size(); ++i) {
    EXPECT_EQ(back[i].cached_tokens, rs[i].cached_tokens);
    EXPECT_EQ(back[i].prefill_tokens, rs[i].prefill_tokens);
    EXPECT_EQ(back[i].arrival_time, rs[i].arrival_time);
  }
}

TEST(StreamFile, DecreasingArrivalsRejected) {
  std::istringstream in(
      "{\"source_id\":\"a\",\"cached_tokens\":1,\"prefill_tokens\":1,\"arrival_time\":2.0}\n"
      "{\"source_id\":\"b\",\"cached_tokens\":1,\"prefill_tokens\":1,\"arrival_time\":1.0}\n");
  EXPECT_THROW(read_stream_jsonl(in), DataError);
}

}  // namespace
}  // namespace kvroof
