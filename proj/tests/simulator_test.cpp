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
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "kvroof/analytics.h"
#include "kvroof/catalog.h"
#include "kvroof/errors.h"
#include "kvroof/simulator.h"

namespace kvroof {
namespace {

SimSetup qwen_setup(double alpha = 0.0) {
  SimConfig c;
  c.model_name = "Qwen3-235B-A22B";
  c.hw_name = "H100-PCIe5";
  c.overlap_alpha = alpha;
  return resolve(c, default_catalog());
}

// Two bytes of KV per token, two FLOPs per token.
SimSetup toy_setup(int64_t budget, double vram_tokens, double compute = 100.0,
                   double bandwidth = 100.0) {
  SimSetup s;
  s.model = ModelSpec{"toy", 1, 1, AttentionKind::kGqa, 1, 1, 1};
  s.model.precision_bits = 8;
  s.hw = HardwareSpec{"toy-gpu", compute, bandwidth, std::nullopt, 2.0 * vram_tokens};
  s.config.model_name = "toy";
  s.config.hw_name = "toy-gpu";
  s.config.token_budget = budget;
  return s;
}

TEST(SingleRequest, MatchesAnalyticTtft) {
  for (double alpha : {0.0, 0.5, 1.0}) {
    auto setup = qwen_setup(alpha);
    for (auto [k, t] : {std::pair<int64_t, int64_t>{65536, 64}, {0, 512}, {1000, 4000}, {8, 1}}) {
      std::vector<RequestRecord> rs{make_record("r", k, t, 3.0)};
      auto rep = run_sim(setup, rs, Policy::kFifo);
      const auto want = ttft({k, t}, setup.model, setup.hw, alpha, BandwidthMode::kSustained);
      ASSERT_TRUE(rep.requests[0].ttft);
      EXPECT_NEAR(*rep.requests[0].ttft, want.ttft, 1e-12 + 1e-9 * want.ttft);
      EXPECT_EQ(rep.iterations.size(), 1u);
    }
  }
}

TEST(ToyInstance, FifoThreeUaTwo) {
  auto setup = toy_setup(5, 10.0);
  std::vector<RequestRecord> rs{make_record("R1", 4, 1, 0.0), make_record("R2", 3, 2, 0.0),
                                make_record("R3", 0, 3, 0.0), make_record("R4", 1, 4, 0.0)};
  auto fifo = run_sim(setup, rs, Policy::kFifo);
  ASSERT_EQ(fifo.iterations.size(), 3u);
  EXPECT_EQ(fifo.iterations[0].scheduled_tokens, 3);
  auto ua = run_sim(setup, rs, Policy::kUtilizationAware);
  ASSERT_EQ(ua.iterations.size(), 2u);
  EXPECT_EQ(ua.iterations[0].scheduled_tokens, 5);
  EXPECT_EQ(ua.iterations[1].scheduled_tokens, 5);
}

TEST(Rejection, OversizedAndUnchunkable) {
  auto setup = toy_setup(5, 10.0);
  setup.config.allow_chunked_prefill = false;
  std::vector<RequestRecord> rs{make_record("big", 20, 1, 0.0), make_record("long", 0, 7, 0.0),
                                make_record("ok", 2, 2, 0.0)};
  auto rep = run_sim(setup, rs, Policy::kFifo);
  ASSERT_EQ(rep.rejections.size(), 2u);
  EXPECT_EQ(rep.rejections[0].source_id, "big");
  EXPECT_EQ(rep.rejections[1].source_id, "long");
  EXPECT_FALSE(rep.requests[0].ttft);
  EXPECT_TRUE(rep.requests[2].ttft);
}

TEST(Input, UnsortedArrivalsRejected) {
  std::vector<RequestRecord> rs{make_record("a", 1, 1, 2.0), make_record("b", 1, 1, 1.0)};
  EXPECT_THROW(run_sim(toy_setup(5, 10), rs, Policy::kFifo), DataError);
}

TEST(Input, BadConfigRejected) {
  auto s = toy_setup(0, 10);
  std::vector<RequestRecord> rs{make_record("a", 1, 1, 0.0)};
  EXPECT_THROW(run_sim(s, rs, Policy::kFifo), ConfigError);
  s = toy_setup(5, 10);
  s.config.overlap_alpha = 2.0;
  EXPECT_THROW(run_sim(s, rs, Policy::kFifo), ConfigError);
}

TEST(StateMachine, LegalTransitions) {
  EXPECT_TRUE(is_legal_transition(RequestState::kQueued, RequestState::kTransferring, 5));
  EXPECT_FALSE(is_legal_transition(RequestState::kQueued, RequestState::kReady, 5));
  EXPECT_TRUE(is_legal_transition(RequestState::kQueued, RequestState::kReady, 0));
  EXPECT_FALSE(is_legal_transition(RequestState::kDone, RequestState::kQueued, 0));
  SimRequest r;
  r.cached_tokens = 3;
  EXPECT_THROW(r.advance(RequestState::kRunning), std::logic_error);
}

std::vector<RequestRecord> random_stream(std::mt19937_64& rng, size_t n) {
  std::vector<RequestRecord> rs;
  double t = 0.0;
  std::exponential_distribution<double> gap(5.0 + static_cast<double>(rng() % 50));
  for (size_t i = 0; i < n; ++i) {
    t += gap(rng);
    rs.push_back(make_record("r" + std::to_string(i), static_cast<int64_t>(rng() % 40),
                             1 + static_cast<int64_t>(rng() % 15), t));
  }
  return rs;
}

void check_invariants(const SimSetup& setup, std::span<const RequestRecord> rs,
                      const SimReport& rep) {
  const double kv = kv_bytes_per_token(setup.model);
  const int64_t budget = setup.config.token_budget;
  std::map<size_t, int64_t> tokens;
  double prev_end = -1.0;
  for (const auto& it : rep.iterations) {
    // Safety: budget and VRAM are never exceeded.
    EXPECT_LE(it.scheduled_tokens, budget);
    EXPECT_GT(it.scheduled_tokens, 0);
    EXPECT_LE(it.vram_used, setup.vram_capacity() + 1e-9);
    EXPECT_GE(it.t_end, it.t_start);
    int64_t sum = 0;
    for (const auto& a : it.assignments) {
      tokens[a.id] += a.tokens;
      sum += a.tokens;
      EXPECT_GE(it.t_start, rs[a.id].arrival_time.value());
    }
    EXPECT_EQ(sum, it.scheduled_tokens);
    // Work conservation: an idle gap only when every arrived request is finished.
    if (prev_end >= 0.0 && it.t_start > prev_end) {
      for (const auto& r : rep.requests) {
        if (r.arrival_time <= prev_end && r.ttft) {
          EXPECT_LE(r.arrival_time + *r.ttft, prev_end + 1e-12) << "request " << r.id;
        }
      }
    }
    EXPECT_GE(it.t_start, prev_end);
    prev_end = it.t_end;
  }
  std::vector<bool> rejected(rs.size(), false);
  for (const auto& x : rep.rejections) rejected[x.id] = true;
  for (size_t i = 0; i < rs.size(); ++i) {
    const auto& r = rep.requests[i];
    if (rejected[i]) {
      EXPECT_EQ(r.state, RequestState::kQueued);
      EXPECT_FALSE(r.ttft);
      const bool too_big =
          static_cast<double>(rs[i].cached_tokens + rs[i].prefill_tokens) * kv >
          setup.vram_capacity();
      const bool unchunkable =
          !setup.config.allow_chunked_prefill && rs[i].prefill_tokens > budget;
      EXPECT_TRUE(too_big || unchunkable) << "request " << i;
      continue;
    }
    // Conservation: every admitted request finishes with exactly T tokens.
    EXPECT_EQ(r.state, RequestState::kDone);
    EXPECT_EQ(tokens[i], rs[i].prefill_tokens);
    ASSERT_TRUE(r.ttft);
    EXPECT_GT(*r.ttft, 0.0);
    const bool transfers =
        std::find(r.history.begin(), r.history.end(), RequestState::kTransferring) != r.history.end();
    EXPECT_EQ(transfers, rs[i].cached_tokens > 0);
    EXPECT_EQ(r.history.back(), RequestState::kDone);
  }
}

TEST(Invariants, ThousandRandomStreams) {
  std::mt19937_64 rng(123456);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t budget = 1 + static_cast<int64_t>(rng() % 40);
    auto setup = toy_setup(budget, 20.0 + static_cast<double>(rng() % 100),
                           50.0 + static_cast<double>(rng() % 500),
                           50.0 + static_cast<double>(rng() % 500));
    setup.config.allow_chunked_prefill = rng() % 4 != 0;
    setup.config.overlap_alpha = static_cast<double>(rng() % 5) / 4.0;
    auto rs = random_stream(rng, 5 + rng() % 40);
    for (Policy p : {Policy::kFifo, Policy::kUtilizationAware}) {
      auto rep = run_sim(setup, rs, p);
      check_invariants(setup, rs, rep);
      if (HasFailure()) FAIL() << "trial " << trial << " policy " << to_string(p);
    }
  }
}

TEST(Determinism, SameInputSameReport) {
  std::mt19937_64 rng(1);
  auto rs = random_stream(rng, 200);
  auto setup = toy_setup(20, 60.0);
  for (Policy p : {Policy::kFifo, Policy::kUtilizationAware}) {
    auto a = run_sim(setup, rs, p);
    auto b = run_sim(setup, rs, p);
    ASSERT_EQ(a.iterations.size(), b.iterations.size());
    for (size_t i = 0; i < a.iterations.size(); ++i) {
      EXPECT_EQ(a.iterations[i].t_end, b.iterations[i].t_end);
      EXPECT_EQ(a.iterations[i].scheduled_tokens, b.iterations[i].scheduled_tokens);
    }
    EXPECT_EQ(a.mean_ttft, b.mean_ttft);
  }
}

// A request that never fits the token-maximizing choice still gets served
// once its aging credit matures.
TEST(Aging, PreventsStarvation) {
  auto setup = toy_setup(10, 1000.0, 200.0, 1e6);
  setup.config.allow_chunked_prefill = false;
  std::vector<RequestRecord> rs{make_record("big", 0, 7, 0.0)};
  for (int i = 0; i < 400; ++i) {
    rs.push_back(make_record("s" + std::to_string(i), 0, 5, 0.05 * (i / 2)));
  }
  std::stable_sort(rs.begin(), rs.end(), [](const auto& a, const auto& b) {
    return *a.arrival_time < *b.arrival_time;
  });
  auto find_big = [](const SimReport& r) {
    for (const auto& q : r.requests) {
      if (q.source_id == "big") return q;
    }
    return SimRequest{};
  };
  auto aged = run_sim(setup, rs, Policy::kUtilizationAware);
  ASSERT_TRUE(find_big(aged).ttft);
  EXPECT_LT(*find_big(aged).ttft, 1.5);

  setup.config.aging.credit_per_second = 0.0;
  auto starving = run_sim(setup, rs, Policy::kUtilizationAware);
  ASSERT_TRUE(find_big(starving).ttft);
  EXPECT_GT(*find_big(starving).ttft, 5.0);
}

TEST(Power, ProxyBetweenIdleAndPeak) {
  std::mt19937_64 rng(8);
  auto rs = random_stream(rng, 100);
  auto setup = toy_setup(20, 80.0);
  setup.config.power_proxy = PowerProxyConfig{100.0, 400.0};
  auto rep = run_sim(setup, rs, Policy::kFifo);
  ASSERT_TRUE(rep.mean_power_watts);
  EXPECT_NEAR(*rep.mean_power_watts, 100.0 + 300.0 * rep.compute_busy_fraction, 1e-9);
  EXPECT_GE(*rep.mean_power_watts, 100.0);
  EXPECT_LE(*rep.mean_power_watts, 400.0);
  EXPECT_THROW(power_proxy(rep, 400.0, 100.0), ConfigError);
}

TEST(Power, LowerBandwidthLowersComputeBusy) {
  std::mt19937_64 rng(21);
  auto rs = random_stream(rng, 300);
  double prev = 2.0;
  for (double bw : {1000.0, 300.0, 100.0, 30.0}) {
    auto setup = toy_setup(20, 80.0, 200.0, bw);
    auto rep = run_sim(setup, rs, Policy::kFifo);
    EXPECT_LT(rep.compute_busy_fraction, prev) << bw;
    prev = rep.compute_busy_fraction;
  }
}

TEST(Compare, DeltasPerRequest) {
  auto setup = toy_setup(5, 10.0);
  std::vector<RequestRecord> rs{make_record("R1", 4, 1, 0.0), make_record("R2", 3, 2, 0.0),
                                make_record("R3", 0, 3, 0.0), make_record("R4", 1, 4, 0.0)};
  std::vector<Policy> ps{Policy::kFifo, Policy::kUtilizationAware};
  auto cmp = compare_policies(setup, rs, ps);
  ASSERT_EQ(cmp.reports.size(), 2u);
  ASSERT_EQ(cmp.ttft_deltas[1].size(), 4u);
  for (size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(cmp.ttft_deltas[0][i], 0.0);
    EXPECT_NEAR(cmp.ttft_deltas[1][i],
                *cmp.reports[1].requests[i].ttft - *cmp.reports[0].requests[i].ttft, 1e-15);
  }
}

}  // namespace
}  // namespace kvroof
