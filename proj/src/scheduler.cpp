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

#include "kvroof/scheduler.h"

#include <algorithm>
#include <optional>

#include <fmt/format.h>

#include "kvroof/errors.h"

namespace kvroof {

std::string_view to_string(Policy policy) {
  return policy == Policy::kFifo ? "fifo" : "utilization-aware";
}

Policy parse_policy(std::string_view text) {
  if (text == "fifo") return Policy::kFifo;
  if (text == "ua" || text == "utilization-aware") return Policy::kUtilizationAware;
  throw ConfigError(fmt::format("policy must be 'fifo' or 'ua', got '{}'", text));
}

namespace {

bool arrival_order(const Candidate& a, const Candidate& b) {
  if (a.resident != b.resident) return a.resident;
  if (a.arrival_time != b.arrival_time) return a.arrival_time < b.arrival_time;
  return a.id < b.id;
}

class Builder {
 public:
  Builder(int64_t budget, double vram_free) : budget_left_(budget), vram_left_(vram_free) {}

  int64_t budget_left() const { return budget_left_; }
  double vram_left() const { return vram_left_; }

  // Tokens the candidate would get now, or 0 if it cannot be admitted.
  int64_t grant(const Candidate& c, bool chunking) const {
    if (budget_left_ <= 0 || c.remaining_tokens <= 0) return 0;
    if (c.vram_needed > vram_left_) return 0;
    if (!chunking && c.remaining_tokens > budget_left_) return 0;
    return std::min(c.remaining_tokens, budget_left_);
  }

  void admit(const Candidate& c, int64_t tokens) {
    sel_.entries.push_back({c.id, tokens});
    sel_.total_tokens += tokens;
    sel_.vram_admitted += c.vram_needed;
    budget_left_ -= tokens;
    vram_left_ -= c.vram_needed;
  }

  Selection take() { return std::move(sel_); }

 private:
  int64_t budget_left_;
  double vram_left_;
  Selection sel_;
};

// Depth-first search over include/exclude decisions, include first, so the
// first optimum found is the one that favors earlier candidates.
class ExactFill {
 public:
  ExactFill(std::span<const Candidate*> window, bool chunking)
      : window_(window), chunking_(chunking), suffix_tokens_(window.size() + 1, 0) {
    for (size_t i = window.size(); i-- > 0;) {
      suffix_tokens_[i] = suffix_tokens_[i + 1] + window[i]->remaining_tokens;
    }
  }

  std::vector<size_t> solve(int64_t budget, double vram) {
    budget_ = budget;
    best_tokens_ = -1;
    current_.clear();
    search(0, budget, vram, 0);
    return best_;
  }

 private:
  void search(size_t i, int64_t budget_left, double vram_left, int64_t tokens) {
    if (best_tokens_ == budget_) return;
    if (tokens > best_tokens_) {
      best_tokens_ = tokens;
      best_ = current_;
    }
    if (i == window_.size() || budget_left == 0) return;
    if (tokens + std::min(budget_left, suffix_tokens_[i]) <= best_tokens_) return;

    const Candidate& c = *window_[i];
    if (c.vram_needed <= vram_left && (chunking_ || c.remaining_tokens <= budget_left)) {
      int64_t t = std::min(c.remaining_tokens, budget_left);
      current_.push_back(i);
      search(i + 1, budget_left - t, vram_left - c.vram_needed, tokens + t);
      current_.pop_back();
    }
    search(i + 1, budget_left, vram_left, tokens);
  }

  std::span<const Candidate*> window_;
  bool chunking_;
  std::vector<int64_t> suffix_tokens_;
  int64_t budget_ = 0;
  int64_t best_tokens_ = -1;
  std::vector<size_t> current_;
  std::vector<size_t> best_;
};

}  // namespace

Selection schedule_fifo(std::span<const Candidate> queue, int64_t budget, double vram_free,
                        bool chunking) {
  std::vector<Candidate> ordered(queue.begin(), queue.end());
  std::stable_sort(ordered.begin(), ordered.end(), arrival_order);
  Builder b(budget, vram_free);
  for (const auto& c : ordered) {
    int64_t t = b.grant(c, chunking);
    if (t == 0) break;
    b.admit(c, t);
  }
  return b.take();
}

Selection schedule_utilization_aware(std::span<const Candidate> queue, int64_t budget,
                                     double vram_free, bool chunking, const AgingConfig& aging,
                                     double now) {
  Builder b(budget, vram_free);
  std::vector<Candidate> residents;
  std::vector<std::pair<double, const Candidate*>> waiting;
  for (const auto& c : queue) {
    if (c.resident) {
      residents.push_back(c);
    } else {
      double wait = std::max(0.0, now - c.arrival_time);
      waiting.emplace_back(wait * aging.credit_per_second * aging.credit_weight, &c);
    }
  }

  std::stable_sort(residents.begin(), residents.end(), arrival_order);
  for (const auto& c : residents) {
    int64_t t = b.grant(c, chunking);
    if (t > 0) b.admit(c, t);
  }

  std::stable_sort(waiting.begin(), waiting.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return arrival_order(*x.second, *y.second);
  });

  // Priority pass over aged requests.
  size_t next = 0;
  for (; next < waiting.size() && waiting[next].first >= kAgedCredit; ++next) {
    if (b.budget_left() <= 0) return b.take();
    const Candidate& c = *waiting[next].second;
    int64_t t = b.grant(c, chunking);
    if (t == 0) return b.take();
    b.admit(c, t);
  }
  if (b.budget_left() <= 0) return b.take();

  // Exact fill over a bounded window, then best-fit over the remainder.
  std::vector<const Candidate*> rest;
  rest.reserve(waiting.size() - next);
  for (size_t i = next; i < waiting.size(); ++i) rest.push_back(waiting[i].second);

  size_t window = std::min(rest.size(), kExactWindow);
  std::vector<bool> taken(rest.size(), false);
  ExactFill exact(std::span<const Candidate*>(rest.data(), window), chunking);
  for (size_t i : exact.solve(b.budget_left(), b.vram_left())) {
    b.admit(*rest[i], b.grant(*rest[i], chunking));
    taken[i] = true;
  }

  while (b.budget_left() > 0) {
    std::optional<size_t> best;
    std::optional<size_t> first_partial;
    for (size_t i = window; i < rest.size(); ++i) {
      if (taken[i]) continue;
      const Candidate& c = *rest[i];
      if (c.vram_needed > b.vram_left()) continue;
      if (c.remaining_tokens <= b.budget_left()) {
        if (!best || c.remaining_tokens > rest[*best]->remaining_tokens) best = i;
      } else if (chunking && !first_partial) {
        first_partial = i;
      }
    }
    if (!best) best = first_partial;
    if (!best) break;
    b.admit(*rest[*best], b.grant(*rest[*best], chunking));
    taken[*best] = true;
  }
  return b.take();
}

}  // namespace kvroof
