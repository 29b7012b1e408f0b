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

#include "kvroof/roofline.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "kvroof/analytics.h"
#include "kvroof/errors.h"

namespace kvroof {

std::string_view to_string(Regime regime) {
  return regime == Regime::kComputeBound ? "compute_bound" : "bandwidth_bound";
}

double attainable_flops(double ai, const HardwareSpec& hw, BandwidthMode mode) {
  if (!(ai > 0.0)) throw DomainError(fmt::format("arithmetic intensity must be > 0, got {}", ai));
  if (std::isinf(ai)) return hw.compute_throughput;
  return std::min(hw.compute_throughput, ai * hw.bandwidth(mode));
}

RooflinePoint roofline_point(double kappa_ratio, const ModelSpec& model, const HardwareSpec& hw,
                             BandwidthMode mode) {
  RooflinePoint p;
  p.kappa_ratio = kappa_ratio;
  p.arithmetic_intensity = arithmetic_intensity(kappa_ratio, model);
  p.attainable = attainable_flops(p.arithmetic_intensity, hw, mode);
  bool compute = std::isinf(p.arithmetic_intensity) ||
                 p.arithmetic_intensity * hw.bandwidth(mode) >= hw.compute_throughput;
  p.regime = compute ? Regime::kComputeBound : Regime::kBandwidthBound;
  return p;
}

std::vector<double> log_grid(const KappaRange& range) {
  if (!(range.min > 0.0) || !(range.max > range.min) || range.points_per_decade < 1) {
    throw ConfigError(fmt::format("invalid kappa range [{}, {}] with {} points/decade", range.min,
                                  range.max, range.points_per_decade));
  }
  double decades = std::log10(range.max / range.min);
  auto steps = static_cast<size_t>(std::ceil(decades * range.points_per_decade - 1e-9));
  std::vector<double> grid;
  grid.reserve(steps + 1);
  for (size_t i = 0; i < steps; ++i) {
    grid.push_back(range.min * std::pow(10.0, static_cast<double>(i) / range.points_per_decade));
  }
  grid.push_back(range.max);
  return grid;
}

std::vector<RooflineSeries> roofline_sweep(const ModelSpec& model,
                                           std::span<const HardwareSpec> hardware,
                                           const KappaRange& range, BandwidthMode mode) {
  if (hardware.empty()) throw ConfigError("roofline sweep needs at least one hardware entry");
  const auto grid = log_grid(range);
  std::vector<RooflineSeries> out;
  out.reserve(hardware.size());
  for (const auto& hw : hardware) {
    RooflineSeries s;
    s.model_name = model.name;
    s.hw_name = hw.name;
    s.bandwidth_mode = mode;
    s.kappa_crit_marker = kappa_crit(model, hw, mode);
    s.points.reserve(grid.size());
    for (double k : grid) s.points.push_back(roofline_point(k, model, hw, mode));

    // Larger kappa_ratio means lower intensity, so the series must go
    // compute-bound -> bandwidth-bound at most once, next to kappa_crit.
    for (size_t i = 1; i < s.points.size(); ++i) {
      if (s.points[i].regime == s.points[i - 1].regime) continue;
      if (s.flip_index || s.points[i].regime != Regime::kBandwidthBound) {
        throw std::logic_error(fmt::format("roofline for {} on {} is not monotone", model.name,
                                           hw.name));
      }
      s.flip_index = i;
    }
    if (s.flip_index) {
      double lo = s.points[*s.flip_index - 1].kappa_ratio;
      double hi = s.points[*s.flip_index].kappa_ratio;
      double tol = 1e-9 * s.kappa_crit_marker;
      if (s.kappa_crit_marker < lo - tol || s.kappa_crit_marker > hi + tol) {
        throw std::logic_error(fmt::format("roofline flip for {} on {} is not at kappa_crit {}",
                                           model.name, hw.name, s.kappa_crit_marker));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_roofline_csv(std::ostream& out, std::span<const RooflineSeries> series) {
  out << "model,hardware,bandwidth_mode,kappa_ratio,arithmetic_intensity_flop_per_byte,"
         "attainable_flops,regime,kappa_crit\n";
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{},{:.17g}\n", s.model_name, s.hw_name,
                         to_string(s.bandwidth_mode), p.kappa_ratio, p.arithmetic_intensity,
                         p.attainable, to_string(p.regime), s.kappa_crit_marker);
    }
  }
}

}  // namespace kvroof
