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

#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kvroof/catalog.h"

namespace kvroof {

enum class Regime { kComputeBound, kBandwidthBound };

std::string_view to_string(Regime regime);

struct RooflinePoint {
  double kappa_ratio = 0.0;
  double arithmetic_intensity = 0.0;  // FLOP/byte
  double attainable = 0.0;            // FLOP/s
  Regime regime = Regime::kComputeBound;
};

struct KappaRange {
  double min = 0.1;
  double max = 1.0e5;
  int points_per_decade = 16;
};

struct RooflineSeries {
  std::string model_name;
  std::string hw_name;
  BandwidthMode bandwidth_mode = BandwidthMode::kPeak;
  std::vector<RooflinePoint> points;  // ascending kappa_ratio
  double kappa_crit_marker = 0.0;
  // Index of the first bandwidth-bound point, if the grid crosses the knee.
  std::optional<size_t> flip_index;
};

// min(C_eff, ai * BW). Throws DomainError for ai <= 0.
double attainable_flops(double arithmetic_intensity, const HardwareSpec& hw,
                        BandwidthMode mode = BandwidthMode::kSustained);

RooflinePoint roofline_point(double kappa_ratio, const ModelSpec& model, const HardwareSpec& hw,
                             BandwidthMode mode);

// Logarithmic grid min * 10^(i / points_per_decade), ending exactly at max.
std::vector<double> log_grid(const KappaRange& range);

// One series per hardware entry. Throws ConfigError on an empty hardware
// list or an invalid range, and std::logic_error if a series flips regime
// more than once or away from kappa_crit.
std::vector<RooflineSeries> roofline_sweep(const ModelSpec& model,
                                           std::span<const HardwareSpec> hardware,
                                           const KappaRange& range = {},
                                           BandwidthMode mode = BandwidthMode::kSustained);

void write_roofline_csv(std::ostream& out, std::span<const RooflineSeries> series);

}  // namespace kvroof
