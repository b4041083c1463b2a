/*
 * Copyright 2026 The Hybrid Replay Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace hr {

/// Mixes a seed with a sequence of tags into an independent stream seed.
/// Tags are folded with FNV-1a and finalized with splitmix64 so that streams
/// keyed by (seed, client, task, purpose) never depend on scheduling.
class StreamKey {
 public:
  explicit StreamKey(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

  StreamKey& operator<<(std::string_view tag);
  StreamKey& operator<<(std::int64_t tag);
  StreamKey& operator<<(int tag) { return *this << static_cast<std::int64_t>(tag); }
  StreamKey& operator<<(std::uint64_t tag) { return *this << static_cast<std::int64_t>(tag); }

  std::uint64_t value() const { return mix(state_); }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t state_;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  explicit Rng(const StreamKey& key) : engine_(key.value()) {}

  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  double normal() { return normal_(engine_); }
  double gamma(double shape);
  std::size_t index(std::size_t n);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);
  /// `k` distinct indices from 0..n-1, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hr
