//
// Copyright 2026 The ctfinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef CTFINV_UTIL_HPP_
#define CTFINV_UTIL_HPP_

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctfinv {

inline constexpr const char* kToolVersion = "ctfinv 0.1.0";

// Invalid inputs (bad config, malformed file, shape mismatch). Exit code 1.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A requested target cannot be met by any subsample/threshold choice.
// The message names the binding constraint. Exit code 2.
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

namespace util {

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// distribution transforms below avoid std::uniform_*_distribution, whose
// output is implementation-defined, so streams are identical across
// platforms and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed), seed_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Rejection sampling, exactly uniform.
  uint64_t below(uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  int below_int(int n) { return static_cast<int>(below(static_cast<uint64_t>(n))); }

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Derives an independent stream; stable regardless of call-site ordering.
  Rng fork(uint64_t stream_id) const {
    uint64_t h = 0xcbf29ce484222325ULL ^ seed_;
    h = (h ^ stream_id) * 0x100000001b3ULL;
    h = (h ^ (stream_id >> 32)) * 0x100000001b3ULL;
    return Rng(h);
  }

 private:
  std::mt19937_64 engine_;
  uint64_t seed_;
};

// Normalizes a non-negative vector to sum 1. Throws if the sum is zero.
inline void normalize(std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) throw ValidationError("normalize: zero total mass");
  for (double& w : weights) w /= total;
}

inline std::vector<std::string> split_string(const std::string& text, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t pos = text.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string trim(const std::string& text) {
  size_t b = 0;
  size_t e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return text.substr(b, e - b);
}

// Locale-free shortest round-trip formatting for doubles.
std::string format_double(double value);

// 64-bit FNV-1a over a byte string, optionally seeded.
uint64_t fnv1a64(const std::string& bytes, uint64_t seed = 0);

}  // namespace util
}  // namespace ctfinv

#endif  // CTFINV_UTIL_HPP_
