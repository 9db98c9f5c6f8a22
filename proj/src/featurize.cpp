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

#include "ctfinv/featurize.hpp"

#include <cctype>
#include <map>

#include "ctfinv/util.hpp"

namespace ctfinv {
namespace featurize {

void HashConfig::validate() const {
  if (dim < 2 || (dim & (dim - 1)) != 0) {
    throw ValidationError("HashConfig: dim must be a power of two >= 2");
  }
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      size_t b = i;
      size_t e = j;
      while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
      while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
      if (e > b) {
        std::string tok;
        tok.reserve(e - b);
        for (size_t k = b; k < e; ++k) {
          tok.push_back(static_cast<char>(
              std::tolower(static_cast<unsigned char>(text[k]))));
        }
        tokens.push_back(std::move(tok));
      }
    }
    i = j;
  }
  return tokens;
}

int bucket_of(const std::string& token, const HashConfig& config) {
  const uint64_t h = util::fnv1a64(token, config.hash_seed);
  return static_cast<int>(h & static_cast<uint64_t>(config.dim - 1));
}

FeatureVector hash_features(const std::vector<std::string>& tokens,
                            const HashConfig& config) {
  config.validate();
  std::map<int, double> counts;
  for (const auto& tok : tokens) {
    counts[bucket_of(tok, config)] += 1.0;
  }
  FeatureVector out;
  out.dim = config.dim;
  out.indices.reserve(counts.size());
  out.values.reserve(counts.size());
  for (const auto& [index, count] : counts) {
    out.indices.push_back(index);
    out.values.push_back(config.binary ? 1.0 : count);
  }
  return out;
}

}  // namespace featurize
}  // namespace ctfinv
