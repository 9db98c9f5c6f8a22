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

#ifndef CTFINV_FEATURIZE_HPP_
#define CTFINV_FEATURIZE_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace ctfinv {
namespace featurize {

// Sparse hashed bag-of-words vector. Indices are strictly increasing,
// values strictly positive, one value per index.
struct FeatureVector {
  std::vector<int> indices;
  std::vector<double> values;
  int dim = 0;
};

struct HashConfig {
  int dim = 1 << 18;        // must be a power of two, >= 2
  uint64_t hash_seed = 0;
  bool binary = false;      // indicator features instead of counts

  void validate() const;
};

// Lowercases, splits on whitespace, strips leading/trailing punctuation
// from each token, drops empties.
std::vector<std::string> tokenize(const std::string& text);

// Seeded 64-bit FNV-1a reduced modulo dim. Fully specified; identical
// output on every platform.
int bucket_of(const std::string& token, const HashConfig& config);

FeatureVector hash_features(const std::vector<std::string>& tokens,
                            const HashConfig& config);

}  // namespace featurize
}  // namespace ctfinv

#endif  // CTFINV_FEATURIZE_HPP_
