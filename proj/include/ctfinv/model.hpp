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

#ifndef CTFINV_MODEL_HPP_
#define CTFINV_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ctfinv/featurize.hpp"
#include "ctfinv/util.hpp"

namespace ctfinv {
namespace model {

enum class Architecture { linear, mlp };

// Linear or one-hidden-layer (tanh) classifier over sparse inputs.
// Weight matrices are dense, row-major.
struct ClassifierModel {
  Architecture architecture = Architecture::linear;
  int input_dim = 0;
  int class_count = 0;
  int hidden_size = 0;  // mlp only

  // linear: w1 is class_count x input_dim, b1 is class_count.
  // mlp: w1 is hidden_size x input_dim, b1 hidden_size,
  //      w2 is class_count x hidden_size, b2 class_count.
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  void validate() const;
};

struct Prediction {
  std::vector<double> logits;
  std::vector<double> log_probs;
  std::vector<double> probs;
};

// Parameter-shaped accumulator for partial derivatives.
struct GradientBuffer {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  void reset(const ClassifierModel& m);
  void add_scaled(const GradientBuffer& other, double scale);
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization, seeded.
ClassifierModel make_model(Architecture arch, int input_dim, int class_count,
                           int hidden_size, uint64_t seed);

Prediction forward(const ClassifierModel& m, const featurize::FeatureVector& x);

// Accumulates into `grad` the exact gradient of sum_k upstream[k] *
// log_probs[k] with respect to every parameter.
void backward(const ClassifierModel& m, const featurize::FeatureVector& x,
              const std::vector<double>& upstream, GradientBuffer& grad);

// Argmax of probs; ties broken toward the lowest class index.
int predict_label(const Prediction& prediction);

// In-place SGD step: theta -= lr * grad.
void apply_sgd(ClassifierModel& m, const GradientBuffer& grad, double lr);

// Versioned JSON with round-trip-exact decimal doubles.
std::string to_json(const ClassifierModel& m);
ClassifierModel model_from_json(const std::string& text);
void save_model(const ClassifierModel& m, const std::string& path);
ClassifierModel load_model(const std::string& path);

}  // namespace model
}  // namespace ctfinv

#endif  // CTFINV_MODEL_HPP_
