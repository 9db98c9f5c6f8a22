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

#include "ctfinv/model.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace ctfinv {
namespace model {

namespace {

constexpr int kModelFormatVersion = 1;

size_t expected_w1(const ClassifierModel& m) {
  return m.architecture == Architecture::linear
             ? static_cast<size_t>(m.class_count) * m.input_dim
             : static_cast<size_t>(m.hidden_size) * m.input_dim;
}

void check_finite(const std::vector<double>& v, const char* name) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw ValidationError(std::string("model: non-finite parameter in ") + name);
    }
  }
}

}  // namespace

void ClassifierModel::validate() const {
  if (input_dim <= 0 || class_count < 2) {
    throw ValidationError("model: input_dim must be > 0 and class_count >= 2");
  }
  if (architecture == Architecture::mlp && hidden_size <= 0) {
    throw ValidationError("model: mlp requires hidden_size > 0");
  }
  if (w1.size() != expected_w1(*this)) {
    throw ValidationError("model: w1 shape mismatch");
  }
  if (architecture == Architecture::linear) {
    if (b1.size() != static_cast<size_t>(class_count) || !w2.empty() || !b2.empty()) {
      throw ValidationError("model: linear layer shape mismatch");
    }
  } else {
    if (b1.size() != static_cast<size_t>(hidden_size) ||
        w2.size() != static_cast<size_t>(class_count) * hidden_size ||
        b2.size() != static_cast<size_t>(class_count)) {
      throw ValidationError("model: mlp layer shape mismatch");
    }
  }
  check_finite(w1, "w1");
  check_finite(b1, "b1");
  check_finite(w2, "w2");
  check_finite(b2, "b2");
}

void GradientBuffer::reset(const ClassifierModel& m) {
  w1.assign(m.w1.size(), 0.0);
  b1.assign(m.b1.size(), 0.0);
  w2.assign(m.w2.size(), 0.0);
  b2.assign(m.b2.size(), 0.0);
}

void GradientBuffer::add_scaled(const GradientBuffer& other, double scale) {
  for (size_t i = 0; i < w1.size(); ++i) w1[i] += scale * other.w1[i];
  for (size_t i = 0; i < b1.size(); ++i) b1[i] += scale * other.b1[i];
  for (size_t i = 0; i < w2.size(); ++i) w2[i] += scale * other.w2[i];
  for (size_t i = 0; i < b2.size(); ++i) b2[i] += scale * other.b2[i];
}

ClassifierModel make_model(Architecture arch, int input_dim, int class_count,
                           int hidden_size, uint64_t seed) {
  ClassifierModel m;
  m.architecture = arch;
  m.input_dim = input_dim;
  m.class_count = class_count;
  m.hidden_size = arch == Architecture::mlp ? hidden_size : 0;
  util::Rng rng(seed);
  auto fill = [&rng](std::vector<double>& v, size_t n, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    v.resize(n);
    for (auto& x : v) x = rng.uniform(-bound, bound);
  };
  if (arch == Architecture::linear) {
    fill(m.w1, static_cast<size_t>(class_count) * input_dim, input_dim);
    fill(m.b1, class_count, input_dim);
  } else {
    fill(m.w1, static_cast<size_t>(hidden_size) * input_dim, input_dim);
    fill(m.b1, hidden_size, input_dim);
    fill(m.w2, static_cast<size_t>(class_count) * hidden_size, hidden_size);
    fill(m.b2, class_count, hidden_size);
  }
  m.validate();
  return m;
}

namespace {

// Sparse dot of matrix row `row` (width input_dim) with x.
double sparse_dot(const std::vector<double>& mat, int width, int row,
                  const featurize::FeatureVector& x) {
  const size_t base = static_cast<size_t>(row) * width;
  double acc = 0.0;
  for (size_t i = 0; i < x.indices.size(); ++i) {
    acc += mat[base + x.indices[i]] * x.values[i];
  }
  return acc;
}

std::vector<double> hidden_activations(const ClassifierModel& m,
                                       const featurize::FeatureVector& x) {
  std::vector<double> h(m.hidden_size);
  for (int j = 0; j < m.hidden_size; ++j) {
    h[j] = std::tanh(sparse_dot(m.w1, m.input_dim, j, x) + m.b1[j]);
  }
  return h;
}

}  // namespace

Prediction forward(const ClassifierModel& m, const featurize::FeatureVector& x) {
  if (x.dim != m.input_dim) {
    throw ValidationError("forward: feature dim does not match model input_dim");
  }
  Prediction p;
  p.logits.resize(m.class_count);
  if (m.architecture == Architecture::linear) {
    for (int k = 0; k < m.class_count; ++k) {
      p.logits[k] = sparse_dot(m.w1, m.input_dim, k, x) + m.b1[k];
    }
  } else {
    const std::vector<double> h = hidden_activations(m, x);
    for (int k = 0; k < m.class_count; ++k) {
      double acc = m.b2[k];
      const size_t base = static_cast<size_t>(k) * m.hidden_size;
      for (int j = 0; j < m.hidden_size; ++j) acc += m.w2[base + j] * h[j];
      p.logits[k] = acc;
    }
  }
  // Stable log-softmax.
  double max_logit = p.logits[0];
  for (double v : p.logits) max_logit = std::max(max_logit, v);
  double sum_exp = 0.0;
  for (double v : p.logits) sum_exp += std::exp(v - max_logit);
  const double lse = max_logit + std::log(sum_exp);
  p.log_probs.resize(m.class_count);
  p.probs.resize(m.class_count);
  for (int k = 0; k < m.class_count; ++k) {
    p.log_probs[k] = p.logits[k] - lse;
    p.probs[k] = std::exp(p.log_probs[k]);
  }
  return p;
}

void backward(const ClassifierModel& m, const featurize::FeatureVector& x,
              const std::vector<double>& upstream, GradientBuffer& grad) {
  if (upstream.size() != static_cast<size_t>(m.class_count)) {
    throw ValidationError("backward: upstream length must equal class_count");
  }
  if (x.dim != m.input_dim) {
    throw ValidationError("backward: feature dim does not match model input_dim");
  }
  const Prediction p = forward(m, x);
  // d L / d logit_k = upstream_k - probs_k * sum(upstream).
  double upstream_sum = 0.0;
  for (double u : upstream) upstream_sum += u;
  std::vector<double> dlogits(m.class_count);
  for (int k = 0; k < m.class_count; ++k) {
    dlogits[k] = upstream[k] - p.probs[k] * upstream_sum;
  }
  if (m.architecture == Architecture::linear) {
    for (int k = 0; k < m.class_count; ++k) {
      grad.b1[k] += dlogits[k];
      const size_t base = static_cast<size_t>(k) * m.input_dim;
      for (size_t i = 0; i < x.indices.size(); ++i) {
        grad.w1[base + x.indices[i]] += dlogits[k] * x.values[i];
      }
    }
    return;
  }
  const std::vector<double> h = hidden_activations(m, x);
  std::vector<double> dh(m.hidden_size, 0.0);
  for (int k = 0; k < m.class_count; ++k) {
    grad.b2[k] += dlogits[k];
    const size_t base = static_cast<size_t>(k) * m.hidden_size;
    for (int j = 0; j < m.hidden_size; ++j) {
      grad.w2[base + j] += dlogits[k] * h[j];
      dh[j] += m.w2[base + j] * dlogits[k];
    }
  }
  for (int j = 0; j < m.hidden_size; ++j) {
    const double dpre = dh[j] * (1.0 - h[j] * h[j]);
    grad.b1[j] += dpre;
    const size_t base = static_cast<size_t>(j) * m.input_dim;
    for (size_t i = 0; i < x.indices.size(); ++i) {
      grad.w1[base + x.indices[i]] += dpre * x.values[i];
    }
  }
}

int predict_label(const Prediction& prediction) {
  int best = 0;
  for (size_t k = 1; k < prediction.probs.size(); ++k) {
    if (prediction.probs[k] > prediction.probs[best]) best = static_cast<int>(k);
  }
  return best;
}

void apply_sgd(ClassifierModel& m, const GradientBuffer& grad, double lr) {
  for (size_t i = 0; i < m.w1.size(); ++i) m.w1[i] -= lr * grad.w1[i];
  for (size_t i = 0; i < m.b1.size(); ++i) m.b1[i] -= lr * grad.b1[i];
  for (size_t i = 0; i < m.w2.size(); ++i) m.w2[i] -= lr * grad.w2[i];
  for (size_t i = 0; i < m.b2.size(); ++i) m.b2[i] -= lr * grad.b2[i];
}

std::string to_json(const ClassifierModel& m) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["architecture"] = m.architecture == Architecture::linear ? "linear" : "mlp";
  j["input_dim"] = m.input_dim;
  j["class_count"] = m.class_count;
  j["hidden_size"] = m.hidden_size;
  j["w1"] = m.w1;
  j["b1"] = m.b1;
  j["w2"] = m.w2;
  j["b2"] = m.b2;
  return j.dump();
}

ClassifierModel model_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("format_version").get<int>() != kModelFormatVersion) {
    throw ValidationError("model: unsupported format_version");
  }
  ClassifierModel m;
  const std::string arch = j.at("architecture").get<std::string>();
  if (arch == "linear") {
    m.architecture = Architecture::linear;
  } else if (arch == "mlp") {
    m.architecture = Architecture::mlp;
  } else {
    throw ValidationError("model: unknown architecture " + arch);
  }
  m.input_dim = j.at("input_dim").get<int>();
  m.class_count = j.at("class_count").get<int>();
  m.hidden_size = j.at("hidden_size").get<int>();
  m.w1 = j.at("w1").get<std::vector<double>>();
  m.b1 = j.at("b1").get<std::vector<double>>();
  m.w2 = j.at("w2").get<std::vector<double>>();
  m.b2 = j.at("b2").get<std::vector<double>>();
  m.validate();
  return m;
}

void save_model(const ClassifierModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("save_model: cannot open " + path);
  out << to_json(m) << "\n";
}

ClassifierModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("load_model: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace model
}  // namespace ctfinv
