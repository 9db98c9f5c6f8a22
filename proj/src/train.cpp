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

#include "ctfinv/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ctfinv/util.hpp"

namespace ctfinv {
namespace train {

void TrainConfig::validate() const {
  penalty.validate();
  if (batch_size < 2) throw ValidationError("TrainConfig: batch_size must be >= 2");
  if (!(learning_rate > 0.0)) {
    throw ValidationError("TrainConfig: learning_rate must be positive");
  }
  if (max_epochs < 1) throw ValidationError("TrainConfig: max_epochs must be >= 1");
  if (patience < 1) throw ValidationError("TrainConfig: patience must be >= 1");
}

double cross_entropy(const model::Prediction& prediction, int y) {
  if (y < 0 || static_cast<size_t>(y) >= prediction.log_probs.size()) {
    throw ValidationError("cross_entropy: label out of range");
  }
  return -prediction.log_probs[y];
}

namespace {

struct FeaturizedSet {
  std::vector<featurize::FeatureVector> features;
  std::vector<int> y;
  std::vector<int> z;
};

FeaturizedSet featurize_dataset(const corpus::Dataset& dataset,
                                const featurize::HashConfig& config) {
  FeaturizedSet out;
  out.features.reserve(dataset.examples.size());
  out.y.reserve(dataset.examples.size());
  out.z.reserve(dataset.examples.size());
  for (const auto& e : dataset.examples) {
    out.features.push_back(featurize::hash_features(e.tokens, config));
    out.y.push_back(e.y);
    out.z.push_back(e.z);
  }
  return out;
}

struct ValMetrics {
  double ce = 0.0;
  double accuracy = 0.0;
};

ValMetrics evaluate(const model::ClassifierModel& m, const FeaturizedSet& set) {
  ValMetrics out;
  for (size_t i = 0; i < set.features.size(); ++i) {
    const auto pred = model::forward(m, set.features[i]);
    out.ce += cross_entropy(pred, set.y[i]);
    out.accuracy += model::predict_label(pred) == set.y[i] ? 1.0 : 0.0;
  }
  out.ce /= static_cast<double>(set.features.size());
  out.accuracy /= static_cast<double>(set.features.size());
  return out;
}

}  // namespace

TrainResult fit(const corpus::Dataset& train_set, const corpus::Dataset& val_set,
                const featurize::HashConfig& feature_config,
                const model::ClassifierModel& model_init,
                const TrainConfig& config) {
  config.validate();
  feature_config.validate();
  model_init.validate();
  if (train_set.examples.empty() || val_set.examples.empty()) {
    throw ValidationError("fit: train and validation sets must be non-empty");
  }
  if (train_set.class_count != val_set.class_count ||
      train_set.class_count != model_init.class_count) {
    throw ValidationError("fit: class counts disagree");
  }
  if (feature_config.dim != model_init.input_dim) {
    throw ValidationError("fit: feature dim does not match model input_dim");
  }

  const FeaturizedSet train_data = featurize_dataset(train_set, feature_config);
  const FeaturizedSet val_data = featurize_dataset(val_set, feature_config);
  const int n = static_cast<int>(train_data.features.size());
  const int k = model_init.class_count;
  const bool use_penalty =
      config.penalty.kind != mmd::PenaltyKind::none && config.penalty.lambda > 0.0;

  model::ClassifierModel current = model_init;
  model::ClassifierModel best = model_init;
  TrainResult result;
  result.report.best_epoch = 0;
  double best_val_ce = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  util::Rng rng(config.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  model::GradientBuffer grad;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_ce = 0.0;
    double epoch_penalty = 0.0;
    int batch_count = 0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int end = std::min(n, start + config.batch_size);
      const int batch_n = end - start;
      std::vector<std::vector<double>> rows(batch_n);
      std::vector<int> batch_y(batch_n);
      std::vector<int> batch_z(batch_n);
      double batch_ce = 0.0;
      for (int i = 0; i < batch_n; ++i) {
        const int idx = order[start + i];
        const auto pred = model::forward(current, train_data.features[idx]);
        rows[i] = pred.log_probs;
        batch_y[i] = train_data.y[idx];
        batch_z[i] = train_data.z[idx];
        batch_ce += -pred.log_probs[batch_y[i]];
      }
      batch_ce /= batch_n;

      mmd::PenaltyGradient pen;
      if (use_penalty) {
        pen = mmd::penalty_gradient(config.penalty, rows, batch_z, batch_y);
      }
      const double batch_loss =
          batch_ce + (use_penalty ? config.penalty.lambda * pen.value : 0.0);
      if (!std::isfinite(batch_loss)) {
        throw ValidationError("fit: non-finite loss in epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(batch_count));
      }

      grad.reset(current);
      std::vector<double> upstream(k);
      for (int i = 0; i < batch_n; ++i) {
        const int idx = order[start + i];
        for (int c = 0; c < k; ++c) {
          double u = 0.0;
          if (c == batch_y[i]) u = -1.0 / batch_n;
          if (use_penalty) u += config.penalty.lambda * pen.row_grads[i][c];
          upstream[c] = u;
        }
        model::backward(current, train_data.features[idx], upstream, grad);
      }
      model::apply_sgd(current, grad, config.learning_rate);

      epoch_ce += batch_ce * batch_n;
      epoch_penalty += use_penalty ? pen.value : 0.0;
      ++batch_count;
    }

    const ValMetrics val = evaluate(current, val_data);
    EpochRecord record;
    record.epoch = epoch;
    record.train_ce = epoch_ce / n;
    record.train_penalty = batch_count > 0 ? epoch_penalty / batch_count : 0.0;
    record.val_ce = val.ce;
    record.val_accuracy = val.accuracy;
    result.report.epochs.push_back(record);

    if (val.ce < best_val_ce) {
      best_val_ce = val.ce;
      best = current;
      result.report.best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.patience) {
        result.report.stopped_early = true;
        break;
      }
    }
  }

  result.model = std::move(best);
  return result;
}

std::string report_to_csv(const TrainReport& report) {
  std::ostringstream out;
  out << "epoch,train_ce,penalty,val_ce,val_acc\n";
  for (const auto& r : report.epochs) {
    out << r.epoch << ',' << util::format_double(r.train_ce) << ','
        << util::format_double(r.train_penalty) << ','
        << util::format_double(r.val_ce) << ','
        << util::format_double(r.val_accuracy) << "\n";
  }
  return out.str();
}

}  // namespace train
}  // namespace ctfinv
