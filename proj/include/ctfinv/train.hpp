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

#ifndef CTFINV_TRAIN_HPP_
#define CTFINV_TRAIN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ctfinv/corpus.hpp"
#include "ctfinv/featurize.hpp"
#include "ctfinv/mmd.hpp"
#include "ctfinv/model.hpp"

namespace ctfinv {
namespace train {

struct TrainConfig {
  mmd::PenaltySpec penalty;
  int batch_size = 1024;
  double learning_rate = 0.1;
  int max_epochs = 50;
  int patience = 10;
  uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_ce = 0.0;
  double train_penalty = 0.0;  // mean penalty value across batches
  double val_ce = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // index of the minimum validation cross entropy
  bool stopped_early = false;
};

struct TrainResult {
  model::ClassifierModel model;
  TrainReport report;
};

double cross_entropy(const model::Prediction& prediction, int y);

// Minibatch SGD on mean cross entropy plus lambda times the penalty,
// penalty evaluated per batch on the log-prob rows. Early-stops on
// validation cross entropy and returns the best-epoch parameters.
TrainResult fit(const corpus::Dataset& train_set, const corpus::Dataset& val_set,
                const featurize::HashConfig& feature_config,
                const model::ClassifierModel& model_init,
                const TrainConfig& config);

std::string report_to_csv(const TrainReport& report);

}  // namespace train
}  // namespace ctfinv

#endif  // CTFINV_TRAIN_HPP_
