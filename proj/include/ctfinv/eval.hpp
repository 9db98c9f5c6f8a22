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

#ifndef CTFINV_EVAL_HPP_
#define CTFINV_EVAL_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctfinv/corpus.hpp"
#include "ctfinv/featurize.hpp"
#include "ctfinv/mmd.hpp"
#include "ctfinv/model.hpp"

namespace ctfinv {
namespace eval {

struct StressPair {
  corpus::LabeledExample base;
  corpus::LabeledExample counterfactual;
};

struct StressPairRecord {
  int64_t pair_id = 0;
  int base_pred = 0;
  int cf_pred = 0;
  double prob_diff = 0.0;
};

struct StressReport {
  double flip_rate = 0.0;
  double mean_abs_prob_diff = 0.0;
  int pair_count = 0;
  std::vector<StressPairRecord> pairs;
};

struct DomainGrid {
  std::vector<double> gammas;       // feasible points, ascending input order
  std::vector<double> accuracies;   // aligned with gammas
  std::vector<double> infeasible;   // gammas that could not be built
  double worst_accuracy = 0.0;
  std::optional<double> in_domain_gamma;
};

struct GroupTable {
  double worst = 0.0;
  // (y, z) -> (count, accuracy)
  std::map<std::pair<int, int>, std::pair<int, double>> per_group;
};

double accuracy(const model::ClassifierModel& m, const corpus::Dataset& dataset,
                const featurize::HashConfig& feature_config);

// Label-flip rate and mean absolute difference in predictive
// probabilities over counterfactual pairs. Binary tasks compare the
// class-1 probability; K > 2 uses total variation distance.
StressReport stress_test(const model::ClassifierModel& m,
                         const std::vector<StressPair>& pairs,
                         const featurize::HashConfig& feature_config);

// Builds pairs by matching counterfactual_of links against base ids.
// Throws listing unpaired ids when a link is missing.
std::vector<StressPair> pair_up(const corpus::Dataset& base,
                                const corpus::Dataset& counterfactuals);

// Accuracy across test sets resampled from the pool at each gamma.
// Infeasible gammas are recorded, not fatal.
DomainGrid domain_grid(const model::ClassifierModel& m,
                       const corpus::Dataset& base_pool,
                       const std::vector<double>& gammas,
                       corpus::StructureTag structure, uint64_t seed,
                       const featurize::HashConfig& feature_config);

// Per-(y, z) cell accuracies and their minimum.
GroupTable worst_group_accuracy(const model::ClassifierModel& m,
                                const corpus::Dataset& dataset,
                                const featurize::HashConfig& feature_config);

struct MeasuredMmd {
  mmd::PenaltyValue marginal;
  mmd::PenaltyValue conditional;
};

// Full-dataset marginal and conditional penalties over log-prob rows.
MeasuredMmd measured_mmd(const model::ClassifierModel& m,
                         const corpus::Dataset& dataset,
                         const mmd::KernelConfig& kernel,
                         const featurize::HashConfig& feature_config);

std::string stress_pairs_to_csv(const StressReport& report);
std::string stress_summary_to_csv(const StressReport& report);
std::string grid_to_csv(const DomainGrid& grid);
std::string grid_summary_to_csv(const DomainGrid& grid);
std::string groups_to_csv(const GroupTable& table);

}  // namespace eval
}  // namespace ctfinv

#endif  // CTFINV_EVAL_HPP_
