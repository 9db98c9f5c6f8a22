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

#include "ctfinv/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "ctfinv/util.hpp"

namespace ctfinv {
namespace eval {

double accuracy(const model::ClassifierModel& m, const corpus::Dataset& dataset,
                const featurize::HashConfig& feature_config) {
  if (dataset.examples.empty()) {
    throw ValidationError("accuracy: empty dataset");
  }
  int correct = 0;
  for (const auto& e : dataset.examples) {
    const auto x = featurize::hash_features(e.tokens, feature_config);
    correct += model::predict_label(model::forward(m, x)) == e.y ? 1 : 0;
  }
  return static_cast<double>(correct) / dataset.examples.size();
}

StressReport stress_test(const model::ClassifierModel& m,
                         const std::vector<StressPair>& pairs,
                         const featurize::HashConfig& feature_config) {
  if (pairs.empty()) throw ValidationError("stress_test: no pairs");
  StressReport report;
  report.pair_count = static_cast<int>(pairs.size());
  report.pairs.reserve(pairs.size());
  int flips = 0;
  double diff_sum = 0.0;
  for (const auto& pair : pairs) {
    const auto base_pred = model::forward(
        m, featurize::hash_features(pair.base.tokens, feature_config));
    const auto cf_pred = model::forward(
        m, featurize::hash_features(pair.counterfactual.tokens, feature_config));
    StressPairRecord rec;
    rec.pair_id = pair.base.id;
    rec.base_pred = model::predict_label(base_pred);
    rec.cf_pred = model::predict_label(cf_pred);
    if (m.class_count == 2) {
      rec.prob_diff = std::abs(base_pred.probs[1] - cf_pred.probs[1]);
    } else {
      double tv = 0.0;
      for (int c = 0; c < m.class_count; ++c) {
        tv += std::abs(base_pred.probs[c] - cf_pred.probs[c]);
      }
      rec.prob_diff = 0.5 * tv;
    }
    flips += rec.base_pred != rec.cf_pred ? 1 : 0;
    diff_sum += rec.prob_diff;
    report.pairs.push_back(rec);
  }
  report.flip_rate = static_cast<double>(flips) / report.pair_count;
  report.mean_abs_prob_diff = diff_sum / report.pair_count;
  return report;
}

std::vector<StressPair> pair_up(const corpus::Dataset& base,
                                const corpus::Dataset& counterfactuals) {
  std::unordered_map<int64_t, const corpus::LabeledExample*> by_id;
  by_id.reserve(base.examples.size());
  for (const auto& e : base.examples) by_id[e.id] = &e;
  std::vector<StressPair> pairs;
  std::vector<int64_t> unpaired;
  for (const auto& cf : counterfactuals.examples) {
    if (!cf.counterfactual_of.has_value()) {
      unpaired.push_back(cf.id);
      continue;
    }
    auto it = by_id.find(*cf.counterfactual_of);
    if (it == by_id.end()) {
      unpaired.push_back(cf.id);
      continue;
    }
    pairs.push_back({*it->second, cf});
  }
  if (!unpaired.empty()) {
    std::string ids;
    for (size_t i = 0; i < unpaired.size() && i < 20; ++i) {
      if (!ids.empty()) ids += ",";
      ids += std::to_string(unpaired[i]);
    }
    if (unpaired.size() > 20) ids += ",...";
    throw ValidationError("pair_up: missing counterfactual linkage for ids " + ids);
  }
  return pairs;
}

DomainGrid domain_grid(const model::ClassifierModel& m,
                       const corpus::Dataset& base_pool,
                       const std::vector<double>& gammas,
                       corpus::StructureTag structure, uint64_t seed,
                       const featurize::HashConfig& feature_config) {
  DomainGrid grid;
  grid.in_domain_gamma = base_pool.gamma;
  util::Rng rng(seed);
  for (size_t i = 0; i < gammas.size(); ++i) {
    const double gamma = gammas[i];
    corpus::Dataset pool = base_pool;
    pool.gamma.reset();  // the pool's association is about to be re-induced
    try {
      // Seed per gamma value, not per list position, so a single-point
      // invocation reproduces the matching row of a joint grid.
      corpus::Dataset domain = corpus::induce_assoc_anticausal(
          pool, gamma, rng.fork(std::bit_cast<uint64_t>(gamma)).next_u64());
      domain.structure_tag = structure;
      grid.gammas.push_back(gamma);
      grid.accuracies.push_back(accuracy(m, domain, feature_config));
    } catch (const InfeasibleError&) {
      grid.infeasible.push_back(gamma);
    }
  }
  if (!grid.accuracies.empty()) {
    grid.worst_accuracy =
        *std::min_element(grid.accuracies.begin(), grid.accuracies.end());
  }
  return grid;
}

GroupTable worst_group_accuracy(const model::ClassifierModel& m,
                                const corpus::Dataset& dataset,
                                const featurize::HashConfig& feature_config) {
  std::map<std::pair<int, int>, std::pair<int, int>> counts;  // (n, correct)
  for (const auto& e : dataset.examples) {
    const auto x = featurize::hash_features(e.tokens, feature_config);
    const int pred = model::predict_label(model::forward(m, x));
    auto& cell = counts[{e.y, e.z}];
    cell.first += 1;
    cell.second += pred == e.y ? 1 : 0;
  }
  for (int y = 0; y < dataset.class_count; ++y) {
    for (int z = 0; z < 2; ++z) {
      if (!counts.count({y, z})) {
        throw ValidationError("worst_group_accuracy: empty group (y=" +
                              std::to_string(y) + ",z=" + std::to_string(z) + ")");
      }
    }
  }
  GroupTable table;
  table.worst = 1.0;
  for (const auto& [key, cell] : counts) {
    const double acc = static_cast<double>(cell.second) / cell.first;
    table.per_group[key] = {cell.first, acc};
    table.worst = std::min(table.worst, acc);
  }
  return table;
}

MeasuredMmd measured_mmd(const model::ClassifierModel& m,
                         const corpus::Dataset& dataset,
                         const mmd::KernelConfig& kernel,
                         const featurize::HashConfig& feature_config) {
  if (dataset.examples.empty()) {
    throw ValidationError("measured_mmd: empty dataset");
  }
  std::vector<std::vector<double>> rows;
  std::vector<int> z;
  std::vector<int> y;
  rows.reserve(dataset.examples.size());
  for (const auto& e : dataset.examples) {
    const auto x = featurize::hash_features(e.tokens, feature_config);
    rows.push_back(model::forward(m, x).log_probs);
    z.push_back(e.z);
    y.push_back(e.y);
  }
  MeasuredMmd out;
  out.marginal = mmd::marginal_penalty(rows, z, kernel);
  out.conditional = mmd::conditional_penalty(rows, z, y, kernel);
  return out;
}

std::string stress_pairs_to_csv(const StressReport& report) {
  std::ostringstream out;
  out << "pair_id,base_pred,cf_pred,prob_diff\n";
  for (const auto& rec : report.pairs) {
    out << rec.pair_id << ',' << rec.base_pred << ',' << rec.cf_pred << ','
        << util::format_double(rec.prob_diff) << "\n";
  }
  return out.str();
}

std::string stress_summary_to_csv(const StressReport& report) {
  std::ostringstream out;
  out << "flip_rate,mean_abs_prob_diff,pair_count\n";
  out << util::format_double(report.flip_rate) << ','
      << util::format_double(report.mean_abs_prob_diff) << ','
      << report.pair_count << "\n";
  return out.str();
}

std::string grid_to_csv(const DomainGrid& grid) {
  std::ostringstream out;
  out << "gamma,accuracy\n";
  for (size_t i = 0; i < grid.gammas.size(); ++i) {
    out << util::format_double(grid.gammas[i]) << ','
        << util::format_double(grid.accuracies[i]) << "\n";
  }
  return out.str();
}

std::string grid_summary_to_csv(const DomainGrid& grid) {
  std::ostringstream out;
  out << "worst_accuracy,in_domain_gamma,feasible_points,infeasible_points\n";
  out << util::format_double(grid.worst_accuracy) << ','
      << (grid.in_domain_gamma ? util::format_double(*grid.in_domain_gamma) : "")
      << ',' << grid.gammas.size() << ',' << grid.infeasible.size() << "\n";
  return out.str();
}

std::string groups_to_csv(const GroupTable& table) {
  std::ostringstream out;
  out << "y,z,n,accuracy\n";
  for (const auto& [key, cell] : table.per_group) {
    out << key.first << ',' << key.second << ',' << cell.first << ','
        << util::format_double(cell.second) << "\n";
  }
  return out.str();
}

}  // namespace eval
}  // namespace ctfinv
