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
// End-to-end acceptance checks. Each test case covers one numbered
// criterion and prints a single PASS/FAIL line; run them in order.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "ctfinv/cli.hpp"
#include "ctfinv/corpus.hpp"
#include "ctfinv/eval.hpp"
#include "ctfinv/featurize.hpp"
#include "ctfinv/mmd.hpp"
#include "ctfinv/model.hpp"
#include "ctfinv/scm.hpp"
#include "ctfinv/scm_suites.hpp"
#include "ctfinv/train.hpp"
#include "ctfinv/util.hpp"

namespace fs = std::filesystem;
using namespace ctfinv;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

void report(int criterion, bool pass, const std::string& summary,
            double seconds) {
  std::cout << "[criterion " << criterion << "] " << (pass ? "PASS" : "FAIL")
            << " (" << std::fixed << std::setprecision(1) << seconds
            << "s): " << summary << "\n"
            << std::defaultfloat << std::setprecision(6);
  std::cout.flush();
}

// --- Shared desk-scale experiment for criteria 7, 8, 9 ------------------

struct SweepModel {
  mmd::PenaltyKind kind;
  double lambda;
  model::ClassifierModel model;
  double test_accuracy = 0.0;
  double conditional_mmd = 0.0;
  double flip_rate = 0.0;
  eval::DomainGrid grid;
};

struct Experiment {
  featurize::HashConfig features;
  corpus::Dataset train_set, val_set, test_set, pool;
  std::vector<eval::StressPair> pairs;
  SweepModel baseline;
  std::vector<SweepModel> conditional;  // ascending lambda
};

const Experiment& experiment() {
  static const Experiment exp = [] {
    Experiment e;
    e.features.dim = 1 << 18;

    const uint64_t seed = 7;
    const auto raws = corpus::generate_pseudo_reviews(32000, seed);
    const corpus::Dataset confounded = corpus::synthesize_confound(raws, 20, seed + 1);
    const corpus::Dataset induced =
        corpus::induce_assoc_anticausal(confounded, 0.3, seed + 2);
    const corpus::SplitResult splits =
        corpus::split(induced, {0.6, 0.15, 0.25}, seed + 3);
    e.train_set = splits.train;
    e.val_set = splits.val;
    e.test_set = splits.test;

    std::set<int64_t> held;
    for (const auto& ex : e.train_set.examples) held.insert(ex.id);
    for (const auto& ex : e.val_set.examples) held.insert(ex.id);
    e.pool.class_count = confounded.class_count;
    for (const auto& ex : confounded.examples) {
      if (!held.count(ex.id)) e.pool.examples.push_back(ex);
    }

    for (const auto& ex : e.test_set.examples) {
      e.pairs.push_back({ex, corpus::make_counterfactual(ex)});
    }

    train::TrainConfig config;
    config.batch_size = 1024;
    config.learning_rate = 0.03;
    config.max_epochs = 60;
    config.patience = 10;
    config.seed = 13;
    config.penalty.kernel.bandwidth = 10.0;

    mmd::KernelConfig kernel;
    const auto init =
        model::make_model(model::Architecture::linear, e.features.dim, 2, 0, 11);
    const auto run_point = [&](mmd::PenaltyKind kind, double lambda) {
      SweepModel point;
      point.kind = kind;
      point.lambda = lambda;
      train::TrainConfig tc = config;
      tc.penalty.kind = kind;
      tc.penalty.lambda = lambda;
      point.model = train::fit(e.train_set, e.val_set, e.features, init, tc).model;
      point.test_accuracy = eval::accuracy(point.model, e.test_set, e.features);
      point.conditional_mmd =
          eval::measured_mmd(point.model, e.test_set, kernel, e.features)
              .conditional.value;
      point.flip_rate =
          eval::stress_test(point.model, e.pairs, e.features).flip_rate;
      point.grid = eval::domain_grid(point.model, e.pool,
                                     {0.3, 0.4, 0.5, 0.6, 0.7, 0.8},
                                     corpus::StructureTag::anticausal, 99,
                                     e.features);
      return point;
    };

    e.baseline = run_point(mmd::PenaltyKind::none, 0.0);
    for (const double lambda : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
      e.conditional.push_back(run_point(mmd::PenaltyKind::conditional, lambda));
    }
    return e;
  }();
  return exp;
}

}  // namespace

TEST_CASE("criterion 1: mmd estimator equals the double-loop reference") {
  Stopwatch watch;
  util::Rng rng(101);
  mmd::KernelConfig config;
  double worst_gap = 0.0;
  int cases = 0;
  bool pass = true;
  for (int trial = 0; trial < 200; ++trial) {
    config.bandwidth = trial % 3 == 0 ? 10.0 : (trial % 3 == 1 ? 1.0 : 0.5);
    const int dim = 1 + rng.below_int(4);
    auto draw = [&](int max_count) {
      std::vector<std::vector<double>> out(1 + rng.below_int(max_count));
      for (auto& v : out) {
        v.resize(dim);
        for (auto& x : v) x = rng.uniform(-2.0, 2.0);
      }
      return out;
    };
    const auto a = draw(10);
    const auto b = draw(10);
    // Independent double-loop reference.
    auto kern = [&](const std::vector<double>& u, const std::vector<double>& v) {
      double d2 = 0.0;
      for (size_t i = 0; i < u.size(); ++i) d2 += (u[i] - v[i]) * (u[i] - v[i]);
      return std::exp(-d2 / (2.0 * config.bandwidth * config.bandwidth));
    };
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (const auto& u : a)
      for (const auto& v : a) aa += kern(u, v);
    for (const auto& u : b)
      for (const auto& v : b) bb += kern(u, v);
    for (const auto& u : a)
      for (const auto& v : b) ab += kern(u, v);
    const double reference = aa / (a.size() * a.size()) + bb / (b.size() * b.size()) -
                             2.0 * ab / (a.size() * b.size());
    const double gap = std::abs(mmd::mmd2_biased(a, b, config) - reference);
    worst_gap = std::max(worst_gap, gap);
    pass = pass && gap < 1e-10;
    ++cases;
  }
  pass = pass && watch.seconds() < 1.0;
  report(1, pass,
         std::to_string(cases) + " cases, worst gap " + util::format_double(worst_gap),
         watch.seconds());
  CHECK(pass);
}

TEST_CASE("criterion 2: gradients match central finite differences") {
  Stopwatch watch;
  util::Rng rng(102);
  const double step = 1e-5;
  bool pass = true;
  double worst_model = 0.0, worst_mmd = 0.0, worst_combined = 0.0;

  // Model backward on >= 100 random instances.
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 3 + rng.below_int(4);
    const int k = 2 + rng.below_int(2);
    model::ClassifierModel m = model::make_model(
        trial % 2 == 0 ? model::Architecture::linear : model::Architecture::mlp,
        dim, k, 3, rng.next_u64());
    featurize::FeatureVector x;
    x.dim = dim;
    for (int i = 0; i < dim; ++i) {
      if (rng.bernoulli(0.5)) {
        x.indices.push_back(i);
        x.values.push_back(1.0 + rng.below_int(2));
      }
    }
    if (x.indices.empty()) {
      x.indices.push_back(0);
      x.values.push_back(1.0);
    }
    std::vector<double> upstream(k);
    for (auto& u : upstream) u = rng.uniform(-1.0, 1.0);
    model::GradientBuffer grad;
    grad.reset(m);
    model::backward(m, x, upstream, grad);
    auto objective = [&]() {
      const auto pred = model::forward(m, x);
      double v = 0.0;
      for (int c = 0; c < k; ++c) v += upstream[c] * pred.log_probs[c];
      return v;
    };
    auto probe = [&](std::vector<double>& params, const std::vector<double>& g) {
      for (size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = objective();
        params[i] = saved - step;
        const double down = objective();
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double rel = std::abs(g[i] - numeric) /
                           std::max({1e-6, std::abs(g[i]), std::abs(numeric)});
        worst_model = std::max(worst_model, rel);
      }
    };
    probe(m.w1, grad.w1);
    probe(m.b1, grad.b1);
    probe(m.w2, grad.w2);
    probe(m.b2, grad.b2);
  }
  pass = pass && worst_model < 1e-4;

  // mmd2_gradient on >= 100 random instances.
  mmd::KernelConfig kernel;
  kernel.bandwidth = 1.5;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + rng.below_int(4);
    auto draw = [&](int max_count) {
      std::vector<std::vector<double>> out(1 + rng.below_int(max_count));
      for (auto& v : out) {
        v.resize(dim);
        for (auto& x : v) x = rng.uniform(-1.5, 1.5);
      }
      return out;
    };
    auto a = draw(8);
    auto b = draw(8);
    const auto grad = mmd::mmd2_gradient(a, b, kernel);
    auto probe = [&](std::vector<std::vector<double>>& group,
                     const std::vector<std::vector<double>>& g) {
      for (size_t i = 0; i < group.size(); ++i) {
        for (size_t d = 0; d < group[i].size(); ++d) {
          const double saved = group[i][d];
          group[i][d] = saved + step;
          const double up = mmd::mmd2_biased(a, b, kernel);
          group[i][d] = saved - step;
          const double down = mmd::mmd2_biased(a, b, kernel);
          group[i][d] = saved;
          const double numeric = (up - down) / (2.0 * step);
          const double rel =
              std::abs(g[i][d] - numeric) /
              std::max({1e-6, std::abs(g[i][d]), std::abs(numeric)});
          worst_mmd = std::max(worst_mmd, rel);
        }
      }
    };
    probe(a, grad.grad_a);
    probe(b, grad.grad_b);
  }
  pass = pass && worst_mmd < 1e-4;

  // Full combined objective through a small model.
  {
    corpus::Dataset batch;
    batch.class_count = 2;
    const std::vector<std::string> vocab = {"p", "q", "r", "s"};
    for (int i = 0; i < 14; ++i) {
      corpus::LabeledExample e;
      e.id = i;
      for (int t = 0; t < 3; ++t) e.tokens.push_back(vocab[rng.below(vocab.size())]);
      e.y = rng.below_int(2);
      e.z = rng.below_int(2);
      batch.examples.push_back(std::move(e));
    }
    featurize::HashConfig fc;
    fc.dim = 16;
    mmd::PenaltySpec penalty;
    penalty.kind = mmd::PenaltyKind::conditional;
    penalty.lambda = 3.0;
    penalty.kernel.bandwidth = 1.2;
    for (const auto arch : {model::Architecture::linear, model::Architecture::mlp}) {
      model::ClassifierModel m = model::make_model(arch, fc.dim, 2, 3, 5);
      auto batch_objective = [&]() {
        std::vector<std::vector<double>> rows;
        std::vector<int> zs, ys;
        double ce = 0.0;
        for (const auto& e : batch.examples) {
          const auto pred = model::forward(m, featurize::hash_features(e.tokens, fc));
          rows.push_back(pred.log_probs);
          zs.push_back(e.z);
          ys.push_back(e.y);
          ce += -pred.log_probs[e.y];
        }
        ce /= batch.examples.size();
        return ce + penalty.lambda *
                        mmd::penalty_value(penalty, rows, zs, ys).value;
      };
      model::GradientBuffer grad;
      grad.reset(m);
      {
        std::vector<std::vector<double>> rows;
        std::vector<int> zs, ys;
        for (const auto& e : batch.examples) {
          rows.push_back(
              model::forward(m, featurize::hash_features(e.tokens, fc)).log_probs);
          zs.push_back(e.z);
          ys.push_back(e.y);
        }
        const auto pen = mmd::penalty_gradient(penalty, rows, zs, ys);
        for (size_t i = 0; i < batch.examples.size(); ++i) {
          std::vector<double> upstream(2, 0.0);
          upstream[batch.examples[i].y] -= 1.0 / batch.examples.size();
          for (int c = 0; c < 2; ++c) {
            upstream[c] += penalty.lambda * pen.row_grads[i][c];
          }
          model::backward(m,
                          featurize::hash_features(batch.examples[i].tokens, fc),
                          upstream, grad);
        }
      }
      auto probe = [&](std::vector<double>& params, const std::vector<double>& g) {
        for (size_t i = 0; i < params.size(); ++i) {
          const double saved = params[i];
          params[i] = saved + step;
          const double up = batch_objective();
          params[i] = saved - step;
          const double down = batch_objective();
          params[i] = saved;
          const double numeric = (up - down) / (2.0 * step);
          const double rel = std::abs(g[i] - numeric) /
                             std::max({1e-5, std::abs(g[i]), std::abs(numeric)});
          worst_combined = std::max(worst_combined, rel);
        }
      };
      probe(m.w1, grad.w1);
      probe(m.b1, grad.b1);
      probe(m.w2, grad.w2);
      probe(m.b2, grad.b2);
    }
    pass = pass && worst_combined < 1e-3;
  }

  pass = pass && watch.seconds() < 30.0;
  report(2, pass,
         "worst rel err: model " + util::format_double(worst_model) + ", mmd " +
             util::format_double(worst_mmd) + ", combined " +
             util::format_double(worst_combined),
         watch.seconds());
  CHECK(pass);
}

TEST_CASE("criterion 3: independence signatures on random models") {
  Stopwatch watch;
  bool pass = true;
  std::string detail;
  for (const auto which : {scm::SignatureCase::anticausal,
                           scm::SignatureCase::causal_confounded,
                           scm::SignatureCase::causal_selected_spurious}) {
    const auto result = scm::run_signature_suite(which, 50, 2030 + static_cast<int>(which));
    pass = pass && result.pass && result.cases_run >= 50;
    detail += result.name + " [" + (result.pass ? "ok" : "FAIL") + "] ";
  }
  pass = pass && watch.seconds() < 120.0;
  report(3, pass, detail, watch.seconds());
  CHECK(pass);
}

TEST_CASE("criterion 4: invariance equals measurability on 2x2x2 models") {
  Stopwatch watch;
  const auto result = scm::run_decomposition_suite(20, 2040);
  const bool pass = result.pass && result.cases_run >= 20 && watch.seconds() < 60.0;
  report(4, pass, result.detail, watch.seconds());
  CHECK(pass);
}

TEST_CASE("criterion 5: invariant risk minimizers transfer across members") {
  Stopwatch watch;
  bool pass = true;
  std::string detail;
  for (const auto which : {scm::TransferCondition::anticausal,
                           scm::TransferCondition::causal_selected_spurious,
                           scm::TransferCondition::causal_confounded_additive}) {
    const auto result =
        scm::run_transfer_suite(which, 20, 2050 + static_cast<int>(which));
    pass = pass && result.pass && result.cases_run >= 20;
    detail += result.name + " [" + (result.pass ? "ok" : "FAIL") + "] ";
  }
  pass = pass && watch.seconds() < 120.0;
  report(5, pass, detail, watch.seconds());
  CHECK(pass);
}

TEST_CASE("criterion 6: minimax counterexamples and overlap coincidence") {
  Stopwatch watch;
  const auto counter = scm::run_minimax_counterexample_suite();
  const auto overlap = scm::run_minimax_overlap_suite(10, 2060);
  const bool pass = counter.pass && overlap.pass && overlap.cases_run >= 10 &&
                    watch.seconds() < 300.0;
  report(6, pass, counter.detail + "; " + overlap.detail, watch.seconds());
  CHECK(pass);
}

TEST_CASE("criterion 7: conditional regularization halves stress-test flips") {
  Stopwatch watch;
  const Experiment& e = experiment();
  const double base_acc = e.baseline.test_accuracy;
  const double base_flip = e.baseline.flip_rate;
  // Best conditional model: lowest flip rate among those within five
  // accuracy points of the unregularized model.
  double best_flip = 1.0;
  double best_lambda = -1.0;
  double best_acc = 0.0;
  for (const auto& point : e.conditional) {
    if (point.test_accuracy < base_acc - 0.05) continue;
    if (point.flip_rate < best_flip) {
      best_flip = point.flip_rate;
      best_lambda = point.lambda;
      best_acc = point.test_accuracy;
    }
  }
  const bool pass = static_cast<int>(e.train_set.examples.size()) >= 10000 &&
                    best_lambda > 0.0 && best_flip <= 0.5 * base_flip &&
                    watch.seconds() < 600.0;
  report(7, pass,
         "train n=" + std::to_string(e.train_set.examples.size()) +
             ", unregularized flips " + util::format_double(base_flip) +
             " acc " + util::format_double(base_acc) + "; best lambda " +
             util::format_double(best_lambda) + " flips " +
             util::format_double(best_flip) + " acc " +
             util::format_double(best_acc),
         watch.seconds());
  CHECK(pass);
}

TEST_CASE("criterion 8: regularization flattens the domain-shift grid") {
  Stopwatch watch;
  const Experiment& e = experiment();
  const auto& base_grid = e.baseline.grid;
  bool pass = base_grid.gammas.size() == 6;

  int decreasing_pairs = 0;
  for (size_t i = 0; i + 1 < base_grid.accuracies.size(); ++i) {
    decreasing_pairs += base_grid.accuracies[i + 1] < base_grid.accuracies[i] ? 1 : 0;
  }
  pass = pass && decreasing_pairs >= 4;

  auto spread = [](const eval::DomainGrid& grid) {
    const auto [lo, hi] =
        std::minmax_element(grid.accuracies.begin(), grid.accuracies.end());
    return *hi - *lo;
  };
  const double base_spread = spread(base_grid);

  // Best conditional model for robustness: highest worst-grid accuracy.
  const SweepModel* best = nullptr;
  for (const auto& point : e.conditional) {
    if (point.grid.gammas.size() != 6) continue;
    if (best == nullptr || point.grid.worst_accuracy > best->grid.worst_accuracy) {
      best = &point;
    }
  }
  pass = pass && best != nullptr;
  const double best_spread = best != nullptr ? spread(best->grid) : 1.0;
  pass = pass && best_spread <= 0.5 * base_spread && watch.seconds() < 900.0;
  report(8, pass,
         "unregularized decreasing in " + std::to_string(decreasing_pairs) +
             "/5 pairs, spread " + util::format_double(base_spread) +
             "; best conditional (lambda " +
             (best != nullptr ? util::format_double(best->lambda) : "-") +
             ") spread " + util::format_double(best_spread),
         watch.seconds());
  CHECK(pass);
}

TEST_CASE("criterion 9: measured penalty responds monotonically to lambda") {
  Stopwatch watch;
  const Experiment& e = experiment();
  bool pass = e.conditional.size() >= 2;
  std::string series;
  std::vector<double> measured;
  for (const auto& point : e.conditional) {
    if (!series.empty()) series += " -> ";
    series += util::format_double(point.conditional_mmd);
    measured.push_back(point.conditional_mmd);
  }
  // Non-increasing in lambda, asserted over the sweep: residuals from the
  // best non-increasing fit (pool adjacent violators) must stay within
  // 10% of the sweep's amplitude. A flat or rising response fails.
  std::vector<double> fit = measured;
  std::vector<int> weight(fit.size(), 1);
  size_t n = fit.size();
  for (size_t i = 1; i < n;) {
    if (fit[i - 1] >= fit[i] - 1e-18) {
      ++i;
      continue;
    }
    fit[i - 1] = (fit[i - 1] * weight[i - 1] + fit[i] * weight[i]) /
                 (weight[i - 1] + weight[i]);
    weight[i - 1] += weight[i];
    fit.erase(fit.begin() + i);
    weight.erase(weight.begin() + i);
    n = fit.size();
    if (i > 1) --i;
  }
  std::vector<double> expanded;
  for (size_t block = 0; block < fit.size(); ++block) {
    for (int k = 0; k < weight[block]; ++k) expanded.push_back(fit[block]);
  }
  const double amplitude =
      *std::max_element(measured.begin(), measured.end()) -
      *std::min_element(measured.begin(), measured.end());
  double worst_residual = 0.0;
  for (size_t i = 0; i < measured.size(); ++i) {
    worst_residual = std::max(worst_residual, std::abs(measured[i] - expanded[i]));
  }
  pass = pass && amplitude > 0.0 && worst_residual <= 0.10 * amplitude;
  report(9, pass,
         "measured conditional mmd across lambda: " + series +
             "; monotone-fit residual " + util::format_double(worst_residual) +
             " vs 10% of amplitude " + util::format_double(0.10 * amplitude),
         watch.seconds());
  CHECK(pass);
}

TEST_CASE("criterion 10: gen-data and train re-runs are byte-identical") {
  Stopwatch watch;
  const std::string config_text =
      "data.source = pseudo\n"
      "data.raw_count = 1600\n"
      "data.seed = 7\n"
      "data.gamma = 0.3\n"
      "data.fractions = 0.6,0.2,0.2\n"
      "featurize.dim = 4096\n"
      "model.architecture = linear\n"
      "model.init_seed = 11\n"
      "train.batch_size = 128\n"
      "train.learning_rate = 0.1\n"
      "train.max_epochs = 3\n"
      "train.patience = 5\n"
      "train.seed = 13\n"
      "sweep.kinds = none,conditional\n"
      "sweep.lambdas = 4\n";
  const cli::Config config = cli::parse_config_text(config_text);
  auto read_all = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  bool pass = true;
  const fs::path root = "tmp_acceptance";
  fs::remove_all(root);
  for (const char* tag : {"a", "b"}) {
    pass = pass && cli::cmd_gen_data(config, (root / ("data_" + std::string(tag))).string()) ==
                       cli::kExitOk;
    pass = pass && cli::cmd_train(config, (root / ("data_" + std::string(tag))).string(),
                                  (root / ("train_" + std::string(tag))).string()) ==
                       cli::kExitOk;
  }
  if (pass) {
    for (const char* name :
         {"train.jsonl", "val.jsonl", "test.jsonl", "test_counterfactual.jsonl",
          "pool.jsonl", "manifest.json"}) {
      pass = pass && read_all(root / "data_a" / name) == read_all(root / "data_b" / name);
    }
    for (const char* name : {"model_none_0.json", "model_conditional_4.json",
                             "report_none_0.csv", "report_conditional_4.csv",
                             "sweep_summary.csv", "manifest.json"}) {
      pass = pass && read_all(root / "train_a" / name) == read_all(root / "train_b" / name);
    }
  }
  fs::remove_all(root);
  report(10, pass, "gen-data and train artifacts compared byte for byte",
         watch.seconds());
  CHECK(pass);
}
