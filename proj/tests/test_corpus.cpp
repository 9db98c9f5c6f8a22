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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "ctfinv/corpus.hpp"
#include "ctfinv/util.hpp"

using namespace ctfinv;
using corpus::Dataset;
using corpus::LabeledExample;
using corpus::RawReview;

namespace {

RawReview review(std::vector<std::string> tokens, int stars, int votes = 0) {
  RawReview r;
  r.tokens = std::move(tokens);
  r.stars = stars;
  r.helpful_votes = votes;
  return r;
}

// Brute-force oracle: scan every symmetric cell assignment (a diagonal,
// b off-diagonal) and keep the feasible one with the largest total.
int oracle_max_total(const std::array<int, 4>& counts, double gamma) {
  const int diag_cap = std::min(counts[0], counts[3]);
  const int off_cap = std::min(counts[1], counts[2]);
  int best = 0;
  for (int a = 1; a <= diag_cap; ++a) {
    for (int b = 1; b <= off_cap; ++b) {
      const double ratio = static_cast<double>(a) / (a + b);
      if (std::abs(ratio - gamma) <= 0.02 + 1e-9 && 2 * (a + b) > best) {
        best = 2 * (a + b);
      }
    }
  }
  return best;
}

// Oracle for the threshold step: smallest T with the tail share strictly
// below the target, computed from sorted counts.
int oracle_threshold(const std::vector<int>& votes, double target) {
  for (int t = 0;; ++t) {
    int above = 0;
    for (int v : votes) above += v > t ? 1 : 0;
    if (static_cast<double>(above) / votes.size() < target) return t;
  }
}

Dataset balanced_dataset(int per_cell, uint64_t seed) {
  Dataset data;
  data.class_count = 2;
  util::Rng rng(seed);
  int64_t id = 0;
  for (int y = 0; y < 2; ++y) {
    for (int z = 0; z < 2; ++z) {
      for (int i = 0; i < per_cell; ++i) {
        LabeledExample e;
        e.id = id++;
        e.y = y;
        e.z = z;
        e.tokens = {"tok" + std::to_string(rng.below(50))};
        data.examples.push_back(std::move(e));
      }
    }
  }
  return data;
}

}  // namespace

TEST_CASE("synthesize_confound rewrites triggers per z") {
  const std::vector<RawReview> raws = {
      review({"the", "shoes"}, 5),
      review({"great", "shoes"}, 2),
      review({"and", "the", "and"}, 4),
  };
  // Find a seed giving the z pattern we want to pin down.
  for (uint64_t seed = 0; seed < 64; ++seed) {
    const Dataset data = corpus::synthesize_confound(raws, 20, seed);
    REQUIRE(data.examples.size() == 3);
    const auto& first = data.examples[0];
    CHECK(first.y == 1);
    if (first.z == 1) {
      CHECK(first.tokens == std::vector<std::string>{"thexxxxx", "shoes"});
    } else {
      CHECK(first.tokens == std::vector<std::string>{"theyyyyy", "shoes"});
    }
    // No trigger tokens: text unchanged regardless of z.
    CHECK(data.examples[1].tokens == std::vector<std::string>{"great", "shoes"});
    CHECK(data.examples[1].y == 0);
    const auto& third = data.examples[2];
    CHECK(third.y == 1);
    if (third.z == 0) {
      CHECK(third.tokens ==
            std::vector<std::string>{"andyyyyy", "theyyyyy", "andyyyyy"});
    } else {
      CHECK(third.tokens ==
            std::vector<std::string>{"andxxxxx", "thexxxxx", "andxxxxx"});
    }
  }
  CHECK_THROWS_AS(corpus::synthesize_confound({}, 20, 1), ValidationError);
}

TEST_CASE("synthesize_confound truncates and preserves token counts") {
  std::vector<std::string> long_tokens;
  for (int i = 0; i < 40; ++i) long_tokens.push_back(i % 3 == 0 ? "the" : "word");
  const Dataset data = corpus::synthesize_confound({review(long_tokens, 3)}, 20, 9);
  CHECK(data.examples[0].tokens.size() == 20);
  const Dataset untruncated =
      corpus::synthesize_confound({review({"and", "a", "b"}, 3)}, 20, 9);
  CHECK(untruncated.examples[0].tokens.size() == 3);
}

TEST_CASE("synthesize_confound is deterministic in the seed") {
  std::vector<RawReview> raws;
  util::Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    raws.push_back(review({"the", "tok" + std::to_string(i)}, 1 + rng.below_int(5)));
  }
  const Dataset a = corpus::synthesize_confound(raws, 20, 123);
  const Dataset b = corpus::synthesize_confound(raws, 20, 123);
  REQUIRE(a.examples.size() == b.examples.size());
  for (size_t i = 0; i < a.examples.size(); ++i) {
    CHECK(a.examples[i].tokens == b.examples[i].tokens);
    CHECK(a.examples[i].z == b.examples[i].z);
  }
  const Dataset c = corpus::synthesize_confound(raws, 20, 124);
  bool any_diff = false;
  for (size_t i = 0; i < a.examples.size(); ++i) {
    any_diff = any_diff || a.examples[i].z != c.examples[i].z;
  }
  CHECK(any_diff);
}

TEST_CASE("make_counterfactual swaps suffixes and is an involution") {
  LabeledExample e;
  e.id = 42;
  e.tokens = {"thexxxxx", "fit"};
  e.y = 1;
  e.z = 1;
  const LabeledExample cf = corpus::make_counterfactual(e);
  CHECK(cf.tokens == std::vector<std::string>{"theyyyyy", "fit"});
  CHECK(cf.z == 0);
  CHECK(cf.y == 1);
  CHECK(cf.counterfactual_of == 42);

  const LabeledExample back = corpus::make_counterfactual(cf);
  CHECK(back.tokens == e.tokens);
  CHECK(back.z == e.z);

  LabeledExample plain;
  plain.id = 7;
  plain.tokens = {"no", "trigger", "here"};
  plain.z = 0;
  const LabeledExample cf2 = corpus::make_counterfactual(plain);
  CHECK(cf2.tokens == plain.tokens);
  CHECK(cf2.z == 1);
}

TEST_CASE("involution holds across a generated corpus") {
  const auto raws = corpus::generate_pseudo_reviews(300, 5);
  const Dataset data = corpus::synthesize_confound(raws, 20, 6);
  for (const auto& e : data.examples) {
    const auto twice = corpus::make_counterfactual(corpus::make_counterfactual(e));
    CHECK(twice.tokens == e.tokens);
    CHECK(twice.z == e.z);
  }
}

TEST_CASE("plan_anticausal_cells matches the brute-force integer search") {
  const std::array<std::array<int, 4>, 5> cases = {{
      {100, 100, 100, 100},
      {50, 120, 80, 40},
      {10, 200, 150, 12},
      {500, 30, 45, 700},
      {7, 7, 7, 7},
  }};
  for (const auto& counts : cases) {
    for (const double gamma : {0.3, 0.5, 0.7}) {
      const auto plan = corpus::plan_anticausal_cells(counts, gamma);
      const int total = 2 * (plan.diagonal + plan.off_diagonal);
      CHECK(total == oracle_max_total(counts, gamma));
      if (plan.diagonal > 0) {
        const double ratio = static_cast<double>(plan.diagonal) /
                             (plan.diagonal + plan.off_diagonal);
        CHECK(std::abs(ratio - gamma) <= 0.02 + 1e-9);
        CHECK(plan.diagonal <= std::min(counts[0], counts[3]));
        CHECK(plan.off_diagonal <= std::min(counts[1], counts[2]));
      }
    }
  }
}

TEST_CASE("induce_assoc_anticausal hits gamma and balances y") {
  const Dataset pool = balanced_dataset(500, 11);
  for (const double gamma : {0.3, 0.5, 0.65}) {
    const Dataset induced = corpus::induce_assoc_anticausal(pool, gamma, 21);
    CHECK(induced.structure_tag == corpus::StructureTag::anticausal);
    REQUIRE(induced.gamma.has_value());
    CHECK(std::abs(induced.pr_y1_given_z1() - gamma) <= 0.02 + 1e-9);
    CHECK(std::abs(induced.pr_y0_given_z0() - gamma) <= 0.02 + 1e-9);
    const auto cells = induced.cell_counts();
    CHECK(cells[2] + cells[3] == cells[0] + cells[1]);  // y balanced
    // gamma = 1/2 means no association.
    if (gamma == 0.5) {
      const double corr = induced.pr_y1_given_z1() - 0.5;
      CHECK(std::abs(corr) < 0.02);
    }
  }
}

TEST_CASE("induce_assoc_anticausal names the limiting cell when infeasible") {
  Dataset pool = balanced_dataset(5, 3);
  // Empty one cell entirely.
  Dataset missing;
  missing.class_count = 2;
  for (const auto& e : pool.examples) {
    if (e.y == 1 && e.z == 0) continue;
    missing.examples.push_back(e);
  }
  CHECK_THROWS_AS(corpus::induce_assoc_anticausal(missing, 0.3, 1),
                  InfeasibleError);
  CHECK_THROWS_WITH_AS(corpus::induce_assoc_anticausal(missing, 0.3, 1),
                       doctest::Contains("(y=1,z=0)"), InfeasibleError);
}

TEST_CASE("induce_assoc_causal follows the four-step construction") {
  util::Rng rng(13);
  std::vector<RawReview> raws;
  std::vector<int> z;
  // Uniform votes on {0..9} in both groups.
  for (int g = 0; g < 2; ++g) {
    for (int v = 0; v < 10; ++v) {
      for (int i = 0; i < 60; ++i) {
        raws.push_back(review({"tok"}, 3, v));
        z.push_back(g);
      }
    }
  }
  const double gamma = 0.34;
  const Dataset induced = corpus::induce_assoc_causal(raws, z, gamma, 17);
  CHECK(induced.structure_tag == corpus::StructureTag::causal_confounded);
  CHECK(std::abs(induced.pr_y1_given_z1() - gamma) <= 0.02 + 1e-9);
  // Pr(Y=1 | Z=0) targets 1 - gamma, i.e. Pr(Y=0 | Z=0) targets gamma.
  CHECK(std::abs(induced.pr_y0_given_z0() - gamma) <= 0.02 + 1e-9);
  const auto cells = induced.cell_counts();
  CHECK(cells[0] + cells[2] == cells[1] + cells[3]);  // z balanced

  // Threshold oracle: after step 1 no zero-vote drops are needed here
  // (Pr(V>0) = 0.9 > max(gamma, 1-gamma)), so thresholds come from the
  // raw tails.
  std::vector<int> votes;
  for (int v = 0; v < 10; ++v)
    for (int i = 0; i < 60; ++i) votes.push_back(v);
  const int t1 = oracle_threshold(votes, gamma);
  const int t0 = oracle_threshold(votes, 1.0 - gamma);
  // With tails (9-t)/10: smallest t with tail < 0.34 is 6; with
  // tail < 0.66 it is 3.
  CHECK(t1 == 6);
  CHECK(t0 == 3);
}

TEST_CASE("induce_assoc_causal step errors") {
  // All zero votes: step 1 cannot reach a positive target.
  std::vector<RawReview> raws;
  std::vector<int> z;
  for (int i = 0; i < 40; ++i) {
    raws.push_back(review({"tok"}, 3, 0));
    z.push_back(i % 2);
  }
  CHECK_THROWS_WITH_AS(corpus::induce_assoc_causal(raws, z, 0.3, 1),
                       doctest::Contains("step 1"), InfeasibleError);
}

TEST_CASE("lexicon_swap replaces listed words and keeps length") {
  const std::set<std::string> positive = {"great", "lovely"};
  const std::set<std::string> negative = {"bad"};
  LabeledExample e;
  e.id = 5;
  e.tokens = {"great", "boots"};
  const LabeledExample cf = corpus::lexicon_swap(e, positive, negative, 3);
  CHECK(cf.tokens == std::vector<std::string>{"bad", "boots"});
  CHECK(cf.counterfactual_of == 5);
  CHECK(cf.tokens.size() == e.tokens.size());

  LabeledExample none;
  none.id = 6;
  none.tokens = {"plain", "words"};
  CHECK(corpus::lexicon_swap(none, positive, negative, 3).tokens == none.tokens);

  util::Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    LabeledExample random_e;
    random_e.id = trial;
    for (int i = 0; i < 1 + rng.below_int(10); ++i) {
      const int pick = rng.below_int(4);
      random_e.tokens.push_back(pick == 0   ? "great"
                                : pick == 1 ? "bad"
                                : pick == 2 ? "lovely"
                                            : "noun");
    }
    const auto swapped = corpus::lexicon_swap(random_e, positive, negative, trial);
    CHECK(swapped.tokens.size() == random_e.tokens.size());
  }

  CHECK_THROWS_AS(corpus::lexicon_swap(e, {"same"}, {"same"}, 1), ValidationError);
  CHECK_THROWS_AS(corpus::lexicon_swap(e, {}, negative, 1), ValidationError);
}

TEST_CASE("split is exhaustive, disjoint, and stratified") {
  const Dataset pool = balanced_dataset(25, 19);
  const auto splits = corpus::split(pool, {0.8, 0.1, 0.1}, 23);
  CHECK(splits.train.examples.size() == 80);
  CHECK(splits.val.examples.size() == 10);
  CHECK(splits.test.examples.size() == 10);
  std::set<int64_t> seen;
  for (const Dataset* part : {&splits.train, &splits.val, &splits.test}) {
    for (const auto& e : part->examples) {
      CHECK(seen.insert(e.id).second);
    }
  }
  CHECK(seen.size() == pool.examples.size());

  // Stratification oracle: per-cell counts match proportional allocation
  // within one example.
  for (int y = 0; y < 2; ++y) {
    for (int z = 0; z < 2; ++z) {
      int cell_total = 0;
      for (const auto& e : pool.examples) {
        cell_total += (e.y == y && e.z == z) ? 1 : 0;
      }
      const std::array<const Dataset*, 3> parts = {&splits.train, &splits.val,
                                                   &splits.test};
      const std::array<double, 3> fractions = {0.8, 0.1, 0.1};
      for (int t = 0; t < 3; ++t) {
        int in_part = 0;
        for (const auto& e : parts[t]->examples) {
          in_part += (e.y == y && e.z == z) ? 1 : 0;
        }
        CHECK(std::abs(in_part - fractions[t] * cell_total) <= 1.0);
      }
    }
  }
}

TEST_CASE("split edge cases") {
  const Dataset pool = balanced_dataset(10, 2);
  const auto all_train = corpus::split(pool, {1.0, 0.0, 0.0}, 5);
  CHECK(all_train.train.examples.size() == pool.examples.size());
  CHECK(all_train.val.examples.empty());

  Dataset tiny;
  tiny.class_count = 2;
  tiny.examples.push_back({0, {"a"}, 0, 0, std::nullopt});
  tiny.examples.push_back({1, {"b"}, 1, 1, std::nullopt});
  CHECK_THROWS_AS(corpus::split(tiny, {0.5, 0.25, 0.25}, 1), ValidationError);
  CHECK_THROWS_AS(corpus::split(pool, {0.5, 0.2, 0.2}, 1), ValidationError);
}

TEST_CASE("jsonl round trip and field handling") {
  LabeledExample e;
  e.id = 31;
  e.tokens = {"thexxxxx", "fit", "café"};
  e.y = 1;
  e.z = 0;
  e.counterfactual_of = 30;
  const LabeledExample back = corpus::example_from_jsonl(corpus::example_to_jsonl(e));
  CHECK(back.id == e.id);
  CHECK(back.tokens == e.tokens);
  CHECK(back.y == e.y);
  CHECK(back.z == e.z);
  CHECK(back.counterfactual_of == e.counterfactual_of);

  LabeledExample no_link;
  no_link.id = 1;
  no_link.tokens = {"x"};
  const auto round = corpus::example_from_jsonl(corpus::example_to_jsonl(no_link));
  CHECK_FALSE(round.counterfactual_of.has_value());
}

TEST_CASE("dataset files round trip byte-identically") {
  const auto raws = corpus::generate_pseudo_reviews(100, 77);
  const Dataset data = corpus::synthesize_confound(raws, 20, 78);
  const std::string path = "tmp_corpus_roundtrip.jsonl";
  corpus::save_dataset(data, path);
  const Dataset loaded = corpus::load_dataset(path);
  REQUIRE(loaded.examples.size() == data.examples.size());
  for (size_t i = 0; i < data.examples.size(); ++i) {
    CHECK(loaded.examples[i].id == data.examples[i].id);
    CHECK(loaded.examples[i].tokens == data.examples[i].tokens);
  }
  const std::string path2 = "tmp_corpus_roundtrip2.jsonl";
  corpus::save_dataset(loaded, path2);
  std::ifstream f1(path), f2(path2);
  const std::string c1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  const std::string c2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("raw review io validates ranges") {
  const std::string path = "tmp_raws.jsonl";
  corpus::save_raw_reviews({review({"the", "fit"}, 4, 3)}, path);
  const auto loaded = corpus::load_raw_reviews(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].stars == 4);
  CHECK(loaded[0].helpful_votes == 3);
  std::remove(path.c_str());
}

TEST_CASE("generated pseudo reviews have usable structure") {
  const auto raws = corpus::generate_pseudo_reviews(2000, 123);
  REQUIRE(raws.size() == 2000);
  int with_trigger = 0;
  int positive = 0;
  int with_votes = 0;
  for (const auto& r : raws) {
    CHECK(r.stars >= 1);
    CHECK(r.stars <= 5);
    CHECK(r.helpful_votes >= 0);
    bool trigger = false;
    for (const auto& t : r.tokens) trigger = trigger || t == "the" || t == "and";
    with_trigger += trigger ? 1 : 0;
    positive += (r.stars >= 4) ? 1 : 0;
    with_votes += r.helpful_votes > 0 ? 1 : 0;
  }
  // Both label classes and both vote regimes must be well represented.
  CHECK(with_trigger > 1200);
  CHECK(positive > 400);
  CHECK(2000 - positive > 400);
  CHECK(with_votes > 800);
  // Determinism.
  const auto again = corpus::generate_pseudo_reviews(2000, 123);
  for (size_t i = 0; i < raws.size(); ++i) {
    CHECK(raws[i].tokens == again[i].tokens);
    CHECK(raws[i].stars == again[i].stars);
  }
}

TEST_CASE("induction is a pure function of inputs and seed") {
  const Dataset pool = balanced_dataset(300, 44);
  const Dataset a = corpus::induce_assoc_anticausal(pool, 0.3, 99);
  const Dataset b = corpus::induce_assoc_anticausal(pool, 0.3, 99);
  REQUIRE(a.examples.size() == b.examples.size());
  for (size_t i = 0; i < a.examples.size(); ++i) {
    CHECK(a.examples[i].id == b.examples[i].id);
  }
}
