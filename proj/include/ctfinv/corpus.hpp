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

#ifndef CTFINV_CORPUS_HPP_
#define CTFINV_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ctfinv {
namespace corpus {

struct LabeledExample {
  int64_t id = 0;
  std::vector<std::string> tokens;
  int y = 0;
  int z = 0;
  std::optional<int64_t> counterfactual_of;
};

enum class StructureTag { causal_confounded, causal_selected, anticausal, unspecified };

std::string to_string(StructureTag tag);
StructureTag structure_tag_from_string(const std::string& name);

struct Dataset {
  std::vector<LabeledExample> examples;
  int class_count = 2;
  std::optional<double> gamma;
  StructureTag structure_tag = StructureTag::unspecified;

  // Checks id uniqueness, label range, and the gamma tolerance when
  // gamma is declared.
  void validate() const;

  // Empirical Pr(Y=1 | Z=1) and Pr(Y=0 | Z=0); binary only.
  double pr_y1_given_z1() const;
  double pr_y0_given_z0() const;
  std::array<int, 4> cell_counts() const;  // indexed by 2*y + z
};

struct RawReview {
  std::vector<std::string> tokens;
  int stars = 0;           // 1..5
  int helpful_votes = 0;   // >= 0
  std::vector<std::string> category_tags;
};

// --- Generation -----------------------------------------------------------

// Builds the synthetic confound corpus: truncates each review to its
// first max_tokens tokens, sets y = 1 iff stars is 4 or 5, draws z as a
// fair Bernoulli, and rewrites every "and"/"the" token with the suffix
// "xxxxx" (z=1) or "yyyyy" (z=0).
Dataset synthesize_confound(const std::vector<RawReview>& raws, int max_tokens,
                            uint64_t seed);

// Swaps the trigger-token suffixes and flips z; y is unchanged and
// counterfactual_of points at the input example. An involution on token
// content and z.
LabeledExample make_counterfactual(const LabeledExample& example);

// Largest random subsample with Pr(Y=1) = 1/2 and
// Pr(Y=1|Z=1) = Pr(Y=0|Z=0) = gamma, each within +-0.02.
Dataset induce_assoc_anticausal(const Dataset& dataset, double gamma,
                                uint64_t seed);

// Cell sizes (diagonal a = n11 = n00, off-diagonal b = n01 = n10) chosen
// by the same integer program induce_assoc_anticausal solves.
struct AnticausalPlan {
  int diagonal = 0;
  int off_diagonal = 0;
};
AnticausalPlan plan_anticausal_cells(const std::array<int, 4>& available,
                                     double gamma);

// Confound-by-thresholding construction for causal-direction data:
// (1) drop zero-vote reviews until Pr(V>0|Z=1) > gamma and
//     Pr(V>0|Z=0) > 1-gamma;
// (2) find the smallest thresholds T1, T0 with Pr(V>T1|Z=1) < gamma and
//     Pr(V>T0|Z=0) < 1-gamma;
// (3) set y = 1[V > T_z];
// (4) flip y 0->1 among examples sitting at the threshold until both
//     conditionals exceed their targets;
// then balance z by subsampling.
Dataset induce_assoc_causal(const std::vector<RawReview>& raws,
                            const std::vector<int>& z_assignment, double gamma,
                            uint64_t seed);

// Replaces every token found in one lexicon with a uniformly sampled
// token from the other; length preserved, counterfactual_of set.
LabeledExample lexicon_swap(const LabeledExample& example,
                            const std::set<std::string>& positive_lexicon,
                            const std::set<std::string>& negative_lexicon,
                            uint64_t seed);

struct SplitResult {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Disjoint, exhaustive, seeded partition stratified on (y, z) cells to
// within one example per cell.
SplitResult split(const Dataset& dataset, const std::array<double, 3>& fractions,
                  uint64_t seed);

// --- JSONL I/O -------------------------------------------------------------

std::string example_to_jsonl(const LabeledExample& e);
LabeledExample example_from_jsonl(const std::string& line);

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

void save_raw_reviews(const std::vector<RawReview>& raws, const std::string& path);
std::vector<RawReview> load_raw_reviews(const std::string& path);

// --- Desk-scale raw data ----------------------------------------------------

// Seeded generator of review-like token lists with sentiment-bearing
// adjectives driving the star rating, frequent "the"/"and" filler for
// the synthetic confound, and vote counts loosely tied to length.
// Stands in for a real review dump, which this toolkit does not fetch.
struct PseudoReviewOptions {
  int min_tokens = 8;
  int max_extra_tokens = 18;
  double no_sentiment_fraction = 0.3;  // reviews with zero adjective signal
  double star_noise = 0.9;
};
std::vector<RawReview> generate_pseudo_reviews(int count, uint64_t seed,
                                               const PseudoReviewOptions& opts = {});

}  // namespace corpus
}  // namespace ctfinv

#endif  // CTFINV_CORPUS_HPP_
