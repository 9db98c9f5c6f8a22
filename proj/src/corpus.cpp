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

#include "ctfinv/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <unordered_set>

#include "ctfinv/util.hpp"
#include "json.hpp"

namespace ctfinv {
namespace corpus {

namespace {

constexpr double kGammaTolerance = 0.02;
// Cell counts are integers, so achieved ratios can land exactly on the
// tolerance boundary (e.g. 8/25 vs 0.3); comparisons get float slack.
constexpr double kGammaSlack = 1e-9;

const char* kTriggerStems[2] = {"and", "the"};

// Returns the stem if `token` is exactly a trigger stem, else nullptr.
const char* trigger_stem(const std::string& token) {
  for (const char* stem : kTriggerStems) {
    if (token == stem) return stem;
  }
  return nullptr;
}

std::string suffixed(const char* stem, int z) {
  return std::string(stem) + (z == 1 ? "xxxxx" : "yyyyy");
}

}  // namespace

std::string to_string(StructureTag tag) {
  switch (tag) {
    case StructureTag::causal_confounded: return "causal_confounded";
    case StructureTag::causal_selected: return "causal_selected";
    case StructureTag::anticausal: return "anticausal";
    case StructureTag::unspecified: return "unspecified";
  }
  return "unspecified";
}

StructureTag structure_tag_from_string(const std::string& name) {
  if (name == "causal_confounded") return StructureTag::causal_confounded;
  if (name == "causal_selected") return StructureTag::causal_selected;
  if (name == "anticausal") return StructureTag::anticausal;
  if (name == "unspecified") return StructureTag::unspecified;
  throw ValidationError("unknown structure tag: " + name);
}

void Dataset::validate() const {
  std::unordered_set<int64_t> seen;
  seen.reserve(examples.size());
  for (const auto& e : examples) {
    if (!seen.insert(e.id).second) {
      throw ValidationError("Dataset: duplicate id " + std::to_string(e.id));
    }
    if (e.y < 0 || e.y >= class_count) {
      throw ValidationError("Dataset: label out of range on id " +
                            std::to_string(e.id));
    }
    if (e.z != 0 && e.z != 1) {
      throw ValidationError("Dataset: z must be 0 or 1 on id " +
                            std::to_string(e.id));
    }
  }
  if (gamma.has_value()) {
    if (std::abs(pr_y1_given_z1() - *gamma) > kGammaTolerance + kGammaSlack ||
        std::abs(pr_y0_given_z0() - *gamma) > kGammaTolerance + kGammaSlack) {
      throw ValidationError("Dataset: achieved association misses declared gamma");
    }
  }
}

std::array<int, 4> Dataset::cell_counts() const {
  std::array<int, 4> counts{0, 0, 0, 0};
  for (const auto& e : examples) {
    if (e.y < 0 || e.y > 1) {
      throw ValidationError("cell_counts: requires binary y");
    }
    ++counts[2 * e.y + e.z];
  }
  return counts;
}

double Dataset::pr_y1_given_z1() const {
  const auto c = cell_counts();
  const int n = c[1] + c[3];
  if (n == 0) throw ValidationError("pr_y1_given_z1: no z=1 examples");
  return static_cast<double>(c[3]) / n;
}

double Dataset::pr_y0_given_z0() const {
  const auto c = cell_counts();
  const int n = c[0] + c[2];
  if (n == 0) throw ValidationError("pr_y0_given_z0: no z=0 examples");
  return static_cast<double>(c[0]) / n;
}

Dataset synthesize_confound(const std::vector<RawReview>& raws, int max_tokens,
                            uint64_t seed) {
  if (raws.empty()) throw ValidationError("synthesize_confound: empty corpus");
  if (max_tokens < 1) {
    throw ValidationError("synthesize_confound: max_tokens must be >= 1");
  }
  util::Rng rng(seed);
  Dataset out;
  out.class_count = 2;
  out.structure_tag = StructureTag::unspecified;
  out.examples.reserve(raws.size());
  int64_t next_id = 0;
  for (const auto& raw : raws) {
    LabeledExample e;
    e.id = next_id++;
    e.y = (raw.stars == 4 || raw.stars == 5) ? 1 : 0;
    e.z = rng.bernoulli(0.5) ? 1 : 0;
    const size_t keep = std::min(raw.tokens.size(), static_cast<size_t>(max_tokens));
    e.tokens.reserve(keep);
    for (size_t i = 0; i < keep; ++i) {
      if (const char* stem = trigger_stem(raw.tokens[i])) {
        e.tokens.push_back(suffixed(stem, e.z));
      } else {
        e.tokens.push_back(raw.tokens[i]);
      }
    }
    out.examples.push_back(std::move(e));
  }
  return out;
}

LabeledExample make_counterfactual(const LabeledExample& example) {
  LabeledExample cf = example;
  cf.z = 1 - example.z;
  cf.counterfactual_of = example.id;
  for (auto& tok : cf.tokens) {
    for (const char* stem : kTriggerStems) {
      if (tok == suffixed(stem, 1)) {
        tok = suffixed(stem, 0);
        break;
      }
      if (tok == suffixed(stem, 0)) {
        tok = suffixed(stem, 1);
        break;
      }
    }
  }
  return cf;
}

AnticausalPlan plan_anticausal_cells(const std::array<int, 4>& available,
                                     double gamma) {
  // Cells are indexed 2*y + z. Diagonal cells (y=z) share size a, the
  // off-diagonal cells share size b; this keeps Pr(Y=1) exactly 1/2 and
  // makes the two conditionals equal by symmetry.
  const int diag_cap = std::min(available[0], available[3]);
  const int off_cap = std::min(available[1], available[2]);
  AnticausalPlan best{0, 0};
  for (int a = 1; a <= diag_cap; ++a) {
    // Ratio window: gamma - tol <= a / (a + b) <= gamma + tol.
    const double hi_ratio = gamma + kGammaTolerance;
    const double lo_ratio = gamma - kGammaTolerance;
    int b_lo = 1;
    if (hi_ratio < 1.0) {
      b_lo = std::max(
          1, static_cast<int>(std::ceil(a * (1.0 - hi_ratio) / hi_ratio - kGammaSlack)));
    }
    int b_hi = off_cap;
    if (lo_ratio > 0.0) {
      b_hi = std::min(off_cap, static_cast<int>(std::floor(
                                   a * (1.0 - lo_ratio) / lo_ratio + kGammaSlack)));
    }
    if (b_lo > b_hi) continue;
    const int b = b_hi;
    if (a + b > best.diagonal + best.off_diagonal ||
        (a + b == best.diagonal + best.off_diagonal && a > best.diagonal)) {
      best = {a, b};
    }
  }
  return best;
}

Dataset induce_assoc_anticausal(const Dataset& dataset, double gamma,
                                uint64_t seed) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ValidationError("induce_assoc_anticausal: gamma must lie in (0,1)");
  }
  std::array<std::vector<size_t>, 4> cells;
  for (size_t i = 0; i < dataset.examples.size(); ++i) {
    const auto& e = dataset.examples[i];
    if (e.y < 0 || e.y > 1) {
      throw ValidationError("induce_assoc_anticausal: requires binary y");
    }
    cells[2 * e.y + e.z].push_back(i);
  }
  std::array<int, 4> counts;
  for (int c = 0; c < 4; ++c) {
    counts[c] = static_cast<int>(cells[c].size());
    if (counts[c] == 0) {
      throw InfeasibleError("induce_assoc_anticausal: empty cell (y=" +
                            std::to_string(c / 2) + ",z=" + std::to_string(c % 2) + ")");
    }
  }
  const AnticausalPlan plan = plan_anticausal_cells(counts, gamma);
  if (plan.diagonal == 0) {
    const int limiting = static_cast<int>(
        std::min_element(counts.begin(), counts.end()) - counts.begin());
    throw InfeasibleError(
        "induce_assoc_anticausal: no cell assignment reaches gamma=" +
        util::format_double(gamma) + "; limiting cell (y=" +
        std::to_string(limiting / 2) + ",z=" + std::to_string(limiting % 2) +
        ") has " + std::to_string(counts[limiting]) + " examples");
  }
  util::Rng rng(seed);
  std::vector<size_t> chosen;
  for (int c = 0; c < 4; ++c) {
    util::Rng cell_rng = rng.fork(static_cast<uint64_t>(c) + 1);
    auto& members = cells[c];
    cell_rng.shuffle(members);
    const int want = (c == 0 || c == 3) ? plan.diagonal : plan.off_diagonal;
    chosen.insert(chosen.end(), members.begin(), members.begin() + want);
  }
  rng.shuffle(chosen);
  Dataset out;
  out.class_count = dataset.class_count;
  out.gamma = gamma;
  out.structure_tag = StructureTag::anticausal;
  out.examples.reserve(chosen.size());
  for (size_t idx : chosen) out.examples.push_back(dataset.examples[idx]);
  out.validate();
  return out;
}

namespace {

struct CausalWorkItem {
  size_t raw_index;
  int votes;
  int z;
  int y = 0;
};

// Smallest threshold T >= 0 with Pr(V > T) < target over `votes`.
int smallest_tail_threshold(const std::vector<int>& votes, double target) {
  int max_v = 0;
  for (int v : votes) max_v = std::max(max_v, v);
  const double n = static_cast<double>(votes.size());
  for (int t = 0;; ++t) {
    int above = 0;
    for (int v : votes) above += v > t ? 1 : 0;
    if (above < target * n) return t;
    if (t > max_v) return t;  // unreachable: tail is 0 at max_v
  }
}

}  // namespace

Dataset induce_assoc_causal(const std::vector<RawReview>& raws,
                            const std::vector<int>& z_assignment, double gamma,
                            uint64_t seed) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ValidationError("induce_assoc_causal: gamma must lie in (0,1)");
  }
  if (raws.size() != z_assignment.size()) {
    throw ValidationError("induce_assoc_causal: raws/z_assignment size mismatch");
  }
  for (int z : z_assignment) {
    if (z != 0 && z != 1) {
      throw ValidationError("induce_assoc_causal: z must be binary");
    }
  }
  std::array<std::vector<CausalWorkItem>, 2> groups;
  for (size_t i = 0; i < raws.size(); ++i) {
    groups[z_assignment[i]].push_back(
        {i, raws[i].helpful_votes, z_assignment[i]});
  }
  const double targets[2] = {1.0 - gamma, gamma};  // Pr(Y=1 | Z=g) must exceed
  util::Rng rng(seed);

  // Step 1: drop zero-vote reviews until Pr(V>0 | Z=g) exceeds its target.
  for (int g = 0; g < 2; ++g) {
    auto& group = groups[g];
    if (group.empty()) {
      throw InfeasibleError("induce_assoc_causal: step 1: group z=" +
                            std::to_string(g) + " is empty");
    }
    int positive = 0;
    for (const auto& item : group) positive += item.votes > 0 ? 1 : 0;
    if (positive == 0) {
      throw InfeasibleError("induce_assoc_causal: step 1: group z=" +
                            std::to_string(g) + " has no reviews with V>0");
    }
    int drops = 0;
    while (positive <= targets[g] * (static_cast<double>(group.size()) - drops)) {
      ++drops;
    }
    if (drops > 0) {
      std::vector<size_t> zero_positions;
      for (size_t i = 0; i < group.size(); ++i) {
        if (group[i].votes == 0) zero_positions.push_back(i);
      }
      util::Rng drop_rng = rng.fork(10 + g);
      drop_rng.shuffle(zero_positions);
      zero_positions.resize(drops);
      std::sort(zero_positions.begin(), zero_positions.end(), std::greater<>());
      for (size_t pos : zero_positions) {
        group.erase(group.begin() + static_cast<ptrdiff_t>(pos));
      }
    }
  }

  // Step 2: smallest thresholds with tail probability below the target.
  int thresholds[2];
  for (int g = 0; g < 2; ++g) {
    std::vector<int> votes;
    votes.reserve(groups[g].size());
    for (const auto& item : groups[g]) votes.push_back(item.votes);
    thresholds[g] = smallest_tail_threshold(votes, targets[g]);
  }

  // Step 3: label by threshold exceedance.
  for (int g = 0; g < 2; ++g) {
    for (auto& item : groups[g]) item.y = item.votes > thresholds[g] ? 1 : 0;
  }

  // Step 4: flip boundary examples (V at the threshold, thus y=0) in
  // seeded order until the conditional strictly exceeds the target.
  for (int g = 0; g < 2; ++g) {
    auto& group = groups[g];
    int ones = 0;
    for (const auto& item : group) ones += item.y;
    std::vector<size_t> boundary;
    for (size_t i = 0; i < group.size(); ++i) {
      if (group[i].votes == thresholds[g] && group[i].y == 0) boundary.push_back(i);
    }
    util::Rng flip_rng = rng.fork(20 + g);
    flip_rng.shuffle(boundary);
    size_t next = 0;
    while (ones <= targets[g] * static_cast<double>(group.size())) {
      if (next >= boundary.size()) {
        throw InfeasibleError("induce_assoc_causal: step 4: group z=" +
                              std::to_string(g) +
                              " cannot reach its target by flipping");
      }
      group[boundary[next++]].y = 1;
      ++ones;
    }
  }

  // Balance z by dropping uniformly at random from the larger group.
  const size_t keep = std::min(groups[0].size(), groups[1].size());
  for (int g = 0; g < 2; ++g) {
    if (groups[g].size() > keep) {
      util::Rng bal_rng = rng.fork(30 + g);
      bal_rng.shuffle(groups[g]);
      groups[g].resize(keep);
    }
  }

  Dataset out;
  out.class_count = 2;
  out.gamma = gamma;
  out.structure_tag = StructureTag::causal_confounded;
  for (int g = 0; g < 2; ++g) {
    for (const auto& item : groups[g]) {
      LabeledExample e;
      e.id = static_cast<int64_t>(item.raw_index);
      e.tokens = raws[item.raw_index].tokens;
      e.y = item.y;
      e.z = item.z;
      out.examples.push_back(std::move(e));
    }
  }
  util::Rng order_rng = rng.fork(40);
  order_rng.shuffle(out.examples);
  out.validate();
  return out;
}

LabeledExample lexicon_swap(const LabeledExample& example,
                            const std::set<std::string>& positive_lexicon,
                            const std::set<std::string>& negative_lexicon,
                            uint64_t seed) {
  if (positive_lexicon.empty() || negative_lexicon.empty()) {
    throw ValidationError("lexicon_swap: lexicons must be non-empty");
  }
  for (const auto& word : positive_lexicon) {
    if (negative_lexicon.count(word)) {
      throw ValidationError("lexicon_swap: lexicons overlap on \"" + word + "\"");
    }
  }
  const std::vector<std::string> positive(positive_lexicon.begin(),
                                          positive_lexicon.end());
  const std::vector<std::string> negative(negative_lexicon.begin(),
                                          negative_lexicon.end());
  util::Rng rng(seed);
  LabeledExample cf = example;
  cf.counterfactual_of = example.id;
  for (auto& tok : cf.tokens) {
    if (positive_lexicon.count(tok)) {
      tok = negative[rng.below(negative.size())];
    } else if (negative_lexicon.count(tok)) {
      tok = positive[rng.below(positive.size())];
    }
  }
  return cf;
}

namespace {

// Largest-remainder allocation of n into parts proportional to fractions.
std::array<int, 3> proportional_allocation(int n, const std::array<double, 3>& fractions) {
  std::array<int, 3> alloc;
  std::array<double, 3> remainder;
  int assigned = 0;
  for (int t = 0; t < 3; ++t) {
    const double exact = fractions[t] * n;
    alloc[t] = static_cast<int>(std::floor(exact + 1e-12));
    remainder[t] = exact - alloc[t];
    assigned += alloc[t];
  }
  for (int left = n - assigned; left > 0; --left) {
    int pick = 0;
    for (int t = 1; t < 3; ++t) {
      if (remainder[t] > remainder[pick] + 1e-15) pick = t;
    }
    ++alloc[pick];
    remainder[pick] = -1.0;
  }
  return alloc;
}

}  // namespace

SplitResult split(const Dataset& dataset, const std::array<double, 3>& fractions,
                  uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ValidationError("split: fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split: fractions must sum to 1");
  }
  if (dataset.examples.size() < 3) {
    throw ValidationError("split: dataset must have at least 3 examples");
  }
  // Stratify on (y, z) cells.
  std::map<std::pair<int, int>, std::vector<size_t>> cells;
  for (size_t i = 0; i < dataset.examples.size(); ++i) {
    const auto& e = dataset.examples[i];
    cells[{e.y, e.z}].push_back(i);
  }

  // Split sizes come from the whole dataset (exact when fractions are);
  // cells then take floor(f * n_cell) each and the cell leftovers are
  // granted toward the parts still short of their global target, keeping
  // every cell within one example of proportional.
  const int n_total = static_cast<int>(dataset.examples.size());
  const std::array<int, 3> targets = proportional_allocation(n_total, fractions);

  struct CellPlan {
    std::vector<size_t> members;
    std::array<int, 3> alloc;
    std::array<double, 3> frac;
    int leftover;
  };
  std::vector<CellPlan> plans;
  std::array<int, 3> deficits = targets;
  for (auto& [key, members] : cells) {
    CellPlan plan;
    plan.members = std::move(members);
    const int n_cell = static_cast<int>(plan.members.size());
    plan.leftover = n_cell;
    for (int t = 0; t < 3; ++t) {
      const double exact = fractions[t] * n_cell;
      plan.alloc[t] = static_cast<int>(std::floor(exact + 1e-12));
      plan.frac[t] = exact - plan.alloc[t];
      plan.leftover -= plan.alloc[t];
      deficits[t] -= plan.alloc[t];
    }
    plans.push_back(std::move(plan));
  }
  for (auto& plan : plans) {
    for (int grant = 0; grant < plan.leftover; ++grant) {
      int pick = -1;
      for (int t = 0; t < 3; ++t) {
        if (deficits[t] <= 0 || plan.frac[t] <= 0.0) continue;
        if (pick < 0 || deficits[t] > deficits[pick] ||
            (deficits[t] == deficits[pick] && plan.frac[t] > plan.frac[pick])) {
          pick = t;
        }
      }
      if (pick < 0) {
        // No capped choice left; take the largest remaining deficit.
        pick = 0;
        for (int t = 1; t < 3; ++t) {
          if (deficits[t] > deficits[pick]) pick = t;
        }
      }
      ++plan.alloc[pick];
      plan.frac[pick] = 0.0;
      --deficits[pick];
    }
  }

  SplitResult out;
  Dataset* parts[3] = {&out.train, &out.val, &out.test};
  for (Dataset* part : parts) {
    part->class_count = dataset.class_count;
    part->gamma = dataset.gamma;
    part->structure_tag = dataset.structure_tag;
  }
  util::Rng rng(seed);
  uint64_t cell_id = 0;
  for (auto& plan : plans) {
    util::Rng cell_rng = rng.fork(++cell_id);
    cell_rng.shuffle(plan.members);
    size_t cursor = 0;
    for (int t = 0; t < 3; ++t) {
      for (int k = 0; k < plan.alloc[t]; ++k) {
        parts[t]->examples.push_back(dataset.examples[plan.members[cursor++]]);
      }
    }
  }
  return out;
}

std::string example_to_jsonl(const LabeledExample& e) {
  nlohmann::json j;
  j["id"] = e.id;
  j["tokens"] = e.tokens;
  j["y"] = e.y;
  j["z"] = e.z;
  if (e.counterfactual_of.has_value()) {
    j["counterfactual_of"] = *e.counterfactual_of;
  } else {
    j["counterfactual_of"] = nullptr;
  }
  return j.dump();
}

LabeledExample example_from_jsonl(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  LabeledExample e;
  e.id = j.at("id").get<int64_t>();
  e.tokens = j.at("tokens").get<std::vector<std::string>>();
  e.y = j.at("y").get<int>();
  e.z = j.at("z").get<int>();
  if (j.contains("counterfactual_of") && !j.at("counterfactual_of").is_null()) {
    e.counterfactual_of = j.at("counterfactual_of").get<int64_t>();
  }
  return e;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("save_dataset: cannot open " + path);
  for (const auto& e : dataset.examples) {
    out << example_to_jsonl(e) << "\n";
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("load_dataset: cannot open " + path);
  Dataset out;
  int max_y = 1;
  std::string line;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    out.examples.push_back(example_from_jsonl(line));
    max_y = std::max(max_y, out.examples.back().y);
  }
  out.class_count = max_y + 1;
  return out;
}

void save_raw_reviews(const std::vector<RawReview>& raws, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("save_raw_reviews: cannot open " + path);
  for (const auto& r : raws) {
    nlohmann::json j;
    j["tokens"] = r.tokens;
    j["stars"] = r.stars;
    j["helpful_votes"] = r.helpful_votes;
    j["category_tags"] = r.category_tags;
    out << j.dump() << "\n";
  }
}

std::vector<RawReview> load_raw_reviews(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("load_raw_reviews: cannot open " + path);
  std::vector<RawReview> out;
  std::string line;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    RawReview r;
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.stars = j.at("stars").get<int>();
    r.helpful_votes = j.at("helpful_votes").get<int>();
    if (j.contains("category_tags")) {
      r.category_tags = j.at("category_tags").get<std::vector<std::string>>();
    }
    if (r.stars < 1 || r.stars > 5) {
      throw ValidationError("load_raw_reviews: stars out of [1,5]");
    }
    if (r.helpful_votes < 0) {
      throw ValidationError("load_raw_reviews: negative helpful_votes");
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

const std::vector<std::string>& function_words() {
  // "the" and "and" are repeated to keep the trigger tokens frequent.
  static const std::vector<std::string> words = {
      "the", "the", "the", "and", "and", "a",  "to",   "it",
      "of",  "for", "in",  "on",  "with", "is", "this", "my"};
  return words;
}

const std::vector<std::string>& neutral_words() {
  static const std::vector<std::string> words = {
      "shoes",  "boots",   "shirt", "jacket", "dress",  "jeans",  "socks",
      "fit",    "size",    "color", "fabric", "zipper", "sole",   "heel",
      "price",  "order",   "pair",  "wear",   "store",  "brand",  "laces",
      "seam",   "pocket",  "strap", "buckle", "width",  "length", "wash"};
  return words;
}

const std::vector<std::string>& positive_adjectives() {
  static const std::vector<std::string> words = {
      "great", "comfortable", "perfect", "lovely", "sturdy",
      "soft",  "excellent",   "nice",    "cozy",   "durable"};
  return words;
}

const std::vector<std::string>& negative_adjectives() {
  static const std::vector<std::string> words = {
      "bad",      "tight", "cheap", "flimsy", "scratchy",
      "awful",    "poor",  "loose", "faded",  "broken"};
  return words;
}

}  // namespace

std::vector<RawReview> generate_pseudo_reviews(int count, uint64_t seed,
                                               const PseudoReviewOptions& opts) {
  if (count < 0) throw ValidationError("generate_pseudo_reviews: negative count");
  util::Rng rng(seed);
  std::vector<RawReview> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    RawReview r;
    const int length = opts.min_tokens + rng.below_int(opts.max_extra_tokens + 1);
    const bool has_sentiment = !rng.bernoulli(opts.no_sentiment_fraction);
    const double sentiment = has_sentiment ? rng.uniform(-1.0, 1.0) : 0.0;
    r.tokens.reserve(length);
    int pos_count = 0;
    int neg_count = 0;
    for (int t = 0; t < length; ++t) {
      const double roll = rng.uniform01();
      if (roll < 0.42 || !has_sentiment) {
        const auto& pool = roll < 0.5 ? function_words() : neutral_words();
        r.tokens.push_back(pool[rng.below(pool.size())]);
      } else if (roll < 0.80) {
        const auto& pool = neutral_words();
        r.tokens.push_back(pool[rng.below(pool.size())]);
      } else {
        const bool positive = rng.bernoulli((sentiment + 1.0) / 2.0);
        const auto& pool = positive ? positive_adjectives() : negative_adjectives();
        r.tokens.push_back(pool[rng.below(pool.size())]);
        (positive ? pos_count : neg_count) += 1;
      }
    }
    const double signal = has_sentiment
                              ? 1.1 * (pos_count - neg_count)
                              : 0.0;
    const double noise = opts.star_noise * (rng.uniform(-1.0, 1.0) + rng.uniform(-1.0, 1.0));
    const double raw_stars = 3.0 + signal + noise + (has_sentiment ? 0.6 * sentiment : 0.0);
    r.stars = std::clamp(static_cast<int>(std::lround(raw_stars)), 1, 5);
    if (rng.bernoulli(0.35)) {
      r.helpful_votes = 0;
    } else {
      const double u = rng.uniform01();
      r.helpful_votes = 1 + static_cast<int>(std::min(40.0, -std::log(1.0 - u) * 2.2 +
                                                                0.08 * length));
    }
    r.category_tags.push_back(rng.bernoulli(0.5) ? "clothing" : "shoes");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace corpus
}  // namespace ctfinv
