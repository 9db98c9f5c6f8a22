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

#ifndef CTFINV_SCM_HPP_
#define CTFINV_SCM_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctfinv/corpus.hpp"
#include "ctfinv/util.hpp"

namespace ctfinv {
namespace scm {

// Small discrete structural causal models over six variables:
//   u  - unobserved confounder (influences y and z only)
//   z  - the covariate predictions should be invariant to
//   a  - the input component not causally influenced by z   (x_perp_z)
//   m  - the component entangled with both y and z          (x_yz)
//   w  - the component with no causal tie to y              (x_perp_y)
//   y  - the label
// The observed input is the triple x = (a, m, w).
//
// causal direction:      z -> m, z -> w, m -> y, m -> w, a -> y, a -> m
// anticausal direction:  y -> a, y -> m, z -> m, z -> w, a -> m, w -> m
// Either direction may add confounding (u -> y, u -> z) and/or selection
// on an event S with P(S=1 | y, z).

enum class Direction { causal, anticausal };

// How counterfactual worlds share randomness. shared_inverse_cdf couples
// each mechanism across worlds through one uniform exogenous variable and
// the inverse CDF over the outcome order, making counterfactuals well
// defined for every conditional table.
enum class Coupling { unspecified, shared_inverse_cdf };

struct Spaces {
  int u = 1;
  int z = 2;
  int x_perp_z = 2;
  int x_yz = 2;
  int x_perp_y = 2;
  int y = 2;

  int x_count() const { return x_perp_z * x_yz * x_perp_y; }
  int x_index(int a, int m, int w) const { return (a * x_yz + m) * x_perp_y + w; }
  void x_unpack(int x, int& a, int& m, int& w) const {
    w = x % x_perp_y;
    m = (x / x_perp_y) % x_yz;
    a = x / (x_perp_y * x_yz);
  }
};

// Conditional probability table: one distribution over `value_count`
// outcomes per combination of parent values (row-major over parents).
class CondTable {
 public:
  CondTable() = default;
  CondTable(std::vector<int> parent_sizes, int value_count,
            std::vector<double> probs);

  int value_count() const { return value_count_; }
  int row_count() const { return row_count_; }
  const std::vector<int>& parent_sizes() const { return parent_sizes_; }

  int row_index(const std::vector<int>& parents) const;
  const double* row(int flat_row) const;
  const double* row(const std::vector<int>& parents) const {
    return row(row_index(parents));
  }

  // Every row must sum to 1 within 1e-12 with non-negative entries.
  void validate() const;

 private:
  std::vector<int> parent_sizes_;
  int value_count_ = 0;
  int row_count_ = 0;
  std::vector<double> probs_;
};

struct DiscreteSCM {
  Direction direction = Direction::anticausal;
  Spaces spaces;
  std::vector<double> confounder_prior;  // over u
  CondTable z_given_u;    // parents {u}
  CondTable x_perp_z;     // causal: {}        anticausal: {y}
  CondTable x_yz;         // causal: {z, a}    anticausal: {y, z, a, w}
  CondTable x_perp_y;     // causal: {z, m}    anticausal: {z}
  CondTable y_table;      // causal: {m, a, u} anticausal: {u}
  // P(S=1 | y, z), flattened y * spaces.z + z. Absent means no selection.
  std::optional<std::vector<double>> selection;
  // Numeric value of each y outcome (class index when defaulted).
  std::vector<double> y_values;
  Coupling coupling = Coupling::shared_inverse_cdf;

  void validate() const;
  double y_value(int y) const {
    return y_values.empty() ? static_cast<double>(y) : y_values[y];
  }
};

// Dense joint over (u, z, a, m, w, y), normalized.
struct Joint {
  Spaces spaces;
  std::vector<double> p;

  size_t index(int u, int z, int a, int m, int w, int y) const {
    return ((((static_cast<size_t>(u) * spaces.z + z) * spaces.x_perp_z + a) *
                 spaces.x_yz +
             m) *
                spaces.x_perp_y +
            w) *
               spaces.y +
           y;
  }
  double at(int u, int z, int a, int m, int w, int y) const {
    return p[index(u, z, a, m, w, y)];
  }
};

// Product of the graph's factors, conditioned on S=1 when selection is
// present, renormalized. Throws when selection removes all mass.
Joint enumerate_joint(const DiscreteSCM& scm);

// Real-valued prediction per x value (indexed by Spaces::x_index).
struct PredictorTable {
  std::vector<double> values;

  static PredictorTable from_x_perp_z(const Spaces& spaces,
                                      const std::vector<double>& per_a);
  static PredictorTable from_binary_mask(const Spaces& spaces, uint32_t mask);
};

struct SignatureResult {
  double mi_marginal = 0.0;     // I(f(X); Z), nats
  double mi_conditional = 0.0;  // I(f(X); Z | Y), nats
};

// Mutual informations of the predictor output with z, marginally and
// conditional on y, computed exactly from the enumerated joint.
SignatureResult check_signature(const DiscreteSCM& scm,
                                const PredictorTable& predictor);

// Distribution over ordered pairs (x in the do(Z=z1) world, x in the
// do(Z=z2) world) under the shared-inverse-CDF coupling.
struct TwinJoint {
  Spaces spaces;
  std::vector<double> p;  // x_count^2, row-major (x1, x2)

  double at(int x1, int x2) const {
    return p[static_cast<size_t>(x1) * spaces.x_count() + x2];
  }
};

TwinJoint twin_joint_under_do(const DiscreteSCM& scm, int z1, int z2);

// Probability that the predictor differs between the do(Z=z1) and
// do(Z=z2) counterfactual worlds.
double flip_probability(const DiscreteSCM& scm, const PredictorTable& predictor,
                        int z1, int z2);

// Maximum flip probability over ordered pairs z1 != z2.
double max_flip_probability(const DiscreteSCM& scm, const PredictorTable& predictor);

struct DecompositionResult {
  // Counterfactual invariance coincides with x_perp_z-measurability for
  // every binary predictor table.
  bool equivalence_holds = false;
  int invariant_count = 0;
  int measurable_count = 0;
  // Connected components of the twin-coupling graph over supported x
  // values: the maximal counterfactually-stable decomposition.
  std::vector<int> component_of;  // per x; -1 when unsupported
  bool components_match_coordinate = false;
};

// Enumerates all binary predictor tables (requires x_count <= 16) and
// checks invariance (by flip test) against measurability in the
// x_perp_z coordinate on supported values.
DecompositionResult decomposition_check(const DiscreteSCM& scm);

enum class Loss { squared, cross_entropy };

// Invariant risk minimizer: per supported x_perp_z value, E[Y | a] under
// squared loss or P(Y | a) under cross entropy.
struct InvariantMinimizer {
  Loss loss = Loss::squared;
  std::vector<bool> supported;                    // per a
  std::vector<double> mean_per_a;                 // squared loss
  std::vector<std::vector<double>> dist_per_a;    // cross entropy
};

InvariantMinimizer invariant_risk_minimizer(const DiscreteSCM& scm, Loss loss);

// Expected losses of a scalar predictor table under the joint. The
// cross-entropy form requires binary y and values in [0, 1] read as
// P(Y=1 | x); zero-probability terms contribute nothing.
double risk_squared(const Joint& joint, const std::vector<double>& y_values,
                    const PredictorTable& predictor);
double risk_binary_ce(const Joint& joint, const PredictorTable& predictor);

// A family member: the base model with an alternative confounder prior
// and/or selection rule.
struct ScmVariant {
  std::string label;
  std::optional<std::vector<double>> confounder_prior;
  std::optional<std::vector<double>> selection;
};

struct CompatFamily {
  DiscreteSCM base;
  std::vector<ScmVariant> members;
};

DiscreteSCM apply_variant(const DiscreteSCM& base, const ScmVariant& variant);

struct TransferMemberReport {
  std::string label;
  double y_marginal_gap = 0.0;
  double max_abs_deviation = 0.0;  // f* deviation on commonly supported a
};

struct TransferReport {
  std::vector<TransferMemberReport> members;
  double worst_deviation = 0.0;
};

// Recomputes the invariant risk minimizer under every member and reports
// the pointwise deviation from the base minimizer. Throws when a member
// fails causal compatibility (unequal Y marginals).
TransferReport verify_transfer(const CompatFamily& family, Loss loss);

enum class MinimaxVerdict { not_minimax, minimax_coincides, inconclusive };

struct MinimaxReport {
  std::vector<double> invariant_risk_profile;  // per member, base first
  double invariant_worst = 0.0;
  double best_alternative_worst = 0.0;  // achievable worst-case risk found
  double lower_bound = 0.0;             // certified bound on min_f max_Q
  MinimaxVerdict verdict = MinimaxVerdict::inconclusive;
};

// Compares the invariant risk minimizer's worst-case risk over the
// family against the best predictor found by closed-form candidates, a
// mixture certificate, and (for x_count <= 2) a dense grid search.
MinimaxReport minimax_check(const CompatFamily& family, Loss loss,
                            double resolution = 1e-3);

// I(Y; (m, w) | a, z) in nats; zero iff the y-z association is purely
// spurious (y independent of x given x_perp_z and z).
double purely_spurious_mi(const Joint& joint);
bool purely_spurious_check(const DiscreteSCM& scm);

// Seeded draws from the joint encoded as token lists. The encoder must
// be injective over x values; y and z are copied from the draw.
corpus::Dataset sample_corpus_from_scm(
    const DiscreteSCM& scm,
    const std::function<std::vector<std::string>(int a, int m, int w)>& encoder,
    int n, uint64_t seed);

// --- Additive causal models ----------------------------------------------

// Causal-direction mechanism with real-valued y built as
// y = g(a) + g_tilde(u) + noise, where the noise has conditional mean
// zero given a. The y space enumerates the distinct attainable sums.
struct AdditiveSpec {
  std::vector<double> g;         // indexed by a
  std::vector<double> g_tilde;   // indexed by u
  std::vector<double> noise_values;
  std::vector<std::vector<double>> noise_probs;  // one row per a, mean zero
};

struct AdditiveSCM {
  DiscreteSCM scm;
  AdditiveSpec spec;
};

// Assembles the y space and table from the additive mechanism. The
// resulting model is purely spurious by construction (y ignores x_yz).
// Throws when a noise row's mean exceeds 1e-12 in magnitude.
AdditiveSCM assemble_additive_scm(const Spaces& spaces_without_y,
                                  const AdditiveSpec& spec,
                                  const std::vector<double>& confounder_prior,
                                  const CondTable& z_given_u,
                                  const CondTable& x_perp_z,
                                  const CondTable& x_yz,
                                  const CondTable& x_perp_y);

// Random additive model with a repeated g_tilde value across two
// confounder states, so prior shifts that preserve the Y marginal exist.
AdditiveSCM random_additive_scm(util::Rng& rng);

// --- Random generation -------------------------------------------------

struct ScmGenOptions {
  Direction direction = Direction::anticausal;
  bool confounding = true;
  bool selection = false;
  bool purely_spurious = false;
  Spaces spaces;
};

// Random conditional tables with rows drawn as normalized uniform
// positives. Purely-spurious draws make the y mechanism ignore x_yz
// (causal) or the x_yz mechanism ignore y (anticausal).
DiscreteSCM random_scm(const ScmGenOptions& options, util::Rng& rng);

// Basis of { v : C v = 0, sum(v) = 0 } by Gaussian elimination.
std::vector<std::vector<double>> nullspace_zero_sum(
    int rows, int cols, const std::vector<double>& c_row_major);

// Alternative confounder priors preserving the observed Y marginal
// exactly; empty when the base admits none.
std::vector<ScmVariant> prior_variants(const DiscreteSCM& base, int max_count);

// Alternative selection rules preserving the observed Y marginal, built
// from random target shapes rescaled per y value.
std::vector<ScmVariant> selection_variants(const DiscreteSCM& base, int count,
                                           util::Rng& rng);

// Selection rule making Y and Z exactly independent while preserving the
// Y marginal; requires full pre-selection (y, z) support.
ScmVariant independence_selection_variant(const DiscreteSCM& base);

std::string scm_to_json(const DiscreteSCM& scm);

}  // namespace scm
}  // namespace ctfinv

#endif  // CTFINV_SCM_HPP_
