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

#ifndef CTFINV_SCM_SUITES_HPP_
#define CTFINV_SCM_SUITES_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ctfinv/scm.hpp"

namespace ctfinv {
namespace scm {

// Exhaustive-enumeration verification of the independence signatures,
// the invariance/measurability equivalence, the transfer guarantee, and
// the minimax comparison, each over seeded random model populations.

struct SuiteResult {
  std::string name;
  bool pass = true;
  int cases_run = 0;
  std::string detail;
  std::string witness_json;  // failing model, empty on pass
};

enum class SignatureCase {
  anticausal,                // I(f(X); Z | Y) vanishes
  causal_confounded,         // I(f(X); Z) vanishes
  causal_selected_spurious,  // I(f(X); Z | Y) vanishes
};

// For each random model: every x_perp_z-measurable binary predictor must
// have the designated mutual information below 1e-9, and some
// non-measurable witness predictor must exceed 1e-3.
SuiteResult run_signature_suite(SignatureCase which, int n_scms, uint64_t seed);

// Counterfactual invariance coincides with x_perp_z-measurability for
// all 2^8 binary predictor tables on random 2x2x2 models.
SuiteResult run_decomposition_suite(int n_scms, uint64_t seed);

enum class TransferCondition {
  anticausal,
  causal_selected_spurious,
  causal_confounded_additive,
};

// Invariant risk minimizers agree pointwise within 1e-9 across each
// compatible family.
SuiteResult run_transfer_suite(TransferCondition which, int n_families,
                               uint64_t seed);

// The two constructions where the invariant minimizer is beaten by a
// predictor that uses x_yz in every compatible domain.
SuiteResult run_minimax_counterexample_suite();

// Purely spurious models with overlap: the minimax predictor coincides
// with the invariant risk minimizer within grid resolution 1e-3.
SuiteResult run_minimax_overlap_suite(int n_instances, uint64_t seed);

struct OracleReport {
  std::vector<SuiteResult> suites;

  bool all_pass() const;
  std::string to_json() const;
};

struct OracleCounts {
  int signature_per_case = 50;
  int decomposition = 20;
  int transfer_per_condition = 20;
  int overlap = 10;
};

OracleReport run_all_suites(uint64_t seed, const OracleCounts& counts);

}  // namespace scm
}  // namespace ctfinv

#endif  // CTFINV_SCM_SUITES_HPP_
