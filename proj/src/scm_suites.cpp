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

#include "ctfinv/scm_suites.hpp"

#include <cmath>
#include <sstream>

#include "ctfinv/util.hpp"
#include "json.hpp"

namespace ctfinv {
namespace scm {

namespace {

constexpr double kMiZeroTolerance = 1e-9;
constexpr double kWitnessFloor = 1e-3;
constexpr int kMaxDrawAttempts = 400;

// Predictor reading one x component directly.
PredictorTable predictor_from_x_yz(const Spaces& sp) {
  PredictorTable t;
  t.values.resize(sp.x_count());
  for (int a = 0; a < sp.x_perp_z; ++a)
    for (int m = 0; m < sp.x_yz; ++m)
      for (int w = 0; w < sp.x_perp_y; ++w)
        t.values[sp.x_index(a, m, w)] = static_cast<double>(m);
  return t;
}

PredictorTable predictor_from_x_perp_y(const Spaces& sp) {
  PredictorTable t;
  t.values.resize(sp.x_count());
  for (int a = 0; a < sp.x_perp_z; ++a)
    for (int m = 0; m < sp.x_yz; ++m)
      for (int w = 0; w < sp.x_perp_y; ++w)
        t.values[sp.x_index(a, m, w)] = static_cast<double>(w);
  return t;
}

PredictorTable predictor_mw_parity(const Spaces& sp) {
  PredictorTable t;
  t.values.resize(sp.x_count());
  for (int a = 0; a < sp.x_perp_z; ++a)
    for (int m = 0; m < sp.x_yz; ++m)
      for (int w = 0; w < sp.x_perp_y; ++w)
        t.values[sp.x_index(a, m, w)] = static_cast<double>((m + w) % 2);
  return t;
}

double designated_mi(SignatureCase which, const SignatureResult& sig) {
  return which == SignatureCase::causal_confounded ? sig.mi_marginal
                                                   : sig.mi_conditional;
}

ScmGenOptions signature_options(SignatureCase which, int case_index) {
  ScmGenOptions opts;
  switch (which) {
    case SignatureCase::anticausal:
      opts.direction = Direction::anticausal;
      // Rotate the source of the y-z association.
      opts.confounding = case_index % 3 != 1;
      opts.selection = case_index % 3 != 0;
      opts.purely_spurious = false;
      break;
    case SignatureCase::causal_confounded:
      opts.direction = Direction::causal;
      opts.confounding = true;
      opts.selection = false;
      opts.purely_spurious = false;
      break;
    case SignatureCase::causal_selected_spurious:
      opts.direction = Direction::causal;
      opts.confounding = false;
      opts.selection = true;
      opts.purely_spurious = true;
      break;
  }
  opts.spaces.u = opts.confounding ? 3 : 1;
  return opts;
}

std::string suite_name(SignatureCase which) {
  switch (which) {
    case SignatureCase::anticausal: return "signature_anticausal";
    case SignatureCase::causal_confounded: return "signature_causal_confounded";
    case SignatureCase::causal_selected_spurious:
      return "signature_causal_selected_spurious";
  }
  return "signature";
}

}  // namespace

SuiteResult run_signature_suite(SignatureCase which, int n_scms, uint64_t seed) {
  SuiteResult result;
  result.name = suite_name(which);
  util::Rng rng(seed);
  double worst_measurable_mi = 0.0;
  double weakest_witness = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_scms; ++i) {
    util::Rng case_rng = rng.fork(i + 1);
    bool have_scm = false;
    DiscreteSCM model;
    double witness_mi = 0.0;
    for (int attempt = 0; attempt < kMaxDrawAttempts && !have_scm; ++attempt) {
      const ScmGenOptions opts = signature_options(which, i);
      DiscreteSCM candidate = random_scm(opts, case_rng);
      // Non-vacuousness: some non-measurable predictor must carry
      // dependence; redraw models whose association is too weak to
      // witness.
      double best = 0.0;
      for (const PredictorTable& f :
           {predictor_from_x_perp_y(candidate.spaces),
            predictor_from_x_yz(candidate.spaces),
            predictor_mw_parity(candidate.spaces)}) {
        best = std::max(best, designated_mi(which, check_signature(candidate, f)));
      }
      if (best > kWitnessFloor) {
        model = std::move(candidate);
        witness_mi = best;
        have_scm = true;
      }
    }
    if (!have_scm) {
      result.pass = false;
      result.detail = "could not draw a model with a strong witness";
      return result;
    }
    // The theorem side: every x_perp_z-measurable predictor.
    const uint32_t masks = 1u << model.spaces.x_perp_z;
    for (uint32_t mask = 0; mask < masks; ++mask) {
      std::vector<double> per_a(model.spaces.x_perp_z);
      for (int a = 0; a < model.spaces.x_perp_z; ++a) {
        per_a[a] = (mask >> a) & 1u ? 1.0 : 0.0;
      }
      const PredictorTable f = PredictorTable::from_x_perp_z(model.spaces, per_a);
      const double mi = designated_mi(which, check_signature(model, f));
      worst_measurable_mi = std::max(worst_measurable_mi, mi);
      if (mi >= kMiZeroTolerance) {
        result.pass = false;
        result.detail = "measurable predictor with designated MI " +
                        util::format_double(mi);
        result.witness_json = scm_to_json(model);
        return result;
      }
    }
    weakest_witness = std::min(weakest_witness, witness_mi);
    ++result.cases_run;
  }
  result.detail = "max measurable MI " + util::format_double(worst_measurable_mi) +
                  ", min witness MI " + util::format_double(weakest_witness);
  return result;
}

SuiteResult run_decomposition_suite(int n_scms, uint64_t seed) {
  SuiteResult result;
  result.name = "decomposition_equivalence";
  util::Rng rng(seed);
  for (int i = 0; i < n_scms; ++i) {
    util::Rng case_rng = rng.fork(i + 1);
    bool have_scm = false;
    for (int attempt = 0; attempt < kMaxDrawAttempts && !have_scm; ++attempt) {
      ScmGenOptions opts;
      opts.direction = i % 2 == 0 ? Direction::anticausal : Direction::causal;
      opts.confounding = i % 3 != 1;
      opts.selection = i % 3 == 1;
      opts.spaces.u = opts.confounding ? 2 : 1;
      const DiscreteSCM model = random_scm(opts, case_rng);
      const DecompositionResult dec = decomposition_check(model);
      if (!dec.components_match_coordinate) {
        // The model's stable decomposition is coarser than the declared
        // coordinate (e.g. z barely moves a component); redraw.
        continue;
      }
      if (!dec.equivalence_holds) {
        result.pass = false;
        result.detail = "invariance and measurability disagree on some table";
        result.witness_json = scm_to_json(model);
        return result;
      }
      have_scm = true;
    }
    if (!have_scm) {
      result.pass = false;
      result.detail = "could not draw a model whose stable decomposition "
                      "matches the x_perp_z coordinate";
      return result;
    }
    ++result.cases_run;
  }
  result.detail = "equivalence held for all 256 tables on every model";
  return result;
}

namespace {

CompatFamily transfer_family(TransferCondition which, int case_index,
                             util::Rng& rng) {
  CompatFamily family;
  switch (which) {
    case TransferCondition::anticausal: {
      ScmGenOptions opts;
      opts.direction = Direction::anticausal;
      opts.confounding = true;
      opts.selection = case_index % 2 == 1;
      opts.spaces.u = 3;
      family.base = random_scm(opts, rng);
      for (auto& v : prior_variants(family.base, 2)) family.members.push_back(v);
      util::Rng sel_rng = rng.fork(77);
      for (auto& v : selection_variants(family.base, 2, sel_rng)) {
        family.members.push_back(v);
      }
      break;
    }
    case TransferCondition::causal_selected_spurious: {
      ScmGenOptions opts;
      opts.direction = Direction::causal;
      opts.confounding = false;
      opts.selection = true;
      opts.purely_spurious = true;
      family.base = random_scm(opts, rng);
      util::Rng sel_rng = rng.fork(78);
      for (auto& v : selection_variants(family.base, 3, sel_rng)) {
        family.members.push_back(v);
      }
      break;
    }
    case TransferCondition::causal_confounded_additive: {
      family.base = random_additive_scm(rng).scm;
      for (auto& v : prior_variants(family.base, 3)) family.members.push_back(v);
      break;
    }
  }
  return family;
}

std::string transfer_name(TransferCondition which) {
  switch (which) {
    case TransferCondition::anticausal: return "transfer_anticausal";
    case TransferCondition::causal_selected_spurious:
      return "transfer_causal_selected";
    case TransferCondition::causal_confounded_additive:
      return "transfer_causal_confounded_additive";
  }
  return "transfer";
}

}  // namespace

SuiteResult run_transfer_suite(TransferCondition which, int n_families,
                               uint64_t seed) {
  SuiteResult result;
  result.name = transfer_name(which);
  util::Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < n_families; ++i) {
    util::Rng case_rng = rng.fork(i + 1);
    CompatFamily family;
    bool have_family = false;
    for (int attempt = 0; attempt < kMaxDrawAttempts && !have_family; ++attempt) {
      family = transfer_family(which, i, case_rng);
      have_family = !family.members.empty();
    }
    if (!have_family) {
      result.pass = false;
      result.detail = "could not build a compatible family";
      return result;
    }
    // Real-valued additive models use squared loss; the discrete cases
    // alternate between both losses.
    const Loss loss = which == TransferCondition::causal_confounded_additive
                          ? Loss::squared
                          : (i % 2 == 0 ? Loss::squared : Loss::cross_entropy);
    const TransferReport report = verify_transfer(family, loss);
    worst = std::max(worst, report.worst_deviation);
    if (report.worst_deviation >= 1e-9) {
      result.pass = false;
      result.detail = "invariant minimizers deviate by " +
                      util::format_double(report.worst_deviation);
      result.witness_json = scm_to_json(family.base);
      return result;
    }
    result.cases_run += static_cast<int>(family.members.size());
  }
  result.detail = "worst pointwise deviation " + util::format_double(worst);
  return result;
}

namespace {

// Anticausal model with x = x_yz = AND(y, z): the invariant predictor is
// a constant, yet reading x is better in every compatible domain.
CompatFamily and_counterexample_family() {
  DiscreteSCM s;
  s.direction = Direction::anticausal;
  s.spaces = Spaces{1, 2, 1, 2, 1, 2};
  s.confounder_prior = {1.0};
  s.z_given_u = CondTable({1}, 2, {0.5, 0.5});
  s.y_table = CondTable({1}, 2, {0.5, 0.5});
  s.x_perp_z = CondTable({2}, 1, {1.0, 1.0});
  s.x_perp_y = CondTable({2}, 1, {1.0, 1.0});
  // m = AND(y, z), parents (y, z, a, w).
  std::vector<double> m_rows;
  for (int y = 0; y < 2; ++y)
    for (int z = 0; z < 2; ++z) {
      const int m = (y == 1 && z == 1) ? 1 : 0;
      m_rows.push_back(m == 0 ? 1.0 : 0.0);
      m_rows.push_back(m == 1 ? 1.0 : 0.0);
    }
  s.x_yz = CondTable({2, 2, 1, 1}, 2, m_rows);
  s.validate();

  CompatFamily family;
  family.base = s;
  // Selection members sweep the strength of the y-z association while
  // preserving the marginals; the pre-selection joint is uniform.
  for (const double diag : {0.15, 0.35, 0.45}) {
    ScmVariant v;
    v.label = "joint_diag_" + util::format_double(diag);
    // Target joint: P(y=z) mass split as diag per diagonal cell.
    std::vector<double> sel = {diag, 0.5 - diag, 0.5 - diag, diag};
    const double peak = *std::max_element(sel.begin(), sel.end());
    for (double& x : sel) x /= peak;
    v.selection = sel;
    family.members.push_back(v);
  }
  return family;
}

// Causal model with x_yz = z and y = x_yz: every compatible domain equals
// the base, and reading x is exactly right while constants are not.
CompatFamily causal_counterexample_family() {
  DiscreteSCM s;
  s.direction = Direction::causal;
  s.spaces = Spaces{1, 2, 1, 2, 1, 2};
  s.confounder_prior = {1.0};
  s.z_given_u = CondTable({1}, 2, {0.5, 0.5});
  s.x_perp_z = CondTable({}, 1, {1.0});
  // m = z, parents (z, a).
  s.x_yz = CondTable({2, 1}, 2, {1.0, 0.0, 0.0, 1.0});
  s.x_perp_y = CondTable({2, 2}, 1, {1.0, 1.0, 1.0, 1.0});
  // y = m, parents (m, a, u).
  s.y_table = CondTable({2, 1, 1}, 2, {1.0, 0.0, 0.0, 1.0});
  s.validate();

  CompatFamily family;
  family.base = s;
  ScmVariant same;
  same.label = "identical_domain";
  same.confounder_prior = s.confounder_prior;
  family.members.push_back(same);
  return family;
}

}  // namespace

SuiteResult run_minimax_counterexample_suite() {
  SuiteResult result;
  result.name = "minimax_counterexamples";
  {
    const CompatFamily family = and_counterexample_family();
    const MinimaxReport report = minimax_check(family, Loss::cross_entropy);
    if (report.verdict != MinimaxVerdict::not_minimax) {
      result.pass = false;
      result.detail = "AND construction not flagged as not_minimax";
      result.witness_json = scm_to_json(family.base);
      return result;
    }
    // The x-reading rule beats the constant in every member, not just in
    // the worst case.
    const Spaces& sp = family.base.spaces;
    std::vector<DiscreteSCM> members{family.base};
    for (const auto& v : family.members) {
      members.push_back(apply_variant(family.base, v));
    }
    const Joint base_joint = enumerate_joint(family.base);
    double py1_x0 = 0.0;
    double px0 = 0.0;
    for (int z = 0; z < 2; ++z)
      for (int y = 0; y < 2; ++y) {
        const double p = base_joint.at(0, z, 0, 0, 0, y);
        px0 += p;
        if (y == 1) py1_x0 += p;
      }
    PredictorTable read_x;
    read_x.values.resize(sp.x_count());
    read_x.values[sp.x_index(0, 0, 0)] = py1_x0 / px0;
    read_x.values[sp.x_index(0, 1, 0)] = 1.0;
    const PredictorTable constant = PredictorTable::from_x_perp_z(sp, {0.5});
    for (const auto& member : members) {
      const Joint joint = enumerate_joint(member);
      if (risk_binary_ce(joint, read_x) >= risk_binary_ce(joint, constant)) {
        result.pass = false;
        result.detail = "x-reading rule failed to beat the constant in a member";
        result.witness_json = scm_to_json(member);
        return result;
      }
    }
    result.cases_run += static_cast<int>(members.size());
  }
  {
    const CompatFamily family = causal_counterexample_family();
    const MinimaxReport report = minimax_check(family, Loss::squared);
    if (report.verdict != MinimaxVerdict::not_minimax) {
      result.pass = false;
      result.detail = "x_yz=z construction not flagged as not_minimax";
      result.witness_json = scm_to_json(family.base);
      return result;
    }
    const MinimaxReport ce_report = minimax_check(family, Loss::cross_entropy);
    if (ce_report.verdict != MinimaxVerdict::not_minimax) {
      result.pass = false;
      result.detail = "x_yz=z construction not flagged under cross entropy";
      result.witness_json = scm_to_json(family.base);
      return result;
    }
    result.cases_run += 2;
  }
  result.detail = "both constructions verdict not_minimax";
  return result;
}

SuiteResult run_minimax_overlap_suite(int n_instances, uint64_t seed) {
  SuiteResult result;
  result.name = "minimax_overlap_coincidence";
  util::Rng rng(seed);
  for (int i = 0; i < n_instances; ++i) {
    util::Rng case_rng = rng.fork(i + 1);
    ScmGenOptions opts;
    opts.direction = Direction::anticausal;
    opts.confounding = true;
    opts.selection = false;
    opts.purely_spurious = true;
    opts.spaces.u = 3;
    const DiscreteSCM model = random_scm(opts, case_rng);
    if (!purely_spurious_check(model)) {
      result.pass = false;
      result.detail = "generated model is not purely spurious";
      result.witness_json = scm_to_json(model);
      return result;
    }
    CompatFamily family;
    family.base = model;
    for (auto& v : prior_variants(model, 2)) family.members.push_back(v);
    util::Rng sel_rng = case_rng.fork(5);
    for (auto& v : selection_variants(model, 1, sel_rng)) {
      family.members.push_back(v);
    }
    family.members.push_back(independence_selection_variant(model));

    // Overlap: every member keeps both y values represented in each
    // positive-probability z column.
    for (size_t mi = 0; mi <= family.members.size(); ++mi) {
      const DiscreteSCM member =
          mi == 0 ? family.base : apply_variant(family.base, family.members[mi - 1]);
      const Joint joint = enumerate_joint(member);
      std::vector<double> yz(4, 0.0);
      const Spaces& sp = member.spaces;
      for (int u = 0; u < sp.u; ++u)
        for (int z = 0; z < 2; ++z)
          for (int a = 0; a < sp.x_perp_z; ++a)
            for (int m = 0; m < sp.x_yz; ++m)
              for (int w = 0; w < sp.x_perp_y; ++w)
                for (int y = 0; y < 2; ++y)
                  yz[static_cast<size_t>(y) * 2 + z] += joint.at(u, z, a, m, w, y);
      for (int z = 0; z < 2; ++z) {
        const bool has_mass = yz[z] > 0.0 || yz[2 + z] > 0.0;
        const bool overlap = yz[z] > 0.0 && yz[2 + z] > 0.0;
        if (has_mass && !overlap) {
          result.pass = false;
          result.detail = "member violates overlap";
          result.witness_json = scm_to_json(member);
          return result;
        }
      }
    }

    const Loss loss = i % 2 == 0 ? Loss::cross_entropy : Loss::squared;
    const MinimaxReport report = minimax_check(family, loss);
    if (report.verdict != MinimaxVerdict::minimax_coincides) {
      result.pass = false;
      result.detail = "verdict was not minimax_coincides (invariant worst " +
                      util::format_double(report.invariant_worst) +
                      ", lower bound " + util::format_double(report.lower_bound) +
                      ", best alternative " +
                      util::format_double(report.best_alternative_worst) + ")";
      result.witness_json = scm_to_json(model);
      return result;
    }
    ++result.cases_run;
  }
  result.detail = "minimax coincides with the invariant minimizer on every instance";
  return result;
}

bool OracleReport::all_pass() const {
  for (const auto& s : suites) {
    if (!s.pass) return false;
  }
  return true;
}

std::string OracleReport::to_json() const {
  nlohmann::json j;
  j["all_pass"] = all_pass();
  nlohmann::json suites_json = nlohmann::json::array();
  for (const auto& s : suites) {
    nlohmann::json sj;
    sj["name"] = s.name;
    sj["pass"] = s.pass;
    sj["cases_run"] = s.cases_run;
    sj["detail"] = s.detail;
    if (!s.witness_json.empty()) {
      sj["witness"] = nlohmann::json::parse(s.witness_json);
    }
    suites_json.push_back(sj);
  }
  j["suites"] = suites_json;
  return j.dump(2);
}

OracleReport run_all_suites(uint64_t seed, const OracleCounts& counts) {
  OracleReport report;
  util::Rng rng(seed);
  report.suites.push_back(run_signature_suite(
      SignatureCase::anticausal, counts.signature_per_case, rng.fork(1).next_u64()));
  report.suites.push_back(
      run_signature_suite(SignatureCase::causal_confounded,
                          counts.signature_per_case, rng.fork(2).next_u64()));
  report.suites.push_back(
      run_signature_suite(SignatureCase::causal_selected_spurious,
                          counts.signature_per_case, rng.fork(3).next_u64()));
  report.suites.push_back(
      run_decomposition_suite(counts.decomposition, rng.fork(4).next_u64()));
  report.suites.push_back(run_transfer_suite(
      TransferCondition::anticausal, counts.transfer_per_condition,
      rng.fork(5).next_u64()));
  report.suites.push_back(run_transfer_suite(
      TransferCondition::causal_selected_spurious, counts.transfer_per_condition,
      rng.fork(6).next_u64()));
  report.suites.push_back(run_transfer_suite(
      TransferCondition::causal_confounded_additive, counts.transfer_per_condition,
      rng.fork(7).next_u64()));
  if (counts.signature_per_case > 0 || counts.overlap > 0) {
    report.suites.push_back(run_minimax_counterexample_suite());
  }
  report.suites.push_back(
      run_minimax_overlap_suite(counts.overlap, rng.fork(8).next_u64()));
  return report;
}

}  // namespace scm
}  // namespace ctfinv
