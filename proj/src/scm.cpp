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

#include "ctfinv/scm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace ctfinv {
namespace scm {

namespace {

constexpr double kRowSumTolerance = 1e-12;

int product(const std::vector<int>& sizes) {
  int n = 1;
  for (int s : sizes) n *= s;
  return n;
}

}  // namespace

CondTable::CondTable(std::vector<int> parent_sizes, int value_count,
                     std::vector<double> probs)
    : parent_sizes_(std::move(parent_sizes)),
      value_count_(value_count),
      row_count_(product(parent_sizes_)),
      probs_(std::move(probs)) {
  if (value_count_ <= 0) {
    throw ValidationError("CondTable: value_count must be positive");
  }
  if (probs_.size() != static_cast<size_t>(row_count_) * value_count_) {
    throw ValidationError("CondTable: probability array size mismatch");
  }
  validate();
}

int CondTable::row_index(const std::vector<int>& parents) const {
  if (parents.size() != parent_sizes_.size()) {
    throw ValidationError("CondTable: parent arity mismatch");
  }
  int idx = 0;
  for (size_t i = 0; i < parents.size(); ++i) {
    if (parents[i] < 0 || parents[i] >= parent_sizes_[i]) {
      throw ValidationError("CondTable: parent value out of range");
    }
    idx = idx * parent_sizes_[i] + parents[i];
  }
  return idx;
}

const double* CondTable::row(int flat_row) const {
  if (flat_row < 0 || flat_row >= row_count_) {
    throw ValidationError("CondTable: row index out of range");
  }
  return probs_.data() + static_cast<size_t>(flat_row) * value_count_;
}

void CondTable::validate() const {
  for (int r = 0; r < row_count_; ++r) {
    const double* row_ptr = probs_.data() + static_cast<size_t>(r) * value_count_;
    double sum = 0.0;
    for (int v = 0; v < value_count_; ++v) {
      if (row_ptr[v] < 0.0) {
        throw ValidationError("CondTable: negative probability");
      }
      sum += row_ptr[v];
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw ValidationError("CondTable: row does not sum to 1");
    }
  }
}

void DiscreteSCM::validate() const {
  if (spaces.u < 1 || spaces.z < 2 || spaces.x_perp_z < 1 || spaces.x_yz < 1 ||
      spaces.x_perp_y < 1 || spaces.y < 2) {
    throw ValidationError("DiscreteSCM: invalid space sizes");
  }
  if (confounder_prior.size() != static_cast<size_t>(spaces.u)) {
    throw ValidationError("DiscreteSCM: confounder prior size mismatch");
  }
  double prior_sum = 0.0;
  for (double p : confounder_prior) {
    if (p < 0.0) throw ValidationError("DiscreteSCM: negative prior mass");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > kRowSumTolerance) {
    throw ValidationError("DiscreteSCM: confounder prior does not sum to 1");
  }
  auto expect = [](const CondTable& t, const std::vector<int>& parents, int values,
                   const char* name) {
    if (t.parent_sizes() != parents || t.value_count() != values) {
      throw ValidationError(std::string("DiscreteSCM: table shape mismatch for ") +
                            name);
    }
    t.validate();
  };
  expect(z_given_u, {spaces.u}, spaces.z, "z_given_u");
  if (direction == Direction::causal) {
    expect(x_perp_z, {}, spaces.x_perp_z, "x_perp_z");
    expect(x_yz, {spaces.z, spaces.x_perp_z}, spaces.x_yz, "x_yz");
    expect(x_perp_y, {spaces.z, spaces.x_yz}, spaces.x_perp_y, "x_perp_y");
    expect(y_table, {spaces.x_yz, spaces.x_perp_z, spaces.u}, spaces.y, "y_table");
  } else {
    expect(x_perp_z, {spaces.y}, spaces.x_perp_z, "x_perp_z");
    expect(x_yz, {spaces.y, spaces.z, spaces.x_perp_z, spaces.x_perp_y},
           spaces.x_yz, "x_yz");
    expect(x_perp_y, {spaces.z}, spaces.x_perp_y, "x_perp_y");
    expect(y_table, {spaces.u}, spaces.y, "y_table");
  }
  if (selection.has_value()) {
    if (selection->size() != static_cast<size_t>(spaces.y) * spaces.z) {
      throw ValidationError("DiscreteSCM: selection table size mismatch");
    }
    for (double s : *selection) {
      if (s < 0.0 || s > 1.0) {
        throw ValidationError("DiscreteSCM: selection probability outside [0,1]");
      }
    }
  }
  if (!y_values.empty() && y_values.size() != static_cast<size_t>(spaces.y)) {
    throw ValidationError("DiscreteSCM: y_values size mismatch");
  }
}

namespace {

// Product of all conditional factors except the confounder prior,
// including the selection weight.
double factor_product(const DiscreteSCM& s, int u, int z, int a, int m, int w,
                      int y) {
  double p = s.z_given_u.row(u)[z];
  if (s.direction == Direction::causal) {
    p *= s.x_perp_z.row(0)[a];
    p *= s.x_yz.row(std::vector<int>{z, a})[m];
    p *= s.x_perp_y.row(std::vector<int>{z, m})[w];
    p *= s.y_table.row(std::vector<int>{m, a, u})[y];
  } else {
    p *= s.y_table.row(u)[y];
    p *= s.x_perp_z.row(y)[a];
    p *= s.x_perp_y.row(z)[w];
    p *= s.x_yz.row(std::vector<int>{y, z, a, w})[m];
  }
  if (s.selection.has_value()) {
    p *= (*s.selection)[static_cast<size_t>(y) * s.spaces.z + z];
  }
  return p;
}

template <typename Fn>
void for_each_state(const Spaces& sp, Fn&& fn) {
  for (int u = 0; u < sp.u; ++u)
    for (int z = 0; z < sp.z; ++z)
      for (int a = 0; a < sp.x_perp_z; ++a)
        for (int m = 0; m < sp.x_yz; ++m)
          for (int w = 0; w < sp.x_perp_y; ++w)
            for (int y = 0; y < sp.y; ++y) fn(u, z, a, m, w, y);
}

}  // namespace

Joint enumerate_joint(const DiscreteSCM& s) {
  s.validate();
  Joint joint;
  joint.spaces = s.spaces;
  joint.p.assign(static_cast<size_t>(s.spaces.u) * s.spaces.z * s.spaces.x_perp_z *
                     s.spaces.x_yz * s.spaces.x_perp_y * s.spaces.y,
                 0.0);
  double total = 0.0;
  for_each_state(s.spaces, [&](int u, int z, int a, int m, int w, int y) {
    const double p = s.confounder_prior[u] * factor_product(s, u, z, a, m, w, y);
    joint.p[joint.index(u, z, a, m, w, y)] = p;
    total += p;
  });
  if (total <= 0.0) {
    throw InfeasibleError("enumerate_joint: selection eliminates all mass");
  }
  for (double& p : joint.p) p /= total;
  return joint;
}

PredictorTable PredictorTable::from_x_perp_z(const Spaces& spaces,
                                             const std::vector<double>& per_a) {
  if (per_a.size() != static_cast<size_t>(spaces.x_perp_z)) {
    throw ValidationError("PredictorTable: per_a size mismatch");
  }
  PredictorTable t;
  t.values.resize(spaces.x_count());
  for (int a = 0; a < spaces.x_perp_z; ++a)
    for (int m = 0; m < spaces.x_yz; ++m)
      for (int w = 0; w < spaces.x_perp_y; ++w)
        t.values[spaces.x_index(a, m, w)] = per_a[a];
  return t;
}

PredictorTable PredictorTable::from_binary_mask(const Spaces& spaces,
                                                uint32_t mask) {
  PredictorTable t;
  const int n = spaces.x_count();
  t.values.resize(n);
  for (int x = 0; x < n; ++x) t.values[x] = (mask >> x) & 1u ? 1.0 : 0.0;
  return t;
}

namespace {

// Groups x values by exact predictor output; returns group id per x.
std::vector<int> predictor_groups(const PredictorTable& f, int x_count,
                                  int& group_count) {
  if (f.values.size() != static_cast<size_t>(x_count)) {
    throw ValidationError("predictor table size does not match the x space");
  }
  std::map<double, int> ids;
  std::vector<int> group(x_count);
  for (int x = 0; x < x_count; ++x) {
    group[x] = ids.emplace(f.values[x], static_cast<int>(ids.size())).first->second;
  }
  group_count = static_cast<int>(ids.size());
  return group;
}

double entropy_term(double joint, double marg_a, double marg_b) {
  if (joint <= 0.0) return 0.0;
  return joint * std::log(joint / (marg_a * marg_b));
}

}  // namespace

SignatureResult check_signature(const DiscreteSCM& s,
                                const PredictorTable& predictor) {
  const Joint joint = enumerate_joint(s);
  const Spaces& sp = s.spaces;
  int group_count = 0;
  const std::vector<int> group = predictor_groups(predictor, sp.x_count(), group_count);

  // P(v, z, y) for v = predictor group.
  std::vector<double> pvzy(static_cast<size_t>(group_count) * sp.z * sp.y, 0.0);
  for_each_state(sp, [&](int u, int z, int a, int m, int w, int y) {
    const int v = group[sp.x_index(a, m, w)];
    pvzy[(static_cast<size_t>(v) * sp.z + z) * sp.y + y] +=
        joint.at(u, z, a, m, w, y);
  });

  auto p_vzy = [&](int v, int z, int y) {
    return pvzy[(static_cast<size_t>(v) * sp.z + z) * sp.y + y];
  };

  SignatureResult result;
  // Marginal MI: I(V; Z).
  std::vector<double> pv(group_count, 0.0);
  std::vector<double> pz(sp.z, 0.0);
  std::vector<double> pvz(static_cast<size_t>(group_count) * sp.z, 0.0);
  for (int v = 0; v < group_count; ++v)
    for (int z = 0; z < sp.z; ++z)
      for (int y = 0; y < sp.y; ++y) {
        const double p = p_vzy(v, z, y);
        pv[v] += p;
        pz[z] += p;
        pvz[static_cast<size_t>(v) * sp.z + z] += p;
      }
  for (int v = 0; v < group_count; ++v)
    for (int z = 0; z < sp.z; ++z)
      result.mi_marginal +=
          entropy_term(pvz[static_cast<size_t>(v) * sp.z + z], pv[v], pz[z]);

  // Conditional MI: I(V; Z | Y) = sum_y P(y) * I(V; Z | Y=y).
  for (int y = 0; y < sp.y; ++y) {
    double py = 0.0;
    for (int v = 0; v < group_count; ++v)
      for (int z = 0; z < sp.z; ++z) py += p_vzy(v, z, y);
    if (py <= 0.0) continue;
    std::vector<double> cv(group_count, 0.0);
    std::vector<double> cz(sp.z, 0.0);
    for (int v = 0; v < group_count; ++v)
      for (int z = 0; z < sp.z; ++z) {
        const double c = p_vzy(v, z, y) / py;
        cv[v] += c;
        cz[z] += c;
      }
    double mi_y = 0.0;
    for (int v = 0; v < group_count; ++v)
      for (int z = 0; z < sp.z; ++z)
        mi_y += entropy_term(p_vzy(v, z, y) / py, cv[v], cz[z]);
    result.mi_conditional += py * mi_y;
  }
  return result;
}

namespace {

struct CoupledOutcome {
  int v1;
  int v2;
  double mass;
};

// Inverse-CDF coupling of two distributions through one shared uniform:
// elementary intervals of [0, 1) refined by both rows' cumulative sums.
// Identical rows couple exactly on the diagonal.
std::vector<CoupledOutcome> couple_rows(const double* r1, const double* r2, int n) {
  std::vector<CoupledOutcome> out;
  int i = 0;
  int j = 0;
  double upper1 = r1[0];
  double upper2 = r2[0];
  double lo = 0.0;
  while (i < n && j < n) {
    const double hi = std::min(upper1, upper2);
    if (hi > lo) out.push_back({i, j, hi - lo});
    lo = hi;
    if (upper1 <= upper2) {
      ++i;
      if (i < n) upper1 += r1[i];
    } else {
      ++j;
      if (j < n) upper2 += r2[j];
    }
  }
  return out;
}

void require_coupling(const DiscreteSCM& s) {
  if (s.coupling != Coupling::shared_inverse_cdf) {
    throw ValidationError(
        "counterfactuals require an explicit exogenous encoding; set "
        "coupling = shared_inverse_cdf to couple mechanisms through "
        "shared uniform noise");
  }
}

}  // namespace

TwinJoint twin_joint_under_do(const DiscreteSCM& s, int z1, int z2) {
  s.validate();
  require_coupling(s);
  const Spaces& sp = s.spaces;
  if (z1 < 0 || z1 >= sp.z || z2 < 0 || z2 >= sp.z) {
    throw ValidationError("twin_joint_under_do: z out of range");
  }
  TwinJoint twin;
  twin.spaces = sp;
  const int xn = sp.x_count();
  twin.p.assign(static_cast<size_t>(xn) * xn, 0.0);

  if (s.direction == Direction::causal) {
    // a is a root, shared across worlds. m and w react to the intervention.
    const double* pa = s.x_perp_z.row(0);
    for (int a = 0; a < sp.x_perp_z; ++a) {
      if (pa[a] <= 0.0) continue;
      const auto m_pairs = couple_rows(s.x_yz.row(std::vector<int>{z1, a}),
                                       s.x_yz.row(std::vector<int>{z2, a}), sp.x_yz);
      for (const auto& mp : m_pairs) {
        const auto w_pairs =
            couple_rows(s.x_perp_y.row(std::vector<int>{z1, mp.v1}),
                        s.x_perp_y.row(std::vector<int>{z2, mp.v2}), sp.x_perp_y);
        for (const auto& wp : w_pairs) {
          const int x1 = sp.x_index(a, mp.v1, wp.v1);
          const int x2 = sp.x_index(a, mp.v2, wp.v2);
          twin.p[static_cast<size_t>(x1) * xn + x2] += pa[a] * mp.mass * wp.mass;
        }
      }
    }
    return twin;
  }

  // Anticausal: u and y are upstream of the intervention; a follows y and
  // is shared. w and m react to the intervention.
  const auto w_pairs = couple_rows(s.x_perp_y.row(z1), s.x_perp_y.row(z2),
                                   sp.x_perp_y);
  for (int u = 0; u < sp.u; ++u) {
    const double pu = s.confounder_prior[u];
    if (pu <= 0.0) continue;
    for (int y = 0; y < sp.y; ++y) {
      const double py = s.y_table.row(u)[y];
      if (py <= 0.0) continue;
      const double* pa = s.x_perp_z.row(y);
      for (int a = 0; a < sp.x_perp_z; ++a) {
        if (pa[a] <= 0.0) continue;
        const double base = pu * py * pa[a];
        for (const auto& wp : w_pairs) {
          const auto m_pairs = couple_rows(
              s.x_yz.row(std::vector<int>{y, z1, a, wp.v1}),
              s.x_yz.row(std::vector<int>{y, z2, a, wp.v2}), sp.x_yz);
          for (const auto& mp : m_pairs) {
            const int x1 = sp.x_index(a, mp.v1, wp.v1);
            const int x2 = sp.x_index(a, mp.v2, wp.v2);
            twin.p[static_cast<size_t>(x1) * xn + x2] += base * wp.mass * mp.mass;
          }
        }
      }
    }
  }
  return twin;
}

double flip_probability(const DiscreteSCM& s, const PredictorTable& predictor,
                        int z1, int z2) {
  const TwinJoint twin = twin_joint_under_do(s, z1, z2);
  const int xn = s.spaces.x_count();
  if (predictor.values.size() != static_cast<size_t>(xn)) {
    throw ValidationError("flip_probability: predictor table size mismatch");
  }
  double flip = 0.0;
  for (int x1 = 0; x1 < xn; ++x1) {
    for (int x2 = 0; x2 < xn; ++x2) {
      if (predictor.values[x1] != predictor.values[x2]) {
        flip += twin.at(x1, x2);
      }
    }
  }
  return flip;
}

double max_flip_probability(const DiscreteSCM& s, const PredictorTable& predictor) {
  double worst = 0.0;
  for (int z1 = 0; z1 < s.spaces.z; ++z1) {
    for (int z2 = 0; z2 < s.spaces.z; ++z2) {
      if (z1 == z2) continue;
      worst = std::max(worst, flip_probability(s, predictor, z1, z2));
    }
  }
  return worst;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

DecompositionResult decomposition_check(const DiscreteSCM& s) {
  s.validate();
  require_coupling(s);
  const Spaces& sp = s.spaces;
  const int xn = sp.x_count();
  if (xn > 16) {
    throw ValidationError("decomposition_check: x space too large to enumerate");
  }

  // All ordered z pairs, including (z, z) for support registration.
  std::vector<TwinJoint> twins;
  for (int z1 = 0; z1 < sp.z; ++z1)
    for (int z2 = 0; z2 < sp.z; ++z2)
      twins.push_back(twin_joint_under_do(s, z1, z2));

  std::vector<bool> supported(xn, false);
  UnionFind components(xn);
  for (const auto& twin : twins) {
    for (int x1 = 0; x1 < xn; ++x1) {
      for (int x2 = 0; x2 < xn; ++x2) {
        if (twin.at(x1, x2) > 0.0) {
          supported[x1] = true;
          supported[x2] = true;
          components.unite(x1, x2);
        }
      }
    }
  }

  DecompositionResult result;
  result.component_of.assign(xn, -1);
  std::map<int, int> relabel;
  for (int x = 0; x < xn; ++x) {
    if (!supported[x]) continue;
    const int root = components.find(x);
    result.component_of[x] =
        relabel.emplace(root, static_cast<int>(relabel.size())).first->second;
  }

  // Do components coincide with the supported fibers of the a coordinate?
  result.components_match_coordinate = true;
  for (int x1 = 0; x1 < xn && result.components_match_coordinate; ++x1) {
    if (!supported[x1]) continue;
    int a1, m1, w1;
    sp.x_unpack(x1, a1, m1, w1);
    for (int x2 = 0; x2 < xn; ++x2) {
      if (!supported[x2]) continue;
      int a2, m2, w2;
      sp.x_unpack(x2, a2, m2, w2);
      const bool same_fiber = a1 == a2;
      const bool same_component = result.component_of[x1] == result.component_of[x2];
      if (same_fiber != same_component) {
        result.components_match_coordinate = false;
        break;
      }
    }
  }

  // Enumerate every binary predictor table.
  const uint32_t table_count = 1u << xn;
  result.equivalence_holds = true;
  for (uint32_t mask = 0; mask < table_count; ++mask) {
    // Invariance: zero flip mass between worlds for every ordered pair.
    bool invariant = true;
    for (const auto& twin : twins) {
      for (int x1 = 0; x1 < xn && invariant; ++x1) {
        for (int x2 = 0; x2 < xn; ++x2) {
          if (twin.at(x1, x2) > 0.0 &&
              (((mask >> x1) & 1u) != ((mask >> x2) & 1u))) {
            invariant = false;
            break;
          }
        }
      }
      if (!invariant) break;
    }
    // Measurability: constant on each supported a fiber.
    bool measurable = true;
    for (int a = 0; a < sp.x_perp_z && measurable; ++a) {
      int seen = -1;
      for (int m = 0; m < sp.x_yz && measurable; ++m) {
        for (int w = 0; w < sp.x_perp_y; ++w) {
          const int x = sp.x_index(a, m, w);
          if (!supported[x]) continue;
          const int bit = (mask >> x) & 1u;
          if (seen == -1) {
            seen = bit;
          } else if (seen != bit) {
            measurable = false;
            break;
          }
        }
      }
    }
    if (invariant) ++result.invariant_count;
    if (measurable) ++result.measurable_count;
    if (invariant != measurable) result.equivalence_holds = false;
  }
  return result;
}

InvariantMinimizer invariant_risk_minimizer(const DiscreteSCM& s, Loss loss) {
  const Joint joint = enumerate_joint(s);
  const Spaces& sp = s.spaces;
  std::vector<double> mass(sp.x_perp_z, 0.0);
  std::vector<std::vector<double>> ydist(sp.x_perp_z,
                                         std::vector<double>(sp.y, 0.0));
  for_each_state(sp, [&](int u, int z, int a, int m, int w, int y) {
    const double p = joint.at(u, z, a, m, w, y);
    mass[a] += p;
    ydist[a][y] += p;
  });
  InvariantMinimizer out;
  out.loss = loss;
  out.supported.assign(sp.x_perp_z, false);
  out.mean_per_a.assign(sp.x_perp_z, 0.0);
  out.dist_per_a.assign(sp.x_perp_z, std::vector<double>(sp.y, 0.0));
  for (int a = 0; a < sp.x_perp_z; ++a) {
    if (mass[a] <= 0.0) continue;  // excluded, flagged unsupported
    out.supported[a] = true;
    double mean = 0.0;
    for (int y = 0; y < sp.y; ++y) {
      const double cond = ydist[a][y] / mass[a];
      out.dist_per_a[a][y] = cond;
      mean += cond * s.y_value(y);
    }
    out.mean_per_a[a] = mean;
  }
  return out;
}

double risk_squared(const Joint& joint, const std::vector<double>& y_values,
                    const PredictorTable& predictor) {
  const Spaces& sp = joint.spaces;
  if (predictor.values.size() != static_cast<size_t>(sp.x_count())) {
    throw ValidationError("risk_squared: predictor table size mismatch");
  }
  double risk = 0.0;
  for_each_state(sp, [&](int u, int z, int a, int m, int w, int y) {
    const double p = joint.at(u, z, a, m, w, y);
    if (p <= 0.0) return;
    const double yv = y_values.empty() ? static_cast<double>(y) : y_values[y];
    const double d = yv - predictor.values[sp.x_index(a, m, w)];
    risk += p * d * d;
  });
  return risk;
}

double risk_binary_ce(const Joint& joint, const PredictorTable& predictor) {
  const Spaces& sp = joint.spaces;
  if (sp.y != 2) {
    throw ValidationError("risk_binary_ce: requires binary y");
  }
  if (predictor.values.size() != static_cast<size_t>(sp.x_count())) {
    throw ValidationError("risk_binary_ce: predictor table size mismatch");
  }
  double risk = 0.0;
  for_each_state(sp, [&](int u, int z, int a, int m, int w, int y) {
    const double p = joint.at(u, z, a, m, w, y);
    if (p <= 0.0) return;
    const double f = predictor.values[sp.x_index(a, m, w)];
    const double q = y == 1 ? f : 1.0 - f;
    risk += p * -std::log(q);
  });
  return risk;
}

DiscreteSCM apply_variant(const DiscreteSCM& base, const ScmVariant& variant) {
  DiscreteSCM out = base;
  if (variant.confounder_prior.has_value()) {
    out.confounder_prior = *variant.confounder_prior;
  }
  if (variant.selection.has_value()) {
    out.selection = *variant.selection;
  }
  out.validate();
  return out;
}

namespace {

std::vector<double> y_marginal(const Joint& joint) {
  std::vector<double> py(joint.spaces.y, 0.0);
  for_each_state(joint.spaces, [&](int u, int z, int a, int m, int w, int y) {
    py[y] += joint.at(u, z, a, m, w, y);
  });
  return py;
}

}  // namespace

TransferReport verify_transfer(const CompatFamily& family, Loss loss) {
  const InvariantMinimizer base_min = invariant_risk_minimizer(family.base, loss);
  const std::vector<double> base_py = y_marginal(enumerate_joint(family.base));
  TransferReport report;
  for (const auto& variant : family.members) {
    const DiscreteSCM member = apply_variant(family.base, variant);
    const Joint member_joint = enumerate_joint(member);
    const std::vector<double> member_py = y_marginal(member_joint);
    TransferMemberReport rec;
    rec.label = variant.label;
    for (int y = 0; y < family.base.spaces.y; ++y) {
      rec.y_marginal_gap =
          std::max(rec.y_marginal_gap, std::abs(base_py[y] - member_py[y]));
    }
    if (rec.y_marginal_gap > 1e-9) {
      throw ValidationError(
          "verify_transfer: member '" + variant.label +
          "' changes the Y marginal; causally compatible members must "
          "preserve P(Y)");
    }
    const InvariantMinimizer member_min = invariant_risk_minimizer(member, loss);
    for (int a = 0; a < family.base.spaces.x_perp_z; ++a) {
      if (!base_min.supported[a] || !member_min.supported[a]) continue;
      if (loss == Loss::squared) {
        rec.max_abs_deviation =
            std::max(rec.max_abs_deviation,
                     std::abs(base_min.mean_per_a[a] - member_min.mean_per_a[a]));
      } else {
        for (int y = 0; y < family.base.spaces.y; ++y) {
          rec.max_abs_deviation = std::max(
              rec.max_abs_deviation,
              std::abs(base_min.dist_per_a[a][y] - member_min.dist_per_a[a][y]));
        }
      }
    }
    report.worst_deviation = std::max(report.worst_deviation, rec.max_abs_deviation);
    report.members.push_back(std::move(rec));
  }
  return report;
}

namespace {

// Per-x sufficient statistics for fast risk evaluation: total mass,
// first and second moments of the y value.
struct XStats {
  std::vector<double> s0;
  std::vector<double> s1;
  std::vector<double> s2;
  std::vector<double> p_y1;  // mass with y == 1 (binary CE)
};

XStats x_stats(const Joint& joint, const DiscreteSCM& scm) {
  const Spaces& sp = joint.spaces;
  XStats st;
  st.s0.assign(sp.x_count(), 0.0);
  st.s1.assign(sp.x_count(), 0.0);
  st.s2.assign(sp.x_count(), 0.0);
  st.p_y1.assign(sp.x_count(), 0.0);
  for_each_state(sp, [&](int u, int z, int a, int m, int w, int y) {
    const double p = joint.at(u, z, a, m, w, y);
    if (p <= 0.0) return;
    const int x = sp.x_index(a, m, w);
    const double yv = scm.y_value(y);
    st.s0[x] += p;
    st.s1[x] += p * yv;
    st.s2[x] += p * yv * yv;
    if (y == 1) st.p_y1[x] += p;
  });
  return st;
}

double risk_from_stats(const XStats& st, const std::vector<double>& f, Loss loss) {
  double risk = 0.0;
  for (size_t x = 0; x < st.s0.size(); ++x) {
    if (st.s0[x] <= 0.0) continue;
    if (loss == Loss::squared) {
      risk += st.s2[x] - 2.0 * f[x] * st.s1[x] + f[x] * f[x] * st.s0[x];
    } else {
      const double p1 = st.p_y1[x];
      const double p0 = st.s0[x] - p1;
      if (p1 > 0.0) risk += p1 * -std::log(f[x]);
      if (p0 > 0.0) risk += p0 * -std::log(1.0 - f[x]);
    }
  }
  return risk;
}

// Pointwise optimum and its risk for a fixed (possibly mixed) joint.
std::vector<double> bayes_predictor(const XStats& st, Loss loss, double fallback) {
  std::vector<double> f(st.s0.size(), fallback);
  for (size_t x = 0; x < st.s0.size(); ++x) {
    if (st.s0[x] <= 0.0) continue;
    f[x] = loss == Loss::squared ? st.s1[x] / st.s0[x] : st.p_y1[x] / st.s0[x];
  }
  return f;
}

double bayes_risk(const XStats& st, Loss loss) {
  double risk = 0.0;
  for (size_t x = 0; x < st.s0.size(); ++x) {
    if (st.s0[x] <= 0.0) continue;
    if (loss == Loss::squared) {
      risk += st.s2[x] - st.s1[x] * st.s1[x] / st.s0[x];
    } else {
      const double p1 = st.p_y1[x];
      const double p0 = st.s0[x] - p1;
      if (p1 > 0.0) risk += p1 * -std::log(p1 / st.s0[x]);
      if (p0 > 0.0) risk += p0 * -std::log(p0 / st.s0[x]);
    }
  }
  return risk;
}

XStats mix_stats(const XStats& a, const XStats& b, double weight_b) {
  XStats out = a;
  for (size_t x = 0; x < out.s0.size(); ++x) {
    out.s0[x] = (1.0 - weight_b) * a.s0[x] + weight_b * b.s0[x];
    out.s1[x] = (1.0 - weight_b) * a.s1[x] + weight_b * b.s1[x];
    out.s2[x] = (1.0 - weight_b) * a.s2[x] + weight_b * b.s2[x];
    out.p_y1[x] = (1.0 - weight_b) * a.p_y1[x] + weight_b * b.p_y1[x];
  }
  return out;
}

}  // namespace

MinimaxReport minimax_check(const CompatFamily& family, Loss loss,
                            double resolution) {
  const Spaces& sp = family.base.spaces;
  const int xn = sp.x_count();

  if (family.members.empty()) {
    throw ValidationError("minimax_check: empty q_grid");
  }
  std::vector<DiscreteSCM> members;
  members.push_back(family.base);
  for (const auto& v : family.members) members.push_back(apply_variant(family.base, v));

  std::vector<XStats> stats;
  stats.reserve(members.size());
  for (const auto& m : members) stats.push_back(x_stats(enumerate_joint(m), m));

  // Invariant risk minimizer of the base, lifted to the x space.
  const InvariantMinimizer inv = invariant_risk_minimizer(family.base, loss);
  double global_mean = 0.0;
  {
    const std::vector<double> py = y_marginal(enumerate_joint(family.base));
    for (int y = 0; y < sp.y; ++y) global_mean += py[y] * family.base.y_value(y);
  }
  std::vector<double> inv_per_a(sp.x_perp_z, global_mean);
  for (int a = 0; a < sp.x_perp_z; ++a) {
    if (!inv.supported[a]) continue;
    inv_per_a[a] = loss == Loss::squared ? inv.mean_per_a[a] : inv.dist_per_a[a][1];
  }
  const PredictorTable f_star = PredictorTable::from_x_perp_z(sp, inv_per_a);

  MinimaxReport report;
  auto worst_risk = [&](const std::vector<double>& f) {
    double worst = 0.0;
    for (const auto& st : stats) worst = std::max(worst, risk_from_stats(st, f, loss));
    return worst;
  };
  for (const auto& st : stats) {
    report.invariant_risk_profile.push_back(risk_from_stats(st, f_star.values, loss));
  }
  report.invariant_worst = *std::max_element(report.invariant_risk_profile.begin(),
                                             report.invariant_risk_profile.end());

  // Candidate alternatives: per-member and pairwise-mixture optima.
  report.best_alternative_worst = report.invariant_worst;
  std::vector<double> certificate_predictor = f_star.values;
  report.lower_bound = 0.0;
  auto consider_mixture = [&](const XStats& st) {
    const double lb = bayes_risk(st, loss);
    const std::vector<double> b = bayes_predictor(st, loss, global_mean);
    report.best_alternative_worst =
        std::min(report.best_alternative_worst, worst_risk(b));
    if (lb > report.lower_bound) {
      report.lower_bound = lb;
      certificate_predictor = b;
    }
  };
  for (const auto& st : stats) consider_mixture(st);
  for (size_t i = 0; i < stats.size(); ++i) {
    for (size_t j = i + 1; j < stats.size(); ++j) {
      for (double w = 0.05; w < 1.0; w += 0.05) {
        consider_mixture(mix_stats(stats[i], stats[j], w));
      }
    }
  }

  // Dense grid over predictor tables when the x space is tiny.
  if (xn <= 2) {
    const int steps = static_cast<int>(std::lround(1.0 / resolution));
    std::vector<double> f(xn, 0.0);
    double best = report.best_alternative_worst;
    for (int i = 0; i <= steps; ++i) {
      f[0] = static_cast<double>(i) * resolution;
      if (xn == 1) {
        best = std::min(best, worst_risk(f));
        continue;
      }
      for (int j = 0; j <= steps; ++j) {
        f[1] = static_cast<double>(j) * resolution;
        best = std::min(best, worst_risk(f));
      }
    }
    report.best_alternative_worst = best;
  }

  if (report.best_alternative_worst < report.invariant_worst - resolution) {
    report.verdict = MinimaxVerdict::not_minimax;
  } else if (report.lower_bound >= report.invariant_worst - resolution) {
    // Value coincidence certified; check the certificate's optimum agrees
    // with the invariant minimizer pointwise on supported x.
    bool coincide = true;
    for (int x = 0; x < xn && coincide; ++x) {
      bool supported_somewhere = false;
      for (const auto& st : stats) supported_somewhere |= st.s0[x] > 0.0;
      if (!supported_somewhere) continue;
      if (std::abs(certificate_predictor[x] - f_star.values[x]) > resolution) {
        coincide = false;
      }
    }
    report.verdict = coincide ? MinimaxVerdict::minimax_coincides
                              : MinimaxVerdict::inconclusive;
  } else {
    report.verdict = MinimaxVerdict::inconclusive;
  }
  return report;
}

double purely_spurious_mi(const Joint& joint) {
  const Spaces& sp = joint.spaces;
  // I(Y; (m, w) | a, z).
  const int mw = sp.x_yz * sp.x_perp_y;
  double mi = 0.0;
  for (int a = 0; a < sp.x_perp_z; ++a) {
    for (int z = 0; z < sp.z; ++z) {
      double paz = 0.0;
      std::vector<double> pmw(mw, 0.0);
      std::vector<double> py(sp.y, 0.0);
      std::vector<double> pmwy(static_cast<size_t>(mw) * sp.y, 0.0);
      for (int u = 0; u < sp.u; ++u)
        for (int m = 0; m < sp.x_yz; ++m)
          for (int w = 0; w < sp.x_perp_y; ++w)
            for (int y = 0; y < sp.y; ++y) {
              const double p = joint.at(u, z, a, m, w, y);
              paz += p;
              pmw[m * sp.x_perp_y + w] += p;
              py[y] += p;
              pmwy[static_cast<size_t>(m * sp.x_perp_y + w) * sp.y + y] += p;
            }
      if (paz <= 0.0) continue;
      double mi_cell = 0.0;
      for (int k = 0; k < mw; ++k)
        for (int y = 0; y < sp.y; ++y)
          mi_cell += entropy_term(pmwy[static_cast<size_t>(k) * sp.y + y] / paz,
                                  pmw[k] / paz, py[y] / paz);
      mi += paz * mi_cell;
    }
  }
  return mi;
}

bool purely_spurious_check(const DiscreteSCM& s) {
  return purely_spurious_mi(enumerate_joint(s)) < 1e-9;
}

corpus::Dataset sample_corpus_from_scm(
    const DiscreteSCM& s,
    const std::function<std::vector<std::string>(int a, int m, int w)>& encoder,
    int n, uint64_t seed) {
  if (n < 0) throw ValidationError("sample_corpus_from_scm: negative n");
  if (s.spaces.z != 2) {
    throw ValidationError("sample_corpus_from_scm: requires binary z");
  }
  const Joint joint = enumerate_joint(s);
  const Spaces& sp = s.spaces;

  // Injectivity of the encoder over the x space.
  std::map<std::string, int> seen;
  for (int a = 0; a < sp.x_perp_z; ++a)
    for (int m = 0; m < sp.x_yz; ++m)
      for (int w = 0; w < sp.x_perp_y; ++w) {
        std::string key;
        for (const auto& tok : encoder(a, m, w)) {
          key += tok;
          key.push_back('\x1f');
        }
        if (!seen.emplace(key, sp.x_index(a, m, w)).second) {
          throw ValidationError(
              "sample_corpus_from_scm: encoder is not injective over x values");
        }
      }

  std::vector<double> cum(joint.p.size());
  std::partial_sum(joint.p.begin(), joint.p.end(), cum.begin());
  util::Rng rng(seed);
  corpus::Dataset out;
  out.class_count = sp.y;
  out.structure_tag = s.direction == Direction::causal
                          ? corpus::StructureTag::causal_confounded
                          : corpus::StructureTag::anticausal;
  for (int i = 0; i < n; ++i) {
    const double r = rng.uniform01() * cum.back();
    const size_t idx = static_cast<size_t>(
        std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
    // Unpack (u, z, a, m, w, y) from the row-major joint index.
    size_t rest = idx;
    const int y = static_cast<int>(rest % sp.y);
    rest /= sp.y;
    const int w = static_cast<int>(rest % sp.x_perp_y);
    rest /= sp.x_perp_y;
    const int m = static_cast<int>(rest % sp.x_yz);
    rest /= sp.x_yz;
    const int a = static_cast<int>(rest % sp.x_perp_z);
    rest /= sp.x_perp_z;
    const int z = static_cast<int>(rest % sp.z);
    corpus::LabeledExample e;
    e.id = i;
    e.tokens = encoder(a, m, w);
    e.y = y;
    e.z = z;
    out.examples.push_back(std::move(e));
  }
  return out;
}

// --- Random generation -------------------------------------------------

namespace {

std::vector<double> random_distribution(int n, util::Rng& rng, double floor_mass) {
  std::vector<double> p(n);
  for (auto& v : p) v = floor_mass + rng.uniform01();
  util::normalize(p);
  return p;
}

CondTable random_table(const std::vector<int>& parents, int values,
                       util::Rng& rng, double floor_mass = 0.05) {
  const int rows = [&] {
    int r = 1;
    for (int s : parents) r *= s;
    return r;
  }();
  std::vector<double> probs;
  probs.reserve(static_cast<size_t>(rows) * values);
  for (int r = 0; r < rows; ++r) {
    const auto row = random_distribution(values, rng, floor_mass);
    probs.insert(probs.end(), row.begin(), row.end());
  }
  return CondTable(parents, values, std::move(probs));
}

// Table whose rows ignore one parent: generated over the reduced parent
// set and replicated, so the variable is structurally disconnected.
CondTable random_table_ignoring(const std::vector<int>& parents, int ignore_pos,
                                int values, util::Rng& rng,
                                double floor_mass = 0.05) {
  std::vector<int> reduced = parents;
  reduced.erase(reduced.begin() + ignore_pos);
  const CondTable inner = random_table(reduced, values, rng, floor_mass);
  const int rows = [&] {
    int r = 1;
    for (int s : parents) r *= s;
    return r;
  }();
  std::vector<double> probs;
  probs.reserve(static_cast<size_t>(rows) * values);
  std::vector<int> assign(parents.size(), 0);
  for (int r = 0; r < rows; ++r) {
    // Decode the row-major parent assignment.
    int rest = r;
    for (int i = static_cast<int>(parents.size()) - 1; i >= 0; --i) {
      assign[i] = rest % parents[i];
      rest /= parents[i];
    }
    std::vector<int> reduced_assign = assign;
    reduced_assign.erase(reduced_assign.begin() + ignore_pos);
    const double* row = inner.row(reduced_assign);
    probs.insert(probs.end(), row, row + values);
  }
  return CondTable(parents, values, std::move(probs));
}

}  // namespace

DiscreteSCM random_scm(const ScmGenOptions& options, util::Rng& rng) {
  DiscreteSCM s;
  s.direction = options.direction;
  s.spaces = options.spaces;
  if (!options.confounding) {
    s.spaces.u = 1;
  } else if (s.spaces.u < 2) {
    s.spaces.u = 3;
  }
  const Spaces& sp = s.spaces;
  s.confounder_prior = random_distribution(sp.u, rng, 0.1);
  s.z_given_u = random_table({sp.u}, sp.z, rng);
  if (s.direction == Direction::causal) {
    s.x_perp_z = random_table({}, sp.x_perp_z, rng);
    s.x_yz = random_table({sp.z, sp.x_perp_z}, sp.x_yz, rng);
    s.x_perp_y = random_table({sp.z, sp.x_yz}, sp.x_perp_y, rng);
    if (options.purely_spurious) {
      s.y_table = random_table_ignoring({sp.x_yz, sp.x_perp_z, sp.u}, 0, sp.y, rng);
    } else {
      s.y_table = random_table({sp.x_yz, sp.x_perp_z, sp.u}, sp.y, rng);
    }
  } else {
    s.y_table = random_table({sp.u}, sp.y, rng);
    s.x_perp_z = random_table({sp.y}, sp.x_perp_z, rng);
    s.x_perp_y = random_table({sp.z}, sp.x_perp_y, rng);
    if (options.purely_spurious) {
      s.x_yz = random_table_ignoring({sp.y, sp.z, sp.x_perp_z, sp.x_perp_y}, 0,
                                     sp.x_yz, rng);
    } else {
      s.x_yz = random_table({sp.y, sp.z, sp.x_perp_z, sp.x_perp_y}, sp.x_yz, rng);
    }
  }
  if (options.selection) {
    std::vector<double> sel(static_cast<size_t>(sp.y) * sp.z);
    for (auto& v : sel) v = rng.uniform(0.25, 1.0);
    s.selection = std::move(sel);
  }
  s.validate();
  return s;
}

AdditiveSCM assemble_additive_scm(const Spaces& spaces_without_y,
                                  const AdditiveSpec& spec,
                                  const std::vector<double>& confounder_prior,
                                  const CondTable& z_given_u,
                                  const CondTable& x_perp_z,
                                  const CondTable& x_yz,
                                  const CondTable& x_perp_y) {
  const int a_size = spaces_without_y.x_perp_z;
  const int u_size = spaces_without_y.u;
  const int k_size = static_cast<int>(spec.noise_values.size());
  if (spec.g.size() != static_cast<size_t>(a_size) ||
      spec.g_tilde.size() != static_cast<size_t>(u_size) ||
      spec.noise_probs.size() != static_cast<size_t>(a_size)) {
    throw ValidationError("assemble_additive_scm: spec size mismatch");
  }
  for (int a = 0; a < a_size; ++a) {
    if (spec.noise_probs[a].size() != static_cast<size_t>(k_size)) {
      throw ValidationError("assemble_additive_scm: noise row size mismatch");
    }
    double mean = 0.0;
    double sum = 0.0;
    for (int k = 0; k < k_size; ++k) {
      mean += spec.noise_probs[a][k] * spec.noise_values[k];
      sum += spec.noise_probs[a][k];
    }
    if (std::abs(mean) > 1e-12 || std::abs(sum - 1.0) > kRowSumTolerance) {
      throw ValidationError(
          "assemble_additive_scm: noise row must be a distribution with "
          "mean zero given a");
    }
  }

  // Distinct attainable sums define the y space.
  std::map<double, int> value_ids;
  for (int a = 0; a < a_size; ++a)
    for (int u = 0; u < u_size; ++u)
      for (int k = 0; k < k_size; ++k) {
        value_ids.emplace(spec.g[a] + spec.g_tilde[u] + spec.noise_values[k], 0);
      }
  std::vector<double> y_values;
  for (auto& [value, id] : value_ids) {
    id = static_cast<int>(y_values.size());
    y_values.push_back(value);
  }
  const int y_size = static_cast<int>(y_values.size());
  if (y_size < 2) {
    throw ValidationError("assemble_additive_scm: degenerate y space");
  }

  AdditiveSCM out;
  out.spec = spec;
  DiscreteSCM& s = out.scm;
  s.direction = Direction::causal;
  s.spaces = spaces_without_y;
  s.spaces.y = y_size;
  s.confounder_prior = confounder_prior;
  s.z_given_u = z_given_u;
  s.x_perp_z = x_perp_z;
  s.x_yz = x_yz;
  s.x_perp_y = x_perp_y;
  s.y_values = y_values;

  // y table over parents (m, a, u); the mechanism ignores m.
  const int m_size = spaces_without_y.x_yz;
  std::vector<double> probs(static_cast<size_t>(m_size) * a_size * u_size * y_size,
                            0.0);
  for (int m = 0; m < m_size; ++m)
    for (int a = 0; a < a_size; ++a)
      for (int u = 0; u < u_size; ++u)
        for (int k = 0; k < k_size; ++k) {
          const double value = spec.g[a] + spec.g_tilde[u] + spec.noise_values[k];
          const int y = value_ids.at(value);
          probs[((static_cast<size_t>(m) * a_size + a) * u_size + u) * y_size + y] +=
              spec.noise_probs[a][k];
        }
  s.y_table = CondTable({m_size, a_size, u_size}, y_size, std::move(probs));
  s.validate();
  return out;
}

AdditiveSCM random_additive_scm(util::Rng& rng) {
  Spaces sp;
  sp.u = 3;
  sp.z = 2;
  sp.x_perp_z = 2;
  sp.x_yz = 2;
  sp.x_perp_y = 2;
  sp.y = 2;  // placeholder, replaced by the assembled y space

  AdditiveSpec spec;
  spec.g = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  const double shared = rng.uniform(-1.0, 1.0);
  // Two confounder states share a g_tilde value; moving prior mass
  // between them preserves the Y marginal exactly.
  spec.g_tilde = {shared, shared, rng.uniform(-1.0, 1.0)};

  // Noise support orthogonal to both probability rows, so each row has
  // mean zero; for two rows in three dimensions this is a cross product.
  while (true) {
    std::vector<std::vector<double>> rows(2);
    for (auto& row : rows) {
      row = std::vector<double>(3);
      for (auto& v : row) v = 0.05 + rng.uniform01();
      util::normalize(row);
    }
    const std::vector<double> cross = {
        rows[0][1] * rows[1][2] - rows[0][2] * rows[1][1],
        rows[0][2] * rows[1][0] - rows[0][0] * rows[1][2],
        rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]};
    double norm = 0.0;
    for (double v : cross) norm = std::max(norm, std::abs(v));
    if (norm < 1e-4) continue;
    spec.noise_values.resize(3);
    for (int k = 0; k < 3; ++k) spec.noise_values[k] = 0.7 * cross[k] / norm;
    spec.noise_probs = rows;
    break;
  }

  util::Rng table_rng = rng.fork(991);
  const std::vector<double> prior = random_distribution(sp.u, table_rng, 0.1);
  const CondTable z_given_u = random_table({sp.u}, sp.z, table_rng);
  const CondTable x_perp_z = random_table({}, sp.x_perp_z, table_rng);
  const CondTable x_yz = random_table({sp.z, sp.x_perp_z}, sp.x_yz, table_rng);
  const CondTable x_perp_y = random_table({sp.z, sp.x_yz}, sp.x_perp_y, table_rng);
  return assemble_additive_scm(sp, spec, prior, z_given_u, x_perp_z, x_yz,
                               x_perp_y);
}

std::vector<std::vector<double>> nullspace_zero_sum(
    int rows, int cols, const std::vector<double>& c_row_major) {
  if (c_row_major.size() != static_cast<size_t>(rows) * cols) {
    throw ValidationError("nullspace_zero_sum: matrix size mismatch");
  }
  // Stack the zero-sum constraint on top of C.
  const int m = rows + 1;
  std::vector<double> mat(static_cast<size_t>(m) * cols);
  std::copy(c_row_major.begin(), c_row_major.end(), mat.begin());
  for (int j = 0; j < cols; ++j) mat[static_cast<size_t>(rows) * cols + j] = 1.0;

  auto at = [&](int r, int c) -> double& { return mat[static_cast<size_t>(r) * cols + c]; };
  std::vector<int> pivot_col_of_row;
  int rank = 0;
  for (int col = 0; col < cols && rank < m; ++col) {
    int pivot = -1;
    double best = 1e-10;
    for (int r = rank; r < m; ++r) {
      if (std::abs(at(r, col)) > best) {
        best = std::abs(at(r, col));
        pivot = r;
      }
    }
    if (pivot < 0) continue;
    for (int j = 0; j < cols; ++j) std::swap(at(pivot, j), at(rank, j));
    const double scale = at(rank, col);
    for (int j = 0; j < cols; ++j) at(rank, j) /= scale;
    for (int r = 0; r < m; ++r) {
      if (r == rank) continue;
      const double factor = at(r, col);
      if (factor == 0.0) continue;
      for (int j = 0; j < cols; ++j) at(r, j) -= factor * at(rank, j);
    }
    pivot_col_of_row.push_back(col);
    ++rank;
  }
  std::vector<bool> is_pivot(cols, false);
  for (int c : pivot_col_of_row) is_pivot[c] = true;
  std::vector<std::vector<double>> basis;
  for (int free_col = 0; free_col < cols; ++free_col) {
    if (is_pivot[free_col]) continue;
    std::vector<double> v(cols, 0.0);
    v[free_col] = 1.0;
    for (int r = 0; r < rank; ++r) {
      v[pivot_col_of_row[r]] = -at(r, free_col);
    }
    basis.push_back(std::move(v));
  }
  return basis;
}

namespace {

// Selected mass per (y, u): contribution of each confounder state to each
// observed y, before mixing with the prior.
std::vector<double> selected_y_mass_per_u(const DiscreteSCM& s) {
  const Spaces& sp = s.spaces;
  std::vector<double> a_yu(static_cast<size_t>(sp.y) * sp.u, 0.0);
  for_each_state(sp, [&](int u, int z, int a, int m, int w, int y) {
    a_yu[static_cast<size_t>(y) * sp.u + u] += factor_product(s, u, z, a, m, w, y);
  });
  return a_yu;
}

// Pre-selection joint over (y, z).
std::vector<double> preselection_yz(const DiscreteSCM& s) {
  DiscreteSCM bare = s;
  bare.selection.reset();
  const Joint joint = enumerate_joint(bare);
  std::vector<double> b(static_cast<size_t>(s.spaces.y) * s.spaces.z, 0.0);
  for_each_state(s.spaces, [&](int u, int z, int a, int m, int w, int y) {
    b[static_cast<size_t>(y) * s.spaces.z + z] += joint.at(u, z, a, m, w, y);
  });
  return b;
}

}  // namespace

std::vector<ScmVariant> prior_variants(const DiscreteSCM& base, int max_count) {
  const Spaces& sp = base.spaces;
  if (sp.u < 2) return {};
  const std::vector<double> a_yu = selected_y_mass_per_u(base);
  std::vector<double> b_u(sp.u, 0.0);
  for (int y = 0; y < sp.y; ++y)
    for (int u = 0; u < sp.u; ++u) b_u[u] += a_yu[static_cast<size_t>(y) * sp.u + u];
  const std::vector<double> py = y_marginal(enumerate_joint(base));
  // Rows: for each y, A(y, u) - P(y) B(u). Any prior move in the
  // nullspace (with zero sum) leaves the observed Y marginal unchanged.
  std::vector<double> c(static_cast<size_t>(sp.y) * sp.u);
  for (int y = 0; y < sp.y; ++y)
    for (int u = 0; u < sp.u; ++u)
      c[static_cast<size_t>(y) * sp.u + u] =
          a_yu[static_cast<size_t>(y) * sp.u + u] - py[y] * b_u[u];
  const auto basis = nullspace_zero_sum(sp.y, sp.u, c);
  std::vector<ScmVariant> variants;
  constexpr double kMinMass = 1e-3;
  int counter = 0;
  for (const auto& v : basis) {
    for (const double sign : {1.0, -1.0}) {
      if (static_cast<int>(variants.size()) >= max_count) return variants;
      double t_max = std::numeric_limits<double>::infinity();
      for (int u = 0; u < sp.u; ++u) {
        const double step = sign * v[u];
        if (step < 0.0) {
          t_max = std::min(t_max, (base.confounder_prior[u] - kMinMass) / -step);
        }
      }
      if (!std::isfinite(t_max) || t_max < 1e-6) continue;
      const double t = 0.85 * t_max;
      std::vector<double> prior(sp.u);
      double sum = 0.0;
      for (int u = 0; u < sp.u; ++u) {
        prior[u] = base.confounder_prior[u] + t * sign * v[u];
        sum += prior[u];
      }
      for (double& p : prior) p /= sum;  // renormalize away float drift
      ScmVariant variant;
      variant.label = "prior_shift_" + std::to_string(counter++);
      variant.confounder_prior = std::move(prior);
      variants.push_back(std::move(variant));
    }
  }
  return variants;
}

std::vector<ScmVariant> selection_variants(const DiscreteSCM& base, int count,
                                           util::Rng& rng) {
  const Spaces& sp = base.spaces;
  const std::vector<double> b_yz = preselection_yz(base);
  const std::vector<double> py = y_marginal(enumerate_joint(base));
  std::vector<ScmVariant> variants;
  for (int i = 0; i < count; ++i) {
    // Random shape, rescaled per y so the selected Y marginal is exact.
    std::vector<double> shape(static_cast<size_t>(sp.y) * sp.z);
    for (auto& v : shape) v = rng.uniform(0.2, 1.0);
    std::vector<double> sel(shape.size(), 0.0);
    bool ok = true;
    for (int y = 0; y < sp.y; ++y) {
      double denom = 0.0;
      for (int z = 0; z < sp.z; ++z) {
        denom += b_yz[static_cast<size_t>(y) * sp.z + z] *
                 shape[static_cast<size_t>(y) * sp.z + z];
      }
      if (denom <= 0.0) {
        ok = false;
        break;
      }
      const double c_y = py[y] / denom;
      for (int z = 0; z < sp.z; ++z) {
        sel[static_cast<size_t>(y) * sp.z + z] =
            c_y * shape[static_cast<size_t>(y) * sp.z + z];
      }
    }
    if (!ok) continue;
    const double peak = *std::max_element(sel.begin(), sel.end());
    for (double& v : sel) v /= peak;
    ScmVariant variant;
    variant.label = "selection_shape_" + std::to_string(i);
    variant.selection = std::move(sel);
    variants.push_back(std::move(variant));
  }
  return variants;
}

ScmVariant independence_selection_variant(const DiscreteSCM& base) {
  const Spaces& sp = base.spaces;
  const std::vector<double> b_yz = preselection_yz(base);
  const std::vector<double> py = y_marginal(enumerate_joint(base));
  std::vector<double> sel(static_cast<size_t>(sp.y) * sp.z);
  for (int y = 0; y < sp.y; ++y) {
    for (int z = 0; z < sp.z; ++z) {
      const double b = b_yz[static_cast<size_t>(y) * sp.z + z];
      if (b <= 0.0) {
        throw InfeasibleError(
            "independence_selection_variant: pre-selection (y,z) support "
            "must be full");
      }
      sel[static_cast<size_t>(y) * sp.z + z] = py[y] * (1.0 / sp.z) / b;
    }
  }
  const double peak = *std::max_element(sel.begin(), sel.end());
  for (double& v : sel) v /= peak;
  ScmVariant variant;
  variant.label = "independence_selection";
  variant.selection = std::move(sel);
  return variant;
}

namespace {

nlohmann::json table_to_json(const CondTable& t) {
  nlohmann::json j;
  j["parent_sizes"] = t.parent_sizes();
  j["value_count"] = t.value_count();
  std::vector<std::vector<double>> rows;
  for (int r = 0; r < t.row_count(); ++r) {
    rows.emplace_back(t.row(r), t.row(r) + t.value_count());
  }
  j["rows"] = rows;
  return j;
}

}  // namespace

std::string scm_to_json(const DiscreteSCM& s) {
  nlohmann::json j;
  j["direction"] = s.direction == Direction::causal ? "causal" : "anticausal";
  j["spaces"] = {{"u", s.spaces.u},
                 {"z", s.spaces.z},
                 {"x_perp_z", s.spaces.x_perp_z},
                 {"x_yz", s.spaces.x_yz},
                 {"x_perp_y", s.spaces.x_perp_y},
                 {"y", s.spaces.y}};
  j["confounder_prior"] = s.confounder_prior;
  j["z_given_u"] = table_to_json(s.z_given_u);
  j["x_perp_z"] = table_to_json(s.x_perp_z);
  j["x_yz"] = table_to_json(s.x_yz);
  j["x_perp_y"] = table_to_json(s.x_perp_y);
  j["y_table"] = table_to_json(s.y_table);
  if (s.selection.has_value()) j["selection"] = *s.selection;
  if (!s.y_values.empty()) j["y_values"] = s.y_values;
  return j.dump();
}

}  // namespace scm
}  // namespace ctfinv
