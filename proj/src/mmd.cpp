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

#include "ctfinv/mmd.hpp"

#include <cmath>

#include "ctfinv/util.hpp"

namespace ctfinv {
namespace mmd {

void KernelConfig::validate() const {
  if (!(bandwidth > 0.0)) {
    throw ValidationError("KernelConfig: bandwidth must be positive");
  }
}

PenaltyKind penalty_kind_from_string(const std::string& name) {
  if (name == "none") return PenaltyKind::none;
  if (name == "marginal") return PenaltyKind::marginal;
  if (name == "conditional") return PenaltyKind::conditional;
  throw ValidationError("unknown penalty kind: " + name);
}

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::marginal: return "marginal";
    case PenaltyKind::conditional: return "conditional";
  }
  return "none";
}

void PenaltySpec::validate() const {
  if (lambda < 0.0) throw ValidationError("PenaltySpec: lambda must be >= 0");
  kernel.validate();
}

namespace {

double squared_distance(const std::vector<double>& u,
                        const std::vector<double>& v) {
  double d2 = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    d2 += d * d;
  }
  return d2;
}

// Mean of the kernel over a x b, summed in row-major order.
double kernel_mean(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b,
                   double inv_two_sigma2) {
  double total = 0.0;
  for (const auto& u : a) {
    for (const auto& v : b) {
      total += std::exp(-squared_distance(u, v) * inv_two_sigma2);
    }
  }
  return total / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// Total order on sample lists; used to canonicalize argument order so
// mmd2_biased(A, B) == mmd2_biased(B, A) exactly.
bool lexicographic_less(const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b) {
  const size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    const size_t m = std::min(a[i].size(), b[i].size());
    for (size_t j = 0; j < m; ++j) {
      if (a[i][j] < b[i][j]) return true;
      if (a[i][j] > b[i][j]) return false;
    }
    if (a[i].size() != b[i].size()) return a[i].size() < b[i].size();
  }
  return a.size() < b.size();
}

void check_samples(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) {
    throw ValidationError("mmd2: empty sample group");
  }
  const size_t dim = a.front().size();
  for (const auto& u : a) {
    if (u.size() != dim) throw ValidationError("mmd2: ragged sample in A");
  }
  for (const auto& v : b) {
    if (v.size() != dim) throw ValidationError("mmd2: dimension mismatch");
  }
}

}  // namespace

double rbf_kernel(const std::vector<double>& u, const std::vector<double>& v,
                  const KernelConfig& config) {
  config.validate();
  if (u.size() != v.size()) {
    throw ValidationError("rbf_kernel: length mismatch");
  }
  const double s2 = config.bandwidth * config.bandwidth;
  return std::exp(-squared_distance(u, v) / (2.0 * s2));
}

double mmd2_biased(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b,
                   const KernelConfig& config) {
  config.validate();
  check_samples(a, b);
  const auto* p = &a;
  const auto* q = &b;
  if (lexicographic_less(b, a)) std::swap(p, q);
  const double inv = 1.0 / (2.0 * config.bandwidth * config.bandwidth);
  return kernel_mean(*p, *p, inv) + kernel_mean(*q, *q, inv) -
         2.0 * kernel_mean(*p, *q, inv);
}

Mmd2Gradient mmd2_gradient(const std::vector<std::vector<double>>& a,
                           const std::vector<std::vector<double>>& b,
                           const KernelConfig& config) {
  config.validate();
  check_samples(a, b);
  const size_t m = a.size();
  const size_t n = b.size();
  const size_t dim = a.front().size();
  const double sigma2 = config.bandwidth * config.bandwidth;
  const double inv = 1.0 / (2.0 * sigma2);

  Mmd2Gradient out;
  out.grad_a.assign(m, std::vector<double>(dim, 0.0));
  out.grad_b.assign(n, std::vector<double>(dim, 0.0));

  // d k(u, v) / d u = k(u, v) (v - u) / sigma^2.
  double sum_aa = 0.0;
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < m; ++j) {
      const double k = std::exp(-squared_distance(a[i], a[j]) * inv);
      sum_aa += k;
      if (i == j) continue;
      const double c = k / sigma2;
      for (size_t d = 0; d < dim; ++d) {
        // Factor 2: a_i appears in both ordered pairs (i, j) and (j, i).
        out.grad_a[i][d] += 2.0 * c * (a[j][d] - a[i][d]) / (m * m);
      }
    }
  }
  double sum_bb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const double k = std::exp(-squared_distance(b[i], b[j]) * inv);
      sum_bb += k;
      if (i == j) continue;
      const double c = k / sigma2;
      for (size_t d = 0; d < dim; ++d) {
        out.grad_b[i][d] += 2.0 * c * (b[j][d] - b[i][d]) / (n * n);
      }
    }
  }
  double sum_ab = 0.0;
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const double k = std::exp(-squared_distance(a[i], b[j]) * inv);
      sum_ab += k;
      const double c = 2.0 * k / (sigma2 * static_cast<double>(m) * n);
      for (size_t d = 0; d < dim; ++d) {
        const double dir = b[j][d] - a[i][d];
        out.grad_a[i][d] -= c * dir;
        out.grad_b[j][d] += c * dir;
      }
    }
  }
  out.value = sum_aa / (static_cast<double>(m) * m) +
              sum_bb / (static_cast<double>(n) * n) -
              2.0 * sum_ab / (static_cast<double>(m) * n);
  return out;
}

namespace {

struct GroupSplit {
  std::vector<std::vector<double>> group0;
  std::vector<std::vector<double>> group1;
  std::vector<size_t> idx0;
  std::vector<size_t> idx1;
};

GroupSplit split_by(const std::vector<std::vector<double>>& rows,
                    const std::vector<int>& key,
                    const std::vector<bool>& mask) {
  GroupSplit split;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (key[i] == 0) {
      split.group0.push_back(rows[i]);
      split.idx0.push_back(i);
    } else {
      split.group1.push_back(rows[i]);
      split.idx1.push_back(i);
    }
  }
  return split;
}

}  // namespace

PenaltyValue marginal_penalty(const std::vector<std::vector<double>>& rows,
                              const std::vector<int>& z,
                              const KernelConfig& config) {
  if (rows.size() != z.size()) {
    throw ValidationError("marginal_penalty: rows/z size mismatch");
  }
  GroupSplit split = split_by(rows, z, {});
  if (split.group0.empty() || split.group1.empty()) {
    return {0.0, true};
  }
  return {mmd2_biased(split.group0, split.group1, config), false};
}

PenaltyGradient marginal_penalty_gradient(
    const std::vector<std::vector<double>>& rows, const std::vector<int>& z,
    const KernelConfig& config) {
  if (rows.size() != z.size()) {
    throw ValidationError("marginal_penalty_gradient: rows/z size mismatch");
  }
  PenaltyGradient out;
  const size_t dim = rows.empty() ? 0 : rows.front().size();
  out.row_grads.assign(rows.size(), std::vector<double>(dim, 0.0));
  GroupSplit split = split_by(rows, z, {});
  if (split.group0.empty() || split.group1.empty()) {
    out.skipped = true;
    return out;
  }
  Mmd2Gradient g = mmd2_gradient(split.group0, split.group1, config);
  out.value = g.value;
  for (size_t i = 0; i < split.idx0.size(); ++i) {
    out.row_grads[split.idx0[i]] = std::move(g.grad_a[i]);
  }
  for (size_t i = 0; i < split.idx1.size(); ++i) {
    out.row_grads[split.idx1[i]] = std::move(g.grad_b[i]);
  }
  return out;
}

PenaltyValue conditional_penalty(const std::vector<std::vector<double>>& rows,
                                 const std::vector<int>& z,
                                 const std::vector<int>& y,
                                 const KernelConfig& config) {
  if (rows.size() != z.size() || rows.size() != y.size()) {
    throw ValidationError("conditional_penalty: size mismatch");
  }
  int max_y = -1;
  for (int v : y) max_y = std::max(max_y, v);
  PenaltyValue out;
  for (int label = 0; label <= max_y; ++label) {
    std::vector<bool> mask(rows.size());
    bool any = false;
    for (size_t i = 0; i < rows.size(); ++i) {
      mask[i] = (y[i] == label);
      any = any || mask[i];
    }
    if (!any) continue;  // unobserved label, no term
    GroupSplit split = split_by(rows, z, mask);
    if (split.group0.empty() || split.group1.empty()) {
      out.skipped = true;
      continue;
    }
    out.value += mmd2_biased(split.group0, split.group1, config);
  }
  return out;
}

PenaltyGradient conditional_penalty_gradient(
    const std::vector<std::vector<double>>& rows, const std::vector<int>& z,
    const std::vector<int>& y, const KernelConfig& config) {
  if (rows.size() != z.size() || rows.size() != y.size()) {
    throw ValidationError("conditional_penalty_gradient: size mismatch");
  }
  PenaltyGradient out;
  const size_t dim = rows.empty() ? 0 : rows.front().size();
  out.row_grads.assign(rows.size(), std::vector<double>(dim, 0.0));
  int max_y = -1;
  for (int v : y) max_y = std::max(max_y, v);
  for (int label = 0; label <= max_y; ++label) {
    std::vector<bool> mask(rows.size());
    bool any = false;
    for (size_t i = 0; i < rows.size(); ++i) {
      mask[i] = (y[i] == label);
      any = any || mask[i];
    }
    if (!any) continue;
    GroupSplit split = split_by(rows, z, mask);
    if (split.group0.empty() || split.group1.empty()) {
      out.skipped = true;
      continue;
    }
    Mmd2Gradient g = mmd2_gradient(split.group0, split.group1, config);
    out.value += g.value;
    for (size_t i = 0; i < split.idx0.size(); ++i) {
      for (size_t d = 0; d < dim; ++d) {
        out.row_grads[split.idx0[i]][d] += g.grad_a[i][d];
      }
    }
    for (size_t i = 0; i < split.idx1.size(); ++i) {
      for (size_t d = 0; d < dim; ++d) {
        out.row_grads[split.idx1[i]][d] += g.grad_b[i][d];
      }
    }
  }
  return out;
}

PenaltyValue penalty_value(const PenaltySpec& spec,
                           const std::vector<std::vector<double>>& rows,
                           const std::vector<int>& z,
                           const std::vector<int>& y) {
  switch (spec.kind) {
    case PenaltyKind::none: return {0.0, false};
    case PenaltyKind::marginal: return marginal_penalty(rows, z, spec.kernel);
    case PenaltyKind::conditional:
      return conditional_penalty(rows, z, y, spec.kernel);
  }
  return {0.0, false};
}

PenaltyGradient penalty_gradient(const PenaltySpec& spec,
                                 const std::vector<std::vector<double>>& rows,
                                 const std::vector<int>& z,
                                 const std::vector<int>& y) {
  PenaltyGradient out;
  switch (spec.kind) {
    case PenaltyKind::none: {
      const size_t dim = rows.empty() ? 0 : rows.front().size();
      out.row_grads.assign(rows.size(), std::vector<double>(dim, 0.0));
      return out;
    }
    case PenaltyKind::marginal:
      return marginal_penalty_gradient(rows, z, spec.kernel);
    case PenaltyKind::conditional:
      return conditional_penalty_gradient(rows, z, y, spec.kernel);
  }
  return out;
}

}  // namespace mmd
}  // namespace ctfinv
