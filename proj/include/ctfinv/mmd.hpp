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

#ifndef CTFINV_MMD_HPP_
#define CTFINV_MMD_HPP_

#include <string>
#include <vector>

namespace ctfinv {
namespace mmd {

// Gaussian RBF kernel k(u, v) = exp(-||u - v||^2 / (2 sigma^2)).
struct KernelConfig {
  double bandwidth = 10.0;

  void validate() const;
};

enum class PenaltyKind { none, marginal, conditional };

PenaltyKind penalty_kind_from_string(const std::string& name);
std::string to_string(PenaltyKind kind);

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::none;
  double lambda = 0.0;
  KernelConfig kernel;

  void validate() const;
};

double rbf_kernel(const std::vector<double>& u, const std::vector<double>& v,
                  const KernelConfig& config);

// Biased V-statistic estimate of squared MMD: all-pairs kernel means,
// self-pairs included. Defined for singleton groups; >= 0 up to float
// noise. Symmetric in its arguments, bit for bit.
double mmd2_biased(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b,
                   const KernelConfig& config);

struct Mmd2Gradient {
  double value = 0.0;
  std::vector<std::vector<double>> grad_a;
  std::vector<std::vector<double>> grad_b;
};

// Exact partial derivatives of mmd2_biased with respect to every sample
// coordinate, computed from the same kernel matrix as the value.
Mmd2Gradient mmd2_gradient(const std::vector<std::vector<double>>& a,
                           const std::vector<std::vector<double>>& b,
                           const KernelConfig& config);

// Penalty over a batch of per-example model outputs (rows). A group that
// is missing from the batch contributes 0 and sets `skipped`.
struct PenaltyValue {
  double value = 0.0;
  bool skipped = false;  // at least one group/cell was empty
};

struct PenaltyGradient {
  double value = 0.0;
  bool skipped = false;
  std::vector<std::vector<double>> row_grads;  // aligned with input rows
};

// Squared MMD between the Z=0 and Z=1 groups of rows.
PenaltyValue marginal_penalty(const std::vector<std::vector<double>>& rows,
                              const std::vector<int>& z,
                              const KernelConfig& config);

PenaltyGradient marginal_penalty_gradient(
    const std::vector<std::vector<double>>& rows, const std::vector<int>& z,
    const KernelConfig& config);

// Sum over observed y values of the squared MMD between the (Z=0, Y=y)
// and (Z=1, Y=y) groups. Terms with an empty side are skipped.
PenaltyValue conditional_penalty(const std::vector<std::vector<double>>& rows,
                                 const std::vector<int>& z,
                                 const std::vector<int>& y,
                                 const KernelConfig& config);

PenaltyGradient conditional_penalty_gradient(
    const std::vector<std::vector<double>>& rows, const std::vector<int>& z,
    const std::vector<int>& y, const KernelConfig& config);

// Dispatches on spec.kind; kind none yields value 0 and zero gradients.
PenaltyValue penalty_value(const PenaltySpec& spec,
                           const std::vector<std::vector<double>>& rows,
                           const std::vector<int>& z, const std::vector<int>& y);

PenaltyGradient penalty_gradient(const PenaltySpec& spec,
                                 const std::vector<std::vector<double>>& rows,
                                 const std::vector<int>& z,
                                 const std::vector<int>& y);

}  // namespace mmd
}  // namespace ctfinv

#endif  // CTFINV_MMD_HPP_
