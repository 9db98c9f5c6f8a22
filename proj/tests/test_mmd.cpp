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

#include <cmath>
#include <vector>

#include "ctfinv/mmd.hpp"
#include "ctfinv/util.hpp"

using namespace ctfinv;
using Samples = std::vector<std::vector<double>>;

namespace {

// Independent reference estimator, written before the library path: three
// naive double loops, no shared helpers.
double reference_mmd2(const Samples& a, const Samples& b, double sigma) {
  auto kern = [sigma](const std::vector<double>& u, const std::vector<double>& v) {
    double d2 = 0.0;
    for (size_t i = 0; i < u.size(); ++i) d2 += (u[i] - v[i]) * (u[i] - v[i]);
    return std::exp(-d2 / (2.0 * sigma * sigma));
  };
  double aa = 0.0;
  for (const auto& u : a)
    for (const auto& v : a) aa += kern(u, v);
  double bb = 0.0;
  for (const auto& u : b)
    for (const auto& v : b) bb += kern(u, v);
  double ab = 0.0;
  for (const auto& u : a)
    for (const auto& v : b) ab += kern(u, v);
  const double m = static_cast<double>(a.size());
  const double n = static_cast<double>(b.size());
  return aa / (m * m) + bb / (n * n) - 2.0 * ab / (m * n);
}

Samples random_samples(util::Rng& rng, int max_count, int dim) {
  Samples out(1 + rng.below_int(max_count));
  for (auto& v : out) {
    v.resize(dim);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  }
  return out;
}

}  // namespace

TEST_CASE("rbf kernel values") {
  mmd::KernelConfig config;  // bandwidth 10 by default
  CHECK(config.bandwidth == 10.0);
  const std::vector<double> u = {0.3, -1.2, 0.0};
  CHECK(mmd::rbf_kernel(u, u, config) == 1.0);
  const std::vector<double> v = {1.3, 0.8, -0.4};
  CHECK(mmd::rbf_kernel(u, v, config) == mmd::rbf_kernel(v, u, config));
  // exp(-1/200), digits frozen from a series evaluation.
  CHECK(mmd::rbf_kernel({0.0}, {1.0}, config) ==
        doctest::Approx(0.99501247919268232).epsilon(1e-14));
  CHECK_THROWS_AS(mmd::rbf_kernel({0.0}, {0.0, 1.0}, config), ValidationError);
  mmd::KernelConfig bad;
  bad.bandwidth = 0.0;
  CHECK_THROWS_AS(mmd::rbf_kernel({0.0}, {1.0}, bad), ValidationError);
}

TEST_CASE("mmd2 of identical multisets is exactly zero") {
  mmd::KernelConfig config;
  const Samples a = {{0.1, 0.2}, {-1.0, 0.5}, {2.0, -0.3}};
  CHECK(mmd::mmd2_biased(a, a, config) == 0.0);
}

TEST_CASE("singleton groups expand by hand") {
  mmd::KernelConfig config;
  config.bandwidth = 2.0;
  const Samples a = {{0.0, 0.0}};
  const Samples b = {{1.0, 1.0}};
  // Oracle: expanding the three kernel means for singletons gives
  // 1 + 1 - 2 k(a, b).
  const double expected = 2.0 - 2.0 * std::exp(-2.0 / (2.0 * 4.0));
  CHECK(mmd::mmd2_biased(a, b, config) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("matches the reference double-loop estimator") {
  util::Rng rng(7);
  mmd::KernelConfig config;
  for (int trial = 0; trial < 200; ++trial) {
    config.bandwidth = trial % 2 == 0 ? 10.0 : 1.5;
    const int dim = 1 + rng.below_int(4);
    const Samples a = random_samples(rng, 10, dim);
    const Samples b = random_samples(rng, 10, dim);
    const double got = mmd::mmd2_biased(a, b, config);
    const double want = reference_mmd2(a, b, config.bandwidth);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
    CHECK(got >= -1e-12);
  }
}

TEST_CASE("clearly distinct samples give strictly positive mmd2") {
  util::Rng rng(33);
  mmd::KernelConfig config;
  config.bandwidth = 1.5;
  for (int trial = 0; trial < 60; ++trial) {
    const int dim = 1 + rng.below_int(3);
    Samples a = random_samples(rng, 8, dim);
    Samples b = a;
    b.push_back(std::vector<double>(dim, 4.0));  // an outlier only B has
    CHECK(mmd::mmd2_biased(a, b, config) > 1e-12);
  }
}

TEST_CASE("argument order does not change the value, bit for bit") {
  util::Rng rng(21);
  mmd::KernelConfig config;
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + rng.below_int(3);
    const Samples a = random_samples(rng, 6, dim);
    const Samples b = random_samples(rng, 6, dim);
    CHECK(mmd::mmd2_biased(a, b, config) == mmd::mmd2_biased(b, a, config));
  }
}

TEST_CASE("gradient matches central finite differences") {
  util::Rng rng(11);
  mmd::KernelConfig config;
  config.bandwidth = 1.7;
  const double step = 1e-5;
  int instances = 0;
  while (instances < 120) {
    const int dim = 1 + rng.below_int(4);
    Samples a = random_samples(rng, 10, dim);
    Samples b = random_samples(rng, 10, dim);
    const auto grad = mmd::mmd2_gradient(a, b, config);
    CHECK(grad.value ==
          doctest::Approx(mmd::mmd2_biased(a, b, config)).epsilon(1e-12));
    auto check_coord = [&](Samples& samples, size_t i, size_t d, double analytic) {
      const double saved = samples[i][d];
      samples[i][d] = saved + step;
      const double up = mmd::mmd2_biased(a, b, config);
      samples[i][d] = saved - step;
      const double down = mmd::mmd2_biased(a, b, config);
      samples[i][d] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double scale = std::max({1e-6, std::abs(analytic), std::abs(numeric)});
      CHECK(std::abs(analytic - numeric) / scale < 1e-4);
    };
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t d = 0; d < a[i].size(); ++d) check_coord(a, i, d, grad.grad_a[i][d]);
    for (size_t i = 0; i < b.size(); ++i)
      for (size_t d = 0; d < b[i].size(); ++d) check_coord(b, i, d, grad.grad_b[i][d]);
    ++instances;
  }
}

TEST_CASE("gradient is zero for coincident all-zero samples") {
  mmd::KernelConfig config;
  const Samples a = {{0.0, 0.0}, {0.0, 0.0}};
  const Samples b = {{0.0, 0.0}};
  const auto grad = mmd::mmd2_gradient(a, b, config);
  for (const auto& g : grad.grad_a)
    for (double v : g) CHECK(v == 0.0);
  for (const auto& g : grad.grad_b)
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("moving a singleton toward the other group lowers mmd2") {
  mmd::KernelConfig config;
  config.bandwidth = 1.0;
  const Samples a = {{0.0}};
  const Samples b = {{1.0}};
  const auto grad = mmd::mmd2_gradient(a, b, config);
  // Directional derivative along (mean(B) - a) must be non-positive.
  const double direction = b[0][0] - a[0][0];
  CHECK(grad.grad_a[0][0] * direction <= 0.0);
}

TEST_CASE("marginal penalty splits by z and skips degenerate batches") {
  mmd::KernelConfig config;
  const Samples rows = {{0.1, 0.9}, {0.2, 0.8}, {0.6, 0.4}, {0.9, 0.1}};
  const std::vector<int> z = {0, 1, 0, 1};
  const auto penalty = mmd::marginal_penalty(rows, z, config);
  CHECK_FALSE(penalty.skipped);
  // Oracle: manual partition plus the reference estimator.
  const Samples group0 = {rows[0], rows[2]};
  const Samples group1 = {rows[1], rows[3]};
  CHECK(penalty.value ==
        doctest::Approx(reference_mmd2(group0, group1, config.bandwidth))
            .epsilon(1e-10));

  const auto skipped = mmd::marginal_penalty(rows, {1, 1, 1, 1}, config);
  CHECK(skipped.skipped);
  CHECK(skipped.value == 0.0);

  const Samples same = {{0.5}, {0.5}, {0.5}};
  CHECK(mmd::marginal_penalty(same, {0, 1, 0}, config).value ==
        doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("conditional penalty sums per-y terms") {
  mmd::KernelConfig config;
  util::Rng rng(3);
  Samples rows;
  std::vector<int> z, y;
  for (int i = 0; i < 12; ++i) {
    rows.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    z.push_back(i % 2);
    y.push_back((i / 2) % 2);
  }
  const auto penalty = mmd::conditional_penalty(rows, z, y, config);
  CHECK_FALSE(penalty.skipped);
  // Oracle: manual per-y partitions and the reference estimator.
  double expected = 0.0;
  for (int label = 0; label < 2; ++label) {
    Samples g0, g1;
    for (size_t i = 0; i < rows.size(); ++i) {
      if (y[i] != label) continue;
      (z[i] == 0 ? g0 : g1).push_back(rows[i]);
    }
    expected += reference_mmd2(g0, g1, config.bandwidth);
  }
  CHECK(penalty.value == doctest::Approx(expected).epsilon(1e-10));

  // A batch with only y=0 rows equals the marginal penalty on those rows.
  Samples only0;
  std::vector<int> z0, y0;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (y[i] != 0) continue;
    only0.push_back(rows[i]);
    z0.push_back(z[i]);
    y0.push_back(0);
  }
  CHECK(mmd::conditional_penalty(only0, z0, y0, config).value ==
        doctest::Approx(mmd::marginal_penalty(only0, z0, config).value)
            .epsilon(1e-14));

  // Missing cells contribute zero with the skipped flag: make the y=0
  // stratum single-sided in z.
  std::vector<int> z_partial = z;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (y[i] == 0) z_partial[i] = 1;
  }
  const auto partial = mmd::conditional_penalty(rows, z_partial, y, config);
  CHECK(partial.skipped);
}

TEST_CASE("penalties ignore within-group row order") {
  mmd::KernelConfig config;
  util::Rng rng(17);
  Samples rows;
  std::vector<int> z, y;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({rng.uniform(-1.0, 1.0)});
    z.push_back(rng.below_int(2));
    y.push_back(rng.below_int(2));
  }
  const double base = mmd::conditional_penalty(rows, z, y, config).value;
  // Permute within a (y, z) cell: swap two rows sharing labels if any.
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = i + 1; j < rows.size(); ++j) {
      if (z[i] == z[j] && y[i] == y[j]) {
        std::swap(rows[i], rows[j]);
        CHECK(mmd::conditional_penalty(rows, z, y, config).value ==
              doctest::Approx(base).epsilon(1e-12));
        return;
      }
    }
  }
}

TEST_CASE("marginal penalty gradient matches finite differences") {
  mmd::KernelConfig config;
  config.bandwidth = 3.0;
  util::Rng rng(5);
  Samples rows;
  std::vector<int> z, y;
  for (int i = 0; i < 8; ++i) {
    rows.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    z.push_back(i % 2);
    y.push_back((i / 3) % 2);
  }
  const double step = 1e-5;
  for (const bool conditional : {false, true}) {
    const auto grad =
        conditional ? mmd::conditional_penalty_gradient(rows, z, y, config)
                    : mmd::marginal_penalty_gradient(rows, z, config);
    for (size_t i = 0; i < rows.size(); ++i) {
      for (size_t d = 0; d < rows[i].size(); ++d) {
        const double saved = rows[i][d];
        rows[i][d] = saved + step;
        const double up =
            conditional ? mmd::conditional_penalty(rows, z, y, config).value
                        : mmd::marginal_penalty(rows, z, config).value;
        rows[i][d] = saved - step;
        const double down =
            conditional ? mmd::conditional_penalty(rows, z, y, config).value
                        : mmd::marginal_penalty(rows, z, config).value;
        rows[i][d] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double analytic = grad.row_grads[i][d];
        const double scale = std::max({1e-6, std::abs(analytic), std::abs(numeric)});
        CHECK(std::abs(analytic - numeric) / scale < 1e-4);
      }
    }
  }
}
