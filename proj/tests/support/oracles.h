// Copyright 2026 The promptlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTLAB_TESTS_SUPPORT_ORACLES_H_
#define PROMPTLAB_TESTS_SUPPORT_ORACLES_H_

// Slow reference implementations that share no code with the library.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace promptlab::testing {

using Rows = std::vector<std::vector<double>>;

// Cyclic Jacobi rotations on a symmetric matrix; returns its eigenvalues.
inline std::vector<double> jacobi_eigenvalues(Rows a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  return ev;
}

inline Rows cosine_oracle(const Rows& v) {
  const std::size_t n = v.size();
  Rows k(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t d = 0; d < v[i].size(); ++d) {
        dot += v[i][d] * v[j][d];
        ni += v[i][d] * v[i][d];
        nj += v[j][d] * v[j][d];
      }
      k[i][j] = dot / std::sqrt(ni * nj);
    }
  }
  return k;
}

inline double vendi_oracle(const Rows& v) {
  Rows k = cosine_oracle(v);
  const double n = static_cast<double>(v.size());
  for (auto& row : k)
    for (double& x : row) x /= n;
  double h = 0;
  for (double l : jacobi_eigenvalues(k)) {
    if (l > 1e-12) h -= l * std::log(l);
  }
  return std::exp(h);
}

// Exact two-sided binomial p under p = 1/2, by direct enumeration with the
// pmf built up multiplicatively in long double.
inline double binomial_oracle(long wins, long losses) {
  const long n = wins + losses;
  std::vector<long double> pmf(static_cast<std::size_t>(n + 1));
  long double c = 1;  // C(n, k)
  for (long k = 0; k <= n; ++k) {
    pmf[static_cast<std::size_t>(k)] = c;
    c = c * static_cast<long double>(n - k) / static_cast<long double>(k + 1);
  }
  long double total = 0, tail = 0;
  const long double obs = pmf[static_cast<std::size_t>(wins)];
  for (long double p : pmf) {
    total += p;
    if (p <= obs * (1 + 1e-12L)) tail += p;
  }
  return static_cast<double>(tail / total);
}

// 1-D Gaussian Frechet: (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2 with
// unbiased sample standard deviations.
inline double frechet_1d_oracle(const std::vector<double>& a,
                                const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& x) {
    double m = 0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::pair{m, std::sqrt(ss / static_cast<double>(x.size() - 1))};
  };
  auto [ma, sa] = moments(a);
  auto [mb, sb] = moments(b);
  return (ma - mb) * (ma - mb) + (sa - sb) * (sa - sb);
}

}  // namespace promptlab::testing

#endif  // PROMPTLAB_TESTS_SUPPORT_ORACLES_H_
