#pragma once

// Two-tailed Mann-Whitney U test for two independent samples. U statistics
// come from midrank sums. The p-value is exact (full count of the U
// distribution by dynamic programming) for small tie-free samples and a
// normal approximation with tie and continuity corrections otherwise.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tscast/errors.hpp"

namespace tscast {

enum class MwMethod { Exact, NormalApprox };

inline const char* to_string(MwMethod m) {
  return m == MwMethod::Exact ? "exact" : "normal-approximation";
}

struct MannWhitneyResult {
  double u_statistic = 0.0;  // min(u_first, u_second)
  double u_first = 0.0;      // U of the first sample
  double u_second = 0.0;     // U of the second sample
  double p_two_tailed = 1.0;
  std::size_t n1 = 0, n2 = 0;
  MwMethod method = MwMethod::Exact;
};

namespace detail {

// Number of size-n1 rank subsets with each possible U value; cumulative
// count up to u_max. Classic recurrence
//   N(u; m, n) = N(u - n; m - 1, n) + N(u; m, n - 1).
inline double exact_count_le(std::size_t n1, std::size_t n2, std::size_t u_max) {
  const std::size_t u_cap = n1 * n2;
  std::vector<std::vector<std::vector<double>>> table(
      n1 + 1, std::vector<std::vector<double>>(n2 + 1, std::vector<double>(u_cap + 1, 0.0)));
  for (std::size_t m = 0; m <= n1; ++m) {
    for (std::size_t n = 0; n <= n2; ++n) {
      for (std::size_t u = 0; u <= u_cap; ++u) {
        if (m == 0 || n == 0) {
          table[m][n][u] = (u == 0) ? 1.0 : 0.0;
          continue;
        }
        double count = table[m][n - 1][u];
        if (u >= n) count += table[m - 1][n][u - n];
        table[m][n][u] = count;
      }
    }
  }
  double cum = 0.0;
  for (std::size_t u = 0; u <= std::min(u_max, u_cap); ++u) cum += table[n1][n2][u];
  return cum;
}

inline double binomial(std::size_t n, std::size_t k) {
  double result = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    result *= static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return result;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

/// Exact evaluation is used when the combined size is at most 25 and there
/// are no ties; the exact p is 2 * P(U <= min(U_a, U_b)), capped at 1.
inline MannWhitneyResult mann_whitney_two_tailed(std::span<const double> sample_a,
                                                 std::span<const double> sample_b) {
  if (sample_a.empty() || sample_b.empty()) {
    throw DataError("mann_whitney: both samples must be nonempty");
  }
  const std::size_t n1 = sample_a.size();
  const std::size_t n2 = sample_b.size();
  const std::size_t n = n1 + n2;

  struct Tagged {
    double value;
    bool first;
  };
  std::vector<Tagged> all;
  all.reserve(n);
  for (double v : sample_a) all.push_back({v, true});
  for (double v : sample_b) all.push_back({v, false});
  std::sort(all.begin(), all.end(),
            [](const Tagged& x, const Tagged& y) { return x.value < y.value; });

  // Midranks for tied runs; collect tie group sizes for the variance
  // correction along the way.
  std::vector<double> ranks(n);
  std::vector<std::size_t> tie_sizes;
  bool has_ties = false;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && all[j + 1].value == all[i].value) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[k] = midrank;
    if (j > i) {
      has_ties = true;
      tie_sizes.push_back(j - i + 1);
    }
    i = j + 1;
  }

  double rank_sum_a = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (all[k].first) rank_sum_a += ranks[k];
  }

  MannWhitneyResult out;
  out.n1 = n1;
  out.n2 = n2;
  out.u_first = rank_sum_a - 0.5 * static_cast<double>(n1 * (n1 + 1));
  out.u_second = static_cast<double>(n1 * n2) - out.u_first;
  out.u_statistic = std::min(out.u_first, out.u_second);

  if (!has_ties && n <= 25) {
    out.method = MwMethod::Exact;
    const double cum = detail::exact_count_le(
        n1, n2, static_cast<std::size_t>(std::floor(out.u_statistic)));
    const double total = detail::binomial(n, n1);
    out.p_two_tailed = std::min(1.0, 2.0 * cum / total);
    return out;
  }

  out.method = MwMethod::NormalApprox;
  const double mu = 0.5 * static_cast<double>(n1 * n2);
  double tie_term = 0.0;
  for (std::size_t t : tie_sizes) {
    tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
  }
  const double nn = static_cast<double>(n);
  const double var = (static_cast<double>(n1 * n2) / 12.0) *
                     ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    out.p_two_tailed = 1.0;  // every observation tied
    return out;
  }
  const double z = (out.u_statistic - mu + 0.5) / std::sqrt(var);
  out.p_two_tailed = std::min(1.0, 2.0 * detail::normal_cdf(z));
  return out;
}

}  // namespace tscast
