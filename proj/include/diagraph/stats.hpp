#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "diagraph/errors.hpp"

namespace diagraph {

struct MwuResult {
  double u = 0.0;  // U statistic of the first sample
  double p = 1.0;  // two-sided
};

namespace detail {

// Midranks of the pooled samples, doubled so ties stay integral.
// Returns (2*rank for each pooled value, tie group sizes).
struct PooledRanks {
  std::vector<std::int64_t> doubled_ranks;  // pooled order: a then b
  std::vector<std::size_t> tie_sizes;
};

inline PooledRanks pooled_midranks(const std::vector<double>& a, const std::vector<double>& b) {
  struct Item {
    double value;
    std::size_t pos;
  };
  std::vector<Item> items;
  items.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) items.push_back({a[i], i});
  for (std::size_t i = 0; i < b.size(); ++i) items.push_back({b[i], a.size() + i});
  std::sort(items.begin(), items.end(),
            [](const Item& x, const Item& y) { return x.value < y.value; });

  PooledRanks out;
  out.doubled_ranks.resize(items.size(), 0);
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].value == items[i].value) ++j;
    // ranks i+1 .. j (1-based); midrank = (i+1 + j) / 2, doubled = i+1+j
    const std::int64_t doubled = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) out.doubled_ranks[items[k].pos] = doubled;
    out.tie_sizes.push_back(j - i);
    i = j;
  }
  return out;
}

}  // namespace detail

// Exact two-sided test: enumerates every assignment of the pooled ranks to
// the first sample and counts assignments at least as extreme as observed.
// Cost is C(n_a + n_b, n_a); intended for small samples.
inline MwuResult mann_whitney_exact(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw SpecError("Mann-Whitney needs two non-empty samples");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  const auto ranks = detail::pooled_midranks(a, b);

  std::int64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < na; ++i) doubled_rank_sum += ranks.doubled_ranks[i];
  // 2U = 2R - n_a(n_a+1)
  const std::int64_t doubled_u =
      doubled_rank_sum - static_cast<std::int64_t>(na * (na + 1));
  const std::int64_t doubled_max = static_cast<std::int64_t>(2 * na * nb);
  const std::int64_t doubled_lo = std::min(doubled_u, doubled_max - doubled_u);
  const std::int64_t doubled_hi = doubled_max - doubled_lo;

  // Walk all C(n, na) subsets with an index vector.
  std::vector<std::size_t> idx(na);
  for (std::size_t i = 0; i < na; ++i) idx[i] = i;
  std::uint64_t extreme = 0, total = 0;
  while (true) {
    std::int64_t sum = 0;
    for (std::size_t i : idx) sum += ranks.doubled_ranks[i];
    const std::int64_t u2 = sum - static_cast<std::int64_t>(na * (na + 1));
    if (u2 <= doubled_lo || u2 >= doubled_hi) ++extreme;
    ++total;
    std::size_t k = na;
    while (k > 0 && idx[k - 1] == (k - 1) + n - na) --k;
    if (k == 0) break;  // all positions maxed out
    --k;
    ++idx[k];
    for (std::size_t j = k + 1; j < na; ++j) idx[j] = idx[j - 1] + 1;
  }

  MwuResult r;
  r.u = static_cast<double>(doubled_u) / 2.0;
  r.p = std::min(1.0, static_cast<double>(extreme) / static_cast<double>(total));
  return r;
}

// Normal approximation with tie correction and continuity correction.
inline MwuResult mann_whitney_normal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw SpecError("Mann-Whitney needs two non-empty samples");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double n = na + nb;
  const auto ranks = detail::pooled_midranks(a, b);

  double rank_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    rank_sum += static_cast<double>(ranks.doubled_ranks[i]) / 2.0;
  }
  const double u = rank_sum - na * (na + 1.0) / 2.0;
  const double mean = na * nb / 2.0;

  double tie_term = 0.0;
  for (std::size_t t : ranks.tie_sizes) {
    const double td = static_cast<double>(t);
    tie_term += td * td * td - td;
  }
  const double variance = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));

  MwuResult r;
  r.u = u;
  if (variance <= 0.0) {
    r.p = 1.0;  // all pooled values tied
    return r;
  }
  const double z = std::max(0.0, std::abs(u - mean) - 0.5) / std::sqrt(variance);
  r.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

// Dispatch: exact enumeration for small samples, else the approximation.
inline MwuResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  if (std::max(a.size(), b.size()) < 9) return mann_whitney_exact(a, b);
  return mann_whitney_normal(a, b);
}

}  // namespace diagraph
