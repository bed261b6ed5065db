#include "uballoc/rankstats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace uballoc {

namespace detail {

std::uint64_t ceil_fraction(double x, std::uint64_t n) {
  if (x < 0.0 || x > 1.0) throw ConfigError("fraction must lie in [0, 1]");
  const double xn = x * static_cast<double>(n);
  // guard: an exactly-representable product must not round up
  const auto k = static_cast<std::uint64_t>(std::ceil(xn - 1e-9));
  return k > n ? n : k;
}

}  // namespace detail

RankedView ranked_view(const AllocationState& st) {
  const std::uint64_t n = st.n();
  RankedView view;
  view.label_map.resize(n);
  std::iota(view.label_map.begin(), view.label_map.end(), 0u);
  std::stable_sort(view.label_map.begin(), view.label_map.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return st.loads[a] > st.loads[b];
                   });
  view.ranked_loads.resize(n);
  for (std::uint64_t p = 0; p < n; ++p) {
    view.ranked_loads[p] = st.loads[view.label_map[p]];
  }
  for (std::uint64_t p = 0; p < n;) {
    std::uint64_t q = p;
    while (q < n && view.ranked_loads[q] == view.ranked_loads[p]) ++q;
    view.levels.push_back({view.ranked_loads[p], p, q - p});
    p = q;
  }
  return view;
}

std::vector<std::uint64_t> load_histogram(const AllocationState& st) {
  std::uint64_t max_load = 0;
  for (std::uint64_t v : st.loads) max_load = std::max(max_load, v);
  std::vector<std::uint64_t> hist(max_load + 1, 0);
  for (std::uint64_t v : st.loads) ++hist[v];
  return hist;
}

std::uint64_t least_subset_load(const AllocationState& st, double x) {
  const std::uint64_t k = detail::ceil_fraction(x, st.n());
  const auto hist = load_histogram(st);
  std::uint64_t remaining = k;
  std::uint64_t total = 0;
  for (std::uint64_t v = 0; v < hist.size() && remaining > 0; ++v) {
    const std::uint64_t take = std::min(remaining, hist[v]);
    total += take * v;
    remaining -= take;
  }
  return total;
}

double least_fraction_for_share(const AllocationState& st, double y) {
  if (y < 0.0 || y > 1.0) throw ConfigError("share must lie in [0, 1]");
  const double target = y * static_cast<double>(st.balls_placed);
  if (target <= 0.0) return 0.0;
  const auto hist = load_histogram(st);
  std::uint64_t bins = 0;
  double balls = 0.0;
  for (std::uint64_t v = 0; v < hist.size(); ++v) {
    if (hist[v] == 0) continue;
    const double level_total =
        static_cast<double>(v) * static_cast<double>(hist[v]);
    if (v > 0 && balls + level_total >= target - 1e-9) {
      const double need = (target - balls) / static_cast<double>(v);
      const auto j = static_cast<std::uint64_t>(std::ceil(need - 1e-9));
      bins += std::min(j, hist[v]);
      return static_cast<double>(bins) / static_cast<double>(st.n());
    }
    balls += level_total;
    bins += hist[v];
  }
  return 1.0;  // y == 1 lands here after consuming every level
}

double uniform_load_fraction(std::uint64_t k, std::uint64_t m,
                             std::uint64_t n) {
  if (n == 0) throw ConfigError("bin count must be positive");
  if (m == 0) return k == 0 ? 1.0 : 0.0;
  const double lambda = static_cast<double>(m) / static_cast<double>(n);
  const double kk = static_cast<double>(k);
  return std::exp(kk * std::log(lambda) - lambda - std::lgamma(kk + 1.0));
}

std::vector<std::uint64_t> equal_run_lengths(const AllocationState& st) {
  const auto hist = load_histogram(st);
  std::vector<std::uint64_t> runs;
  for (std::uint64_t v = hist.size(); v-- > 0;) {
    if (hist[v] > 0) runs.push_back(hist[v]);
  }
  return runs;
}

EqualPairStats equal_pair_stats(const AllocationState& st, double delta) {
  const auto hist = load_histogram(st);
  std::uint64_t exclude = detail::ceil_fraction(delta, st.n());
  EqualPairStats out{0, 0, st.n() - exclude};
  for (std::uint64_t v = 0; v < hist.size(); ++v) {
    std::uint64_t c = hist[v];
    const std::uint64_t cut = std::min(exclude, c);
    c -= cut;
    exclude -= cut;
    out.pair_count += c * (c - 1) / 2;
    out.max_multiplicity = std::max(out.max_multiplicity, c);
  }
  return out;
}

}  // namespace uballoc
