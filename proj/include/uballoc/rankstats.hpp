#pragma once

#include <cstdint>
#include <vector>

#include "uballoc/engine.hpp"

// Order statistics over a load vector. The ranked view lists loads in
// non-increasing order; human-facing ranked labels are 1-based positions in
// that order. Aggregates (histograms, subset sums, run lengths) depend only
// on the load multiset and are computed without sorting bin indices.

namespace uballoc {

struct RankedView {
  std::vector<std::uint64_t> ranked_loads;  // non-increasing
  std::vector<std::uint32_t> label_map;     // position -> original bin index

  struct Level {
    std::uint64_t load;
    std::uint64_t first;  // first ranked position of this load
    std::uint64_t count;
  };
  std::vector<Level> levels;  // descending by load
};

// Ties rank by ascending original index, making the view deterministic.
RankedView ranked_view(const AllocationState& st);

// count of bins at each load; index k holds the bins with load k
std::vector<std::uint64_t> load_histogram(const AllocationState& st);

// Total load of the ceil(x*n) emptiest bins, 0 <= x <= 1.
std::uint64_t least_subset_load(const AllocationState& st, double x);

// Smallest k/n such that the k emptiest bins hold at least y*m balls.
double least_fraction_for_share(const AllocationState& st, double y);

// P(load == k) for one bin after m uniform placements into n bins
// (Poisson form (m/n)^k e^{-m/n} / k!).
double uniform_load_fraction(std::uint64_t k, std::uint64_t m, std::uint64_t n);

// Lengths of maximal equal-load runs in ranked order, largest load first.
std::vector<std::uint64_t> equal_run_lengths(const AllocationState& st);

struct EqualPairStats {
  std::uint64_t pair_count;        // sum over loads v of C(c_v, 2)
  std::uint64_t max_multiplicity;  // largest equal-load class size
  std::uint64_t bins_considered;   // n minus the excluded emptiest bins
};

// Pair statistics over all bins except the ceil(delta*n) emptiest.
EqualPairStats equal_pair_stats(const AllocationState& st, double delta);

namespace detail {

// ceil(x*n) hardened against representation slop in x*n.
std::uint64_t ceil_fraction(double x, std::uint64_t n);

}  // namespace detail

}  // namespace uballoc
