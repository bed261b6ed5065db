#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "uballoc/engine.hpp"
#include "uballoc/rankstats.hpp"
#include "uballoc/rng.hpp"

using namespace uballoc;

namespace {

AllocationState random_state(std::uint64_t n, std::uint64_t max_load,
                             std::uint64_t seed) {
  Xoshiro256pp g(seed);
  std::vector<std::uint64_t> loads(n);
  for (auto& v : loads) v = g.bounded(max_load + 1);
  return AllocationState::from_loads(std::move(loads));
}

}  // namespace

TEST_CASE("ranked_view sorts non-increasing with index-order tie ranks") {
  AllocationState st = AllocationState::from_loads({1, 3, 3, 0});
  RankedView rv = ranked_view(st);
  CHECK(rv.ranked_loads == std::vector<std::uint64_t>{3, 3, 1, 0});
  // equal loads rank by ascending original index: bin 1 before bin 2
  CHECK(rv.label_map == std::vector<std::uint32_t>{1, 2, 0, 3});
  REQUIRE(rv.levels.size() == 3);
  CHECK(rv.levels[0].load == 3);
  CHECK(rv.levels[0].first == 0);
  CHECK(rv.levels[0].count == 2);
  CHECK(rv.levels[1].load == 1);
  CHECK(rv.levels[1].count == 1);
  CHECK(rv.levels[2].load == 0);
  CHECK(rv.levels[2].first == 3);
}

TEST_CASE("ranked_view's label map is a permutation reproducing the sort") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    AllocationState st = random_state(97, 6, seed);
    RankedView rv = ranked_view(st);
    REQUIRE(rv.label_map.size() == 97);
    std::vector<bool> seen(97, false);
    for (std::size_t p = 0; p < 97; ++p) {
      CHECK(rv.ranked_loads[p] == st.loads[rv.label_map[p]]);
      CHECK_FALSE(seen[rv.label_map[p]]);
      seen[rv.label_map[p]] = true;
      if (p > 0) CHECK(rv.ranked_loads[p - 1] >= rv.ranked_loads[p]);
    }
    std::uint64_t level_total = 0;
    for (const auto& lv : rv.levels) level_total += lv.count;
    CHECK(level_total == 97);
  }
}

TEST_CASE("load_histogram counts bins per load") {
  CHECK(load_histogram(AllocationState::zeros(5)) ==
        std::vector<std::uint64_t>{5});
  CHECK(load_histogram(AllocationState::from_loads({2, 2, 0})) ==
        std::vector<std::uint64_t>{1, 0, 2});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    AllocationState st = random_state(50, 9, seed);
    std::vector<std::uint64_t> h = load_histogram(st);
    std::uint64_t bins = 0, balls = 0;
    for (std::size_t k = 0; k < h.size(); ++k) {
      bins += h[k];
      balls += k * h[k];
    }
    CHECK(bins == 50);
    CHECK(balls == st.balls_placed);
  }
}

TEST_CASE("least_subset_load sums the emptiest ceil(x*n) bins") {
  AllocationState st = AllocationState::from_loads({5, 1, 2});
  CHECK(least_subset_load(st, 0.0) == 0);
  CHECK(least_subset_load(st, 1.0) == 8);
  CHECK(least_subset_load(st, 1.0 / 3.0) == 1);  // one emptiest bin
  CHECK(least_subset_load(st, 0.5) == 3);        // ceil(1.5) = 2 bins: 1 + 2
  CHECK(least_subset_load(st, 0.34) == 3);       // ceil(1.02) = 2 bins

  // monotone in x
  AllocationState big = random_state(200, 12, 3);
  std::uint64_t prev = 0;
  for (int i = 0; i <= 40; ++i) {
    std::uint64_t v = least_subset_load(big, i / 40.0);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(prev == big.balls_placed);
}

TEST_CASE("ceil_fraction is hardened against representation slop") {
  CHECK(detail::ceil_fraction(0.0, 5) == 0);
  CHECK(detail::ceil_fraction(1.0, 7) == 7);
  CHECK(detail::ceil_fraction(0.5, 4) == 2);
  CHECK(detail::ceil_fraction(0.1, 10) == 1);
  // 0.3 * 10 is 2.9999999999999996 in binary; the intended subset is 3 bins
  CHECK(detail::ceil_fraction(0.3, 10) == 3);
  CHECK(detail::ceil_fraction(1.0 / 3.0, 3) == 1);
  CHECK(detail::ceil_fraction(2.0 / 3.0, 3) == 2);
}

TEST_CASE("least_fraction_for_share inverts the subset-load curve") {
  AllocationState st = AllocationState::from_loads({0, 0, 3, 1});  // m = 4
  CHECK(least_fraction_for_share(st, 0.0) == 0.0);
  // one quarter of the balls needs the three emptiest bins
  CHECK(least_fraction_for_share(st, 0.25) == doctest::Approx(0.75));
  // at least half the balls: even {0,0,1} holds only 1, need everything
  CHECK(least_fraction_for_share(st, 0.5) == doctest::Approx(1.0));
  CHECK(least_fraction_for_share(st, 1.0) == doctest::Approx(1.0));

  // consistency with least_subset_load, and monotonicity in y
  AllocationState big = random_state(300, 8, 5);
  double prev = 0.0;
  for (int i = 1; i <= 20; ++i) {
    const double y = i / 20.0;
    const double x = least_fraction_for_share(big, y);
    CHECK(x >= prev);
    prev = x;
    const double target = y * static_cast<double>(big.balls_placed);
    CHECK(static_cast<double>(least_subset_load(big, x)) >= target);
    if (x > 0.0) {
      const double x_minus =
          (std::round(x * 300.0) - 1.0) / 300.0;  // one bin fewer
      CHECK(static_cast<double>(least_subset_load(big, x_minus)) < target);
    }
  }
}

TEST_CASE("uniform_load_fraction is the Poisson occupancy law") {
  CHECK(uniform_load_fraction(0, 1000, 1000) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(uniform_load_fraction(2, 1000, 1000) ==
        doctest::Approx(std::exp(-1.0) / 2.0).epsilon(1e-12));
  CHECK(uniform_load_fraction(3, 2000, 1000) ==
        doctest::Approx(8.0 * std::exp(-2.0) / 6.0).epsilon(1e-12));
  double total = 0.0;
  for (std::uint64_t k = 0; k <= 50; ++k)
    total += uniform_load_fraction(k, 1000, 1000);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("equal_run_lengths lists ranked equal-load runs") {
  CHECK(equal_run_lengths(AllocationState::from_loads({1, 2, 0, 2, 1, 2})) ==
        std::vector<std::uint64_t>{3, 2, 1});
  CHECK(equal_run_lengths(AllocationState::from_loads({4, 2, 7})) ==
        std::vector<std::uint64_t>{1, 1, 1});
  CHECK(equal_run_lengths(AllocationState::from_loads({3, 3, 3, 3})) ==
        std::vector<std::uint64_t>{4});
}

TEST_CASE("equal_pair_stats counts within-level pairs above the cut") {
  AllocationState st = AllocationState::from_loads({1, 2, 0, 2, 1, 2});
  EqualPairStats all = equal_pair_stats(st, 0.0);
  CHECK(all.pair_count == 4);  // C(3,2) + C(2,2) = 3 + 1
  CHECK(all.max_multiplicity == 3);
  CHECK(all.bins_considered == 6);

  // delta = 1 - 1/n keeps a single bin: no pairs
  EqualPairStats one = equal_pair_stats(st, 1.0 - 1.0 / 6.0);
  CHECK(one.pair_count == 0);
  CHECK(one.max_multiplicity == 1);
  CHECK(one.bins_considered == 1);

  // excluding one third drops the two emptiest (one 0, one 1)
  AllocationState part = AllocationState::from_loads({0, 0, 0, 1, 1, 2});
  EqualPairStats cut = equal_pair_stats(part, 1.0 / 3.0);
  CHECK(cut.bins_considered == 4);  // loads kept: 0, 1, 1, 2
  CHECK(cut.pair_count == 1);
  CHECK(cut.max_multiplicity == 2);

  CHECK_THROWS_AS(equal_pair_stats(st, -0.1), ConfigError);
  CHECK_THROWS_AS(equal_pair_stats(st, 1.1), ConfigError);
}

TEST_CASE("equal pairs at delta = 0 equal the run-length identity") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    AllocationState st = random_state(80, 5, seed);
    EqualPairStats eq = equal_pair_stats(st, 0.0);
    std::uint64_t expect = 0, widest = 0;
    for (std::uint64_t r : equal_run_lengths(st)) {
      expect += r * (r - 1) / 2;
      widest = std::max(widest, r);
    }
    CHECK(eq.pair_count == expect);
    CHECK(eq.max_multiplicity == widest);
  }
}

TEST_CASE("greedy placement preserves ranked prefix counts") {
  // After a placement into the fullest option, the sorted load vector changes
  // in exactly one position: the first ranked slot holding the chosen load.
  // That slot is at or above every option's ranked position, so the count of
  // balls in the top-i ranked bins rises by exactly one for every i at or
  // past the best option's rank — replayed here against live traces.
  RunOptions opts;
  opts.record_trace = true;
  AllocationState init = AllocationState::from_loads({9, 2, 2, 0, 5, 1, 0, 3});
  opts.initial = &init;
  RunResult run_out = run(PolicyKind::Greedy, 600, 8, 3, 77, opts);

  AllocationState replay = init;
  for (const TraceRecord& rec : run_out.trace) {
    RankedView before = ranked_view(replay);

    // ranked position (0-based) of each option: first position whose label is
    // the option's bin
    std::size_t best_rank = before.ranked_loads.size();
    for (std::uint32_t b : rec.options) {
      for (std::size_t p = 0; p < before.label_map.size(); ++p) {
        if (before.label_map[p] == b) {
          best_rank = std::min(best_rank, p);
          break;
        }
      }
    }

    auto prefix = [](const std::vector<std::uint64_t>& v, std::size_t count) {
      return std::accumulate(v.begin(), v.begin() + count, std::uint64_t{0});
    };
    const std::uint64_t before_top = prefix(before.ranked_loads, best_rank + 1);

    ++replay.loads[rec.chosen];
    ++replay.balls_placed;
    RankedView after = ranked_view(replay);

    CHECK(prefix(after.ranked_loads, best_rank + 1) == before_top + 1);

    // the sorted vectors differ in exactly one coordinate, by one
    std::size_t diffs = 0;
    for (std::size_t p = 0; p < 8; ++p) {
      if (after.ranked_loads[p] != before.ranked_loads[p]) {
        ++diffs;
        CHECK(after.ranked_loads[p] == before.ranked_loads[p] + 1);
        CHECK(p <= best_rank);
      }
    }
    CHECK(diffs == 1);
  }
}
