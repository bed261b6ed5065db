#include "uballoc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "uballoc/bounds.hpp"
#include "uballoc/rankstats.hpp"

namespace uballoc {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ConfigError(msg);
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

CoupleOutcome couple_uniform_greedy(std::uint64_t m, std::uint64_t n,
                                    std::uint32_t d, std::uint64_t seed) {
  require(n >= 1, "n must be positive");
  require(d >= 1, "d must be positive");
  if (d != 0 && m > kMaxBalls / d) {
    throw CapacityError("d*m exceeds the supported ball count");
  }

  RngStreams rs = RngStreams::from_seed(seed);
  CoupleOutcome out;
  out.greedy = AllocationState::zeros(n);
  out.uniform = AllocationState::zeros(n);

  TieContext tie;
  tie.key = rs.tie_key;

  std::vector<std::uint32_t> buf(d);
  for (std::uint64_t t = 0; t < m; ++t) {
    for (std::uint32_t k = 0; k < d; ++k) {
      buf[k] = static_cast<std::uint32_t>(rs.options.bounded(n));
    }
    place_extreme(out.greedy, buf.data(), d, true, tie);
    for (std::uint32_t k = 0; k < d; ++k) {
      ++out.uniform.loads[buf[k]];
    }
  }
  out.uniform.balls_placed = m * d;

  out.dominance = true;
  for (std::uint64_t b = 0; b < n; ++b) {
    if (out.uniform.loads[b] < out.greedy.loads[b]) {
      out.dominance = false;
      break;
    }
  }
  return out;
}

MaxLoadTrialResult max_load_trial(double c, std::uint32_t d, std::uint64_t n,
                                  double eps, std::uint64_t runs,
                                  std::uint64_t seed) {
  require(runs >= 1, "runs must be positive");
  require(n >= 1, "n must be positive");
  require(d >= 1, "d must be positive");
  require(c > 0.0, "c must be positive");

  MaxLoadTrialResult out;
  out.runs = runs;
  if (n == 1) {
    // Single bin: max load is m and the bound is vacuous.
    out.in_regime = false;
    out.bound = std::numeric_limits<double>::infinity();
    return out;
  }
  const MaxLoadBound b = max_load_bound(c, static_cast<double>(d), n, eps);
  out.bound = b.value;
  out.in_regime = b.in_regime;
  if (!b.in_regime) {
    throw ConfigError("max-load bound denominator is not positive at these "
                      "c, d, n; trial is out of regime");
  }
  const auto m =
      static_cast<std::uint64_t>(std::llround(c * static_cast<double>(n)));
  for (std::uint64_t r = 0; r < runs; ++r) {
    Simulation sim(PolicyKind::Greedy, n, d, derive_seed(seed, r));
    sim.run_for(m);
    const auto& loads = sim.state().loads;
    const std::uint64_t max = *std::max_element(loads.begin(), loads.end());
    if (static_cast<double>(max) >= out.bound) ++out.violations;
  }
  out.frequency =
      static_cast<double>(out.violations) / static_cast<double>(runs);
  return out;
}

InfluenceSet influence_set_evolve(std::uint32_t i, std::uint32_t j,
                                  const std::vector<OptionSet>& sets,
                                  std::uint64_t n) {
  require(i != j, "tracked bins must differ");
  require(i < n && j < n, "tracked bins must be below n");

  std::vector<char> in(n, 0);
  in[i] = in[j] = 1;

  InfluenceSet out;
  std::uint64_t t = 0;
  for (const OptionSet& s : sets) {
    ++t;
    bool touches = false;
    bool tracked = false;
    for (std::uint32_t b : s) {
      require(b < n, "option set references a bin at or above n");
      if (in[b]) touches = true;
      if (b == i || b == j) tracked = true;
    }
    if (!touches) continue;
    InfluenceSet::Event ev;
    ev.t = t;
    ev.contains_tracked = tracked;
    for (std::uint32_t b : s) {
      if (!in[b]) {
        in[b] = 1;
        ev.added.push_back(b);
      }
    }
    std::sort(ev.added.begin(), ev.added.end());
    out.log.push_back(std::move(ev));
    if (tracked) out.chain = true;
  }
  for (std::uint64_t b = 0; b < n; ++b) {
    if (in[b]) out.members.push_back(static_cast<std::uint32_t>(b));
  }
  return out;
}

ParadoxOutcome paradox_trial(std::uint32_t i, std::uint32_t j, std::uint64_t m,
                             std::uint64_t n, std::uint32_t d,
                             std::uint64_t seed, const ParadoxOptions& opts) {
  require(n >= 2, "n must be at least 2");
  require(d >= 1, "d must be positive");
  require(i != j, "tracked bins must differ");
  require(i < n && j < n, "tracked bins must be below n");

  std::vector<OptionSet> drawn;
  const std::vector<OptionSet>* sets = opts.option_script;
  if (sets == nullptr) {
    RngStreams rs = RngStreams::from_seed(seed);
    drawn.reserve(m);
    for (std::uint64_t t = 0; t < m; ++t) {
      drawn.push_back(draw_option_set(rs, n, d));
    }
    sets = &drawn;
  } else if (sets->size() != m) {
    throw ConfigError("option script must supply exactly m sets");
  }

  AllocationState base =
      opts.base != nullptr ? *opts.base : AllocationState::zeros(n);
  require(base.loads.size() == n, "base configuration size must equal n");
  AllocationState init_ei = base;
  ++init_ei.loads[i];
  AllocationState init_ej = std::move(base);
  ++init_ej.loads[j];

  RunOptions run_ei;
  run_ei.option_script = sets;
  run_ei.tie_script = opts.tie_script_ei;
  run_ei.tie_weighting = opts.tie_weighting;
  run_ei.initial = &init_ei;
  RunOptions run_ej = run_ei;
  run_ej.tie_script = opts.tie_script_ej;
  run_ej.initial = &init_ej;

  // Shared option sets; tie keys differ unless scripts pin the ties.
  RunResult a = run(PolicyKind::Greedy, m, n, d, derive_seed(seed, 1), run_ei);
  RunResult b = run(PolicyKind::Greedy, m, n, d, derive_seed(seed, 2), run_ej);

  ParadoxOutcome out;
  out.load_i_from_ei = a.state.loads[i];
  out.load_i_from_ej = b.state.loads[i];
  out.paradox = out.load_i_from_ei <= out.load_i_from_ej;
  out.influence = influence_set_evolve(i, j, *sets, n);
  out.final_from_ei = std::move(a.state);
  out.final_from_ej = std::move(b.state);
  return out;
}

GamblerOutcome gambler_trial(std::uint64_t gap0, std::uint64_t n,
                             std::uint32_t d, std::uint64_t m,
                             std::uint64_t seed, const GamblerOptions& opts) {
  require(n >= 2, "n must be at least 2");
  require(d >= 1, "d must be positive");
  const std::uint32_t hi = opts.bin_hi;
  const std::uint32_t lo = opts.bin_lo;
  require(hi != lo, "tracked bins must differ");
  require(hi < n && lo < n, "tracked bins must be below n");

  AllocationState init;
  if (opts.initial != nullptr) {
    init = *opts.initial;
    require(init.loads.size() == n, "initial configuration size must equal n");
    require(init.loads[hi] >= init.loads[lo],
            "bin_hi must start at least as full as bin_lo");
    if (init.loads[hi] - init.loads[lo] != gap0) {
      throw ConfigError("gap0 must equal the initial tracked-bin difference");
    }
  } else {
    init = AllocationState::zeros(n);
    init.loads[hi] = gap0;
    init.balls_placed = gap0;
  }

  RunOptions ro;
  ro.initial = &init;
  Simulation sim(PolicyKind::Greedy, n, d, seed, ro);

  GamblerOutcome out;
  std::int64_t gap = static_cast<std::int64_t>(gap0);
  out.hit_zero = gap == 0;
  for (std::uint64_t t = 0; t < m; ++t) {
    const PlaceResult r = sim.step();
    if (r.chosen == hi) {
      ++gap;
    } else if (r.chosen == lo) {
      --gap;
      if (gap == 0) {
        out.hit_zero = true;
      } else if (gap < 0) {
        out.swapped = true;
        break;
      }
    }
  }
  out.final_gap = gap;
  return out;
}

// ---------------------------------------------------------------------------
// Replication harness.

const char* experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Couple: return "couple";
    case ExperimentKind::Paradox: return "paradox";
    case ExperimentKind::Gambler: return "gambler";
    case ExperimentKind::EqualLoads: return "equal_loads";
    case ExperimentKind::Histogram: return "histogram";
    case ExperimentKind::SubsetLoad: return "subset_load";
  }
  return "unknown";
}

namespace {

constexpr std::uint32_t kHistogramTopLoad = 8;  // frac_0 .. frac_8

std::uint64_t resolve_gambler_gap(const ExperimentConfig& cfg) {
  if (cfg.gap >= 0) return static_cast<std::uint64_t>(cfg.gap);
  const SwapBound sb = swap_gap_and_bound(cfg.delta, cfg.n, cfg.d);
  return static_cast<std::uint64_t>(std::ceil(sb.gap - 1e-9));
}

std::vector<std::string> stat_names(const ExperimentConfig& cfg) {
  std::vector<std::string> names;
  switch (cfg.kind) {
    case ExperimentKind::Couple:
      names = {"dominance", "greedy_zeros", "uniform_zeros", "greedy_max",
               "uniform_max"};
      break;
    case ExperimentKind::Paradox:
      names = {"paradox", "chain", "certified_paradox"};
      break;
    case ExperimentKind::Gambler:
      names = {"swapped", "hit_zero"};
      break;
    case ExperimentKind::EqualLoads:
      names = {"equal_pair_fraction", "equal_pairs", "max_multiplicity"};
      break;
    case ExperimentKind::Histogram:
      names = {"empty", "empty_frac", "max_load"};
      for (std::uint32_t k = 0; k <= kHistogramTopLoad; ++k) {
        names.push_back("frac_" + std::to_string(k));
      }
      for (std::uint64_t s : cfg.snapshots) {
        names.push_back("empty_frac_t" + std::to_string(s));
      }
      break;
    case ExperimentKind::SubsetLoad:
      for (double x : cfg.x) names.push_back("subset_load_x" + fmt_g(x));
      for (double y : cfg.y) names.push_back("least_frac_y" + fmt_g(y));
      break;
  }
  return names;
}

double empty_fraction(const AllocationState& st) {
  std::uint64_t zeros = 0;
  for (std::uint64_t v : st.loads) zeros += v == 0;
  return static_cast<double>(zeros) / static_cast<double>(st.n());
}

struct RepOutput {
  std::vector<double> obs;
  std::vector<std::uint64_t> final_ei;  // scripted paradox only
  std::vector<std::uint64_t> final_ej;
};

RepOutput run_one(const ExperimentConfig& cfg, std::uint64_t rep_seed) {
  RepOutput out;
  switch (cfg.kind) {
    case ExperimentKind::Couple: {
      const CoupleOutcome c =
          couple_uniform_greedy(cfg.m, cfg.n, cfg.d, rep_seed);
      std::uint64_t gz = 0, uz = 0, gm = 0, um = 0;
      for (std::uint64_t v : c.greedy.loads) {
        gz += v == 0;
        gm = std::max(gm, v);
      }
      for (std::uint64_t v : c.uniform.loads) {
        uz += v == 0;
        um = std::max(um, v);
      }
      out.obs = {c.dominance ? 1.0 : 0.0, static_cast<double>(gz),
                 static_cast<double>(uz), static_cast<double>(gm),
                 static_cast<double>(um)};
      break;
    }
    case ExperimentKind::Paradox: {
      ParadoxOptions po;
      po.tie_weighting = cfg.tie_weighting;
      AllocationState base;
      if (!cfg.base_loads.empty()) {
        base = AllocationState::from_loads(cfg.base_loads);
        po.base = &base;
      }
      if (!cfg.option_script.empty()) po.option_script = &cfg.option_script;
      if (cfg.scripted_ties) {
        po.tie_script_ei = &cfg.tie_script_ei;
        po.tie_script_ej = &cfg.tie_script_ej;
      }
      const ParadoxOutcome p = paradox_trial(cfg.track_i, cfg.track_j, cfg.m,
                                             cfg.n, cfg.d, rep_seed, po);
      const double paradox = p.paradox ? 1.0 : 0.0;
      const double chain = p.influence.chain ? 1.0 : 0.0;
      out.obs = {paradox, chain, p.paradox && !p.influence.chain ? 1.0 : 0.0};
      if (cfg.scripted_ties && cfg.replications == 1) {
        out.final_ei = p.final_from_ei.loads;
        out.final_ej = p.final_from_ej.loads;
      }
      break;
    }
    case ExperimentKind::Gambler: {
      const GamblerOutcome g = gambler_trial(resolve_gambler_gap(cfg), cfg.n,
                                             cfg.d, cfg.m, rep_seed);
      out.obs = {g.swapped ? 1.0 : 0.0, g.hit_zero ? 1.0 : 0.0};
      break;
    }
    case ExperimentKind::EqualLoads: {
      RunOptions ro;
      ro.tie_weighting = cfg.tie_weighting;
      const RunResult r =
          run(cfg.policy, cfg.m, cfg.n, cfg.d, rep_seed, ro);
      const EqualPairStats eq = equal_pair_stats(r.state, cfg.delta);
      const double considered = static_cast<double>(eq.bins_considered);
      const double all_pairs = considered * (considered - 1.0) / 2.0;
      const double frac =
          all_pairs > 0.0 ? static_cast<double>(eq.pair_count) / all_pairs
                          : 0.0;
      out.obs = {frac, static_cast<double>(eq.pair_count),
                 static_cast<double>(eq.max_multiplicity)};
      break;
    }
    case ExperimentKind::Histogram: {
      RunOptions ro;
      ro.tie_weighting = cfg.tie_weighting;
      Simulation sim(cfg.policy, cfg.n, cfg.d, rep_seed, ro);
      std::vector<double> snap_fracs;
      std::uint64_t placed = 0;
      for (std::uint64_t s : cfg.snapshots) {
        sim.run_for(s - placed);
        placed = s;
        snap_fracs.push_back(empty_fraction(sim.state()));
      }
      sim.run_for(cfg.m - placed);
      const AllocationState& st = sim.state();
      const std::vector<std::uint64_t> hist = load_histogram(st);
      const double n = static_cast<double>(cfg.n);
      std::uint64_t zeros = hist.empty() ? cfg.n : hist[0];
      out.obs = {static_cast<double>(zeros), static_cast<double>(zeros) / n,
                 static_cast<double>(hist.size() - 1)};
      for (std::uint32_t k = 0; k <= kHistogramTopLoad; ++k) {
        const double cnt =
            k < hist.size() ? static_cast<double>(hist[k]) : 0.0;
        out.obs.push_back(cnt / n);
      }
      for (double f : snap_fracs) out.obs.push_back(f);
      break;
    }
    case ExperimentKind::SubsetLoad: {
      RunOptions ro;
      ro.tie_weighting = cfg.tie_weighting;
      const RunResult r =
          run(cfg.policy, cfg.m, cfg.n, cfg.d, rep_seed, ro);
      for (double x : cfg.x) {
        out.obs.push_back(
            static_cast<double>(least_subset_load(r.state, x)));
      }
      for (double y : cfg.y) {
        out.obs.push_back(least_fraction_for_share(r.state, y));
      }
      break;
    }
  }
  return out;
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  require(cfg.replications >= 1, "replications must be at least 1");
  require(cfg.n >= 1, "n must be positive");
  require(cfg.d >= 1, "d must be positive");
  require(cfg.n <= kMaxBins, "n exceeds the supported bin count");
  require(cfg.m <= kMaxBalls, "m exceeds the supported ball count");
  switch (cfg.kind) {
    case ExperimentKind::Couple:
      if (cfg.d != 0 && cfg.m > kMaxBalls / cfg.d) {
        throw ConfigError("d*m exceeds the supported ball count");
      }
      break;
    case ExperimentKind::Paradox: {
      require(cfg.n >= 2, "n must be at least 2");
      require(cfg.track_i != cfg.track_j, "i and j must differ");
      require(cfg.track_i < cfg.n && cfg.track_j < cfg.n,
              "i and j must be below n");
      require(cfg.base_loads.empty() || cfg.base_loads.size() == cfg.n,
              "b must list one load per bin");
      if (!cfg.option_script.empty()) {
        require(cfg.option_script.size() == cfg.m,
                "option script must supply exactly m sets");
        for (const OptionSet& s : cfg.option_script) {
          require(s.size() == cfg.d, "scripted option sets must have d slots");
          for (std::uint32_t b : s) {
            require(b < cfg.n, "scripted option set references bin >= n");
          }
        }
      }
      break;
    }
    case ExperimentKind::Gambler:
      require(cfg.n >= 2, "n must be at least 2");
      if (cfg.gap < 0) {
        require(cfg.delta >= 0.0,
                "gambler needs gap >= 0 or delta >= 0 to derive it");
        require(cfg.d >= 2, "deriving the gap from delta requires d >= 2");
      }
      break;
    case ExperimentKind::EqualLoads:
      require(cfg.delta >= 0.0 && cfg.delta <= 1.0,
              "delta must lie in [0, 1]");
      break;
    case ExperimentKind::Histogram: {
      std::uint64_t prev = 0;
      for (std::uint64_t s : cfg.snapshots) {
        require(s >= prev, "snapshots must be non-decreasing");
        require(s <= cfg.m, "snapshots must not exceed m");
        prev = s;
      }
      break;
    }
    case ExperimentKind::SubsetLoad:
      require(!cfg.x.empty() || !cfg.y.empty(),
              "subset_load needs at least one x or y");
      for (double x : cfg.x) {
        require(x >= 0.0 && x <= 1.0, "x entries must lie in [0, 1]");
      }
      for (double y : cfg.y) {
        require(y > 0.0 && y <= 1.0, "y entries must lie in (0, 1]");
      }
      break;
  }
}

EstimateReport run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();

  const std::uint64_t r_total = cfg.replications;
  std::vector<RepOutput> results(r_total);
  std::vector<std::uint64_t> seeds(r_total);
  for (std::uint64_t r = 0; r < r_total; ++r) {
    seeds[r] = derive_seed(cfg.seed, r);
  }

  unsigned workers = std::max(1u, threads);
  workers = static_cast<unsigned>(
      std::min<std::uint64_t>(workers, r_total));

  if (workers == 1) {
    for (std::uint64_t r = 0; r < r_total; ++r) {
      try {
        results[r] = run_one(cfg, seeds[r]);
      } catch (const std::exception& e) {
        throw std::runtime_error("replication " + std::to_string(r) +
                                 " (seed " + std::to_string(seeds[r]) +
                                 ") failed: " + e.what());
      }
    }
  } else {
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex fail_mu;
    std::uint64_t fail_rep = std::numeric_limits<std::uint64_t>::max();
    std::string fail_msg;

    auto worker = [&]() {
      for (;;) {
        if (failed.load(std::memory_order_relaxed)) return;
        const std::uint64_t r = next.fetch_add(1, std::memory_order_relaxed);
        if (r >= r_total) return;
        try {
          results[r] = run_one(cfg, seeds[r]);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(fail_mu);
          if (r < fail_rep) {
            fail_rep = r;
            fail_msg = "replication " + std::to_string(r) + " (seed " +
                       std::to_string(seeds[r]) + ") failed: " + e.what();
          }
          failed.store(true, std::memory_order_relaxed);
        }
      }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    if (failed.load()) throw std::runtime_error(fail_msg);
  }

  // Serial fold in replication order: output is a function of (config, seed)
  // alone, never of scheduling.
  EstimateReport rep;
  rep.kind = experiment_kind_name(cfg.kind);
  rep.replications = r_total;
  rep.base_seed = cfg.seed;
  rep.variance_defined = r_total > 1;
  rep.rep_seeds = std::move(seeds);

  const std::vector<std::string> names = stat_names(cfg);
  const std::size_t n_stats = names.size();
  rep.observations.reserve(r_total);
  for (std::uint64_t r = 0; r < r_total; ++r) {
    if (results[r].obs.size() != n_stats) {
      throw std::runtime_error("internal: observation width mismatch");
    }
    rep.observations.push_back(std::move(results[r].obs));
  }
  if (r_total == 1) {
    rep.final_loads_ei = std::move(results[0].final_ei);
    rep.final_loads_ej = std::move(results[0].final_ej);
  }

  rep.stats.resize(n_stats);
  for (std::size_t s = 0; s < n_stats; ++s) {
    StatSummary& sum = rep.stats[s];
    sum.name = names[s];
    double acc = 0.0;
    for (std::uint64_t r = 0; r < r_total; ++r) {
      acc += rep.observations[r][s];
    }
    sum.mean = acc / static_cast<double>(r_total);
    if (r_total > 1) {
      double sq = 0.0;
      for (std::uint64_t r = 0; r < r_total; ++r) {
        const double dlt = rep.observations[r][s] - sum.mean;
        sq += dlt * dlt;
      }
      sum.variance = sq / static_cast<double>(r_total - 1);
    }
    sum.ci_half =
        1.96 * std::sqrt(sum.variance / static_cast<double>(r_total));
  }

  auto stat_sum = [&](std::size_t s) {
    double acc = 0.0;
    for (std::uint64_t r = 0; r < r_total; ++r) {
      acc += rep.observations[r][s];
    }
    return acc;
  };
  switch (cfg.kind) {
    case ExperimentKind::Couple:
      rep.extras.emplace_back("dominance_failures",
                              static_cast<double>(r_total) - stat_sum(0));
      break;
    case ExperimentKind::Paradox: {
      const ParadoxBound pb = paradox_prob_bound(cfg.m, cfg.n, cfg.d);
      rep.extras.emplace_back("paradox_bound", pb.bound);
      rep.extras.emplace_back("bound_exponent", pb.exponent);
      rep.extras.emplace_back("certified_trials",
                              static_cast<double>(r_total) - stat_sum(1));
      rep.extras.emplace_back("certified_violations", stat_sum(2));
      break;
    }
    case ExperimentKind::Gambler:
      rep.extras.emplace_back("gap0",
                              static_cast<double>(resolve_gambler_gap(cfg)));
      if (cfg.delta >= 0.0) {
        rep.extras.emplace_back("swap_bound", std::exp(-cfg.delta));
      }
      break;
    case ExperimentKind::EqualLoads: {
      const auto excluded = static_cast<double>(
          detail::ceil_fraction(cfg.delta, cfg.n));
      rep.extras.emplace_back("excluded_bins", excluded);
      rep.extras.emplace_back("bins_considered",
                              static_cast<double>(cfg.n) - excluded);
      break;
    }
    case ExperimentKind::Histogram:
    case ExperimentKind::SubsetLoad:
      break;
  }

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return rep;
}

}  // namespace uballoc
