#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uballoc/common.hpp"
#include "uballoc/engine.hpp"

// Executable counterparts of the proof constructions: the GREEDY-under-
// UNIFORM coupling, the influence-set/paradox trial, the gambler's-ruin swap
// trial, and a deterministic Monte Carlo replication harness. Replication
// seeds are derive_seed(base_seed, replication_index); aggregation is a
// serial fold in index order, so thread count never changes output bytes.

namespace uballoc {

// ---------------------------------------------------------------------------
// Coupling: GREEDY(m, n, d) against UNIFORM receiving one ball per slot of
// the same option stream (d*m balls). UNIFORM pointwise dominates GREEDY.

struct CoupleOutcome {
  AllocationState greedy;   // after m placements
  AllocationState uniform;  // after d*m placements (one per sampled slot)
  bool dominance = true;    // uniform.loads[i] >= greedy.loads[i] for all i
};

CoupleOutcome couple_uniform_greedy(std::uint64_t m, std::uint64_t n,
                                    std::uint32_t d, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Max-load bound check: fraction of GREEDY(c*n, n, d) runs whose max load
// reaches the high-probability bound.

struct MaxLoadTrialResult {
  std::uint64_t violations = 0;
  std::uint64_t runs = 0;
  double frequency = 0.0;
  double bound = 0.0;
  bool in_regime = true;  // n == 1 or non-positive denominator -> vacuous
};

MaxLoadTrialResult max_load_trial(double c, std::uint32_t d, std::uint64_t n,
                                  double eps, std::uint64_t runs,
                                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Influence set of a tracked pair over a sequence of option sets:
//   T_0 = {i, j};  T_t = T_{t-1} ∪ { x in S_t : S_t ∩ T_{t-1} != ∅ }.

struct InfluenceSet {
  std::vector<std::uint32_t> members;  // ascending, includes i and j

  struct Event {
    std::uint64_t t;                    // 1-based step index
    std::vector<std::uint32_t> added;   // new members (may be empty)
    bool contains_tracked;              // S_t sampled i or j itself
  };
  // One entry per step whose option set intersected T_{t-1}.
  std::vector<Event> log;

  // True when some step's option set touched the influence set and contained
  // i or j. Trials with chain == false provably cannot show a paradox: i and
  // j were never sampled, so only the seeded ball distinguishes the runs.
  bool chain = false;
};

InfluenceSet influence_set_evolve(std::uint32_t i, std::uint32_t j,
                                  const std::vector<OptionSet>& sets,
                                  std::uint64_t n);

// ---------------------------------------------------------------------------
// Paradox trial: run GREEDY twice from b+e_i and b+e_j on the identical
// option stream. Tie randomness is independent per run by default (keys
// derived from the trial seed); scripts pin it for worked examples.

struct ParadoxOptions {
  const AllocationState* base = nullptr;  // b; zero loads when null
  const std::vector<OptionSet>* option_script = nullptr;  // else drawn
  const TieScript* tie_script_ei = nullptr;  // run started from b+e_i
  const TieScript* tie_script_ej = nullptr;  // run started from b+e_j
  TieWeighting tie_weighting = TieWeighting::DistinctUniform;
};

struct ParadoxOutcome {
  std::uint64_t load_i_from_ei = 0;  // final load of bin i, run from b+e_i
  std::uint64_t load_i_from_ej = 0;  // final load of bin i, run from b+e_j
  bool paradox = false;              // load_i_from_ei <= load_i_from_ej
  InfluenceSet influence;
  AllocationState final_from_ei;
  AllocationState final_from_ej;
};

ParadoxOutcome paradox_trial(std::uint32_t i, std::uint32_t j, std::uint64_t m,
                             std::uint64_t n, std::uint32_t d,
                             std::uint64_t seed,
                             const ParadoxOptions& opts = {});

// ---------------------------------------------------------------------------
// Gambler trial: two tracked bins start gap0 apart; GREEDY runs m steps; did
// the initially-larger bin ever fall strictly below the other? Checked after
// every step, with early exit on the first swap.

struct GamblerOptions {
  // Full initial loads; when set, loads[bin_hi] - loads[bin_lo] must equal
  // gap0. Default: bin_hi at gap0, everything else 0.
  const AllocationState* initial = nullptr;
  std::uint32_t bin_hi = 0;
  std::uint32_t bin_lo = 1;
};

struct GamblerOutcome {
  bool swapped = false;   // loads[bin_hi] < loads[bin_lo] at some step
  bool hit_zero = false;  // gap reached 0 at some step
  std::int64_t final_gap = 0;
};

GamblerOutcome gambler_trial(std::uint64_t gap0, std::uint64_t n,
                             std::uint32_t d, std::uint64_t m,
                             std::uint64_t seed,
                             const GamblerOptions& opts = {});

// ---------------------------------------------------------------------------
// Replication harness.

enum class ExperimentKind {
  Couple,
  Paradox,
  Gambler,
  EqualLoads,
  Histogram,
  SubsetLoad,
};

const char* experiment_kind_name(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Histogram;
  PolicyKind policy = PolicyKind::Greedy;  // histogram / subset_load
  std::uint64_t m = 0;
  std::uint64_t n = 0;
  std::uint32_t d = 2;
  std::uint64_t replications = 1;
  std::uint64_t seed = 0;
  TieWeighting tie_weighting = TieWeighting::DistinctUniform;

  std::vector<double> x;  // subset_load: emptiest-fraction sizes
  std::vector<double> y;  // subset_load: load shares to invert
  double delta = -1.0;    // equal_loads exclusion; gambler gap via bound
  std::int64_t gap = -1;  // gambler: explicit start gap (overrides delta)
  std::vector<std::uint64_t> snapshots;  // histogram: empty fraction at times

  // paradox
  std::uint32_t track_i = 0;
  std::uint32_t track_j = 1;
  std::vector<std::uint64_t> base_loads;  // b; zeros when empty
  std::vector<OptionSet> option_script;   // shared option sets; drawn if empty
  TieScript tie_script_ei;  // used only when scripted_ties
  TieScript tie_script_ej;
  bool scripted_ties = false;
};

// Throws ConfigError when a field is missing/out of range for the kind.
void validate(const ExperimentConfig& cfg);

struct StatSummary {
  std::string name;
  double mean = 0.0;
  double variance = 0.0;  // sample variance; 0 when R == 1
  double ci_half = 0.0;   // 1.96 * sqrt(variance / R)
};

struct EstimateReport {
  std::string kind;
  std::uint64_t replications = 0;
  std::uint64_t base_seed = 0;
  bool variance_defined = false;  // false when R == 1
  std::vector<StatSummary> stats;
  std::vector<std::pair<std::string, double>> extras;  // named aggregates

  // Per-replication observations, row r aligned with stats' names.
  std::vector<std::uint64_t> rep_seeds;
  std::vector<std::vector<double>> observations;

  // Scripted paradox with R == 1: the two runs' full final loads.
  std::vector<std::uint64_t> final_loads_ei;
  std::vector<std::uint64_t> final_loads_ej;

  // Diagnostics only; never serialized into comparable output bytes.
  double wall_seconds = 0.0;
};

// R replications on up to `threads` workers. Identical (config, threads=k)
// and (config, threads=1) produce identical reports.
EstimateReport run_experiment(const ExperimentConfig& cfg, unsigned threads = 1);

}  // namespace uballoc
