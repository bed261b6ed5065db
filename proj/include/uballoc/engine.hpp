#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "uballoc/common.hpp"
#include "uballoc/rng.hpp"

// Sequential ball placement. Each step samples an option set of d bins
// (uniform, with replacement) and a policy picks the receiving bin:
//   UNIFORM  one draw, placed directly (d is not consulted)
//   GREEDY   fullest option wins; ties resolved by the tie rule
//   FAIR     emptiest option wins; ties resolved by the tie rule
// Tie rule: the winner is drawn uniformly over the distinct bins sharing the
// extreme load. A bin sampled twice gets no extra weight; the multiplicity-
// weighted alternative is available via TieWeighting::MultisetWeighted.

namespace uballoc {

enum class PolicyKind { Uniform, Fair, Greedy };

enum class TieWeighting { DistinctUniform, MultisetWeighted };

// d sampled bin indices, sampling order preserved, duplicates allowed.
using OptionSet = std::vector<std::uint32_t>;

struct AllocationState {
  std::vector<std::uint64_t> loads;
  std::uint64_t balls_placed = 0;  // always equals sum(loads)

  std::uint64_t n() const { return loads.size(); }

  static AllocationState zeros(std::uint64_t n) {
    AllocationState st;
    st.loads.assign(n, 0);
    return st;
  }

  static AllocationState from_loads(std::vector<std::uint64_t> loads) {
    AllocationState st;
    st.balls_placed =
        std::accumulate(loads.begin(), loads.end(), std::uint64_t{0});
    st.loads = std::move(loads);
    return st;
  }
};

struct TraceRecord {
  std::uint64_t t;  // balls_placed after this step
  OptionSet options;
  std::uint32_t chosen;
  bool tie_occurred;
  std::uint32_t tie_cardinality;  // distinct bins at the extreme load
};

using Trace = std::vector<TraceRecord>;

// Entry k names the bin that must win the k-th tie encountered. Entries
// beyond the script fall back to keyed randomness.
struct TieScript {
  std::vector<std::uint32_t> winners;
};

struct TieContext {
  std::uint64_t key = 0;
  TieWeighting weighting = TieWeighting::DistinctUniform;
  const TieScript* script = nullptr;
  std::uint64_t ties_seen = 0;
};

struct PlaceResult {
  std::uint32_t chosen;
  std::uint32_t tie_cardinality;
  bool tie_occurred;
};

OptionSet draw_option_set(RngStreams& streams, std::uint64_t n,
                          std::uint32_t d);

namespace detail {

inline thread_local std::vector<std::uint32_t> tie_scratch;

[[noreturn]] void throw_bad_script_winner(std::uint64_t t,
                                          std::uint32_t winner);

// Winner among `count` distinct candidates for step t: scripted if the script
// still has entries, else keyed randomness.
inline std::uint32_t resolve_tie(TieContext& tie, std::uint64_t t,
                                 const std::uint32_t* cand, std::size_t count) {
  const std::uint64_t k = tie.ties_seen++;
  if (tie.script != nullptr && k < tie.script->winners.size()) {
    const std::uint32_t w = tie.script->winners[k];
    for (std::size_t i = 0; i < count; ++i) {
      if (cand[i] == w) return w;
    }
    throw_bad_script_winner(t, w);
  }
  return cand[pick_index(tie_value(tie.key, t), count)];
}

}  // namespace detail

// Ball to an extreme-load bin of opts (max when take_max, else min).
// Candidate gathering dedups in O(d * distinct); d is small by design.
inline PlaceResult place_extreme(AllocationState& st, const std::uint32_t* opts,
                                 std::size_t d, bool take_max,
                                 TieContext& tie) {
  std::uint64_t best = st.loads[opts[0]];
  for (std::size_t k = 1; k < d; ++k) {
    const std::uint64_t v = st.loads[opts[k]];
    if (take_max ? v > best : v < best) best = v;
  }

  std::uint32_t stack_buf[16];
  std::uint32_t* cand = stack_buf;
  if (d > 16) {
    detail::tie_scratch.assign(d, 0);
    cand = detail::tie_scratch.data();
  }
  std::size_t distinct = 0;
  std::size_t slots = 0;
  for (std::size_t k = 0; k < d; ++k) {
    const std::uint32_t b = opts[k];
    if (st.loads[b] != best) continue;
    ++slots;
    bool dup = false;
    for (std::size_t i = 0; i < distinct; ++i) {
      if (cand[i] == b) {
        dup = true;
        break;
      }
    }
    if (!dup) cand[distinct++] = b;
  }

  const std::uint64_t t = st.balls_placed + 1;
  std::uint32_t chosen;
  if (distinct == 1) {
    chosen = cand[0];
  } else if (tie.weighting == TieWeighting::DistinctUniform ||
             tie.script != nullptr) {
    chosen = detail::resolve_tie(tie, t, cand, distinct);
  } else {
    // multiset weighting: draw over slots, keeping duplicates' weight
    ++tie.ties_seen;
    std::uint64_t j = pick_index(tie_value(tie.key, t), slots);
    chosen = opts[0];
    for (std::size_t k = 0; k < d; ++k) {
      if (st.loads[opts[k]] == best && j-- == 0) {
        chosen = opts[k];
        break;
      }
    }
  }

  ++st.loads[chosen];
  ++st.balls_placed;
  return PlaceResult{chosen, static_cast<std::uint32_t>(distinct),
                     distinct > 1};
}

inline PlaceResult place_greedy(AllocationState& st, const OptionSet& s,
                                TieContext& tie) {
  return place_extreme(st, s.data(), s.size(), true, tie);
}

inline PlaceResult place_fair(AllocationState& st, const OptionSet& s,
                              TieContext& tie) {
  return place_extreme(st, s.data(), s.size(), false, tie);
}

inline PlaceResult place_uniform(AllocationState& st, std::uint32_t bin) {
  ++st.loads[bin];
  ++st.balls_placed;
  return PlaceResult{bin, 1, false};
}

struct RunOptions {
  bool record_trace = false;
  std::uint64_t trace_cap = kTraceCap;
  TieWeighting tie_weighting = TieWeighting::DistinctUniform;
  const TieScript* tie_script = nullptr;
  const std::vector<OptionSet>* option_script = nullptr;
  const AllocationState* initial = nullptr;  // copied; size must equal n
};

// One allocation process. Option draws advance the option stream only; the
// trace, when enabled, holds one record per placement.
class Simulation {
 public:
  Simulation(PolicyKind policy, std::uint64_t n, std::uint32_t d,
             std::uint64_t seed, const RunOptions& opts = {});

  PlaceResult step() {
    const std::uint32_t de = effective_d_();
    const std::uint32_t* opts;
    if (option_script_ != nullptr) {
      opts = scripted_options_();
    } else {
      for (std::uint32_t k = 0; k < de; ++k) {
        opt_buf_[k] = static_cast<std::uint32_t>(rng_.options.bounded(n_));
      }
      opts = opt_buf_.data();
    }
    PlaceResult r;
    if (policy_ == PolicyKind::Uniform) {
      r = place_uniform(st_, opts[0]);
    } else {
      r = place_extreme(st_, opts, de, policy_ == PolicyKind::Greedy, tie_);
    }
    if (record_trace_) {
      trace_.push_back(TraceRecord{st_.balls_placed, OptionSet(opts, opts + de),
                                   r.chosen, r.tie_occurred,
                                   r.tie_cardinality});
    }
    return r;
  }

  void run_for(std::uint64_t balls);

  const AllocationState& state() const { return st_; }
  AllocationState&& take_state() { return std::move(st_); }
  const Trace& trace() const { return trace_; }
  std::uint64_t ties_seen() const { return tie_.ties_seen; }
  std::uint64_t n() const { return n_; }
  std::uint32_t d() const { return d_; }

 private:
  std::uint32_t effective_d_() const {
    return policy_ == PolicyKind::Uniform ? 1u : d_;
  }
  const std::uint32_t* scripted_options_();

  PolicyKind policy_;
  std::uint64_t n_;
  std::uint32_t d_;
  RngStreams rng_;
  TieContext tie_;
  AllocationState st_;
  std::vector<std::uint32_t> opt_buf_;
  bool record_trace_;
  std::uint64_t trace_cap_;
  std::uint64_t placed_ = 0;  // placements made by this Simulation
  const std::vector<OptionSet>* option_script_;
  std::size_t script_pos_ = 0;
  Trace trace_;
};

struct RunResult {
  AllocationState state;
  Trace trace;
  std::uint64_t ties_seen = 0;
};

// m placements of the given policy from the configured initial state.
RunResult run(PolicyKind policy, std::uint64_t m, std::uint64_t n,
              std::uint32_t d, std::uint64_t seed, const RunOptions& opts = {});

}  // namespace uballoc
