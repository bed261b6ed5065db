#include "uballoc/engine.hpp"

#include <string>

namespace uballoc {

OptionSet draw_option_set(RngStreams& streams, std::uint64_t n,
                          std::uint32_t d) {
  OptionSet s(d);
  for (auto& b : s) b = static_cast<std::uint32_t>(streams.options.bounded(n));
  return s;
}

namespace detail {

void throw_bad_script_winner(std::uint64_t t, std::uint32_t winner) {
  throw ScriptError("scripted tie winner " + std::to_string(winner + 1) +
                    " is not among the tied bins at step " + std::to_string(t));
}

}  // namespace detail

Simulation::Simulation(PolicyKind policy, std::uint64_t n, std::uint32_t d,
                       std::uint64_t seed, const RunOptions& opts)
    : policy_(policy),
      n_(n),
      d_(d),
      rng_(RngStreams::from_seed(seed)),
      record_trace_(opts.record_trace),
      trace_cap_(opts.trace_cap),
      option_script_(opts.option_script) {
  if (n == 0) throw ConfigError("bin count must be positive");
  if (n > kMaxBins) {
    throw CapacityError("bin count " + std::to_string(n) + " exceeds cap " +
                        std::to_string(kMaxBins));
  }
  if (d == 0) throw ConfigError("option count d must be positive");
  tie_.key = rng_.tie_key;
  tie_.weighting = opts.tie_weighting;
  tie_.script = opts.tie_script;
  if (opts.initial != nullptr) {
    if (opts.initial->loads.size() != n) {
      throw ConfigError("initial state has " +
                        std::to_string(opts.initial->loads.size()) +
                        " bins, expected " + std::to_string(n));
    }
    st_ = *opts.initial;
    st_.balls_placed = std::accumulate(st_.loads.begin(), st_.loads.end(),
                                       std::uint64_t{0});
  } else {
    st_ = AllocationState::zeros(n);
  }
  if (option_script_ != nullptr) {
    const std::size_t de = effective_d_();
    for (const OptionSet& s : *option_script_) {
      if (s.size() != de) {
        throw ConfigError("scripted option set size " +
                          std::to_string(s.size()) + " does not match d");
      }
      for (std::uint32_t b : s) {
        if (b >= n) throw ConfigError("scripted option bin out of range");
      }
    }
  }
  opt_buf_.assign(effective_d_(), 0);
}

const std::uint32_t* Simulation::scripted_options_() {
  if (script_pos_ >= option_script_->size()) {
    throw ScriptError("option script exhausted at step " +
                      std::to_string(st_.balls_placed + 1));
  }
  return (*option_script_)[script_pos_++].data();
}

void Simulation::run_for(std::uint64_t balls) {
  if (balls > kMaxBalls || placed_ > kMaxBalls - balls) {
    throw CapacityError("placement count exceeds cap " +
                        std::to_string(kMaxBalls));
  }
  if (record_trace_ && trace_.size() + balls > trace_cap_) {
    throw CapacityError(
        "tracing " + std::to_string(trace_.size() + balls) +
        " placements exceeds the trace cap " + std::to_string(trace_cap_) +
        "; raise RunOptions::trace_cap to override");
  }
  placed_ += balls;
  for (std::uint64_t i = 0; i < balls; ++i) step();
}

RunResult run(PolicyKind policy, std::uint64_t m, std::uint64_t n,
              std::uint32_t d, std::uint64_t seed, const RunOptions& opts) {
  Simulation sim(policy, n, d, seed, opts);
  sim.run_for(m);
  RunResult r;
  r.ties_seen = sim.ties_seen();
  r.trace = sim.trace();
  r.state = sim.take_state();
  return r;
}

}  // namespace uballoc
