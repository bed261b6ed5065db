#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace uballoc {

inline constexpr const char* kVersion = "0.1.0";

// Hard resource ceilings shared by the engine and the CLI.
inline constexpr std::uint64_t kMaxBins = 100'000'000;      // bins per state
inline constexpr std::uint64_t kMaxBalls = 10'000'000'000;  // placements per run
inline constexpr std::uint64_t kTraceCap = 10'000'000;      // traced placements

// A requested run exceeds a resource ceiling.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad parameter values or malformed configuration input.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A computation left its valid numeric domain.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A scripted run asked for something the process state cannot honor.
struct ScriptError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace uballoc
