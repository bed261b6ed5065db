#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Deterministic approximation of the load histogram. z_k(c) tracks the
// fraction of bins at load k after c*n placements. Writing P_j for the prefix
// sum z_0 + ... + z_j (with P_j = 0 for j < 0), every component obeys
//   z_k' = 2 P_{k-1}^d - P_{k-2}^d - P_k^d
// and the truncated system leaks total bin mass at rate P_K^d - P_{K-1}^d,
// which stays negligible while z_K remains tiny.

namespace uballoc {

struct FluidParams {
  std::uint32_t d = 2;
  double c_end = 1.0;
  double h = 1e-3;        // fixed RK4 step
  std::size_t k_max = 0;  // 0: start at 8 + ceil(4*c_end), grow until the
                          // tail satisfies tail_tol
  double tail_tol = 1e-8;
};

struct FluidSolution {
  std::vector<double> c;               // grid, c[0] = 0, back() = c_end
  std::vector<std::vector<double>> z;  // z[i][k] at c[i]
  std::size_t k_max = 0;
  double h = 0.0;

  const std::vector<double>& final_z() const { return z.back(); }
};

// Right-hand side in one O(K) prefix pass.
void fluid_rhs(std::span<const double> z, std::uint32_t d,
               std::span<double> out);

// Classical fixed-step RK4 from z = (1, 0, ..., 0). Grid holds every step.
// Components dipping below -1e-9 raise NumericalError; smaller negative
// excursions are clamped to zero.
FluidSolution integrate_fluid(const FluidParams& params);

// z_0(c) in closed form: ((d-1)c + 1)^{-1/(d-1)} for d >= 2, e^{-c} for d = 1.
double empty_fraction_closed_form(double c, std::uint32_t d);

namespace detail {

// x^d with a fixed multiplication order, reproducible across platforms
inline double ipow(double x, std::uint32_t d) {
  double r = 1.0;
  for (std::uint32_t i = 0; i < d; ++i) r *= x;
  return r;
}

void clamp_or_throw(std::vector<double>& z, double c);

}  // namespace detail

}  // namespace uballoc
