#include "uballoc/fluid.hpp"

#include <cmath>
#include <string>

#include "uballoc/common.hpp"

namespace uballoc {

namespace detail {

void clamp_or_throw(std::vector<double>& z, double c) {
  for (double& v : z) {
    if (v < 0.0) {
      if (v <= -1e-9) {
        throw NumericalError("fluid component " + std::to_string(v) +
                             " at c = " + std::to_string(c) +
                             " is beyond roundoff; use a smaller step");
      }
      v = 0.0;
    }
  }
}

}  // namespace detail

void fluid_rhs(std::span<const double> z, std::uint32_t d,
               std::span<double> out) {
  using detail::ipow;
  double p_m2 = 0.0;  // P_{k-2}^d
  double p_m1 = 0.0;  // P_{k-1}^d
  double prefix = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    prefix += z[k];
    const double p_k = ipow(prefix, d);
    out[k] = 2.0 * p_m1 - p_m2 - p_k;
    p_m2 = p_m1;
    p_m1 = p_k;
  }
}

namespace {

FluidSolution integrate_once(std::uint32_t d, double c_end, double h,
                             std::size_t k_max) {
  const std::size_t dim = k_max + 1;
  FluidSolution sol;
  sol.k_max = k_max;
  sol.h = h;

  std::vector<double> z(dim, 0.0);
  z[0] = 1.0;
  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);

  const auto steps =
      static_cast<std::uint64_t>(std::ceil(c_end / h - 1e-12));
  sol.c.reserve(steps + 1);
  sol.z.reserve(steps + 1);
  sol.c.push_back(0.0);
  sol.z.push_back(z);

  double c = 0.0;
  for (std::uint64_t s = 0; s < steps; ++s) {
    const double step = (s + 1 == steps) ? c_end - c : h;
    fluid_rhs(z, d, k1);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = z[i] + 0.5 * step * k1[i];
    fluid_rhs(tmp, d, k2);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = z[i] + 0.5 * step * k2[i];
    fluid_rhs(tmp, d, k3);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = z[i] + step * k3[i];
    fluid_rhs(tmp, d, k4);
    for (std::size_t i = 0; i < dim; ++i) {
      z[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    c = (s + 1 == steps) ? c_end : c + step;
    detail::clamp_or_throw(z, c);
    sol.c.push_back(c);
    sol.z.push_back(z);
  }
  return sol;
}

}  // namespace

FluidSolution integrate_fluid(const FluidParams& params) {
  if (params.d == 0) throw ConfigError("d must be positive");
  if (!(params.c_end >= 0.0)) throw ConfigError("c_end must be non-negative");
  if (!(params.h > 0.0)) throw ConfigError("step must be positive");

  std::size_t k_max = params.k_max;
  const bool automatic = k_max == 0;
  if (automatic) {
    k_max = 8 + static_cast<std::size_t>(std::ceil(4.0 * params.c_end));
  }
  for (;;) {
    FluidSolution sol = integrate_once(params.d, params.c_end, params.h, k_max);
    if (!automatic || sol.final_z().back() < params.tail_tol) return sol;
    k_max += 8;  // tail too heavy; widen and redo
  }
}

double empty_fraction_closed_form(double c, std::uint32_t d) {
  if (d == 0) throw ConfigError("d must be positive");
  if (d == 1) return std::exp(-c);
  const double dd = static_cast<double>(d);
  return std::pow((dd - 1.0) * c + 1.0, -1.0 / (dd - 1.0));
}

}  // namespace uballoc
