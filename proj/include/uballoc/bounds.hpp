#pragma once

#include <array>
#include <cstdint>

#include "uballoc/common.hpp"

// Closed-form bound calculators. Logarithms are natural throughout; anything
// involving binomial coefficients or large exponents is evaluated in log
// space so m up to 10^9 stays finite.

namespace uballoc {

// Expected balls in the emptiest ceil(x*n) bins is at most x^d * m.
double subset_upper_bound(double x, std::uint32_t d, std::uint64_t m);

// P(Binomial(m, x^d) >= k): chance the emptiest-subset total reaches k.
double subset_tail_bound(double x, std::uint32_t d, std::uint64_t m,
                         std::uint64_t k);

struct SubsetLowerBound {
  double value;
  int case_index;  // 1: xn > d, 2: 1 < xn <= d, 3: xn == 1
};

// Lower bound for the same expectation; the case split follows x*n against d.
SubsetLowerBound subset_lower_bound(double x, std::uint64_t n, std::uint32_t d,
                                    std::uint64_t m);

// Simplified-argument variant 3^{-d} x^{d+1} m / (6 - 4x).
double subset_lower_sketch(double x, std::uint32_t d, std::uint64_t m);

// Its building block s * x / (6 - 4x) for s good steps.
double subset_lower_building_block(double s, double x);

struct MaxLoadBound {
  double value;
  double denominator;
  bool in_regime;  // false when the denominator is not positive
};

// Max-load bound (2+eps) ln n / (ln ln n - ln d - ln c), fixed d and c.
MaxLoadBound max_load_bound(double c, double d, std::uint64_t n, double eps);

// Variant with denominator ln(2+eps) + ln ln n - ln c - ln d, for growing
// c(n), d(n).
MaxLoadBound max_load_bound_growing(double c, double d, std::uint64_t n,
                                    double eps);

// (e^{beta-1} beta^{-beta})^{c d}
double chernoff_upper(double beta, double c, double d);

struct SwapBound {
  double gap;    // delta * n / (d - 1)
  double bound;  // e^{-delta}
};

SwapBound swap_gap_and_bound(double delta, std::uint64_t n, std::uint32_t d);

// Walk bias of the two-bin gap at the top of the ranking:
// (1+eps)/2 = (n^d - (n-1)^d) / (n^d - (n-2)^d), evaluated stably.
double bias_epsilon(std::uint64_t n, std::uint32_t d);

// ((1-eps)/(1+eps))^x: chance a +1-biased walk started at gap x hits 0.
double ruin_probability(double x, double eps);

struct ParadoxBound {
  double bound;     // (4d^2/n) e^{t d^2 / n}
  double c;         // t / (n ln n)
  double exponent;  // c d^2 - 1, the O(n^{c d^2 - 1}) scale for that t
};

ParadoxBound paradox_prob_bound(std::uint64_t t, std::uint64_t n,
                                std::uint32_t d);

struct EqualLoadParams {
  double delta = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double epsilon = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  std::uint64_t m_prime = 0;
  std::uint64_t t_steps = 0;
  std::uint64_t m = 0;
  std::uint64_t n = 0;
  std::uint32_t d = 2;
  std::uint64_t j = 1;  // target gap; j = 1 is the equal-load case
};

struct EqualLoadBound {
  bool precondition_satisfied = false;
  double value = 0.0;  // product of factors, clamped to 0 if any is <= 0
  std::array<double, 6> factors{};
  int failing_factor = -1;  // first non-positive factor, -1 if none
  double precondition_lhs = 0.0;
  double precondition_rhs = 0.0;
};

// Probability lower bound that two chosen bins sit exactly j apart after m
// placements, as a product of six exponential/antichain factors.
EqualLoadBound equal_load_bound(const EqualLoadParams& p);

// The asymptotic parameterization: t = n ln n / (2 d^2), alpha = beta =
// sqrt(m' ln n), lambda = sqrt(t ln n), gamma = (ln n)^{3/4},
// epsilon = delta^{(d+1)/(d-1)} / 32.
EqualLoadParams equal_load_params_asymptotic(double delta, std::uint64_t n,
                                             std::uint64_t m, std::uint32_t d,
                                             std::uint64_t j);

}  // namespace uballoc
