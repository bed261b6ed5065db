#include "uballoc/bounds.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace uballoc {

namespace {

double ipow(double x, std::uint32_t e) {
  double r = 1.0;
  for (std::uint32_t i = 0; i < e; ++i) r *= x;
  return r;
}

void require(bool ok, const char* msg) {
  if (!ok) throw ConfigError(msg);
}

// Continued fraction for the regularized incomplete beta function
// (modified Lentz's method).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 400;
  constexpr double kEps = 3.0e-14;
  constexpr double kFpMin = 1.0e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int mi = 1; mi <= kMaxIter; ++mi) {
    const double m = static_cast<double>(mi);
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) return h;
  }
  throw NumericalError("incomplete beta continued fraction did not converge");
}

// Regularized incomplete beta I_x(a, b).
double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                        a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(log_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * betacf(a, b, x) / a;
  }
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double subset_upper_bound(double x, std::uint32_t d, std::uint64_t m) {
  require(x >= 0.0 && x <= 1.0, "x must lie in [0, 1]");
  require(d > 0, "d must be positive");
  return ipow(x, d) * static_cast<double>(m);
}

double subset_tail_bound(double x, std::uint32_t d, std::uint64_t m,
                         std::uint64_t k) {
  require(x >= 0.0 && x <= 1.0, "x must lie in [0, 1]");
  require(d > 0, "d must be positive");
  if (k == 0) return 1.0;
  if (k > m) return 0.0;
  const double p = ipow(x, d);
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  // P(Binomial(m, p) >= k) = I_p(k, m - k + 1)
  return betai(static_cast<double>(k), static_cast<double>(m - k + 1), p);
}

SubsetLowerBound subset_lower_bound(double x, std::uint64_t n, std::uint32_t d,
                                    std::uint64_t m) {
  require(x >= 0.0 && x <= 1.0, "x must lie in [0, 1]");
  require(n > 0, "n must be positive");
  require(d > 0, "d must be positive");
  const double xn = x * static_cast<double>(n);
  require(xn >= 1.0 - 1e-9, "x*n must be at least 1");
  const double md = static_cast<double>(m);
  SubsetLowerBound out{};
  if (std::fabs(xn - 1.0) < 1e-9) {
    out.case_index = 3;
    out.value = ipow(x, d + 1) * md;
  } else if (xn > static_cast<double>(d)) {
    out.case_index = 1;
    out.value = ipow(x, d + 1) * md /
                (2.0 * std::exp(1.0) * static_cast<double>(d));
  } else {
    out.case_index = 2;
    out.value = std::exp(-static_cast<double>(d)) * ipow(x, d) * md;
  }
  return out;
}

double subset_lower_sketch(double x, std::uint32_t d, std::uint64_t m) {
  require(x > 0.0 && x <= 1.0, "x must lie in (0, 1]");
  require(d > 0, "d must be positive");
  return ipow(1.0 / 3.0, d) * ipow(x, d + 1) * static_cast<double>(m) /
         (6.0 - 4.0 * x);
}

double subset_lower_building_block(double s, double x) {
  require(x > 0.0 && x <= 1.0, "x must lie in (0, 1]");
  require(s >= 0.0, "s must be non-negative");
  return s * x / (6.0 - 4.0 * x);
}

namespace {

MaxLoadBound finish_max_load(double ln_n, double eps, double denom) {
  MaxLoadBound out{};
  out.denominator = denom;
  out.in_regime = denom > 0.0;
  out.value = out.in_regime ? (2.0 + eps) * ln_n / denom
                            : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace

MaxLoadBound max_load_bound(double c, double d, std::uint64_t n, double eps) {
  require(n >= 2, "n must be at least 2");
  require(c > 0.0, "c must be positive");
  require(d >= 1.0, "d must be at least 1");
  require(eps > 0.0, "eps must be positive");
  const double ln_n = std::log(static_cast<double>(n));
  const double denom = std::log(ln_n) - std::log(d) - std::log(c);
  return finish_max_load(ln_n, eps, denom);
}

MaxLoadBound max_load_bound_growing(double c, double d, std::uint64_t n,
                                    double eps) {
  require(n >= 2, "n must be at least 2");
  require(c > 0.0, "c must be positive");
  require(d >= 1.0, "d must be at least 1");
  require(eps > 0.0, "eps must be positive");
  const double ln_n = std::log(static_cast<double>(n));
  const double denom =
      std::log(2.0 + eps) + std::log(ln_n) - std::log(c) - std::log(d);
  return finish_max_load(ln_n, eps, denom);
}

double chernoff_upper(double beta, double c, double d) {
  require(beta > 0.0, "beta must be positive");
  require(c > 0.0, "c must be positive");
  require(d > 0.0, "d must be positive");
  const double log_base = (beta - 1.0) - beta * std::log(beta);
  return std::exp(c * d * log_base);
}

SwapBound swap_gap_and_bound(double delta, std::uint64_t n, std::uint32_t d) {
  require(delta >= 0.0, "delta must be non-negative");
  require(n > 0, "n must be positive");
  require(d >= 2, "d must be at least 2");
  SwapBound out{};
  out.gap = delta * static_cast<double>(n) / static_cast<double>(d - 1);
  out.bound = std::exp(-delta);
  return out;
}

double bias_epsilon(std::uint64_t n, std::uint32_t d) {
  require(n >= 2, "n must be at least 2");
  require(d > 0, "d must be positive");
  // (n^d - (n-1)^d) / (n^d - (n-2)^d)
  //   = (1 - (1 - 1/n)^d) / (1 - (1 - 2/n)^d), evaluated with expm1/log1p so
  // n^d never materializes.
  const double nd = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double num = -std::expm1(dd * std::log1p(-1.0 / nd));
  const double den =
      n == 2 ? 1.0 : -std::expm1(dd * std::log1p(-2.0 / nd));
  const double ratio = num / den;
  return 2.0 * ratio - 1.0;
}

double ruin_probability(double x, double eps) {
  require(x >= 0.0, "x must be non-negative");
  require(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
  return std::pow((1.0 - eps) / (1.0 + eps), x);
}

ParadoxBound paradox_prob_bound(std::uint64_t t, std::uint64_t n,
                                std::uint32_t d) {
  require(n >= 2, "n must be at least 2");
  require(d > 0, "d must be positive");
  ParadoxBound out{};
  const double nd = static_cast<double>(n);
  const double d2 = static_cast<double>(d) * static_cast<double>(d);
  const double td = static_cast<double>(t);
  out.bound = (4.0 * d2 / nd) * std::exp(td * d2 / nd);
  out.c = td / (nd * std::log(nd));
  out.exponent = out.c * d2 - 1.0;
  return out;
}

EqualLoadBound equal_load_bound(const EqualLoadParams& p) {
  require(p.n >= 2, "n must be at least 2");
  require(p.d >= 2, "d must be at least 2");
  require(p.m_prime > 0, "m_prime must be positive");
  require(p.t_steps > 0, "t_steps must be positive");
  if (p.m_prime + p.t_steps != p.m) {
    throw ConfigError("m_prime + t_steps must equal m");
  }
  require(p.delta > 0.0 && p.delta <= 1.0, "delta must lie in (0, 1]");
  require(p.epsilon > 0.0, "epsilon must be positive");
  require(p.alpha > 0.0, "alpha must be positive");
  require(p.beta > 0.0, "beta must be positive");
  require(p.lambda > 0.0, "lambda must be positive");
  require(p.gamma > 0.0, "gamma must be positive");

  const double n = static_cast<double>(p.n);
  const double d = static_cast<double>(p.d);
  const double mp = static_cast<double>(p.m_prime);
  const double t = static_cast<double>(p.t_steps);

  EqualLoadBound out{};

  // Precondition: the emptiest-delta*n surplus must survive the adversarial
  // terms with room for the drift and fluctuation allowances.
  const double surplus =
      (ipow(p.delta, p.d) * mp - p.alpha) * p.delta / ((6.0 - 4.0 * p.delta) * n);
  const double spoil = (ipow(2.0, p.d) * ipow(p.epsilon, p.d) * mp + p.beta) /
                       (p.epsilon * n);
  out.precondition_lhs = surplus - spoil;
  out.precondition_rhs = p.epsilon * d * t + p.lambda;
  out.precondition_satisfied = out.precondition_lhs > out.precondition_rhs;

  // Six factors; each wants to be close to 1 as n grows.
  out.factors[0] = -std::expm1(-2.0 * p.alpha * p.alpha / mp);
  out.factors[1] = -std::expm1(-2.0 * p.beta * p.beta / mp);
  out.factors[2] = -std::expm1(-2.0 * p.lambda * p.lambda / t);
  out.factors[3] =
      1.0 - 2.0 * std::exp(-(p.gamma * p.gamma * n) /
                           (ipow(2.0, p.d + 3) * ipow(p.epsilon, p.d - 1) * t));
  out.factors[4] = 1.0 - (4.0 * d * d / n) * std::exp(t * d * d / n);
  if (p.j == 0) {
    out.factors[5] = 1.0;
  } else {
    const double q_tilde =
        2.0 * d * ipow(p.epsilon, p.d - 1) * t / n - p.gamma;
    if (!(q_tilde > 0.0)) {
      throw NumericalError(
          "biased-step budget 2 d eps^{d-1} t / n - gamma must be positive");
    }
    out.factors[5] =
        1.0 - static_cast<double>(p.j) *
                  std::sqrt(2.0 / (3.14159265358979323846 * q_tilde));
  }

  out.failing_factor = -1;
  double prod = 1.0;
  for (int i = 0; i < 6; ++i) {
    if (!(out.factors[i] > 0.0)) {
      if (out.failing_factor < 0) out.failing_factor = i;
    }
    prod *= out.factors[i];
  }
  out.value = out.failing_factor >= 0 ? 0.0 : prod;
  return out;
}

EqualLoadParams equal_load_params_asymptotic(double delta, std::uint64_t n,
                                             std::uint64_t m, std::uint32_t d,
                                             std::uint64_t j) {
  require(n >= 3, "n must be at least 3");
  require(d >= 2, "d must be at least 2");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  const double nd = static_cast<double>(n);
  const double ln_n = std::log(nd);
  const double d2 = static_cast<double>(d) * static_cast<double>(d);
  const auto t = static_cast<std::uint64_t>(std::llround(nd * ln_n / (2.0 * d2)));
  require(t > 0, "derived t must be positive");
  if (m <= t) throw ConfigError("m must exceed the derived settling time t");
  EqualLoadParams p{};
  p.delta = delta;
  p.n = n;
  p.m = m;
  p.d = d;
  p.j = j;
  p.t_steps = t;
  p.m_prime = m - t;
  const double mp = static_cast<double>(p.m_prime);
  p.alpha = std::sqrt(mp * ln_n);
  p.beta = p.alpha;
  p.lambda = std::sqrt(static_cast<double>(t) * ln_n);
  p.gamma = std::pow(ln_n, 0.75);
  p.epsilon = std::pow(delta, (static_cast<double>(d) + 1.0) /
                                  (static_cast<double>(d) - 1.0)) /
              32.0;
  return p;
}

}  // namespace uballoc
