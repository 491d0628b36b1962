#include "eivglm/polya_gamma.hpp"

#include <cmath>

#include "eivglm/errors.hpp"

namespace eivglm {

namespace {

constexpr double kTrunc = 2.0 / M_PI;  // series crossover point
constexpr int kSeriesTermsNonInteger = 200;

// log Phi(x) that stays accurate far into the left tail.
double log_norm_cdf(double x) {
  if (x > -30.0) {
    const double p = 0.5 * std::erfc(-x / M_SQRT2);
    if (p > 0.0) return std::log(p);
  }
  // Asymptotic expansion of the Mills ratio for large negative x.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * M_PI) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// Piecewise coefficients a_n(x) of the alternating series for the tilted
// Jacobi-type density on (0, infinity).
double a_coef(int n, double x) {
  const double d = n + 0.5;
  double logf;
  if (x <= kTrunc) {
    logf = std::log(M_PI) + std::log(d) +
           1.5 * (std::log(2.0 / M_PI) - std::log(x)) - 2.0 * d * d / x;
  } else {
    logf = std::log(M_PI) + std::log(d) - 0.5 * x * M_PI * M_PI * d * d;
  }
  return std::exp(logf);
}

// Probability that a proposal comes from the exponential tail branch.
double exp_branch_prob(double z) {
  const double t = kTrunc;
  const double K = M_PI * M_PI / 8.0 + 0.5 * z * z;
  const double logA = std::log(4.0) - std::log(M_PI) - z;
  const double w = std::sqrt(M_PI / 2.0);
  const double logf1 =
      logA + log_norm_cdf(w * (t * z - 1.0)) + std::log(K) + K * t;
  const double logf2 =
      logA + 2.0 * z + log_norm_cdf(-w * (t * z + 1.0)) + std::log(K) + K * t;
  const double q_over_p = std::exp(logf1) + std::exp(logf2);
  return 1.0 / (1.0 + q_over_p);
}

// Gamma(1/2, 1) restricted to (pi/2, infinity), by rejection from a shifted
// exponential.
double trunc_gamma_half(RngStream& rng) {
  const double c = M_PI / 2.0;
  for (;;) {
    const double x = 2.0 * rng.exponential() + c;
    const double g = std::sqrt(c / x);
    if (rng.uniform() <= g) return x;
  }
}

// Inverse Gaussian IG(1/z, 1) restricted to (0, kTrunc).
double trunc_inv_gauss(double z, RngStream& rng) {
  if (z * kTrunc < 1.0) {
    // Mode above the truncation point: sample the z = 0 case through a
    // truncated gamma and thin by exp(-z^2 x / 2).
    for (;;) {
      const double x = 1.0 / trunc_gamma_half(rng);
      if (std::log(rng.uniform_pos()) < -0.5 * z * z * x) return x;
    }
  }
  const double mu = 1.0 / z;
  double x = kTrunc + 1.0;
  while (x >= kTrunc) x = rng.inv_gaussian(mu, 1.0);
  return x;
}

}  // namespace

void PgParams::validate() const {
  if (!(b > 0.0) || !std::isfinite(b))
    throw domain_error("PgParams: shape b must be positive and finite");
  if (!std::isfinite(c)) throw domain_error("PgParams: tilt c must be finite");
}

double pg_mean(const PgParams& params) {
  params.validate();
  const double c = std::fabs(params.c);
  if (c < 1e-4) {
    // tanh(c/2) / (2c) = 1/4 - c^2/48 + O(c^4)
    return params.b * (0.25 - c * c / 48.0);
  }
  return params.b * std::tanh(0.5 * c) / (2.0 * c);
}

double sample_pg1(double c, RngStream& rng) {
  const double z = 0.5 * std::fabs(c);
  const double K = M_PI * M_PI / 8.0 + 0.5 * z * z;
  const double ratio = exp_branch_prob(z);
  for (;;) {
    double x;
    if (rng.uniform() < ratio) {
      x = kTrunc + rng.exponential() / K;
    } else {
      x = trunc_inv_gauss(z, rng);
    }
    // Alternating-series accept/reject (series envelope squeeze).
    double s = a_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= a_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += a_coef(n, x);
        if (y > s) break;  // reject this proposal
      }
    }
  }
}

double sample_pg(const PgParams& params, RngStream& rng) {
  params.validate();
  const double whole = std::floor(params.b);
  if (params.b == whole) {
    double total = 0.0;
    for (long k = 0; k < long(whole); ++k) total += sample_pg1(params.c, rng);
    return total;
  }
  return sample_pg_series(params, kSeriesTermsNonInteger, rng);
}

double sample_pg_series(const PgParams& params, int terms, RngStream& rng) {
  params.validate();
  if (terms < 1) throw domain_error("sample_pg_series: terms must be >= 1");
  const double q = params.c / (2.0 * M_PI);
  const double q2 = q * q;
  double total = 0.0;
  for (int k = 1; k <= terms; ++k) {
    const double d = k - 0.5;
    total += rng.gamma(params.b) / (d * d + q2);
  }
  return total / (2.0 * M_PI * M_PI);
}

}  // namespace eivglm
