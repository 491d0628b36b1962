#pragma once

#include "eivglm/rng.hpp"

namespace eivglm {

// Parameters of a Polya-Gamma distribution PG(b, c): shape b > 0, tilt c.
struct PgParams {
  double b = 1.0;
  double c = 0.0;
  void validate() const;
};

// E[PG(b, c)] = b / (2c) * tanh(c / 2), continuously extended to b/4 at c = 0.
double pg_mean(const PgParams& params);

// Exact draw for integer b (sum of b independent PG(1, c) draws, each by the
// alternating-series accept/reject method).  Non-integer b falls back to the
// truncated-series representation with 200 terms; the truncation bias of the
// mean is below b / (2 pi^2 (terms - 1/2)), about 0.1% of the mean.
double sample_pg(const PgParams& params, RngStream& rng);

// Truncated-series draw:
//   (1 / (2 pi^2)) * sum_{k=1..terms} g_k / ((k - 1/2)^2 + c^2 / (4 pi^2)),
// g_k iid Gamma(b, 1).  Used as an independent distributional oracle.
double sample_pg_series(const PgParams& params, int terms, RngStream& rng);

// One exact PG(1, c) draw.
double sample_pg1(double c, RngStream& rng);

}  // namespace eivglm
