#include "eivglm/diag_rank1.hpp"

#include <cmath>

#include "eivglm/errors.hpp"

namespace eivglm {

void DiagRank1Precision::validate() const {
  if (diag.size() == 0) throw domain_error("DiagRank1Precision: empty diag");
  if (direction.size() != diag.size())
    throw domain_error("DiagRank1Precision: direction/diag length mismatch");
  if (!diag.allFinite() || !direction.allFinite() || !std::isfinite(scale))
    throw domain_error("DiagRank1Precision: non-finite entries");
  if (scale < 0.0) throw domain_error("DiagRank1Precision: negative scale");
  if ((diag.array() < 1e-12).any())
    throw domain_error("DiagRank1Precision: diag entry below 1e-12");
}

Eigen::VectorXd solve_diag_rank1(const DiagRank1Precision& prec,
                                 const Eigen::VectorXd& h) {
  prec.validate();
  if (h.size() != prec.diag.size())
    throw domain_error("solve_diag_rank1: rhs length mismatch");
  const Eigen::ArrayXd dinv = prec.diag.array().inverse();
  Eigen::VectorXd x = (dinv * h.array()).matrix();
  if (prec.scale == 0.0) return x;
  const Eigen::VectorXd dv = (dinv * prec.direction.array()).matrix();
  const double denom = 1.0 + prec.scale * prec.direction.dot(dv);
  x -= (prec.scale * prec.direction.dot(x) / denom) * dv;
  return x;
}

Eigen::VectorXd sample_gaussian_diag_rank1(const DiagRank1Precision& prec,
                                           const Eigen::VectorXd& h,
                                           RngStream& rng) {
  prec.validate();
  if (h.size() != prec.diag.size())
    throw domain_error("sample_gaussian_diag_rank1: rhs length mismatch");
  const Eigen::Index p = prec.diag.size();
  const Eigen::VectorXd mean = solve_diag_rank1(prec, h);
  const Eigen::VectorXd z = sample_std_normal_vec(p, rng);

  const bool rank1 = prec.scale != 0.0 &&
                     prec.direction.squaredNorm() != 0.0;
  if (!rank1) {
    // M is diagonal: independent coordinates.
    return mean + (z.array() / prec.diag.array().sqrt()).matrix();
  }

  // Cholesky of M = diag(d) + w w^T via a rank-one update of diag(sqrt(d)).
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p, p);
  L.diagonal() = prec.diag.array().sqrt();
  Eigen::VectorXd w = std::sqrt(prec.scale) * prec.direction;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double ljj = L(j, j);
    const double r = std::hypot(ljj, w[j]);
    const double c = r / ljj;
    const double s = w[j] / ljj;
    L(j, j) = r;
    for (Eigen::Index k = j + 1; k < p; ++k) {
      L(k, j) = (L(k, j) + s * w[k]) / c;
      w[k] = c * w[k] - s * L(k, j);
    }
  }
  // x = L^{-T} z has covariance (L L^T)^{-1} = M^{-1}.
  const Eigen::VectorXd noise =
      L.transpose().triangularView<Eigen::Upper>().solve(z);
  return mean + noise;
}

}  // namespace eivglm
