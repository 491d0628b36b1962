#pragma once

#include <Eigen/Dense>

#include "eivglm/rng.hpp"

namespace eivglm {

// Precision matrix of the form  M = diag(d) + scale * v v^T  with d > 0 and
// scale >= 0.  All imputation conditionals in this project have this shape,
// which admits O(p) solves and O(p^2) exact sampling.
struct DiagRank1Precision {
  Eigen::VectorXd diag;       // d, entries must be >= 1e-12
  double scale = 0.0;         // must be >= 0 and finite
  Eigen::VectorXd direction;  // v, same length as diag

  void validate() const;
};

// Solves M x = h by Sherman-Morrison in O(p).
Eigen::VectorXd solve_diag_rank1(const DiagRank1Precision& prec,
                                 const Eigen::VectorXd& h);

// One draw from N(M^{ -1} h, M^{-1}).  The mean uses the O(p) solve; the
// noise part factors M = L L^T by a rank-one update of diag(sqrt(d)) and
// back-solves L^T x = z.  When scale == 0 this reduces to p independent
// univariate normals and stays O(p).
Eigen::VectorXd sample_gaussian_diag_rank1(const DiagRank1Precision& prec,
                                           const Eigen::VectorXd& h,
                                           RngStream& rng);

}  // namespace eivglm
