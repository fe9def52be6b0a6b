#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "dhnn/common.hpp"

namespace dhnn::spectral {

struct CorrelationMatrix {
  Eigen::MatrixXd entries;  // N x N, symmetric, unit diagonal
  long window_end = 0;
  int window_len = 0;

  Eigen::Index size() const { return entries.rows(); }
  void validate() const;
};

// Split of a correlation matrix into noise, market and structural parts.
// noise: eigenpairs at or below lambda_plus; market: the top eigenpair;
// structural: everything in between. The three parts sum back to the input.
struct RmtDecomposition {
  Eigen::MatrixXd noise_part;
  Eigen::MatrixXd market_part;
  Eigen::MatrixXd structural_part;
  double lambda_minus = 0.0;
  double lambda_plus = 0.0;
  double q_ratio = 0.0;  // window_len / N
  double sigma2 = 0.0;
  std::vector<double> eigenvalues;  // descending
  int top_multiplicity = 1;  // eigenvalues equal to the max within 1e-12
};

// Deterministic symmetric eigendecomposition: eigenvalues descending,
// each eigenvector's first nonzero component made positive.
struct EigenDecomposition {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns aligned with values
};
EigenDecomposition symmetric_eigen(const Eigen::MatrixXd& m);

// Pearson coefficients over the columns of an m x N window. Zero-variance
// columns correlate 0 with everything (1 on the diagonal).
CorrelationMatrix pearson_correlation(const Eigen::MatrixXd& window,
                                      long window_end = 0);

// Marcenko-Pastur support bounds: sigma^2 * (1 +/- sqrt(1/Q))^2.
std::pair<double, double> mp_bounds(double q_ratio, double sigma2);

RmtDecomposition rmt_decompose(const CorrelationMatrix& corr, int window_len);

}  // namespace dhnn::spectral
