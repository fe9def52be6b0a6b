#include "dhnn/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace dhnn::spectral {

void CorrelationMatrix::validate() const {
  const Eigen::Index n = entries.rows();
  if (n < 2 || entries.cols() != n) throw DataError("correlation matrix must be square, N >= 2");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(entries(i, i) - 1.0) > 1e-10) throw DataError("correlation diagonal must be 1");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(entries(i, j) - entries(j, i)) > 1e-10) throw DataError("correlation matrix not symmetric");
      if (entries(i, j) > 1.0 + 1e-10 || entries(i, j) < -1.0 - 1e-10) {
        throw DataError("correlation entry outside [-1, 1]");
      }
    }
  }
}

EigenDecomposition symmetric_eigen(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DataError("eigendecomposition needs a square matrix");
  if (!m.isApprox(m.transpose(), 1e-10)) throw DataError("eigendecomposition needs a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) throw NumericError("symmetric eigendecomposition failed");

  const Eigen::Index n = m.rows();
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  // Solver returns ascending order; flip to descending and fix vector signs
  // so the first nonzero component is positive.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - i);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (v(k) != 0.0) {
        if (v(k) < 0.0) v = -v;
        break;
      }
    }
    out.vectors.col(i) = v;
  }
  return out;
}

CorrelationMatrix pearson_correlation(const Eigen::MatrixXd& window, long window_end) {
  const Eigen::Index m = window.rows();
  const Eigen::Index n = window.cols();
  if (m < 2) throw DataError("correlation window needs at least 2 rows");
  if (n < 2) throw DataError("correlation needs at least 2 series");

  Eigen::MatrixXd centered = window.rowwise() - window.colwise().mean();
  Eigen::VectorXd sd(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    sd(c) = std::sqrt(centered.col(c).squaredNorm() / static_cast<double>(m));
  }

  CorrelationMatrix corr;
  corr.window_end = window_end;
  corr.window_len = static_cast<int>(m);
  corr.entries.setZero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    corr.entries(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double r = 0.0;
      if (sd(i) > 0.0 && sd(j) > 0.0) {
        r = centered.col(i).dot(centered.col(j)) / (static_cast<double>(m) * sd(i) * sd(j));
        r = std::clamp(r, -1.0, 1.0);
      }
      corr.entries(i, j) = r;
      corr.entries(j, i) = r;
    }
  }
  return corr;
}

std::pair<double, double> mp_bounds(double q_ratio, double sigma2) {
  if (q_ratio <= 1.0) {
    throw DataError("Marcenko-Pastur regime needs Q = T/N > 1, got Q = " + format_double(q_ratio));
  }
  if (sigma2 <= 0.0) throw DataError("mp_bounds needs sigma^2 > 0");
  const double root = std::sqrt(1.0 / q_ratio);
  const double lo = sigma2 * (1.0 - root) * (1.0 - root);
  const double hi = sigma2 * (1.0 + root) * (1.0 + root);
  return {lo, hi};
}

RmtDecomposition rmt_decompose(const CorrelationMatrix& corr, int window_len) {
  corr.validate();
  const Eigen::Index n = corr.size();
  const double q = static_cast<double>(window_len) / static_cast<double>(n);
  if (q <= 1.0) {
    throw DataError("RMT decomposition needs window length m > N (Q > 1); m = " +
                    std::to_string(window_len) + ", N = " + std::to_string(n));
  }

  EigenDecomposition eig = symmetric_eigen(corr.entries);

  RmtDecomposition out;
  out.q_ratio = q;
  out.eigenvalues.assign(eig.values.data(), eig.values.data() + n);
  const double lambda_max = eig.values(0);
  out.sigma2 = 1.0 - lambda_max / static_cast<double>(n);
  if (out.sigma2 > 0.0) {
    auto [lo, hi] = mp_bounds(q, out.sigma2);
    out.lambda_minus = lo;
    out.lambda_plus = hi;
  } else {
    // Rank-one dominated spectrum; no noise band remains.
    out.lambda_minus = 0.0;
    out.lambda_plus = 0.0;
  }

  out.top_multiplicity = 1;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (lambda_max - eig.values(i) <= 1e-12 * std::max(1.0, std::abs(lambda_max))) {
      ++out.top_multiplicity;
    }
  }

  out.noise_part.setZero(n, n);
  out.market_part.setZero(n, n);
  out.structural_part.setZero(n, n);
  // Market mode is always the single top eigenpair. Remaining eigenpairs go
  // to noise when lambda_i <= lambda_plus, otherwise to the structural part
  // (repeated top eigenvalues land there too, keeping the sum exact).
  out.market_part = lambda_max * eig.vectors.col(0) * eig.vectors.col(0).transpose();
  for (Eigen::Index i = 1; i < n; ++i) {
    const Eigen::MatrixXd outer = eig.values(i) * eig.vectors.col(i) * eig.vectors.col(i).transpose();
    if (eig.values(i) <= out.lambda_plus) {
      out.noise_part += outer;
    } else {
      out.structural_part += outer;
    }
  }
  return out;
}

}  // namespace dhnn::spectral
