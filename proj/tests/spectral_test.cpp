#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dhnn/spectral.hpp"
#include "test_support.hpp"

using namespace dhnn;
using namespace dhnn::spectral;

TEST_CASE("pearson handles perfect correlation and anti-correlation") {
  Eigen::MatrixXd w(4, 2);
  w << 1, 1, 2, 2, 3, 3, 5, 5;
  CHECK(pearson_correlation(w).entries(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

  w.col(1) = -w.col(0);
  CHECK(pearson_correlation(w).entries(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson matches the closed form on a hand case") {
  Eigen::MatrixXd w(3, 2);
  w << 1, 1, 2, 2, 3, 4;
  // corr([1,2,3],[1,2,4]) = sqrt(27/28)
  CHECK(pearson_correlation(w).entries(0, 1) ==
        doctest::Approx(std::sqrt(27.0 / 28.0)).epsilon(1e-12));
}

TEST_CASE("pearson maps zero-variance columns to zero correlation") {
  Eigen::MatrixXd w(5, 3);
  w.col(0).setConstant(2.0);
  w.col(1) << 1, 2, 3, 4, 5;
  w.col(2) << 2, 1, 4, 3, 6;
  auto corr = pearson_correlation(w);
  CHECK(corr.entries(0, 1) == 0.0);
  CHECK(corr.entries(0, 2) == 0.0);
  CHECK(corr.entries(0, 0) == 1.0);
  corr.validate();
}

TEST_CASE("pearson rejects degenerate windows") {
  CHECK_THROWS_AS(pearson_correlation(Eigen::MatrixXd::Random(1, 3)), DataError);
  CHECK_THROWS_AS(pearson_correlation(Eigen::MatrixXd::Random(5, 1)), DataError);
}

TEST_CASE("mp_bounds evaluates the support formula") {
  auto [lo, hi] = mp_bounds(4.0, 1.0);
  CHECK(lo == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(hi == doctest::Approx(2.25).epsilon(1e-12));

  auto [lo2, hi2] = mp_bounds(4.0, 0.5);
  CHECK(lo2 == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(hi2 == doctest::Approx(1.125).epsilon(1e-12));

  auto [lo3, hi3] = mp_bounds(1e12, 1.0);
  CHECK(lo3 == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(hi3 == doctest::Approx(1.0).epsilon(1e-5));

  CHECK_THROWS_AS(mp_bounds(1.0, 1.0), DataError);
  CHECK_THROWS_AS(mp_bounds(0.5, 1.0), DataError);
}

TEST_CASE("identity correlation: no structural part, market takes the top eigenpair") {
  const int n = 10;
  CorrelationMatrix corr;
  corr.entries = Eigen::MatrixXd::Identity(n, n);
  corr.window_len = 100;
  auto dec = rmt_decompose(corr, 100);

  CHECK(dec.sigma2 == doctest::Approx(0.9).epsilon(1e-12));
  const double expected_plus = 0.9 * std::pow(1.0 + std::sqrt(0.1), 2.0);
  CHECK(dec.lambda_plus == doctest::Approx(expected_plus).epsilon(1e-12));
  CHECK(dec.lambda_plus > 1.0);  // all unit eigenvalues sit below the bound
  CHECK(dec.structural_part.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-12));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dec.market_part);
  CHECK((svd.singularValues().array() > 1e-10).count() <= 1);  // rank <= 1
  Eigen::MatrixXd sum = dec.noise_part + dec.market_part + dec.structural_part;
  CHECK((sum - corr.entries).norm() < 1e-10);
}

TEST_CASE("strong uniform correlation: one eigenvalue above the bound, none between") {
  const int n = 5;
  const double rho = 0.9;
  CorrelationMatrix corr;
  corr.entries = Eigen::MatrixXd::Constant(n, n, rho);
  corr.entries.diagonal().setOnes();
  auto dec = rmt_decompose(corr, 100);
  // spectrum: 1 + rho(n-1) once, 1 - rho repeated
  CHECK(dec.eigenvalues[0] == doctest::Approx(1.0 + rho * (n - 1)).epsilon(1e-10));
  CHECK(dec.eigenvalues[1] == doctest::Approx(1.0 - rho).epsilon(1e-10));
  CHECK(dec.eigenvalues[1] <= dec.lambda_plus);
  CHECK(dec.structural_part.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(dec.market_part(0, 1) == doctest::Approx(rho * 1.0).epsilon(0.05));
}

TEST_CASE("two planted blocks leave a block-signed structural part") {
  const int n = 8;
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(n, n, 0.1);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      c(i, j) = 0.7;
      c(i + 4, j + 4) = 0.5;
    }
  }
  c.diagonal().setOnes();
  CorrelationMatrix corr;
  corr.entries = c;
  auto dec = rmt_decompose(corr, 64);

  CHECK(dec.structural_part.cwiseAbs().maxCoeff() > 0.01);
  double within = 0.0, cross = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i != j) within += dec.structural_part(i, j) + dec.structural_part(i + 4, j + 4);
      cross += dec.structural_part(i, j + 4);
    }
  }
  CHECK(within > 0.0);
  CHECK(cross < 0.0);
}

TEST_CASE("rmt_decompose enforces the Q > 1 regime") {
  CorrelationMatrix corr;
  corr.entries = Eigen::MatrixXd::Identity(10, 10);
  CHECK_THROWS_AS(rmt_decompose(corr, 10), DataError);
  CHECK_THROWS_AS(rmt_decompose(corr, 5), DataError);
}

TEST_CASE("reconstruction and market identities hold on random correlation matrices") {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> n_pick(3, 24);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = n_pick(rng);
    CorrelationMatrix corr;
    corr.entries = testsup::random_correlation(n, rng);
    auto dec = rmt_decompose(corr, 4 * n);

    Eigen::MatrixXd sum = dec.noise_part + dec.market_part + dec.structural_part;
    CHECK((sum - corr.entries).norm() / corr.entries.norm() < 1e-8);

    auto eig = symmetric_eigen(corr.entries);
    Eigen::VectorXd v_max = eig.vectors.col(0);
    CHECK((dec.market_part * v_max - eig.values(0) * v_max).cwiseAbs().maxCoeff() < 1e-8);

    CHECK(std::is_sorted(dec.eigenvalues.begin(), dec.eigenvalues.end(), std::greater<>()));
  }
}

TEST_CASE("permuting series permutes the decomposition consistently") {
  std::mt19937_64 rng(23);
  const int n = 12;
  Eigen::MatrixXd c = testsup::random_correlation(n, rng);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) p(perm[static_cast<std::size_t>(i)], i) = 1.0;

  CorrelationMatrix corr;
  corr.entries = c;
  CorrelationMatrix permuted;
  permuted.entries = p * c * p.transpose();

  auto dec = rmt_decompose(corr, 5 * n);
  auto dec_p = rmt_decompose(permuted, 5 * n);
  CHECK((dec_p.structural_part - p * dec.structural_part * p.transpose()).cwiseAbs().maxCoeff() <
        1e-8);
  CHECK((dec_p.market_part - p * dec.market_part * p.transpose()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("eigenvector sign convention is deterministic") {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd c = testsup::random_correlation(6, rng);
  auto a = symmetric_eigen(c);
  auto b = symmetric_eigen(c);
  CHECK(a.vectors == b.vectors);
  for (Eigen::Index col = 0; col < a.vectors.cols(); ++col) {
    for (Eigen::Index row = 0; row < a.vectors.rows(); ++row) {
      if (a.vectors(row, col) != 0.0) {
        CHECK(a.vectors(row, col) > 0.0);
        break;
      }
    }
  }
}

TEST_CASE("MP law: most eigenvalues of a noise correlation matrix fall inside the support") {
  const int n = 200;
  const int m = 1000;
  std::mt19937_64 rng(424242);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd data(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) data(i, j) = gauss(rng);
  }
  auto corr = pearson_correlation(data);
  auto dec = rmt_decompose(corr, m);
  int inside = 0;
  for (double ev : dec.eigenvalues) {
    if (ev >= dec.lambda_minus && ev <= dec.lambda_plus) ++inside;
  }
  CHECK(static_cast<double>(inside) / n >= 0.95);
}
