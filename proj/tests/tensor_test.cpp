#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dhnn/tensor.hpp"

using namespace dhnn::neural;

namespace {

Eigen::MatrixXd rand_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  }
  return m;
}

// Central finite differences of a scalar graph against one parameter.
double fd_vs_ad(const std::function<Tensor()>& f, const Tensor& param) {
  Tensor loss = f();
  backward(loss);
  Eigen::MatrixXd analytic = param.grad();
  Eigen::MatrixXd values = param.value();
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      Eigen::MatrixXd bumped = values;
      bumped(i, j) += h;
      param.set_value(bumped);
      const double up = f().value()(0, 0);
      bumped(i, j) = values(i, j) - h;
      param.set_value(bumped);
      const double down = f().value()(0, 0);
      param.set_value(values);
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - analytic(i, j)) /
                                  std::max({std::abs(fd), std::abs(analytic(i, j)), 1.0}));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("forward values of the basic ops") {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Tensor ta = Tensor::constant(a);
  Tensor tb = Tensor::constant(b);
  CHECK((ta + tb).value() == (a + b).eval());
  CHECK((ta - tb).value() == (a - b).eval());
  CHECK(matmul(ta, tb).value() == (a * b).eval());
  CHECK(cmul(ta, tb).value() == a.cwiseProduct(b).eval());
  CHECK(scale(ta, 2.5).value() == (2.5 * a).eval());
  CHECK(transpose(ta).value() == a.transpose().eval());
  CHECK(sum_all(ta).value()(0, 0) == 10.0);
  CHECK(mean_all(ta).value()(0, 0) == 2.5);
}

TEST_CASE("shape mismatches are rejected with op names") {
  Tensor a = Tensor::zeros(2, 3);
  Tensor b = Tensor::zeros(3, 2);
  CHECK_THROWS_WITH_AS(a + b, doctest::Contains("add"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(cmul(a, b), doctest::Contains("cmul"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(matmul(a, a), doctest::Contains("matmul"), std::invalid_argument);
  CHECK_THROWS_AS(reshape(a, 4, 2), std::invalid_argument);
  CHECK_THROWS_AS(slice_rows(a, 1, 5), std::invalid_argument);
}

TEST_CASE("backward of sum(x^2) is 2x and accumulates over shared uses") {
  std::mt19937_64 rng(1);
  Tensor x = Tensor::parameter(rand_mat(3, 2, rng));
  backward(sum_all(cmul(x, x)));
  CHECK((x.grad() - 2.0 * x.value()).cwiseAbs().maxCoeff() < 1e-14);

  // y = sum(x) + sum(x): gradient 2 per element
  backward(sum_all(x) + sum_all(x));
  CHECK((x.grad().array() - 2.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("elu evaluates both branches and the boundary") {
  Eigen::MatrixXd v(1, 3);
  v << 1.0, 0.0, -1.0;
  Tensor t = Tensor::constant(v);
  Eigen::MatrixXd out = elu(t, 1.0).value();
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 0.0);
  CHECK(out(0, 2) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));

  // boundary derivative is the negative-branch limit alpha
  Tensor x0 = Tensor::parameter(Eigen::MatrixXd::Zero(1, 1));
  backward(sum_all(elu(x0, 0.7)));
  CHECK(x0.grad()(0, 0) == doctest::Approx(0.7));
}

TEST_CASE("softmax rows sum to one with strictly positive entries") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = Tensor::constant(rand_mat(4, 6, rng) * 50.0);  // exercise max-subtraction
    Eigen::MatrixXd y = softmax_rows(x).value();
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      CHECK(std::abs(y.row(i).sum() - 1.0) < 1e-12);
      CHECK(y.row(i).minCoeff() > 0.0);
    }
  }
}

TEST_CASE("structure ops: slice, concat, reshape round trips") {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd m = rand_mat(4, 5, rng);
  Tensor t = Tensor::constant(m);
  CHECK(slice_rows(t, 1, 2).value() == m.middleRows(1, 2).eval());
  CHECK(slice_cols(t, 2, 3).value() == m.middleCols(2, 3).eval());
  CHECK(concat_rows({slice_rows(t, 0, 2), slice_rows(t, 2, 2)}).value() == m);
  CHECK(concat_cols({slice_cols(t, 0, 1), slice_cols(t, 1, 4)}).value() == m);

  Eigen::MatrixXd flat = reshape(t, 1, 20).value();
  CHECK(flat(0, 7) == m(1, 2));  // row-major order
  CHECK(reshape(Tensor::constant(flat), 4, 5).value() == m);
}

TEST_CASE("gradients flow correctly through every primitive") {
  std::mt19937_64 rng(4);
  auto check = [&](const char* tag, const std::function<Tensor(const Tensor&)>& op,
                   Eigen::Index r, Eigen::Index c, bool positive_input = false) {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::MatrixXd v = rand_mat(r, c, rng);
      if (positive_input) v = v.array().abs() + 0.5;
      Tensor p = Tensor::parameter(v);
      const double err = fd_vs_ad([&] { return mean_all(op(p)); }, p);
      INFO(tag << " trial " << trial);
      CHECK(err < 1e-7);
    }
  };
  check("sigmoid", [](const Tensor& t) { return sigmoid(t); }, 3, 4);
  check("tanh", [](const Tensor& t) { return tanh(t); }, 3, 4);
  check("elu", [](const Tensor& t) { return elu(t, 0.3); }, 3, 4);
  check("abs", [](const Tensor& t) { return abs(t); }, 3, 4);
  check("softmax", [](const Tensor& t) { return softmax_rows(t); }, 3, 4);
  check("transpose", [](const Tensor& t) { return matmul(t, transpose(t)); }, 3, 4);
  check("rsqrt", [](const Tensor& t) { return rsqrt(t); }, 3, 2, /*positive=*/true);
  check("clamp_min", [](const Tensor& t) { return clamp_min(t, 0.25); }, 3, 3, true);
  check("reshape", [](const Tensor& t) { return reshape(t, 2, 6); }, 3, 4);
  check("slice", [](const Tensor& t) { return slice_cols(slice_rows(t, 1, 2), 1, 2); }, 4, 4);
  check("sum", [](const Tensor& t) { return cmul(sum_all(t), sum_all(t)); }, 3, 4);
  check("scale+add", [](const Tensor& t) { return scale(t, 1.7) + cmul(t, t); }, 3, 4);

  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd col = rand_mat(3, 1, rng).array().abs() + 0.2;
    Tensor v = Tensor::parameter(col);
    Tensor m = Tensor::parameter(rand_mat(3, 4, rng));
    CHECK(fd_vs_ad([&] { return mean_all(scale_rows(m, v)); }, v) < 1e-7);
    CHECK(fd_vs_ad([&] { return mean_all(scale_rows(m, v)); }, m) < 1e-7);

    Tensor row = Tensor::parameter(rand_mat(1, 4, rng));
    CHECK(fd_vs_ad([&] { return mean_all(add_rows(m, row)); }, row) < 1e-7);

    Tensor a = Tensor::parameter(rand_mat(3, 2, rng));
    Tensor b = Tensor::parameter(rand_mat(2, 4, rng));
    CHECK(fd_vs_ad([&] { return sum_all(matmul(a, b)); }, a) < 1e-7);
    CHECK(fd_vs_ad([&] { return sum_all(matmul(a, b)); }, b) < 1e-7);

    Tensor c1 = Tensor::parameter(rand_mat(2, 3, rng));
    Tensor c2 = Tensor::parameter(rand_mat(2, 2, rng));
    Tensor c3 = Tensor::parameter(rand_mat(4, 3, rng));
    CHECK(fd_vs_ad([&] { return sum_all(cmul(concat_cols({c1, c2}), concat_cols({c1, c2}))); },
                   c1) < 1e-7);
    CHECK(fd_vs_ad([&] { return sum_all(cmul(concat_rows({c1, c3}), concat_rows({c1, c3}))); },
                   c3) < 1e-7);
  }
}

TEST_CASE("rsqrt rejects nonpositive input") {
  Eigen::MatrixXd v(1, 2);
  v << 1.0, 0.0;
  CHECK_THROWS_AS(rsqrt(Tensor::constant(v)), dhnn::NumericError);
}

TEST_CASE("forward passes are pure") {
  std::mt19937_64 rng(5);
  Tensor x = Tensor::parameter(rand_mat(3, 3, rng));
  auto run = [&] { return matmul(softmax_rows(x), tanh(x)).value(); };
  Eigen::MatrixXd first = run();
  Eigen::MatrixXd second = run();
  CHECK(first == second);
}

TEST_CASE("dropout semantics") {
  std::mt19937_64 rng(6);
  Tensor x = Tensor::constant(Eigen::MatrixXd::Ones(8, 8));

  std::mt19937_64 r0(9);
  CHECK(dropout(x, 0.0, r0).value() == x.value());

  std::mt19937_64 r1(9), r2(9);
  Eigen::MatrixXd a = dropout(x, 0.4, r1).value();
  Eigen::MatrixXd b = dropout(x, 0.4, r2).value();
  CHECK(a == b);  // same seed, same mask
  const double boost = 1.0 / 0.6;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      CHECK((a(i, j) == 0.0 || a(i, j) == doctest::Approx(boost)));
    }
  }
  CHECK_THROWS_AS(dropout(x, 1.0, r1), std::invalid_argument);
}

TEST_CASE("backward requires a parameter-dependent scalar root") {
  Tensor c = Tensor::constant(Eigen::MatrixXd::Ones(1, 1));
  CHECK_THROWS_AS(backward(c), std::invalid_argument);
  Tensor p = Tensor::parameter(Eigen::MatrixXd::Ones(2, 2));
  CHECK_THROWS_AS(backward(p), std::invalid_argument);  // not 1x1
}

TEST_CASE("deep chains backpropagate without recursion limits") {
  Tensor x = Tensor::parameter(Eigen::MatrixXd::Constant(1, 1, 0.01));
  Tensor acc = x;
  for (int i = 0; i < 20000; ++i) acc = scale(acc, 1.0);
  backward(acc);
  CHECK(x.grad()(0, 0) == doctest::Approx(1.0));
}
