#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "dhnn/metrics.hpp"

using namespace dhnn;
using namespace dhnn::metrics;

namespace {

std::vector<double> rand_vec(int n, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("perfect predictions score zero on every metric") {
  std::vector<double> y{0.3, -1.2, 4.5};
  CHECK(rmse(y, y) == 0.0);
  CHECK(mae(y, y) == 0.0);
  CHECK(mape(y, y) == 0.0);
}

TEST_CASE("hand cases for the three metrics") {
  CHECK(rmse({2}, {1}) == doctest::Approx(1.0));
  CHECK(mae({2}, {1}) == doctest::Approx(1.0));
  CHECK(mape({2}, {1}) == doctest::Approx(50.0));

  CHECK(rmse({1, -1}, {0, 0}) == doctest::Approx(1.0));
  CHECK(mae({1, -1}, {0, 0}) == doctest::Approx(1.0));
  CHECK(mape({1, -1}, {0, 0}) == doctest::Approx(100.0));
}

TEST_CASE("rmse squared equals the mean squared error") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 40);
    auto y = rand_vec(n, rng);
    auto y_hat = rand_vec(n, rng);
    double mse = 0.0;
    for (int i = 0; i < n; ++i) {
      mse += (y[static_cast<std::size_t>(i)] - y_hat[static_cast<std::size_t>(i)]) *
             (y[static_cast<std::size_t>(i)] - y_hat[static_cast<std::size_t>(i)]);
    }
    mse /= n;
    const double r = rmse(y, y_hat);
    CHECK(std::abs(r * r - mse) < 1e-12);
    CHECK(r >= mae(y, y_hat));  // RMS-mean inequality
  }
}

TEST_CASE("metrics ignore sample order") {
  std::mt19937_64 rng(7);
  auto y = rand_vec(25, rng);
  auto y_hat = rand_vec(25, rng);
  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> y2, h2;
  for (auto i : idx) {
    y2.push_back(y[i]);
    h2.push_back(y_hat[i]);
  }
  CHECK(rmse(y, y_hat) == doctest::Approx(rmse(y2, h2)).epsilon(1e-12));
  CHECK(mae(y, y_hat) == doctest::Approx(mae(y2, h2)).epsilon(1e-12));
  CHECK(mape(y, y_hat) == doctest::Approx(mape(y2, h2)).epsilon(1e-12));
}

TEST_CASE("mae responds at most delta/l to a single perturbation") {
  std::mt19937_64 rng(9);
  auto y = rand_vec(20, rng);
  auto y_hat = rand_vec(20, rng);
  const double base = mae(y, y_hat);
  const double delta = 0.37;
  for (std::size_t i : {std::size_t{0}, std::size_t{7}, std::size_t{19}}) {
    auto bumped = y_hat;
    bumped[i] += delta;
    CHECK(std::abs(mae(y, bumped) - base) <= delta / static_cast<double>(y.size()) + 1e-15);
  }
}

TEST_CASE("mape excludes zero targets and reports the count") {
  int excluded = -1;
  const double v = mape({0.0, 2.0, 0.0, 4.0}, {1.0, 1.0, 1.0, 5.0}, &excluded);
  CHECK(excluded == 2);
  CHECK(v == doctest::Approx(100.0 * (0.5 + 0.25) / 2.0));
  CHECK_THROWS_AS(mape({0.0, 0.0}, {1.0, 1.0}), DataError);
  CHECK_THROWS_AS(mape({}, {}), DataError);
  CHECK_THROWS_AS(rmse({1.0}, {1.0, 2.0}), DataError);
}

TEST_CASE("metrics report carries tags and satisfies rmse >= mae") {
  std::mt19937_64 rng(11);
  auto y = rand_vec(30, rng);
  auto y_hat = rand_vec(30, rng);
  auto report = compute_metrics(y, y_hat, "unit", "model-x");
  CHECK(report.rmse >= report.mae);
  CHECK(report.n_samples == 30);
  std::string line = render_metrics_line(report);
  CHECK(line.rfind("unit, model-x, ", 0) == 0);
}

TEST_CASE("persistence baseline repeats the last observed target value") {
  ingest::WindowSample s;
  s.features.resize(3, 2);
  s.features << 1, 10, 2, 20, 3, 30;
  s.target.resize(3);
  s.target << 30, 30, 30;
  auto preds = persistence_baseline({s}, 1);
  REQUIRE(preds.size() == 1);
  CHECK(preds[0].size() == 3);
  CHECK(preds[0](0) == 30.0);
  CHECK(preds[0](1) == 30.0);
  CHECK(preds[0](2) == 30.0);

  // constant target series scores zero under all metrics
  std::vector<double> y{30, 30, 30}, y_hat{preds[0](0), preds[0](1), preds[0](2)};
  CHECK(rmse(y, y_hat) == 0.0);
  CHECK(mae(y, y_hat) == 0.0);

  CHECK_THROWS_AS(persistence_baseline({s}, 5), DataError);
}
