#include "dhnn/synthetic.hpp"

#include <cmath>
#include <random>

namespace dhnn::cli {

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_communities < 1 || spec.series_per_community < 2) {
    throw ConfigError("synthetic data needs >= 1 community with >= 2 series each");
  }
  if (spec.length < 4) throw ConfigError("synthetic series length must be >= 4");
  if (spec.noise < 0.0) throw ConfigError("synthetic noise must be >= 0");
  if (std::abs(spec.ar_coefficient) >= 1.0) throw ConfigError("AR coefficient must satisfy |phi| < 1");

  if (spec.market_strength < 0.0) throw ConfigError("market strength must be >= 0");

  const int n = spec.n_communities * spec.series_per_community;
  const int t = spec.length;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Shared market factor plus one latent AR(1) factor per community,
  // stationary starts.
  const double phi = spec.ar_coefficient;
  const double stationary_sd = 1.0 / std::sqrt(1.0 - phi * phi);
  auto draw_ar1 = [&](Eigen::Ref<Eigen::VectorXd> out) {
    out(0) = stationary_sd * gauss(rng);
    for (int r = 1; r < t; ++r) out(r) = phi * out(r - 1) + gauss(rng);
  };
  Eigen::VectorXd market(t);
  draw_ar1(market);
  Eigen::MatrixXd factors(t, spec.n_communities);
  for (int c = 0; c < spec.n_communities; ++c) draw_ar1(factors.col(c));

  SyntheticData data;
  data.table.values.resize(t, n);
  data.table.target_index = 0;
  data.table.frequency_note = "synthetic market + AR(1) community factors";
  data.planted_labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = i / spec.series_per_community;
    data.planted_labels[static_cast<std::size_t>(i)] = c;
    data.table.names.push_back("s" + std::to_string(i));
    if (i == 0) continue;  // filled below from its community peers
    for (int r = 0; r < t; ++r) {
      data.table.values(r, i) =
          spec.market_strength * market(r) + factors(r, c) + spec.noise * gauss(rng);
    }
  }
  // Target: noisy average of the other members of community 0.
  for (int r = 0; r < t; ++r) {
    double avg = 0.0;
    for (int i = 1; i < spec.series_per_community; ++i) avg += data.table.values(r, i);
    avg /= static_cast<double>(spec.series_per_community - 1);
    data.table.values(r, 0) = avg + spec.noise * gauss(rng);
  }
  data.table.validate();
  return data;
}

}  // namespace dhnn::cli
