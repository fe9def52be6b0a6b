#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include "dhnn/community.hpp"
#include "test_support.hpp"

using namespace dhnn;
using namespace dhnn::community;

namespace {

Eigen::MatrixXd two_disjoint_edges() {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  a(0, 1) = a(1, 0) = 1.0;
  a(2, 3) = a(3, 2) = 1.0;
  return a;
}

}  // namespace

TEST_CASE("configuration B matrix: degrees cancel row-wise") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto mod = build_modularity_configuration(testsup::random_adjacency(7, 0.5, rng));
    CHECK(mod.b_matrix.rowwise().sum().cwiseAbs().maxCoeff() < 1e-8);
    CHECK(mod.norm > 0.0);
  }
}

TEST_CASE("two disjoint edges score Q = 0.5 under the paired partition") {
  auto mod = build_modularity_configuration(two_disjoint_edges());
  CHECK(modularity_of(mod, {0, 0, 1, 1}) == doctest::Approx(0.5).epsilon(1e-15));

  auto brute = testsup::brute_force_modularity(mod);
  CHECK(brute.best_q == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(adjusted_rand_index(brute.best_assignment, {0, 0, 1, 1}) == doctest::Approx(1.0));
}

TEST_CASE("one community scores zero, split single edge scores -0.5") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5;
    auto mod = build_modularity_configuration(testsup::random_adjacency(n, 0.6, rng));
    CHECK(modularity_of(mod, std::vector<int>(n, 0)) == doctest::Approx(0.0).epsilon(1e-12));
  }
  Eigen::MatrixXd edge = Eigen::MatrixXd::Zero(2, 2);
  edge(0, 1) = edge(1, 0) = 1.0;
  auto mod = build_modularity_configuration(edge);
  CHECK(modularity_of(mod, {0, 1}) == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("configuration builder validates its input") {
  CHECK_THROWS_AS(build_modularity_configuration(Eigen::MatrixXd::Zero(4, 4)), DataError);
  Eigen::MatrixXd diag = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(build_modularity_configuration(diag), DataError);
  Eigen::MatrixXd neg = Eigen::MatrixXd::Zero(3, 3);
  neg(0, 1) = neg(1, 0) = -1.0;
  CHECK_THROWS_AS(build_modularity_configuration(neg), DataError);
}

TEST_CASE("filtered form: zero structural part makes every partition score zero") {
  auto mod = build_modularity_filtered(Eigen::MatrixXd::Zero(5, 5), 3.7);
  std::mt19937_64 rng(4);
  for (const auto& labels : {std::vector<int>{0, 0, 0, 0, 0}, std::vector<int>{0, 1, 2, 3, 4},
                             testsup::random_labels(5, 3, rng)}) {
    CHECK(modularity_of(mod, labels) == 0.0);
  }
  CHECK_THROWS_AS(build_modularity_filtered(Eigen::MatrixXd::Zero(5, 5), 0.0), DataError);
}

TEST_CASE("filtered form: block-diagonal structural part is maximized by the block partition") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      s(i, j) = 0.4;
      s(i + 3, j + 3) = 0.3;
    }
  }
  auto mod = build_modularity_filtered(s, 6.0);
  // the block partition attains the exhaustive optimum (merging zero-linked
  // blocks is Q-neutral, so the optimum is not unique)
  auto brute = testsup::brute_force_modularity(mod);
  CHECK(modularity_of(mod, {0, 0, 0, 1, 1, 1}) == doctest::Approx(brute.best_q).epsilon(1e-12));

  auto detected = detect_communities(mod, 99);
  CHECK(detected.modularity == doctest::Approx(brute.best_q).epsilon(1e-12));
  CHECK(adjusted_rand_index(detected.assignment, {0, 0, 0, 1, 1, 1}) == doctest::Approx(1.0));
  CHECK(detected.n_communities == 2);
}

TEST_CASE("negating off-block entries penalizes cross-block merges") {
  Eigen::MatrixXd pos = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (i != j) {
        pos(i, j) = 0.5;
        pos(i + 2, j + 2) = 0.5;
      }
    }
  }
  Eigen::MatrixXd mixed = pos;
  mixed(0, 2) = mixed(2, 0) = 0.2;  // mild positive cross-block link
  Eigen::MatrixXd flipped = pos;
  flipped(0, 2) = flipped(2, 0) = -0.2;

  const std::vector<int> merged{0, 0, 0, 0};
  const std::vector<int> blocks{0, 0, 1, 1};
  auto gain = [&](const Eigen::MatrixXd& b) {
    auto mod = build_modularity_filtered(b, 4.0);
    return modularity_of(mod, merged) - modularity_of(mod, blocks);
  };
  CHECK(gain(flipped) < gain(mixed));
  CHECK(gain(flipped) < 0.0);
}

TEST_CASE("uniform clique collapses to a single community with Q = 0") {
  for (int n = 3; n <= 6; ++n) {
    Eigen::MatrixXd clique = Eigen::MatrixXd::Ones(n, n);
    clique.diagonal().setZero();
    auto mod = build_modularity_configuration(clique);
    auto part = detect_communities(mod, 7);
    CHECK(part.n_communities == 1);
    CHECK(part.modularity == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(testsup::brute_force_modularity(mod).best_q == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("detect never scores below the all-singletons partition") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 6);
    ModularityMatrix mod;
    if (trial % 2 == 0) {
      mod = build_modularity_configuration(testsup::random_adjacency(n, 0.5, rng));
    } else {
      Eigen::MatrixXd b = Eigen::MatrixXd::Random(n, n);
      b = ((b + b.transpose()) / 2).eval();
      b.diagonal().setZero();
      mod = build_modularity_filtered(b, 1.0);
    }
    std::vector<int> singletons(static_cast<std::size_t>(n));
    std::iota(singletons.begin(), singletons.end(), 0);
    auto part = detect_communities(mod, rng());
    CHECK(part.modularity >= modularity_of(mod, singletons) - 1e-12);
  }
}

TEST_CASE("detect matches the exhaustive optimum on most small instances") {
  std::mt19937_64 rng(8);
  int optimal = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 5);  // 4..8
    ModularityMatrix mod;
    if (trial % 2 == 0) {
      mod = build_modularity_configuration(testsup::random_adjacency(n, 0.5, rng));
    } else {
      Eigen::MatrixXd b = Eigen::MatrixXd::Random(n, n);
      b = ((b + b.transpose()) / 2).eval();
      b.diagonal().setZero();
      mod = build_modularity_filtered(b, 1.0);
    }
    auto detected = detect_communities(mod, rng());
    auto brute = testsup::brute_force_modularity(mod);
    CHECK(detected.modularity <= brute.best_q + 1e-12);
    if (brute.best_q - detected.modularity <= 1e-9) ++optimal;
  }
  CHECK(optimal >= 95);
}

TEST_CASE("planted two-block structural matrix is recovered exactly") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(8, 8);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < i; ++j) {
      const bool same = (i < 4) == (j < 4);
      const double v = (same ? 0.5 : -0.3) + jitter(rng);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  auto mod = build_modularity_filtered(s, 8.0);
  auto part = detect_communities(mod, 123);
  CHECK(adjusted_rand_index(part.assignment, {0, 0, 0, 0, 1, 1, 1, 1}) == doctest::Approx(1.0));
  auto brute = testsup::brute_force_modularity(mod);
  CHECK(part.modularity == doctest::Approx(brute.best_q).epsilon(1e-12));
}

TEST_CASE("modularity is invariant under node permutation of the matrix and labels") {
  std::mt19937_64 rng(12);
  const int n = 7;
  Eigen::MatrixXd b = Eigen::MatrixXd::Random(n, n);
  b = ((b + b.transpose()) / 2).eval();
  b.diagonal().setZero();
  auto mod = build_modularity_filtered(b, 2.0);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd bp(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) bp(perm[i], perm[j]) = b(i, j);
  }
  auto mod_p = build_modularity_filtered(bp, 2.0);

  for (int trial = 0; trial < 10; ++trial) {
    auto labels = testsup::random_labels(n, 3, rng);
    std::vector<int> labels_p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels_p[static_cast<std::size_t>(perm[i])] = labels[static_cast<std::size_t>(i)];
    CHECK(std::abs(modularity_of(mod, labels) - modularity_of(mod_p, labels_p)) < 1e-10);
  }

  // On a strongly separated instance detection commutes with permutation.
  Eigen::MatrixXd blocks = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      blocks(i, j) = ((i < 4) == (j < 4)) ? 0.6 : -0.4;
    }
  }
  Eigen::MatrixXd blocks_p(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) blocks_p(perm[i], perm[j]) = blocks(i, j);
  }
  auto part = detect_communities(build_modularity_filtered(blocks, 2.0), 5);
  auto part_p = detect_communities(build_modularity_filtered(blocks_p, 2.0), 5);
  std::vector<int> mapped(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) mapped[static_cast<std::size_t>(perm[i])] = part.assignment[static_cast<std::size_t>(i)];
  CHECK(adjusted_rand_index(part_p.assignment, mapped) == doctest::Approx(1.0));
  CHECK(std::abs(part.modularity - part_p.modularity) < 1e-10);
}

TEST_CASE("nodes with no modularity signal stay singletons") {
  Eigen::MatrixXd a = two_disjoint_edges();
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(5, 5);
  padded.topLeftCorner(4, 4) = a;  // node 4 is isolated
  auto mod = build_modularity_configuration(padded);
  auto part = detect_communities(mod, 17);
  CHECK(part.n_communities == 3);
  const int isolated = part.assignment[4];
  for (int i = 0; i < 4; ++i) CHECK(part.assignment[static_cast<std::size_t>(i)] != isolated);
}

TEST_CASE("labels are compact and coverage is total") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 5);
    auto mod = build_modularity_configuration(testsup::random_adjacency(n, 0.4, rng));
    auto part = detect_communities(mod, rng());
    REQUIRE(part.assignment.size() == static_cast<std::size_t>(n));
    std::vector<bool> seen(static_cast<std::size_t>(part.n_communities), false);
    for (int label : part.assignment) {
      REQUIRE(label >= 0);
      REQUIRE(label < part.n_communities);
      seen[static_cast<std::size_t>(label)] = true;
    }
    for (bool s : seen) CHECK(s);
  }
}

TEST_CASE("symmetrize_attention averages and zeroes the diagonal") {
  Eigen::MatrixXd a(2, 2);
  a << 0.6, 0.3, 0.1, 0.9;
  auto sym = symmetrize_attention(a);
  CHECK(sym(0, 1) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(sym(1, 0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(sym(0, 0) == 0.0);
  CHECK(sym(1, 1) == 0.0);

  const int n = 5;
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  auto su = symmetrize_attention(uniform);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      CHECK(su(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / n).epsilon(1e-15));
    }
  }

  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 1.5, 0.5, 0.5;
  CHECK_THROWS_AS(symmetrize_attention(bad), DataError);
}

TEST_CASE("null-model-free form on a positive matrix merges everything") {
  // the configuration null model is what keeps uniform attention from
  // collapsing; without it every positive link favors one community
  const int n = 5;
  Eigen::MatrixXd sym = Eigen::MatrixXd::Constant(n, n, 0.2);
  sym.diagonal().setZero();
  auto raw = build_modularity_raw(sym, sym.sum());
  auto part = detect_communities(raw, 3);
  CHECK(part.n_communities == 1);
  CHECK(part.modularity == doctest::Approx(1.0));  // all weight captured

  auto config = build_modularity_configuration(sym);
  auto part_cfg = detect_communities(config, 3);
  CHECK(part_cfg.modularity == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("adjusted Rand index reference points") {
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(adjusted_rand_index({0, 0, 0, 0}, {0, 0, 0, 0}) == doctest::Approx(1.0));
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) < 0.5);
}
