#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace milv;

namespace {

struct Problem {
  Matrix x;
  std::vector<std::uint32_t> classes;
};

Problem random_problem(std::mt19937_64& gen, Index n, Index d, std::uint32_t C) {
  Problem p{oracle::random_matrix(gen, n, d), std::vector<std::uint32_t>(static_cast<std::size_t>(n))};
  for (std::size_t i = 0; i < p.classes.size(); ++i) p.classes[i] = static_cast<std::uint32_t>(i % C);
  return p;
}

double loo_1nn_accuracy(const Matrix& x, const std::vector<std::uint32_t>& classes) {
  std::size_t hits = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < x.rows(); ++j) {
      if (j == i) continue;
      const double d = (x.row(i) - x.row(j)).squaredNorm();
      if (d < best_d) best_d = d, best = j;
    }
    hits += classes[static_cast<std::size_t>(best)] == classes[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(x.rows());
}

}  // namespace

TEST(TargetNeighbors, TwoPointsSameClass) {
  const Matrix x = Matrix::Identity(2, 2);
  const std::vector<std::uint32_t> cls{0, 0};
  const auto eta = metric::select_target_neighbors(x, cls, 1);
  EXPECT_EQ(eta.eta[0], (std::vector<Index>{1}));
  EXPECT_EQ(eta.eta[1], (std::vector<Index>{0}));
}

TEST(TargetNeighbors, SingletonClassHasNoTargets) {
  const Matrix x = Matrix::Identity(3, 3);
  const std::vector<std::uint32_t> cls{0, 0, 1};
  EXPECT_TRUE(metric::select_target_neighbors(x, cls, 2).eta[2].empty());
}

TEST(TargetNeighbors, MatchesSortedDistanceOracle) {
  std::mt19937_64 gen(1);
  const auto p = random_problem(gen, 30, 4, 3);
  EXPECT_EQ(metric::select_target_neighbors(p.x, p.classes, 3).eta, oracle::target_neighbors(p.x, p.classes, 3));
  // Grid points create distance ties; the lower index must win.
  Matrix grid(12, 1);
  for (Index i = 0; i < 12; ++i) grid(i, 0) = static_cast<double>(i % 4);
  std::vector<std::uint32_t> same(12, 0);
  EXPECT_EQ(metric::select_target_neighbors(grid, same, 5).eta, oracle::target_neighbors(grid, same, 5));
}

TEST(LmnnLoss, ZeroProjectionCountsTriples) {
  std::mt19937_64 gen(2);
  const auto p = random_problem(gen, 12, 3, 3);
  const auto eta = metric::select_target_neighbors(p.x, p.classes, 2);
  std::size_t triples = 0;
  for (Index i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < eta.eta[static_cast<std::size_t>(i)].size(); ++j)
      for (Index l = 0; l < 12; ++l) triples += p.classes[static_cast<std::size_t>(l)] != p.classes[static_cast<std::size_t>(i)];
  EXPECT_EQ(metric::lmnn_loss({Matrix::Zero(2, 3)}, p.x, p.classes, eta, 1.5), 1.5 * static_cast<double>(triples));
}

TEST(LmnnLoss, CollapsedSeparatedClassesCostNothing) {
  Matrix x(6, 2);
  x << 0, 0, 0, 0, 5, 0, 5, 0, 0, 5, 0, 5;
  const std::vector<std::uint32_t> cls{0, 0, 1, 1, 2, 2};
  const auto eta = metric::select_target_neighbors(x, cls, 1);
  EXPECT_EQ(metric::lmnn_loss({Matrix::Identity(2, 2)}, x, cls, eta, 1.0), 0.0);
  const auto trained = metric::train(x, cls, {1.0, 1, 2, 0.1, 50, 0, 20, 1e-9});
  for (double v : trained.trace) EXPECT_EQ(v, 0.0);
}

TEST(LmnnLoss, MatchesTripleLoopOracle) {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 5; ++t) {
    const auto p = random_problem(gen, 10, 3, 2);
    const Matrix W = oracle::random_matrix(gen, 3, 3);
    const auto eta = metric::select_target_neighbors(p.x, p.classes, 3);
    const double loss = metric::lmnn_loss({W}, p.x, p.classes, eta, 1.0);
    EXPECT_NEAR(loss, oracle::lmnn_loss_naive(W, p.x, p.classes, eta.eta, 1.0), 1e-10 * std::max(1.0, loss));
    EXPECT_GE(loss, 0.0);
  }
}

TEST(LmnnGradient, IdenticalPointsGiveZero) {
  const Matrix x = Matrix::Ones(6, 3);
  const std::vector<std::uint32_t> cls{0, 0, 0, 1, 1, 1};
  const auto eta = metric::select_target_neighbors(x, cls, 2);
  EXPECT_TRUE(metric::lmnn_gradient({Matrix::Identity(3, 3)}, x, cls, eta, 1.0).isZero(0.0));
}

TEST(LmnnGradient, SinglePairAnalyticCase) {
  Matrix x(2, 3);
  x << 1, 0, 0, 0, 0, 0;
  const std::vector<std::uint32_t> cls{0, 0};
  metric::TargetNeighborSet eta{{{1}, {}}, 1};
  const Matrix g = metric::lmnn_gradient({Matrix::Identity(3, 3)}, x, cls, eta, 1.0);
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = 2.0;
  EXPECT_EQ(g, expected);
}

TEST(LmnnGradient, FiniteDifferences) {
  std::mt19937_64 gen(4);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const auto p = random_problem(gen, 20, 5, 3);
    const Matrix W = oracle::random_matrix(gen, 3, 5, 0.5);
    const auto eta = metric::select_target_neighbors(p.x, p.classes, 3);
    if (oracle::min_hinge_gap(W, p.x, p.classes, eta.eta) < 1e-6) continue;
    const Matrix g = metric::lmnn_gradient({W}, p.x, p.classes, eta, 1.0);
    const Matrix fd = oracle::finite_difference(
        W, [&](const Matrix& w) { return oracle::lmnn_loss_naive(w, p.x, p.classes, eta.eta, 1.0); });
    EXPECT_LE((g - fd).norm() / std::max(1e-12, fd.norm()), 1e-4);
    ++checked;
  }
  EXPECT_GE(checked, 15);
}

TEST(LmnnTrain, ReducesLossOnOverlappingClasses) {
  std::mt19937_64 gen(5);
  Matrix x = oracle::random_matrix(gen, 60, 2);
  std::vector<std::uint32_t> cls(60);
  for (Index i = 0; i < 60; ++i) {
    cls[static_cast<std::size_t>(i)] = i < 30 ? 0 : 1;
    if (i >= 30) x(i, 0) += 1.5;
  }
  const auto res = metric::train(x, cls, {1.0, 3, 2, 0.1, 100, 0, 20, 1e-9});
  EXPECT_LT(res.trace[res.best_epoch], res.trace.front());
  EXPECT_EQ(metric::lmnn_loss(res.projection, x, cls, metric::select_target_neighbors(x, cls, 3), 1.0),
            res.trace[res.best_epoch]);
}

TEST(LmnnTrain, ProjectedNearestNeighborIsNoWorse) {
  synth::SynthConfig cfg;
  cfg.num_classes = 3;
  cfg.feature_dim = 10;
  cfg.num_bags = 1;
  cfg.noise_scale = 0.6;
  cfg.exemplars_per_class = 40;
  const auto ex = synth::generate(cfg).exemplars;
  // Noise dimensions with large variance hide the class structure in input space.
  Matrix x = ex.features;
  std::mt19937_64 gen(6);
  x.rightCols(6) += oracle::random_matrix(gen, x.rows(), 6, 6.0);
  const auto res = metric::train(x, ex.classes, {1.0, 3, 4, 0.1, 200, 0, 20, 1e-9});
  EXPECT_GE(loo_1nn_accuracy(metric::project(res.projection, x), ex.classes), loo_1nn_accuracy(x, ex.classes));
}

TEST(LmnnTrain, DeterministicAndRejectsSingleClass) {
  std::mt19937_64 gen(7);
  const auto p = random_problem(gen, 30, 4, 3);
  const metric::LmnnConfig cfg{1.0, 3, 2, 0.1, 30, 5, 20, 1e-9};
  EXPECT_TRUE(metric::train(p.x, p.classes, cfg).projection == metric::train(p.x, p.classes, cfg).projection);
  const std::vector<std::uint32_t> one(30, 0);
  EXPECT_THROW(metric::train(p.x, one, cfg), InvalidArgument);
}

TEST(MetricProject, IdentityZeroAndNaiveLoop) {
  std::mt19937_64 gen(8);
  const Matrix x = oracle::random_matrix(gen, 7, 4);
  EXPECT_EQ(metric::project({Matrix::Identity(4, 4)}, x), x);
  EXPECT_TRUE(metric::project({Matrix::Zero(2, 4)}, x).isZero(0.0));
  const Matrix W = oracle::random_matrix(gen, 3, 4);
  const Matrix y = metric::project({W}, x);
  for (Index i = 0; i < 7; ++i)
    for (Index r = 0; r < 3; ++r) {
      double acc = 0.0;
      for (Index c = 0; c < 4; ++c) acc += W(r, c) * x(i, c);
      EXPECT_NEAR(y(i, r), acc, 1e-12);
    }
  EXPECT_THROW(metric::project({W}, Matrix::Zero(1, 3)), InvalidArgument);
}

TEST(MetricFile, RoundTrip) {
  std::mt19937_64 gen(9);
  const metric::MetricProjection m{oracle::random_matrix(gen, 2, 5)};
  const auto bytes = metric::encode(m);
  EXPECT_EQ(bytes.substr(0, 4), "MILW");
  EXPECT_TRUE(metric::decode(bytes) == m);
  EXPECT_THROW(metric::decode(bytes.substr(0, bytes.size() - 3)), FormatError);
}
