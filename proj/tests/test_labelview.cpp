#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace milv;

namespace {

labelview::CandidatePool grid_pool(std::mt19937_64& gen, Index m, Index d, std::size_t C) {
  // Integer coordinates make equal distances common, exercising the tie-break.
  std::uniform_int_distribution<int> coord(-3, 3);
  labelview::CandidatePool pool{Matrix(m, d), std::vector<std::uint32_t>(static_cast<std::size_t>(m)), C};
  for (Index i = 0; i < m; ++i) {
    for (Index c = 0; c < d; ++c) pool.features(i, c) = coord(gen);
    pool.classes[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(static_cast<std::size_t>(i) % C);
  }
  return pool;
}

}  // namespace

TEST(Pool, BuildAndCoverage) {
  ExemplarSet one{Matrix::Ones(1, 3), {1}, 2};
  EXPECT_EQ(labelview::build_pool(one, {Matrix::Identity(3, 3)}).size(), 1);
  ExemplarSet partial{Matrix::Zero(4, 2), {0, 2, 2, 0}, 4};
  EXPECT_EQ(labelview::build_pool(partial, {Matrix::Identity(2, 2)}).class_coverage(), (std::set<std::uint32_t>{0, 2}));
  std::mt19937_64 gen(1);
  ExemplarSet ex{oracle::random_matrix(gen, 20, 5), std::vector<std::uint32_t>(20, 1), 3};
  const metric::MetricProjection W{oracle::random_matrix(gen, 3, 5)};
  const auto pool = labelview::build_pool(ex, W);
  for (Index i = 0; i < 20; ++i) EXPECT_EQ(pool.features.row(i), metric::project(W, ex.features.row(i)));
  EXPECT_THROW(labelview::build_pool(ex, {Matrix::Identity(4, 4)}), InvalidArgument);
}

TEST(Knn, QueryOnAPoolPoint) {
  std::mt19937_64 gen(2);
  labelview::CandidatePool pool{oracle::random_matrix(gen, 30, 4), std::vector<std::uint32_t>(30, 0), 2};
  const auto nn = labelview::knn(pool, pool.features.row(17), 3);
  EXPECT_EQ(nn[0].index, 17);
  EXPECT_EQ(nn[0].distance, 0.0);
}

TEST(Knn, KEqualsPoolSizeReturnsEverythingSorted) {
  std::mt19937_64 gen(3);
  const auto pool = grid_pool(gen, 25, 2, 3);
  const RowVector q = RowVector::Zero(2);
  const auto nn = labelview::knn(pool, q, 25);
  ASSERT_EQ(nn.size(), 25u);
  for (std::size_t i = 1; i < nn.size(); ++i) {
    EXPECT_LE(nn[i - 1].distance, nn[i].distance);
    if (nn[i - 1].distance == nn[i].distance) EXPECT_LT(nn[i - 1].index, nn[i].index);
  }
  EXPECT_THROW(labelview::knn(pool, q, 26), InvalidArgument);
}

TEST(Knn, MatchesFullSortOracle) {
  std::mt19937_64 gen(4);
  const auto pool = grid_pool(gen, 1000, 3, 5);
  std::uniform_int_distribution<int> coord(-3, 3);
  for (int t = 0; t < 100; ++t) {
    RowVector q(3);
    for (Index c = 0; c < 3; ++c) q(c) = coord(gen);
    const auto got = labelview::knn(pool, q, 50);
    const auto ref = oracle::knn_full_sort(pool.features, q, 50);
    for (std::size_t i = 0; i < 50; ++i) {
      EXPECT_EQ(got[i].index, ref[i].first);
      EXPECT_EQ(got[i].distance, ref[i].second);
    }
  }
}

TEST(Knn, ScalingKeepsNeighborIdentity) {
  std::mt19937_64 gen(5);
  auto pool = grid_pool(gen, 200, 3, 4);
  const RowVector q = RowVector::Constant(3, 0.5);
  const auto before = labelview::knn(pool, q, 20);
  pool.features *= 3.0;
  const auto after = labelview::knn(pool, 3.0 * q, 20);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(before[i].index, after[i].index);
}

TEST(LabelView, OneHotLayout) {
  labelview::CandidatePool pool{Matrix(3, 1), {0, 2, 1}, 3};
  pool.features << 0.0, 1.0, 5.0;
  Vector expected(6);
  expected << 1, 0, 0, 0, 0, 1;
  EXPECT_EQ(labelview::encode_label_view(pool, RowVector::Zero(1), 2), expected);

  labelview::CandidatePool ones{Matrix(4, 1), {1, 1, 1, 0}, 2};
  ones.features << 0.0, 1.0, 2.0, 9.0;
  Vector all_one(6);
  all_one << 0, 1, 0, 1, 0, 1;
  EXPECT_EQ(labelview::encode_label_view(ones, RowVector::Zero(1), 3), all_one);
}

TEST(LabelView, ComposesKnnWithOneHot) {
  std::mt19937_64 gen(6);
  const auto pool = grid_pool(gen, 300, 4, 6);
  for (int t = 0; t < 20; ++t) {
    const RowVector q = oracle::random_matrix(gen, 1, 4, 2.0).row(0);
    const Vector v = labelview::encode_label_view(pool, q, 10);
    const auto ref = oracle::knn_full_sort(pool.features, q, 10);
    Vector expected = Vector::Zero(60);
    for (Index i = 0; i < 10; ++i) expected(i * 6 + pool.classes[static_cast<std::size_t>(ref[static_cast<std::size_t>(i)].first)]) = 1;
    EXPECT_EQ(v, expected);
    EXPECT_EQ(v.sum(), 10.0);
  }
}

TEST(LabelView, PartialPoolStillEncodes) {
  labelview::CandidatePool pool{Matrix::Identity(3, 3), {0, 2, 2}, 4};
  const Vector v = labelview::encode_label_view(pool, RowVector::Ones(3), 3);
  EXPECT_EQ(v.size(), 12);
  EXPECT_EQ(v.sum(), 3.0);
}

TEST(Fuse, ConcatenatesScaledLabelView) {
  Vector f(2), l(2), expected(4);
  f << 1, 2;
  l << 1, 0;
  expected << 1, 2, 0.5, 0;
  EXPECT_EQ(labelview::fuse(f, l, 0.5), expected);
  Vector plain(4);
  plain << 1, 2, 1, 0;
  EXPECT_EQ(labelview::fuse(f, l, 1.0), plain);
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> len(0, 9);
  for (int t = 0; t < 20; ++t) {
    const Index a = len(gen), b = len(gen);
    EXPECT_EQ(labelview::fuse(Vector::Zero(a), Vector::Zero(b), 2.0).size(), a + b);
  }
}

TEST(BagViews, BatchEqualsPerInstanceComposition) {
  std::mt19937_64 gen(8);
  const Matrix raw = oracle::random_matrix(gen, 50, 6);
  const auto p = pca::fit(raw, 0.9);
  const metric::MetricProjection W{oracle::random_matrix(gen, 3, 6)};
  ExemplarSet ex{oracle::random_matrix(gen, 40, 6), std::vector<std::uint32_t>(40), 4};
  for (std::size_t i = 0; i < 40; ++i) ex.classes[i] = static_cast<std::uint32_t>(i % 4);
  const auto pool = labelview::build_pool(ex, W);
  const labelview::LabelViewSetup lv{&W, &pool, 5, 0.5};
  const Matrix bag = raw.topRows(9);
  const Matrix views = labelview::encode_bag_views(bag, p, &lv);
  ASSERT_EQ(views.cols(), p.output_dim() + 5 * 4);
  for (Index j = 0; j < bag.rows(); ++j) {
    const Vector one = labelview::fuse(pca::project(p, bag.row(j)).row(0).transpose(),
                                       labelview::encode_label_view(pool, metric::project(W, bag.row(j)).row(0), 5), 0.5);
    EXPECT_EQ(views.row(j), one.transpose());
  }
  EXPECT_EQ(labelview::encode_bag_views(bag.topRows(1), p, &lv).row(0), views.row(0));
  EXPECT_EQ(labelview::encode_bag_views(bag, p, nullptr), pca::project(p, bag));
}

TEST(PoolFile, RoundTrip) {
  std::mt19937_64 gen(9);
  const auto pool = grid_pool(gen, 12, 3, 4);
  const auto bytes = labelview::encode(pool);
  EXPECT_EQ(bytes.substr(0, 4), "MILQ");
  EXPECT_TRUE(labelview::decode(bytes) == pool);
  EXPECT_THROW(labelview::decode(bytes.substr(0, 40)), FormatError);
}
