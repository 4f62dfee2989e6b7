#include <gtest/gtest.h>

#include <random>

#include "fastertucker/csf_index.hpp"
#include "fastertucker/error.hpp"
#include "fastertucker/intermediates.hpp"
#include "fastertucker/oracle.hpp"
#include "fastertucker/trainer.hpp"
#include "helpers.hpp"

namespace fastertucker {
namespace {

using testing::rel_err;

TEST(OpCounter, Channels) {
  OpCounter c;
  c.add(Channel::AbProducts, 5);
  c.add(Channel::Gradient, 2);
  EXPECT_EQ(c.total(), 7u);
  c.set_enabled(false);
  c.add(Channel::SharedVec, 100);
  EXPECT_EQ(c.get(Channel::SharedVec), 0u);
  c.set_enabled(true);
  OpCounter d = c;
  d.add(Channel::SharedVec, 3);
  EXPECT_EQ((d - c).get(Channel::SharedVec), 3u);
  EXPECT_EQ((d - c).total(), 3u);
  c.reset();
  EXPECT_EQ(c.total(), 0u);
}

TEST(Precompute, CountIsSumIJR) {
  const auto m = testing::random_model({100, 100, 100}, {8, 8, 8}, 8, 1);
  AbCache cache(m);
  OpCounter c;
  cache.precompute(m, &c);
  EXPECT_EQ(c.get(Channel::AbProducts), 19200u);
  EXPECT_EQ(c.total(), 19200u);
  EXPECT_EQ(cost::ab_pass(m.dims(), m.ranks(), 8), 19200u);
}

TEST(Precompute, ZeroCoresGiveZeroCache) {
  auto m = testing::random_model({5, 6, 7}, {2, 3, 2}, 2, 1);
  for (mode_t n = 0; n < 3; ++n) m.core_t(n).fill(0);
  AbCache cache(m);
  cache.precompute(m);
  for (mode_t n = 0; n < 3; ++n)
    for (index_t i = 0; i < m.dims()[n]; ++i)
      for (real_t v : cache.row(n, i)) EXPECT_EQ(v, 0);
}

TEST(Precompute, ProbesMatchDirectDots) {
  const auto m = testing::random_model({30, 40, 50, 20}, {3, 4, 2, 5}, 3, 2);
  AbCache cache(m);
  cache.precompute(m);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const mode_t n = rng() % 4;
    const index_t i = static_cast<index_t>(rng() % m.dims()[n]);
    const std::size_t r = rng() % 3;
    EXPECT_LE(std::abs(cache.at(n, i, r) - dot(m.factor_row(n, i), m.core_column(n, r))), 1e-12);
  }
  EXPECT_LE(cache.max_staleness(m), 1e-12);
}

TEST(Refresh, OnlyTouchesItsMode) {
  auto m = testing::random_model({10, 12, 14}, {3, 3, 3}, 2, 4);
  AbCache cache(m);
  cache.precompute(m);
  const AbCache before = cache;
  m.factor(1)(5, 0) += 1;
  cache.mark_dirty(1);
  OpCounter c;
  cache.refresh_mode(m, 1, &c);
  EXPECT_EQ(c.get(Channel::AbProducts), 12u * 3u * 2u);
  EXPECT_TRUE(cache.clean(1));
  for (mode_t n : {0, 2})
    for (index_t i = 0; i < m.dims()[n]; ++i)
      for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(cache.at(n, i, r), before.at(n, i, r));
  EXPECT_NE(cache.at(1, 5, 0), before.at(1, 5, 0));
  EXPECT_EQ(cache.at(1, 4, 0), before.at(1, 4, 0));
}

TEST(Refresh, CleanModeIsNoOp) {
  const auto m = testing::random_model({10, 12, 14}, {3, 3, 3}, 2, 4);
  AbCache cache(m);
  cache.precompute(m);
  OpCounter c;
  cache.refresh_mode(m, 2, &c);
  EXPECT_EQ(c.total(), 0u);
}

TEST(Refresh, SkippingItAfterCoreUpdateIsDetected) {
  auto m = testing::random_model({10, 12, 14}, {3, 3, 3}, 2, 4);
  AbCache cache(m);
  cache.precompute(m);
  for (auto& v : m.core_t(0).data()) v *= real_t(1.5);
  // Deliberately forget refresh_mode.
  EXPECT_GT(cache.max_staleness(m), 1e-6);
  cache.mark_dirty(0);
  SharedVec sv(m, 1);
  const std::vector<index_t> c{1, 2, 3};
  EXPECT_THROW(shared_vec(cache, m, c, 1, sv), StaleCacheError);
  EXPECT_NO_THROW(shared_vec(cache, m, c, 0, sv));  // mode 0 is not read when skipped
  cache.refresh_mode(m, 0);
  EXPECT_LE(cache.max_staleness(m), 1e-12);
  EXPECT_NO_THROW(shared_vec(cache, m, c, 1, sv));
}

TEST(SharedVec, MatchesOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t order = 3 + trial % 3;
    std::vector<index_t> dims(order);
    std::vector<std::size_t> ranks(order);
    for (std::size_t n = 0; n < order; ++n) {
      dims[n] = 2 + rng() % 5;
      ranks[n] = 1 + rng() % 3;
    }
    const std::size_t R = 1 + rng() % 3;
    const auto m = testing::random_model(dims, ranks, R, rng());
    AbCache cache(m);
    cache.precompute(m);
    std::vector<index_t> c(order);
    for (std::size_t n = 0; n < order; ++n) c[n] = static_cast<index_t>(rng() % dims[n]);
    for (mode_t n = 0; n < order; ++n) {
      SharedVec sv(m, n);
      OpCounter cnt;
      shared_vec(cache, m, c, n, sv, &cnt);
      EXPECT_EQ(cnt.get(Channel::SharedVec), (order - 2) * R + ranks[n] * R);
      EXPECT_EQ(cnt.get(Channel::AbProducts), 0u);
      for (std::size_t j = 0; j < ranks[n]; ++j) {
        double ref = 0;
        for (std::size_t r = 0; r < R; ++r) ref += oracle::sq_oracle(m, c, n, r) * m.core_column(n, r)[j];
        EXPECT_LE(std::abs(sv.vec[j] - ref), 1e-10 * std::max(1.0, std::abs(ref)));
      }
      for (std::size_t r = 0; r < R; ++r) EXPECT_LE(rel_err(sv.sq[r], sq_fast(m, c, n, r)), 1e-12);
    }
  }
}

TEST(SharedVec, PerFiberCount) {
  // N = 3: two cached scalars per r, one multiply each, then J_n R for vec.
  EXPECT_EQ(cost::shared_vec_per_fiber(3, 8, 8), 8u + 64u);
  EXPECT_EQ(cost::shared_vec_per_fiber(6, 8, 8), 4u * 8u + 64u);
  // At R = 1 the count equals J_n R + N - 2.
  EXPECT_EQ(cost::shared_vec_per_fiber(6, 8, 1), 8u + 6u - 2u);
}

TEST(SharedVec, UncachedIsBitIdentical) {
  const auto m = testing::random_model({6, 7, 8, 9}, {3, 2, 4, 3}, 3, 31);
  AbCache cache(m);
  cache.precompute(m);
  const std::vector<index_t> c{5, 1, 7, 2};
  for (mode_t n = 0; n < 4; ++n) {
    SharedVec a(m, n), b(m, n);
    OpCounter cnt;
    shared_vec(cache, m, c, n, a);
    shared_vec_uncached(m, c, n, b, &cnt);
    EXPECT_EQ(a.sq, b.sq);
    EXPECT_EQ(a.vec, b.vec);
    EXPECT_EQ(cnt.get(Channel::AbProducts), cost::sum_jr(m.ranks(), 3) - m.rank(n) * 3);
  }
}

TEST(SweepCost, UncachedClosedForm) {
  const auto t = testing::random_tensor({100, 100, 100}, 1000, 4);
  const CsfForest forest(t);
  const Model m({100, 100, 100}, {8, 8, 8}, 8);
  const auto u = counted_sweep_cost(Plan::Uncached, forest, m);
  EXPECT_EQ(u.sweep_ab, 384000u);
  EXPECT_EQ(u.ab_products(), 384000u);
  EXPECT_EQ(cost::uncached_ab_sweep(3, 1000, m.ranks(), 8), 384000u);
  const auto c = counted_sweep_cost(Plan::Cached, forest, m);
  EXPECT_EQ(c.precompute, 19200u);
  EXPECT_EQ(c.refresh, 19200u);
  EXPECT_EQ(c.sweep_ab, 0u);
  EXPECT_EQ(c.gradient, u.gradient);
  EXPECT_LE(c.shared_vec, u.shared_vec);
}

TEST(SweepCost, CachedCheaperWhenInequalityHolds) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t order = 3 + trial % 4;
    std::vector<index_t> dims(order);
    for (auto& d : dims) d = 5 + rng() % 20;
    const std::size_t nnz = 200 + rng() % 400;
    const auto t = testing::random_tensor(dims, nnz, rng());
    const CsfForest forest(t);
    const std::vector<std::size_t> ranks(order, 1 + rng() % 4);
    const Model m(dims, ranks, 1 + rng() % 4);
    const index_t max_dim = *std::max_element(dims.begin(), dims.end());
    if (order * max_dim >= (order - 1) * nnz) continue;
    EXPECT_LT(counted_sweep_cost(Plan::Cached, forest, m).ab_products(),
              counted_sweep_cost(Plan::Uncached, forest, m).ab_products());
  }
}

}  // namespace
}  // namespace fastertucker
