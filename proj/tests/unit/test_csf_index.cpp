#include <gtest/gtest.h>

#include <random>

#include "fastertucker/csf_index.hpp"
#include "fastertucker/error.hpp"
#include "helpers.hpp"

namespace fastertucker {
namespace {

using testing::entry_multiset;
using testing::make_tensor;

SparseTensorCoo small_tree_tensor() {
  return make_tensor({1, 2, 2}, {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}}, {1, 2, 3});
}

TEST(Bcsf, HandBuiltTreeShape) {
  const auto tree = build_bcsf(small_tree_tensor(), 0);
  EXPECT_EQ(tree.node_count(0), 1u);
  EXPECT_EQ(tree.node_count(1), 2u);
  EXPECT_EQ(tree.node_count(2), 3u);
  EXPECT_EQ(tree.leaf_count(), 3u);
  EXPECT_EQ(tree.subtensor_count(), 1u);
}

TEST(Bcsf, PreorderDepthsAndModes) {
  const auto tree = build_bcsf(small_tree_tensor(), 0);
  std::vector<std::size_t> depths, modes;
  std::vector<real_t> values;
  traverse(tree, [&](const CsfVisit& v) {
    depths.push_back(v.depth);
    modes.push_back(v.mode);
    if (v.leaf) values.push_back(v.value);
  });
  EXPECT_EQ(depths, (std::vector<std::size_t>{0, 1, 2, 2, 1, 2}));
  EXPECT_EQ(modes, (std::vector<std::size_t>{0, 1, 2, 2, 1, 2}));
  EXPECT_EQ(values, (std::vector<real_t>{1, 2, 3}));
}

TEST(Bcsf, GoldenDump) {
  const auto tree = build_bcsf(small_tree_tensor(), 0);
  EXPECT_EQ(dump_tree(tree),
            "0 1 1 2\n"
            "  1 2 1 2\n"
            "    2 3 1 0\n"
            "    2 3 2 0\n"
            "  1 2 2 1\n"
            "    2 3 1 0\n");
}

TEST(Bcsf, GoldenDumpRootedAtLastMode) {
  const auto tree = build_bcsf(small_tree_tensor(), 2);
  EXPECT_EQ(dump_tree(tree),
            "0 3 1 1\n"
            "  1 1 1 2\n"
            "    2 2 1 0\n"
            "    2 2 2 0\n"
            "0 3 2 1\n"
            "  1 1 1 1\n"
            "    2 2 1 0\n");
}

TEST(Bcsf, SingleEntryVisitsEachDepthOnce) {
  const auto t = make_tensor({3, 3, 3, 3}, {{1, 2, 0, 1}}, {4});
  const auto tree = build_bcsf(t, 1);
  std::vector<std::size_t> depths;
  traverse(tree, [&](const CsfVisit& v) { depths.push_back(v.depth); });
  EXPECT_EQ(depths, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Bcsf, HeavySliceSplitsByWholeFibers) {
  // Slice i1 = 1 holds 300 fibers (i2 = 1..300), one leaf each.
  std::vector<std::vector<index_t>> coords;
  for (index_t j = 0; j < 300; ++j) coords.push_back({0, j, 0});
  const auto t = make_tensor({1, 300, 1}, coords, std::vector<real_t>(300, 1.0));
  const auto tree = build_bcsf(t, 0, 128);
  ASSERT_EQ(tree.subtensor_count(), 3u);
  EXPECT_EQ(tree.fibers_in(0), 128u);
  EXPECT_EQ(tree.fibers_in(1), 128u);
  EXPECT_EQ(tree.fibers_in(2), 44u);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(tree.level_index(0)[s], 0u);
  EXPECT_EQ(entry_multiset(flatten(tree, t.dims())), entry_multiset(t));
}

TEST(Bcsf, UnlimitedThresholdIsPlainCsf) {
  const auto t = testing::random_tensor({5, 40, 40}, 1500, 3);
  const auto tree = build_bcsf(t, 0, kUnlimitedFibers);
  EXPECT_EQ(tree.subtensor_count(), 5u);
  const auto split_tree = build_bcsf(t, 0, 16);
  EXPECT_GT(split_tree.subtensor_count(), 5u);
}

TEST(Bcsf, ModeCycling) {
  const auto t = testing::random_tensor({3, 4, 5, 6, 7}, 100, 2);
  for (mode_t root = 0; root < 5; ++root) {
    const auto tree = build_bcsf(t, root);
    for (std::size_t d = 0; d < 5; ++d) EXPECT_EQ(tree.level_modes()[d], (root + d) % 5);
    EXPECT_EQ(tree.leaf_mode(), leaf_mode_of(root, 5));
    EXPECT_EQ(tree.leaf_mode(), (root + 4) % 5);
  }
}

TEST(Bcsf, BuildErrors) {
  EXPECT_THROW(build_bcsf(SparseTensorCoo{}, 0), BuildError);
  EXPECT_THROW(build_bcsf(small_tree_tensor(), 3), BuildError);
  EXPECT_THROW(build_bcsf(small_tree_tensor(), 0, 0), BuildError);
}

TEST(Bcsf, RandomTreesKeepInvariants) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t order = 3 + rng() % 3;
    std::vector<index_t> dims(order);
    for (auto& d : dims) d = 2 + static_cast<index_t>(rng() % 12);
    const std::size_t cells = *cell_count(dims);
    const auto t = testing::random_tensor(dims, 1 + rng() % std::min<std::size_t>(300, cells), rng());
    const std::size_t threshold = 1 + rng() % 8;
    const auto multiset = entry_multiset(t);
    for (mode_t root = 0; root < order; ++root) {
      const auto tree = build_bcsf(t, root, threshold);
      EXPECT_EQ(tree.leaf_count(), t.nnz());
      std::size_t leaves = 0;
      for (std::size_t s = 0; s < tree.subtensor_count(); ++s) {
        EXPECT_LE(tree.fibers_in(s), threshold);
        leaves += tree.leaves_in(s);
      }
      EXPECT_EQ(leaves, t.nnz());
      for (std::size_t d = 0; d + 1 < order; ++d) {
        const auto ptr = tree.level_ptr(d);
        ASSERT_EQ(ptr.size(), tree.node_count(d) + 1);
        EXPECT_EQ(ptr.front(), 0u);
        EXPECT_EQ(ptr.back(), tree.node_count(d + 1));
        for (std::size_t k = 0; k < tree.node_count(d); ++k) EXPECT_LT(ptr[k], ptr[k + 1]);
      }
      std::size_t visited = 0;
      traverse(tree, [&](const CsfVisit& v) { visited += v.leaf; });
      EXPECT_EQ(visited, t.nnz());
      EXPECT_EQ(entry_multiset(flatten(tree, t.dims())), multiset);
    }
  }
}

TEST(Bcsf, LeavesSortedLexicographicallyInLevelOrder) {
  const auto t = testing::random_tensor({6, 7, 8}, 200, 4);
  const auto tree = build_bcsf(t, 1, kUnlimitedFibers);
  const auto flat = flatten(tree, t.dims());
  std::vector<std::vector<index_t>> keys;
  for (std::size_t e = 0; e < flat.nnz(); ++e) {
    const auto c = flat.coord(e);
    keys.push_back({c[1], c[2], c[0]});
  }
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

TEST(Bcsf, Descendants) {
  const auto tree = build_bcsf(small_tree_tensor(), 0);
  EXPECT_EQ(tree.descendants(0, 0), (std::pair<std::size_t, std::size_t>{0, 1}));
  EXPECT_EQ(tree.descendants(0, 1), (std::pair<std::size_t, std::size_t>{0, 2}));
  EXPECT_EQ(tree.descendants(0, 2), (std::pair<std::size_t, std::size_t>{0, 3}));
}

TEST(Balance, UniformTensorBound) {
  const auto t = testing::random_tensor({20, 30, 40}, 5000, 8);
  const CsfForest forest(t, 128);
  for (const auto& tree : forest.trees()) {
    const auto b = tree_balance(tree);
    EXPECT_LE(b.max_leaves, 128 * b.max_fiber_length);
    EXPECT_LE(b.max_fibers, 128u);
    EXPECT_LE(b.min_leaves, b.max_leaves);
    EXPECT_NEAR(b.mean_leaves * b.subtensors, static_cast<double>(t.nnz()), 1e-6);
  }
}

TEST(Balance, SingleSubtensor) {
  const auto t = make_tensor({1, 3, 3}, {{0, 0, 0}, {0, 1, 2}, {0, 2, 1}}, {1, 2, 3});
  const auto b = tree_balance(build_bcsf(t, 0));
  EXPECT_EQ(b.subtensors, 1u);
  EXPECT_EQ(b.max_leaves, 3u);
  EXPECT_EQ(b.min_leaves, 3u);
}

TEST(Balance, SplitCountPigeonhole) {
  const auto t = testing::random_tensor({2, 60, 60}, 3000, 5);
  const std::size_t threshold = 7;
  const auto plain = build_bcsf(t, 0, kUnlimitedFibers);
  const auto split_tree = build_bcsf(t, 0, threshold);
  std::size_t heaviest = 0;
  for (std::size_t s = 0; s < plain.subtensor_count(); ++s) heaviest = std::max(heaviest, plain.fibers_in(s));
  EXPECT_GE(split_tree.subtensor_count(), (heaviest + threshold - 1) / threshold);
}

TEST(Forest, OneTreePerMode) {
  const auto t = testing::random_tensor({4, 5, 6, 7}, 300, 6);
  const CsfForest forest(t, 4);
  ASSERT_EQ(forest.order(), 4u);
  EXPECT_EQ(forest.nnz(), 300u);
  EXPECT_EQ(forest.fiber_threshold(), 4u);
  const auto stats = balance_stats(forest);
  ASSERT_EQ(stats.size(), 4u);
  for (mode_t n = 0; n < 4; ++n) {
    EXPECT_EQ(forest.tree(n).root_mode(), n);
    EXPECT_EQ(stats[n].root_mode, n);
  }
}

}  // namespace
}  // namespace fastertucker
