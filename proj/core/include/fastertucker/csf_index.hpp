#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fastertucker/tensor_store.hpp"
#include "fastertucker/types.hpp"

namespace fastertucker {

inline constexpr std::size_t kDefaultFiberThreshold = 128;
inline constexpr std::size_t kUnlimitedFibers = std::numeric_limits<std::size_t>::max();

// Mode stored at tree depth d for a tree rooted at root_mode.
constexpr mode_t level_mode(mode_t root_mode, std::size_t depth, std::size_t order) {
  return (root_mode + depth) % order;
}

// The leaf level of the tree rooted at root_mode holds mode (root + N - 1) mod N.
constexpr mode_t leaf_mode_of(mode_t root_mode, std::size_t order) {
  return (root_mode + order - 1) % order;
}

// Balanced compressed-sparse-fiber tree over one mode ordering.
//
// Level d stores the node index values for mode level_modes()[d]. Levels
// 0..N-2 carry child offsets: the children of node k at level d are
// [ptr(d)[k], ptr(d)[k+1]) at level d+1. Level N-1 holds the leaves.
// Each root node is one subtensor (worker unit). A heavy slice appears as
// several consecutive root nodes with the same index value.
class CsfTree {
 public:
  std::size_t order() const noexcept { return level_modes_.size(); }
  mode_t root_mode() const noexcept { return level_modes_.front(); }
  mode_t leaf_mode() const noexcept { return level_modes_.back(); }
  std::span<const mode_t> level_modes() const noexcept { return level_modes_; }
  std::size_t fiber_threshold() const noexcept { return fiber_threshold_; }

  std::size_t node_count(std::size_t depth) const { return index_[depth].size(); }
  std::span<const index_t> level_index(std::size_t depth) const { return index_[depth]; }
  std::span<const std::size_t> level_ptr(std::size_t depth) const { return ptr_[depth]; }
  std::span<const real_t> leaf_values() const noexcept { return values_; }

  std::size_t subtensor_count() const { return index_.front().size(); }
  std::size_t leaf_count() const noexcept { return values_.size(); }

  // Nodes at `depth` that descend from root node s, as a half-open range.
  std::pair<std::size_t, std::size_t> descendants(std::size_t s, std::size_t depth) const;

  std::size_t fibers_in(std::size_t s) const;
  std::size_t leaves_in(std::size_t s) const;

  friend CsfTree build_bcsf(const SparseTensorCoo&, mode_t, std::size_t);

 private:
  std::vector<mode_t> level_modes_;
  std::size_t fiber_threshold_ = kUnlimitedFibers;
  std::vector<std::vector<index_t>> index_;
  std::vector<std::vector<std::size_t>> ptr_;
  std::vector<real_t> values_;
};

// Sorts entries lexicographically in level order and splits every root slice
// with more than fiber_threshold fibers into consecutive sub-slices of at
// most fiber_threshold whole fibers. root_mode is 0-based.
CsfTree build_bcsf(const SparseTensorCoo& tensor, mode_t root_mode,
                   std::size_t fiber_threshold = kDefaultFiberThreshold);

struct CsfVisit {
  std::size_t depth;
  mode_t mode;
  index_t index;
  real_t value;  // leaf value; zero for interior nodes
  bool leaf;
};

namespace detail {
template <class Visitor>
void visit_node(const CsfTree& tree, std::size_t depth, std::size_t node, Visitor& visitor) {
  const bool leaf = depth + 1 == tree.order();
  visitor(CsfVisit{depth, tree.level_modes()[depth], tree.level_index(depth)[node],
                   leaf ? tree.leaf_values()[node] : real_t(0), leaf});
  if (leaf) return;
  const auto ptr = tree.level_ptr(depth);
  for (std::size_t c = ptr[node]; c < ptr[node + 1]; ++c) visit_node(tree, depth + 1, c, visitor);
}
}  // namespace detail

// Preorder traversal of one subtensor.
template <class Visitor>
void traverse_subtensor(const CsfTree& tree, std::size_t s, Visitor&& visitor) {
  detail::visit_node(tree, 0, s, visitor);
}

// Preorder traversal of the whole tree, subtensors in storage order.
template <class Visitor>
void traverse(const CsfTree& tree, Visitor&& visitor) {
  for (std::size_t s = 0; s < tree.subtensor_count(); ++s) detail::visit_node(tree, 0, s, visitor);
}

// Leaves of the tree rebuilt as 0-based coordinate tuples (flat, order N)
// with their values, in traversal order.
SparseTensorCoo flatten(const CsfTree& tree, std::span<const index_t> dims);

// One line per node: depth, mode, index, child count. Mode and index are
// printed 1-based.
std::string dump_tree(const CsfTree& tree);

// One tree per root mode; trees()[t] is rooted at mode t.
class CsfForest {
 public:
  CsfForest() = default;
  CsfForest(const SparseTensorCoo& tensor, std::size_t fiber_threshold = kDefaultFiberThreshold);

  std::size_t order() const noexcept { return trees_.size(); }
  std::span<const CsfTree> trees() const noexcept { return trees_; }
  const CsfTree& tree(mode_t root_mode) const { return trees_[root_mode]; }
  std::span<const index_t> dims() const noexcept { return dims_; }
  std::size_t nnz() const noexcept { return nnz_; }
  std::size_t fiber_threshold() const noexcept { return fiber_threshold_; }

 private:
  std::vector<CsfTree> trees_;
  std::vector<index_t> dims_;
  std::size_t nnz_ = 0;
  std::size_t fiber_threshold_ = kDefaultFiberThreshold;
};

struct TreeBalance {
  mode_t root_mode = 0;
  std::size_t subtensors = 0;
  std::size_t max_leaves = 0;
  std::size_t min_leaves = 0;
  double mean_leaves = 0;
  std::size_t max_fibers = 0;
  std::size_t max_fiber_length = 0;
};

std::vector<TreeBalance> balance_stats(const CsfForest& forest);
TreeBalance tree_balance(const CsfTree& tree);

}  // namespace fastertucker
