#include "fastertucker/csf_index.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "fastertucker/error.hpp"

namespace fastertucker {

std::pair<std::size_t, std::size_t> CsfTree::descendants(std::size_t s, std::size_t depth) const {
  std::size_t begin = s, end = s + 1;
  for (std::size_t d = 0; d < depth; ++d) {
    begin = ptr_[d][begin];
    end = ptr_[d][end];
  }
  return {begin, end};
}

std::size_t CsfTree::fibers_in(std::size_t s) const {
  const auto [b, e] = descendants(s, order() - 2);
  return e - b;
}

std::size_t CsfTree::leaves_in(std::size_t s) const {
  const auto [b, e] = descendants(s, order() - 1);
  return e - b;
}

CsfTree build_bcsf(const SparseTensorCoo& tensor, mode_t root_mode, std::size_t fiber_threshold) {
  const std::size_t order = tensor.order();
  if (tensor.nnz() == 0) throw BuildError("cannot build a tree over an empty tensor");
  if (order < 3) throw BuildError("tree needs at least three modes");
  if (root_mode >= order) throw BuildError("root mode " + std::to_string(root_mode + 1) + " out of range");
  if (fiber_threshold == 0) throw BuildError("fiber threshold must be at least 1");

  CsfTree tree;
  tree.fiber_threshold_ = fiber_threshold;
  tree.level_modes_.resize(order);
  for (std::size_t d = 0; d < order; ++d) tree.level_modes_[d] = level_mode(root_mode, d, order);
  tree.index_.assign(order, {});
  tree.ptr_.assign(order - 1, {});

  // Permute coordinates into level order once so the sort compares contiguous keys.
  const std::size_t nnz = tensor.nnz();
  std::vector<index_t> keys(nnz * order);
  for (std::size_t e = 0; e < nnz; ++e) {
    const auto c = tensor.coord(e);
    for (std::size_t d = 0; d < order; ++d) keys[e * order + d] = c[tree.level_modes_[d]];
  }
  std::vector<std::size_t> perm(nnz);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    const index_t* ka = keys.data() + a * order;
    const index_t* kb = keys.data() + b * order;
    return std::lexicographical_compare(ka, ka + order, kb, kb + order);
  });

  const std::size_t fiber_level = order - 2;
  std::size_t fibers_in_root = 0;
  const index_t* prev = nullptr;
  tree.values_.reserve(nnz);
  tree.index_[order - 1].reserve(nnz);

  for (std::size_t k = 0; k < nnz; ++k) {
    const index_t* key = keys.data() + perm[k] * order;
    // First level at which this entry leaves the current path.
    std::size_t diverge = 0;
    if (prev) {
      while (diverge < order && key[diverge] == prev[diverge]) ++diverge;
      if (diverge == order) throw BuildError("duplicate coordinate in tensor");
    }
    const bool new_fiber = diverge <= fiber_level;
    if (prev && new_fiber && diverge > 0 && fibers_in_root >= fiber_threshold) diverge = 0;
    if (diverge == 0) fibers_in_root = 0;
    if (new_fiber) ++fibers_in_root;

    for (std::size_t d = diverge; d < order; ++d) {
      if (d < order - 1) tree.ptr_[d].push_back(tree.index_[d + 1].size());
      tree.index_[d].push_back(key[d]);
    }
    tree.values_.push_back(tensor.value(perm[k]));
    prev = key;
  }
  for (std::size_t d = 0; d + 1 < order; ++d) tree.ptr_[d].push_back(tree.index_[d + 1].size());
  return tree;
}

SparseTensorCoo flatten(const CsfTree& tree, std::span<const index_t> dims) {
  const std::size_t order = tree.order();
  std::vector<index_t> coords;
  std::vector<real_t> values;
  coords.reserve(tree.leaf_count() * order);
  values.reserve(tree.leaf_count());
  std::vector<index_t> path(order);
  traverse(tree, [&](const CsfVisit& v) {
    path[v.mode] = v.index;
    if (v.leaf) {
      coords.insert(coords.end(), path.begin(), path.end());
      values.push_back(v.value);
    }
  });
  return SparseTensorCoo(std::vector<index_t>(dims.begin(), dims.end()), std::move(coords),
                         std::move(values));
}

std::string dump_tree(const CsfTree& tree) {
  std::ostringstream out;
  std::vector<std::size_t> node_at(tree.order(), 0);
  traverse(tree, [&](const CsfVisit& v) {
    const std::size_t node = node_at[v.depth]++;
    std::size_t children = 0;
    if (!v.leaf) {
      const auto ptr = tree.level_ptr(v.depth);
      children = ptr[node + 1] - ptr[node];
    }
    out << std::string(2 * v.depth, ' ') << v.depth << ' ' << (v.mode + 1) << ' ' << (v.index + 1)
        << ' ' << children << '\n';
  });
  return out.str();
}

CsfForest::CsfForest(const SparseTensorCoo& tensor, std::size_t fiber_threshold)
    : dims_(tensor.dims().begin(), tensor.dims().end()),
      nnz_(tensor.nnz()),
      fiber_threshold_(fiber_threshold) {
  trees_.reserve(tensor.order());
  for (mode_t t = 0; t < tensor.order(); ++t) trees_.push_back(build_bcsf(tensor, t, fiber_threshold));
}

TreeBalance tree_balance(const CsfTree& tree) {
  TreeBalance b;
  b.root_mode = tree.root_mode();
  b.subtensors = tree.subtensor_count();
  b.min_leaves = tree.leaf_count();
  for (std::size_t s = 0; s < b.subtensors; ++s) {
    const std::size_t leaves = tree.leaves_in(s);
    b.max_leaves = std::max(b.max_leaves, leaves);
    b.min_leaves = std::min(b.min_leaves, leaves);
    b.max_fibers = std::max(b.max_fibers, tree.fibers_in(s));
  }
  const std::size_t fiber_level = tree.order() - 2;
  const auto ptr = tree.level_ptr(fiber_level);
  for (std::size_t f = 0; f + 1 < ptr.size(); ++f)
    b.max_fiber_length = std::max(b.max_fiber_length, ptr[f + 1] - ptr[f]);
  b.mean_leaves = static_cast<double>(tree.leaf_count()) / static_cast<double>(b.subtensors);
  return b;
}

std::vector<TreeBalance> balance_stats(const CsfForest& forest) {
  std::vector<TreeBalance> out;
  for (const auto& t : forest.trees()) out.push_back(tree_balance(t));
  return out;
}

}  // namespace fastertucker
