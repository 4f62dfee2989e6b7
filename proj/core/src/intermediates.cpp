#include "fastertucker/intermediates.hpp"

#include <algorithm>
#include <cmath>

#include "fastertucker/error.hpp"

namespace fastertucker {

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::AbProducts: return "ab_products";
    case Channel::SharedVec: return "shared_vec";
    case Channel::Gradient: return "gradient";
  }
  return "?";
}

std::uint64_t OpCounter::total() const noexcept {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

OpCounter& OpCounter::operator+=(const OpCounter& other) noexcept {
  for (std::size_t k = 0; k < kChannelCount; ++k) counts_[k] += other.counts_[k];
  return *this;
}

OpCounter operator-(OpCounter a, const OpCounter& b) noexcept {
  for (std::size_t k = 0; k < kChannelCount; ++k) a.counts_[k] -= b.counts_[k];
  return a;
}

AbCache::AbCache(const Model& model) : core_rank_(model.core_rank()), dirty_(model.order(), true) {
  tables_.reserve(model.order());
  for (std::size_t n = 0; n < model.order(); ++n) tables_.emplace_back(model.dims()[n], core_rank_);
}

void AbCache::compute_mode(const Model& model, mode_t n) {
  Matrix& t = tables_[n];
  const Matrix& a = model.factor(n);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    for (std::size_t r = 0; r < core_rank_; ++r) t(i, r) = dot(row, model.core_column(n, r));
  }
  dirty_[n] = false;
}

void AbCache::precompute(const Model& model, OpCounter* counter) {
  for (std::size_t n = 0; n < order(); ++n) {
    compute_mode(model, n);
    if (counter) counter->add(Channel::AbProducts, cost::ab_mode(model.dims(), model.ranks(), core_rank_, n));
  }
}

void AbCache::refresh_mode(const Model& model, mode_t n, OpCounter* counter) {
  if (!dirty_[n]) return;
  compute_mode(model, n);
  if (counter) counter->add(Channel::AbProducts, cost::ab_mode(model.dims(), model.ranks(), core_rank_, n));
}

double AbCache::max_staleness(const Model& model) const {
  double worst = 0;
  for (std::size_t n = 0; n < order(); ++n) {
    const Matrix& a = model.factor(n);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t r = 0; r < core_rank_; ++r) {
        const double fresh = dot(a.row(i), model.core_column(n, r));
        worst = std::max(worst, std::abs(fresh - static_cast<double>(tables_[n](i, r))));
      }
  }
  return worst;
}

namespace {

// vec = sum_r sq[r] b(n)_{:,r}, accumulated in increasing r.
void accumulate_vec(const Model& model, mode_t n, SharedVec& out) {
  std::fill(out.vec.begin(), out.vec.end(), real_t(0));
  const Matrix& bt = model.core_t(n);
  for (std::size_t r = 0; r < out.sq.size(); ++r) {
    const real_t s = out.sq[r];
    const auto b = bt.row(r);
    for (std::size_t j = 0; j < out.vec.size(); ++j) out.vec[j] += s * b[j];
  }
}

}  // namespace

void shared_vec(const AbCache& cache, const Model& model, std::span<const index_t> coord, mode_t n,
                SharedVec& out, OpCounter* counter) {
  const std::size_t order = model.order();
  for (std::size_t k = 0; k < order; ++k)
    if (k != n && !cache.clean(k))
      throw StaleCacheError("a.b cache of mode " + std::to_string(k + 1) + " is stale");
  out.mode = n;
  const std::size_t R = model.core_rank();
  out.sq.resize(R);
  out.vec.resize(model.rank(n));
  const mode_t first = n == 0 ? 1 : 0;
  for (std::size_t r = 0; r < R; ++r) {
    real_t sq = cache.at(first, coord[first], r);
    for (std::size_t k = first + 1; k < order; ++k)
      if (k != n) sq *= cache.at(k, coord[k], r);
    out.sq[r] = sq;
  }
  accumulate_vec(model, n, out);
  if (counter) counter->add(Channel::SharedVec, cost::shared_vec_per_fiber(order, model.rank(n), R));
}

void shared_vec_uncached(const Model& model, std::span<const index_t> coord, mode_t n, SharedVec& out,
                         OpCounter* counter) {
  const std::size_t order = model.order();
  out.mode = n;
  const std::size_t R = model.core_rank();
  out.sq.resize(R);
  out.vec.resize(model.rank(n));
  const mode_t first = n == 0 ? 1 : 0;
  for (std::size_t r = 0; r < R; ++r) {
    real_t sq = dot(model.factor_row(first, coord[first]), model.core_column(first, r));
    for (std::size_t k = first + 1; k < order; ++k)
      if (k != n) sq *= dot(model.factor_row(k, coord[k]), model.core_column(k, r));
    out.sq[r] = sq;
  }
  accumulate_vec(model, n, out);
  if (counter) {
    counter->add(Channel::AbProducts, (cost::sum_jr(model.ranks(), R) - model.rank(n) * R));
    counter->add(Channel::SharedVec, cost::shared_vec_per_fiber(order, model.rank(n), R));
  }
}

namespace cost {

std::uint64_t sum_jr(std::span<const std::size_t> ranks, std::size_t core_rank) {
  std::uint64_t s = 0;
  for (std::size_t j : ranks) s += static_cast<std::uint64_t>(j) * core_rank;
  return s;
}

std::uint64_t ab_mode(std::span<const index_t> dims, std::span<const std::size_t> ranks,
                      std::size_t core_rank, mode_t n) {
  return static_cast<std::uint64_t>(dims[n]) * ranks[n] * core_rank;
}

std::uint64_t ab_pass(std::span<const index_t> dims, std::span<const std::size_t> ranks,
                      std::size_t core_rank) {
  std::uint64_t s = 0;
  for (std::size_t n = 0; n < dims.size(); ++n) s += ab_mode(dims, ranks, core_rank, n);
  return s;
}

std::uint64_t uncached_ab_sweep(std::size_t order, std::uint64_t nnz, std::span<const std::size_t> ranks,
                                std::size_t core_rank) {
  return (order - 1) * nnz * sum_jr(ranks, core_rank);
}

std::uint64_t shared_vec_per_fiber(std::size_t order, std::size_t rank_n, std::size_t core_rank) {
  return (order - 2) * core_rank + static_cast<std::uint64_t>(rank_n) * core_rank;
}

}  // namespace cost

}  // namespace fastertucker
