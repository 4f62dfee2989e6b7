#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fastertucker/model.hpp"
#include "fastertucker/types.hpp"

namespace fastertucker {

enum class Channel : std::size_t {
  AbProducts = 0,  // a(n)_{i_n} . b(n)_{:,r} dot products
  SharedVec = 1,   // s.q scalars and the shared vector B(n) Q(n)^T s(n)^T
  Gradient = 2,    // residuals and parameter steps
};
inline constexpr std::size_t kChannelCount = 3;

std::string_view channel_name(Channel c);

// Multiply counter. Each kernel adds its closed-form count once per block of
// work instead of incrementing per multiply.
class OpCounter {
 public:
  void add(Channel c, std::uint64_t n) noexcept {
    if (enabled_) counts_[static_cast<std::size_t>(c)] += n;
  }
  std::uint64_t get(Channel c) const noexcept { return counts_[static_cast<std::size_t>(c)]; }
  std::uint64_t total() const noexcept;
  void reset() noexcept { counts_.fill(0); }
  void set_enabled(bool on) noexcept { enabled_ = on; }
  bool enabled() const noexcept { return enabled_; }

  OpCounter& operator+=(const OpCounter& other) noexcept;
  friend OpCounter operator-(OpCounter a, const OpCounter& b) noexcept;
  friend bool operator==(const OpCounter&, const OpCounter&) = default;

 private:
  std::array<std::uint64_t, kChannelCount> counts_{};
  bool enabled_ = true;
};

// Per-mode table of a(n)_{i_n} . b(n)_{:,r}, shape I_n x R.
class AbCache {
 public:
  AbCache() = default;
  explicit AbCache(const Model& model);

  std::size_t order() const noexcept { return tables_.size(); }
  std::size_t core_rank() const noexcept { return core_rank_; }

  // Computes every mode; adds sum_n I_n J_n R multiplies.
  void precompute(const Model& model, OpCounter* counter = nullptr);

  // Recomputes mode n if it is dirty (adds I_n J_n R); no-op when clean.
  void refresh_mode(const Model& model, mode_t n, OpCounter* counter = nullptr);

  void mark_dirty(mode_t n) { dirty_[n] = true; }
  bool clean(mode_t n) const { return !dirty_[n]; }

  std::span<const real_t> row(mode_t n, index_t i) const { return tables_[n].row(i); }
  real_t at(mode_t n, index_t i, std::size_t r) const { return tables_[n](i, r); }

  // Largest |cached - fresh| over all entries. Does not count.
  double max_staleness(const Model& model) const;

 private:
  void compute_mode(const Model& model, mode_t n);

  std::size_t core_rank_ = 0;
  std::vector<Matrix> tables_;
  std::vector<bool> dirty_;
};

// Shared per-fiber intermediates for mode n: sq[r] = s(n) q(n)_{:,r} and
// vec = sum_r sq[r] b(n)_{:,r} (length J_n).
struct SharedVec {
  mode_t mode = 0;
  std::vector<real_t> sq;
  std::vector<real_t> vec;

  SharedVec() = default;
  SharedVec(const Model& model, mode_t n)
      : mode(n), sq(model.core_rank()), vec(model.rank(n)) {}
};

// Builds the shared vector for the fiber at `coord` (coord[n] is ignored)
// from cached products. Adds (N-2) R + J_n R multiplies. Throws
// StaleCacheError if any mode other than n is dirty.
void shared_vec(const AbCache& cache, const Model& model, std::span<const index_t> coord,
                mode_t n, SharedVec& out, OpCounter* counter = nullptr);

// Same quantities recomputed from the factor rows, as in the uncached plan.
// Adds sum_{n' != n} J_n' R to AbProducts plus the shared-vector count.
void shared_vec_uncached(const Model& model, std::span<const index_t> coord, mode_t n,
                         SharedVec& out, OpCounter* counter = nullptr);

// Closed-form multiply counts.
namespace cost {

// sum_n J_n R
std::uint64_t sum_jr(std::span<const std::size_t> ranks, std::size_t core_rank);

// sum_n I_n J_n R: one full precompute, or all N per-mode refreshes.
std::uint64_t ab_pass(std::span<const index_t> dims, std::span<const std::size_t> ranks,
                      std::size_t core_rank);

// I_n J_n R
std::uint64_t ab_mode(std::span<const index_t> dims, std::span<const std::size_t> ranks,
                      std::size_t core_rank, mode_t n);

// (N-1) |Omega| sum_n J_n R: uncached ab products over one sweep of all modes.
std::uint64_t uncached_ab_sweep(std::size_t order, std::uint64_t nnz,
                                std::span<const std::size_t> ranks, std::size_t core_rank);

// (N-2) R + J_n R per fiber (or per element in the uncached plan).
std::uint64_t shared_vec_per_fiber(std::size_t order, std::size_t rank_n, std::size_t core_rank);

}  // namespace cost

}  // namespace fastertucker
