#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fastertucker/model.hpp"
#include "fastertucker/types.hpp"

namespace fastertucker {


// N-order sparse tensor in coordinate form. Coordinates are 0-based in
// memory; the text format is 1-based.
//
// Invariants, checked by validate(): N >= 3, every dim positive, every
// coordinate in range, no duplicate coordinate tuples, at least one entry.
class SparseTensorCoo {
 public:
  SparseTensorCoo() = default;

  // Takes ownership of a flat nnz*N coordinate array and validates it.
  SparseTensorCoo(std::vector<index_t> dims, std::vector<index_t> coords,
                  std::vector<real_t> values);

  std::size_t order() const noexcept { return dims_.size(); }
  std::span<const index_t> dims() const noexcept { return dims_; }
  index_t dim(mode_t n) const { return dims_[n]; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const index_t> coord(std::size_t e) const {
    return {coords_.data() + e * order(), order()};
  }
  real_t value(std::size_t e) const { return values_[e]; }

  std::span<const index_t> coords() const noexcept { return coords_; }
  std::span<const real_t> values() const noexcept { return values_; }

  // Throws ValidationError naming the first violated invariant.
  void validate() const;

  // Linear min-max rescaling of the values into [lo, hi].
  void rescale_values(real_t lo, real_t hi);

  std::pair<real_t, real_t> value_range() const;

 private:
  std::vector<index_t> dims_;
  std::vector<index_t> coords_;
  std::vector<real_t> values_;
};

struct DatasetSplit {
  SparseTensorCoo train;  // observed set
  SparseTensorCoo test;   // held-out set
  std::uint64_t seed = 0;
};

// Reads whitespace-separated "i1 ... iN value" lines. '#' starts a comment
// line, blank lines are skipped. Dims default to per-mode maxima.
SparseTensorCoo load_coo(const std::filesystem::path& path, std::size_t order,
                         std::optional<std::vector<index_t>> dims = std::nullopt);
SparseTensorCoo read_coo(std::istream& in, std::size_t order,
                         std::optional<std::vector<index_t>> dims = std::nullopt);

void write_coo(const std::filesystem::path& path, const SparseTensorCoo& tensor);
void write_coo(std::ostream& out, const SparseTensorCoo& tensor);

struct LowRankSpec {
  std::vector<std::size_t> ranks;  // J_n
  std::size_t core_rank = 1;       // R
};

struct SyntheticSpec {
  std::vector<index_t> dims;
  std::size_t nnz = 0;
  real_t value_lo = 1;
  real_t value_hi = 5;
  std::uint64_t seed = 0;
  std::optional<LowRankSpec> low_rank;
};

struct SyntheticTensor {
  SparseTensorCoo tensor;
  // Present when values come from a hidden generating model.
  std::optional<Model> hidden;
};

// Samples nnz distinct coordinates uniformly without replacement. Values are
// uniform in [value_lo, value_hi], or predicted by a hidden model drawn with
// the default initialisation when low_rank is set.
SyntheticTensor generate_synthetic(const SyntheticSpec& spec);

// Deterministic per seed; keeps source order within each part and the source
// dims on both parts.
DatasetSplit split(const SparseTensorCoo& tensor, double test_fraction,
                   std::uint64_t seed);

// Number of cells, or nullopt if it does not fit in 64 bits.
std::optional<std::uint64_t> cell_count(std::span<const index_t> dims);

}  // namespace fastertucker
