#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fastertucker/matrix.hpp"
#include "fastertucker/types.hpp"

namespace fastertucker {

class SparseTensorCoo;

// Factor matrices A(n) (I_n x J_n) and core matrices B(n) (J_n x R).
// Cores are stored transposed, R x J_n, so column b(n)_{:,r} is the
// contiguous row core_t(n).row(r).
class Model {
 public:
  Model() = default;
  Model(std::vector<index_t> dims, std::vector<std::size_t> ranks,
        std::size_t core_rank);

  std::size_t order() const noexcept { return dims_.size(); }
  std::span<const index_t> dims() const noexcept { return dims_; }
  std::span<const std::size_t> ranks() const noexcept { return ranks_; }
  std::size_t rank(mode_t n) const { return ranks_[n]; }
  std::size_t core_rank() const noexcept { return core_rank_; }

  Matrix& factor(mode_t n) { return factors_[n]; }
  const Matrix& factor(mode_t n) const { return factors_[n]; }
  Matrix& core_t(mode_t n) { return cores_t_[n]; }
  const Matrix& core_t(mode_t n) const { return cores_t_[n]; }

  std::span<const real_t> factor_row(mode_t n, index_t i) const {
    return factors_[n].row(i);
  }
  std::span<const real_t> core_column(mode_t n, std::size_t r) const {
    return cores_t_[n].row(r);
  }

  bool all_finite() const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  std::vector<index_t> dims_;
  std::vector<std::size_t> ranks_;
  std::size_t core_rank_ = 0;
  std::vector<Matrix> factors_;
  std::vector<Matrix> cores_t_;
};

// i.i.d. uniform(lo, hi) entries. With scaled set, factor n entries are
// multiplied by 1/sqrt(J_n) and core entries by 1/sqrt(R).
struct InitSpec {
  real_t lo = 0;
  real_t hi = 1;
  std::uint64_t seed = 0;
  bool scaled = true;
};

Model init_model(std::span<const index_t> dims, std::span<const std::size_t> ranks,
                 std::size_t core_rank, const InitSpec& spec);

// prod_{n' != skip_mode} a(n')_{i_n'} . b(n')_{:,r}, multiplied in
// increasing mode order.
real_t sq_fast(const Model& model, std::span<const index_t> coord, mode_t skip_mode,
               std::size_t r);

// sum_r prod_n a(n)_{i_n} . b(n)_{:,r}
real_t predict_element(const Model& model, std::span<const index_t> coord);

// Same value computed through the mode-n split: a(n)_{i_n} . sum_r sq_r b(n)_{:,r}.
real_t predict_split(const Model& model, std::span<const index_t> coord, mode_t n);

// sum_Omega (x - xhat)^2 + lambda_a sum_n ||A(n)||^2 + lambda_b sum_n ||B(n)||^2
double full_loss(const Model& model, const SparseTensorCoo& tensor, double reg_a,
                 double reg_b);

void check_compatible(const Model& model, const SparseTensorCoo& tensor);

}  // namespace fastertucker
