#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fastertucker/model.hpp"

namespace fastertucker::oracle {

// Brute-force reference routes built from explicit Kronecker products.
// These exist to check the factorised fast path and are never used by the
// trainer.

inline constexpr std::size_t kMaxKroneckerLength = 1'000'000;

// Kronecker product of two vectors: (a (x) b)[i*|b| + j] = a[i] * b[j].
std::vector<double> kronecker(std::span<const double> a, std::span<const double> b);

// Column index of cell coord in the mode-n unfolding X(n) (0-based). The
// remaining modes are ordered with mode 0 varying fastest.
std::uint64_t unfold_column(std::span<const index_t> coord, std::span<const index_t> dims,
                            mode_t n);

// Position of cell coord in the mode-n vectorisation: column * I_n + i_n.
std::uint64_t vectorize_position(std::span<const index_t> coord,
                                 std::span<const index_t> dims, mode_t n);

// Row of S(n) = A(N) (x) ... (x) A(n+1) (x) A(n-1) (x) ... (x) A(1) for the
// given coordinate, i.e. the Kronecker product of the N-1 factor rows.
std::vector<double> s_row(const Model& model, std::span<const index_t> coord,
                          mode_t skip_mode);

// Column r of Q(n) = B(N) (.) ... (.) B(1) without mode n: the Kronecker
// product of the N-1 core columns.
std::vector<double> q_column(const Model& model, mode_t skip_mode, std::size_t r);

// s . q evaluated from the materialised Kronecker products. Throws
// OracleCapacityError when prod_{n' != n} J_n' exceeds kMaxKroneckerLength.
double sq_oracle(const Model& model, std::span<const index_t> coord, mode_t skip_mode,
                 std::size_t r);

// Model prediction through the mode-n matricised form a(n) B(n) Q(n)^T s(n)^T.
double predict_oracle(const Model& model, std::span<const index_t> coord, mode_t n);

}  // namespace fastertucker::oracle
