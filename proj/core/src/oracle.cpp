#include "fastertucker/oracle.hpp"

#include "fastertucker/error.hpp"

namespace fastertucker::oracle {

std::vector<double> kronecker(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = a[i] * b[j];
  return out;
}

std::uint64_t unfold_column(std::span<const index_t> coord, std::span<const index_t> dims, mode_t n) {
  std::uint64_t col = 0, stride = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k == n) continue;
    col += static_cast<std::uint64_t>(coord[k]) * stride;
    stride *= dims[k];
  }
  return col;
}

std::uint64_t vectorize_position(std::span<const index_t> coord, std::span<const index_t> dims,
                                 mode_t n) {
  return unfold_column(coord, dims, n) * dims[n] + coord[n];
}

namespace {

void check_size(const Model& model, mode_t skip_mode) {
  std::uint64_t len = 1;
  for (std::size_t n = 0; n < model.order(); ++n) {
    if (n == skip_mode) continue;
    len *= model.rank(n);
    if (len > kMaxKroneckerLength)
      throw OracleCapacityError("Kronecker length exceeds " + std::to_string(kMaxKroneckerLength));
  }
}

std::vector<double> to_double(std::span<const real_t> v) { return {v.begin(), v.end()}; }

// Kronecker chain over modes N-1, ..., 0 without skip_mode, so that mode 0
// varies fastest, matching the unfolding column order.
template <class RowOf>
std::vector<double> chain(const Model& model, mode_t skip_mode, RowOf row_of) {
  std::vector<double> acc{1.0};
  for (std::size_t k = model.order(); k-- > 0;) {
    if (k == skip_mode) continue;
    acc = kronecker(acc, to_double(row_of(k)));
  }
  return acc;
}

}  // namespace

std::vector<double> s_row(const Model& model, std::span<const index_t> coord, mode_t skip_mode) {
  check_size(model, skip_mode);
  return chain(model, skip_mode, [&](mode_t k) { return model.factor_row(k, coord[k]); });
}

std::vector<double> q_column(const Model& model, mode_t skip_mode, std::size_t r) {
  check_size(model, skip_mode);
  return chain(model, skip_mode, [&](mode_t k) { return model.core_column(k, r); });
}

double sq_oracle(const Model& model, std::span<const index_t> coord, mode_t skip_mode, std::size_t r) {
  const auto s = s_row(model, coord, skip_mode);
  const auto q = q_column(model, skip_mode, r);
  double acc = 0;
  for (std::size_t k = 0; k < s.size(); ++k) acc += s[k] * q[k];
  return acc;
}

double predict_oracle(const Model& model, std::span<const index_t> coord, mode_t n) {
  const auto s = s_row(model, coord, n);
  const auto a = model.factor_row(n, coord[n]);
  // a B(n) Q(n)^T s^T = sum_j a_j sum_r B(j, r) (q_r . s)
  double total = 0;
  for (std::size_t r = 0; r < model.core_rank(); ++r) {
    const auto q = q_column(model, n, r);
    double qs = 0;
    for (std::size_t k = 0; k < s.size(); ++k) qs += q[k] * s[k];
    const auto b = model.core_column(n, r);
    double ab = 0;
    for (std::size_t j = 0; j < a.size(); ++j) ab += static_cast<double>(a[j]) * b[j];
    total += ab * qs;
  }
  return total;
}

}  // namespace fastertucker::oracle
