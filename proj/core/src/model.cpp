#include "fastertucker/model.hpp"

#include <cmath>
#include <random>

#include "fastertucker/error.hpp"
#include "fastertucker/tensor_store.hpp"

namespace fastertucker {

Model::Model(std::vector<index_t> dims, std::vector<std::size_t> ranks, std::size_t core_rank)
    : dims_(std::move(dims)), ranks_(std::move(ranks)), core_rank_(core_rank) {
  if (dims_.size() < 3) throw ConfigError("model order must be at least 3");
  if (ranks_.size() != dims_.size())
    throw ConfigError("need one rank per mode: got " + std::to_string(ranks_.size()) + " ranks for " +
                      std::to_string(dims_.size()) + " modes");
  if (core_rank_ == 0) throw ConfigError("core rank R must be at least 1");
  for (std::size_t n = 0; n < dims_.size(); ++n) {
    if (dims_[n] == 0) throw ConfigError("dimension of mode " + std::to_string(n + 1) + " must be positive");
    if (ranks_[n] == 0) throw ConfigError("rank J" + std::to_string(n + 1) + " must be positive");
  }
  factors_.reserve(dims_.size());
  cores_t_.reserve(dims_.size());
  for (std::size_t n = 0; n < dims_.size(); ++n) {
    factors_.emplace_back(dims_[n], ranks_[n]);
    cores_t_.emplace_back(core_rank_, ranks_[n]);
  }
}

bool Model::all_finite() const {
  auto finite = [](const Matrix& m) {
    for (real_t v : m.data())
      if (!std::isfinite(v)) return false;
    return true;
  };
  for (std::size_t n = 0; n < order(); ++n)
    if (!finite(factors_[n]) || !finite(cores_t_[n])) return false;
  return true;
}

Model init_model(std::span<const index_t> dims, std::span<const std::size_t> ranks,
                 std::size_t core_rank, const InitSpec& spec) {
  if (spec.lo > spec.hi) throw ConfigError("init range must satisfy lo <= hi");
  Model model(std::vector<index_t>(dims.begin(), dims.end()),
              std::vector<std::size_t>(ranks.begin(), ranks.end()), core_rank);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uniform(spec.lo, spec.hi);
  for (std::size_t n = 0; n < model.order(); ++n) {
    const double scale = spec.scaled ? 1.0 / std::sqrt(static_cast<double>(ranks[n])) : 1.0;
    for (auto& v : model.factor(n).data()) v = static_cast<real_t>(uniform(rng) * scale);
  }
  const double core_scale = spec.scaled ? 1.0 / std::sqrt(static_cast<double>(core_rank)) : 1.0;
  for (std::size_t n = 0; n < model.order(); ++n)
    for (auto& v : model.core_t(n).data()) v = static_cast<real_t>(uniform(rng) * core_scale);
  return model;
}

real_t sq_fast(const Model& model, std::span<const index_t> coord, mode_t skip_mode, std::size_t r) {
  real_t sq = 1;
  for (std::size_t n = 0; n < model.order(); ++n) {
    if (n == skip_mode) continue;
    sq *= dot(model.factor_row(n, coord[n]), model.core_column(n, r));
  }
  return sq;
}

real_t predict_element(const Model& model, std::span<const index_t> coord) {
  real_t sum = 0;
  for (std::size_t r = 0; r < model.core_rank(); ++r) {
    real_t term = 1;
    for (std::size_t n = 0; n < model.order(); ++n)
      term *= dot(model.factor_row(n, coord[n]), model.core_column(n, r));
    sum += term;
  }
  return sum;
}

real_t predict_split(const Model& model, std::span<const index_t> coord, mode_t n) {
  std::vector<real_t> vec(model.rank(n), real_t(0));
  for (std::size_t r = 0; r < model.core_rank(); ++r) {
    const real_t sq = sq_fast(model, coord, n, r);
    const auto b = model.core_column(n, r);
    for (std::size_t j = 0; j < vec.size(); ++j) vec[j] += sq * b[j];
  }
  return dot(model.factor_row(n, coord[n]), vec);
}

void check_compatible(const Model& model, const SparseTensorCoo& tensor) {
  if (model.order() != tensor.order())
    throw ConfigError("model order " + std::to_string(model.order()) + " does not match tensor order " +
                      std::to_string(tensor.order()));
  for (std::size_t n = 0; n < model.order(); ++n)
    if (model.dims()[n] < tensor.dims()[n])
      throw ConfigError("model dimension of mode " + std::to_string(n + 1) + " is smaller than the tensor's");
}

double full_loss(const Model& model, const SparseTensorCoo& tensor, double reg_a, double reg_b) {
  check_compatible(model, tensor);
  double loss = 0;
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    const double err = static_cast<double>(tensor.value(e)) - predict_element(model, tensor.coord(e));
    loss += err * err;
  }
  for (std::size_t n = 0; n < model.order(); ++n) {
    double fa = 0, fb = 0;
    for (real_t v : model.factor(n).data()) fa += static_cast<double>(v) * v;
    for (real_t v : model.core_t(n).data()) fb += static_cast<double>(v) * v;
    loss += reg_a * fa + reg_b * fb;
  }
  return loss;
}

}  // namespace fastertucker
