#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fastertucker/csf_index.hpp"
#include "fastertucker/intermediates.hpp"
#include "fastertucker/model.hpp"
#include "fastertucker/tensor_store.hpp"

namespace fastertucker {

// Cached: products come from AbCache and the shared vector is built once per
// fiber. Uncached: every leaf recomputes all of them from the factor rows.
enum class Plan { Cached, Uncached };

std::string_view plan_name(Plan p);

inline constexpr double kDivergenceLimit = 1e12;

struct TrainConfig {
  real_t lr_a = real_t(0.001);
  real_t lr_b = real_t(0.001);
  real_t reg_a = real_t(0.01);
  real_t reg_b = real_t(0.01);
  std::size_t epochs = 50;
  Plan plan = Plan::Cached;
  // 1 runs the deterministic serial schedule; k > 1 runs k hogwild workers.
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  // Stop early once |test (or train) RMSE change| falls below this.
  std::optional<double> rmse_delta;

  void validate() const;
};

struct EvalResult {
  double rmse = 0;
  double mae = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  EvalResult train;
  std::optional<EvalResult> test;
  double seconds = 0;
  std::uint64_t multiplies = 0;
};

enum class SweepKind { Precompute, Factor, Core };

std::string_view sweep_name(SweepKind k);

// Multiplies spent by one sweep, including the cache refresh that follows it.
struct SweepRecord {
  Plan plan = Plan::Cached;
  SweepKind kind = SweepKind::Factor;
  mode_t mode = 0;  // mode whose factor or core was updated
  OpCounter counts;
};

// Runs sweeps over one forest. The model is updated in place.
//
// A factor or core sweep with root mode t traverses forest.tree(t) and updates
// factor/core leaf_mode_of(t). An epoch processes t = 0..N-1 for factors, then
// t = 0..N-1 for cores, refreshing the updated mode after every sweep.
class Trainer {
 public:
  Trainer(Model& model, const CsfForest& forest, TrainConfig cfg);

  const TrainConfig& config() const noexcept { return cfg_; }
  const Model& model() const noexcept { return *model_; }
  const AbCache& cache() const noexcept { return cache_; }
  const OpCounter& counter() const noexcept { return counter_; }
  std::span<const SweepRecord> sweep_log() const noexcept { return log_; }
  std::size_t epochs_done() const noexcept { return epoch_; }

  // Builds the a.b cache once (cached plan only). Called lazily by the
  // sweeps; idempotent.
  void prepare();

  // Per-leaf SGD on factor leaf_mode_of(root_mode), then refresh.
  void update_factor_mode(mode_t root_mode);

  // Accumulated core gradient over all leaves, single step, then refresh.
  void update_core_mode(mode_t root_mode);

  // Sum over leaves of the data-term gradient -e * sq[r] * a, as an R x J
  // matrix, evaluated at the current model. Does not change the model.
  Matrix accumulate_core_gradient(mode_t root_mode);

  // b <- b - lr_b (grad / |Omega| + reg_b b) for the leaf mode of root_mode.
  // Marks the mode dirty but does not refresh it.
  void apply_core_gradient(mode_t root_mode, const Matrix& grad);

  void run_epoch();

 private:
  void refresh(mode_t mode, OpCounter& spent);
  void check_divergence(const Matrix& m, mode_t mode, std::string_view what) const;

  Model* model_;
  const CsfForest* forest_;
  TrainConfig cfg_;
  AbCache cache_;
  bool prepared_ = false;
  std::size_t epoch_ = 0;
  OpCounter counter_;
  std::vector<SweepRecord> log_;
};

EvalResult evaluate(const Model& model, const SparseTensorCoo& tensor);

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Epoch 0 is the evaluation of the initial model. Returns every epoch's
// metrics, stopping early when cfg.rmse_delta is met.
std::vector<EpochMetrics> train(Model& model, const CsfForest& forest,
                                const SparseTensorCoo& train_set,
                                const SparseTensorCoo* test_set, const TrainConfig& cfg,
                                const EpochCallback& on_epoch = {});

// Half-gradients of the single-element objectives with the factor 2 folded
// into the learning rate:
//   factor: d/da [ (x - xhat)^2 + reg ||a||^2 ] / 2 = -e vec + reg a
//   core:   d/db_r [ (x - xhat)^2 + reg ||b_r||^2 ] / 2 = -e sq_r a + reg b_r
std::vector<real_t> factor_gradient(const Model& model, std::span<const index_t> coord,
                                    real_t value, mode_t n, real_t reg);
std::vector<real_t> core_gradient(const Model& model, std::span<const index_t> coord,
                                  real_t value, mode_t n, std::size_t r, real_t reg);

struct SweepCost {
  std::uint64_t precompute = 0;   // cached plan: initial a.b table
  std::uint64_t refresh = 0;      // cached plan: per-mode refreshes after sweeps
  std::uint64_t sweep_ab = 0;     // uncached plan: on-the-fly a.b products
  std::uint64_t shared_vec = 0;
  std::uint64_t gradient = 0;
  std::uint64_t fibers = 0;       // fiber nodes visited over all trees

  std::uint64_t ab_products() const noexcept { return precompute + refresh + sweep_ab; }
};

// Multiply counts of one factor-update pass over all N modes, walking the
// same traversal as the real sweep with the arithmetic compiled out.
SweepCost counted_sweep_cost(Plan plan, const CsfForest& forest, const Model& model);

}  // namespace fastertucker
