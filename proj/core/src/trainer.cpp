#include "fastertucker/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "fastertucker/error.hpp"

namespace fastertucker {

std::string_view plan_name(Plan p) { return p == Plan::Cached ? "cached" : "uncached"; }

std::string_view sweep_name(SweepKind k) {
  switch (k) {
    case SweepKind::Precompute: return "precompute";
    case SweepKind::Factor: return "factor";
    case SweepKind::Core: return "core";
  }
  return "?";
}

void TrainConfig::validate() const {
  auto nonneg = [](real_t v) { return std::isfinite(v) && v >= 0; };
  if (!nonneg(lr_a) || !nonneg(lr_b)) throw ConfigError("learning rates must be finite and non-negative");
  if (!nonneg(reg_a) || !nonneg(reg_b)) throw ConfigError("regularizers must be finite and non-negative");
  if (workers == 0) throw ConfigError("need at least one worker");
  if (rmse_delta && !(*rmse_delta > 0)) throw ConfigError("rmse delta must be positive");
}

namespace {

template <class ModelT>
struct SweepContext {
  ModelT& model;
  const AbCache* cache;  // cached plan only
  const CsfTree& tree;
  mode_t leaf;           // the mode being updated
  real_t lr;
  real_t reg;
};

struct WorkerState {
  std::vector<index_t> coord;
  SharedVec sv;
  OpCounter counter;
  std::vector<real_t> row;
  Matrix grad;  // core sweeps: R x J_leaf

  WorkerState(const Model& model, mode_t leaf, bool with_grad)
      : coord(model.order(), 0), sv(model, leaf), row(model.rank(leaf)) {
    if (with_grad) grad = Matrix(model.core_rank(), model.rank(leaf));
  }
};

// Preorder walk of one subtensor. At the parent-of-leaf depth the cached plan
// builds the shared vector once; the uncached plan rebuilds everything for
// each leaf.
template <Plan kPlan, bool kCountOnly, class ModelT, class Leaf>
void walk(const SweepContext<ModelT>& ctx, WorkerState& ws, std::size_t depth, std::size_t node,
          const Leaf& leaf) {
  const CsfTree& tree = ctx.tree;
  const std::size_t order = tree.order();
  ws.coord[tree.level_modes()[depth]] = tree.level_index(depth)[node];
  const auto ptr = tree.level_ptr(depth);
  if (depth + 2 < order) {
    for (std::size_t c = ptr[node]; c < ptr[node + 1]; ++c)
      walk<kPlan, kCountOnly>(ctx, ws, depth + 1, c, leaf);
    return;
  }
  const Model& model = ctx.model;
  const std::size_t R = model.core_rank();
  const std::size_t J = model.rank(ctx.leaf);
  if constexpr (kPlan == Plan::Cached) {
    if constexpr (kCountOnly)
      ws.counter.add(Channel::SharedVec, cost::shared_vec_per_fiber(order, J, R));
    else
      shared_vec(*ctx.cache, model, ws.coord, ctx.leaf, ws.sv, &ws.counter);
  }
  const auto leaf_index = tree.level_index(order - 1);
  const auto values = tree.leaf_values();
  for (std::size_t c = ptr[node]; c < ptr[node + 1]; ++c) {
    ws.coord[ctx.leaf] = leaf_index[c];
    if constexpr (kPlan == Plan::Uncached) {
      if constexpr (kCountOnly) {
        ws.counter.add(Channel::AbProducts, cost::sum_jr(model.ranks(), R) - J * R);
        ws.counter.add(Channel::SharedVec, cost::shared_vec_per_fiber(order, J, R));
      } else {
        shared_vec_uncached(model, ws.coord, ctx.leaf, ws.sv, &ws.counter);
      }
    }
    leaf(ws, leaf_index[c], values[c]);
  }
}

// a <- a - lr (reg a - e vec), e = x - a.vec
template <bool kConcurrent, bool kCountOnly, class ModelT>
struct FactorLeaf {
  const SweepContext<ModelT>& ctx;

  void operator()(WorkerState& ws, index_t i, real_t x) const {
    const std::size_t J = ws.row.size();
    ws.counter.add(Channel::Gradient, 4 * J);
    if constexpr (!kCountOnly) {
      real_t* a = ctx.model.factor(ctx.leaf).row(i).data();
      auto& row = ws.row;
      const auto& vec = ws.sv.vec;
      if constexpr (kConcurrent) {
        for (std::size_t j = 0; j < J; ++j) row[j] = std::atomic_ref<real_t>(a[j]).load(std::memory_order_relaxed);
      } else {
        std::copy(a, a + J, row.begin());
      }
      const real_t e = x - dot(row, vec);
      for (std::size_t j = 0; j < J; ++j) row[j] -= ctx.lr * (ctx.reg * row[j] - e * vec[j]);
      if constexpr (kConcurrent) {
        for (std::size_t j = 0; j < J; ++j) std::atomic_ref<real_t>(a[j]).store(row[j], std::memory_order_relaxed);
      } else {
        std::copy(row.begin(), row.end(), a);
      }
    }
  }
};

// grad_r += -e sq_r a, e = x - a.vec
template <bool kCountOnly, class ModelT>
struct CoreLeaf {
  const SweepContext<ModelT>& ctx;

  void operator()(WorkerState& ws, index_t i, real_t x) const {
    const std::size_t J = ws.row.size();
    const std::size_t R = ws.sv.sq.size();
    ws.counter.add(Channel::Gradient, J + R * (J + 1));
    if constexpr (!kCountOnly) {
      const auto a = ctx.model.factor_row(ctx.leaf, i);
      const real_t e = x - dot(a, ws.sv.vec);
      for (std::size_t r = 0; r < R; ++r) {
        const real_t coeff = -(e * ws.sv.sq[r]);
        auto g = ws.grad.row(r);
        for (std::size_t j = 0; j < J; ++j) g[j] += coeff * a[j];
      }
    }
  }
};

template <class Body>
void for_each_subtensor(std::size_t count, std::vector<WorkerState>& states, const Body& body) {
  if (states.size() == 1) {
    for (std::size_t s = 0; s < count; ++s) body(states[0], s);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(states.size());
  for (std::size_t w = 0; w < states.size(); ++w) {
    pool.emplace_back([&, w] {
      for (;;) {
        const std::size_t s = next.fetch_add(1, std::memory_order_relaxed);
        if (s >= count) break;
        body(states[w], s);
      }
    });
  }
}

template <Plan kPlan, bool kConcurrent, bool kCountOnly, class ModelT>
void factor_sweep(const SweepContext<ModelT>& ctx, std::vector<WorkerState>& states) {
  const FactorLeaf<kConcurrent, kCountOnly, ModelT> leaf{ctx};
  for_each_subtensor(ctx.tree.subtensor_count(), states, [&](WorkerState& ws, std::size_t s) {
    walk<kPlan, kCountOnly>(ctx, ws, 0, s, leaf);
  });
}

template <Plan kPlan, class ModelT>
void core_sweep(const SweepContext<ModelT>& ctx, std::vector<WorkerState>& states) {
  const CoreLeaf<false, ModelT> leaf{ctx};
  for_each_subtensor(ctx.tree.subtensor_count(), states, [&](WorkerState& ws, std::size_t s) {
    walk<kPlan, false>(ctx, ws, 0, s, leaf);
  });
}

std::vector<WorkerState> make_states(const Model& model, mode_t leaf, std::size_t workers, bool grad) {
  std::vector<WorkerState> states;
  states.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) states.emplace_back(model, leaf, grad);
  return states;
}

void check_cache_clean(const AbCache& cache, mode_t leaf) {
  for (std::size_t k = 0; k < cache.order(); ++k)
    if (k != leaf && !cache.clean(k))
      throw StaleCacheError("a.b cache of mode " + std::to_string(k + 1) + " is stale");
}

}  // namespace

Trainer::Trainer(Model& model, const CsfForest& forest, TrainConfig cfg)
    : model_(&model), forest_(&forest), cfg_(cfg) {
  cfg_.validate();
  if (forest.order() != model.order())
    throw ConfigError("model order does not match the tensor order");
  for (std::size_t n = 0; n < model.order(); ++n)
    if (model.dims()[n] < forest.dims()[n])
      throw ConfigError("model dimension of mode " + std::to_string(n + 1) + " is smaller than the tensor's");
}

void Trainer::prepare() {
  if (prepared_) return;
  if (cfg_.plan == Plan::Cached) {
    cache_ = AbCache(*model_);
    OpCounter spent;
    cache_.precompute(*model_, &spent);
    counter_ += spent;
    log_.push_back({cfg_.plan, SweepKind::Precompute, 0, spent});
  }
  prepared_ = true;
}

void Trainer::refresh(mode_t mode, OpCounter& spent) {
  if (cfg_.plan != Plan::Cached) return;
  cache_.mark_dirty(mode);
  cache_.refresh_mode(*model_, mode, &spent);
}

void Trainer::check_divergence(const Matrix& m, mode_t mode, std::string_view what) const {
  for (real_t v : m.data())
    if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit)
      throw DivergenceError(epoch_, mode, std::string(what) + " entry " + std::to_string(v));
}

void Trainer::update_factor_mode(mode_t root_mode) {
  prepare();
  const CsfTree& tree = forest_->tree(root_mode);
  const mode_t leaf = tree.leaf_mode();
  if (cfg_.plan == Plan::Cached) check_cache_clean(cache_, leaf);

  const SweepContext<Model> ctx{*model_, &cache_, tree, leaf, cfg_.lr_a, cfg_.reg_a};
  auto states = make_states(*model_, leaf, cfg_.workers, false);
  const bool concurrent = cfg_.workers > 1;
  if (cfg_.plan == Plan::Cached) {
    if (concurrent) factor_sweep<Plan::Cached, true, false>(ctx, states);
    else factor_sweep<Plan::Cached, false, false>(ctx, states);
  } else {
    if (concurrent) factor_sweep<Plan::Uncached, true, false>(ctx, states);
    else factor_sweep<Plan::Uncached, false, false>(ctx, states);
  }

  OpCounter spent;
  for (const auto& ws : states) spent += ws.counter;
  check_divergence(model_->factor(leaf), leaf, "factor");
  refresh(leaf, spent);
  counter_ += spent;
  log_.push_back({cfg_.plan, SweepKind::Factor, leaf, spent});
}

Matrix Trainer::accumulate_core_gradient(mode_t root_mode) {
  prepare();
  const CsfTree& tree = forest_->tree(root_mode);
  const mode_t leaf = tree.leaf_mode();
  if (cfg_.plan == Plan::Cached) check_cache_clean(cache_, leaf);

  const SweepContext<const Model> ctx{*model_, &cache_, tree, leaf, cfg_.lr_b, cfg_.reg_b};
  auto states = make_states(*model_, leaf, cfg_.workers, true);
  if (cfg_.plan == Plan::Cached) core_sweep<Plan::Cached>(ctx, states);
  else core_sweep<Plan::Uncached>(ctx, states);

  // Private buffers merged in worker order.
  Matrix grad = std::move(states[0].grad);
  OpCounter spent = states[0].counter;
  for (std::size_t w = 1; w < states.size(); ++w) {
    const auto src = states[w].grad.data();
    auto dst = grad.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    spent += states[w].counter;
  }
  counter_ += spent;
  return grad;
}

void Trainer::apply_core_gradient(mode_t root_mode, const Matrix& grad) {
  prepare();
  const mode_t leaf = forest_->tree(root_mode).leaf_mode();
  Matrix& bt = model_->core_t(leaf);
  if (grad.rows() != bt.rows() || grad.cols() != bt.cols())
    throw ConfigError("core gradient shape does not match core matrix");
  const real_t inv_nnz = real_t(1) / static_cast<real_t>(forest_->nnz());
  auto b = bt.data();
  const auto g = grad.data();
  for (std::size_t k = 0; k < b.size(); ++k) b[k] -= cfg_.lr_b * (g[k] * inv_nnz + cfg_.reg_b * b[k]);
  counter_.add(Channel::Gradient, 3 * b.size());
  check_divergence(bt, leaf, "core");
  if (cfg_.plan == Plan::Cached) cache_.mark_dirty(leaf);
}

void Trainer::update_core_mode(mode_t root_mode) {
  const OpCounter before = counter_;
  const mode_t leaf = forest_->tree(root_mode).leaf_mode();
  const Matrix grad = accumulate_core_gradient(root_mode);
  apply_core_gradient(root_mode, grad);
  OpCounter spent = counter_ - before;
  if (cfg_.plan == Plan::Cached) {
    OpCounter refresh_spent;
    cache_.refresh_mode(*model_, leaf, &refresh_spent);
    spent += refresh_spent;
    counter_ += refresh_spent;
  }
  log_.push_back({cfg_.plan, SweepKind::Core, leaf, spent});
}

void Trainer::run_epoch() {
  prepare();
  const std::size_t order = model_->order();
  for (mode_t t = 0; t < order; ++t) update_factor_mode(t);
  for (mode_t t = 0; t < order; ++t) update_core_mode(t);
  ++epoch_;
}

EvalResult evaluate(const Model& model, const SparseTensorCoo& tensor) {
  if (tensor.nnz() == 0) throw ValidationError("cannot evaluate on an empty set");
  check_compatible(model, tensor);
  double se = 0, ae = 0;
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    const double err = static_cast<double>(tensor.value(e)) - predict_element(model, tensor.coord(e));
    se += err * err;
    ae += std::abs(err);
  }
  const double n = static_cast<double>(tensor.nnz());
  return {std::sqrt(se / n), ae / n};
}

std::vector<EpochMetrics> train(Model& model, const CsfForest& forest, const SparseTensorCoo& train_set,
                                const SparseTensorCoo* test_set, const TrainConfig& cfg,
                                const EpochCallback& on_epoch) {
  Trainer trainer(model, forest, cfg);
  std::vector<EpochMetrics> history;
  auto measure = [&](std::size_t epoch, double seconds, std::uint64_t mults) {
    EpochMetrics m;
    m.epoch = epoch;
    m.train = evaluate(model, train_set);
    if (test_set) m.test = evaluate(model, *test_set);
    m.seconds = seconds;
    m.multiplies = mults;
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  };
  measure(0, 0.0, 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto before = trainer.counter().total();
    const auto t0 = std::chrono::steady_clock::now();
    trainer.run_epoch();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    measure(epoch, dt.count(), trainer.counter().total() - before);
    if (cfg.rmse_delta) {
      const auto& prev = history[history.size() - 2];
      const auto& cur = history.back();
      const double a = prev.test ? prev.test->rmse : prev.train.rmse;
      const double b = cur.test ? cur.test->rmse : cur.train.rmse;
      if (std::abs(a - b) < *cfg.rmse_delta) break;
    }
  }
  return history;
}

std::vector<real_t> factor_gradient(const Model& model, std::span<const index_t> coord, real_t value,
                                    mode_t n, real_t reg) {
  SharedVec sv(model, n);
  shared_vec_uncached(model, coord, n, sv);
  const auto a = model.factor_row(n, coord[n]);
  const real_t e = value - dot(a, sv.vec);
  std::vector<real_t> g(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) g[j] = reg * a[j] - e * sv.vec[j];
  return g;
}

std::vector<real_t> core_gradient(const Model& model, std::span<const index_t> coord, real_t value,
                                  mode_t n, std::size_t r, real_t reg) {
  SharedVec sv(model, n);
  shared_vec_uncached(model, coord, n, sv);
  const auto a = model.factor_row(n, coord[n]);
  const auto b = model.core_column(n, r);
  const real_t e = value - dot(a, sv.vec);
  const real_t coeff = -(e * sv.sq[r]);
  std::vector<real_t> g(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) g[j] = coeff * a[j] + reg * b[j];
  return g;
}

SweepCost counted_sweep_cost(Plan plan, const CsfForest& forest, const Model& model) {
  if (forest.order() != model.order()) throw ConfigError("model order does not match the tensor order");
  SweepCost out;
  if (plan == Plan::Cached) out.precompute = cost::ab_pass(model.dims(), model.ranks(), model.core_rank());
  OpCounter total;
  for (mode_t t = 0; t < forest.order(); ++t) {
    const CsfTree& tree = forest.tree(t);
    const mode_t leaf = tree.leaf_mode();
    const SweepContext<const Model> ctx{model, nullptr, tree, leaf, 0, 0};
    auto states = make_states(model, leaf, 1, false);
    if (plan == Plan::Cached) {
      factor_sweep<Plan::Cached, false, true>(ctx, states);
      out.refresh += cost::ab_mode(model.dims(), model.ranks(), model.core_rank(), leaf);
    } else {
      factor_sweep<Plan::Uncached, false, true>(ctx, states);
    }
    total += states[0].counter;
    out.fibers += tree.node_count(tree.order() - 2);
  }
  out.sweep_ab = total.get(Channel::AbProducts);
  out.shared_vec = total.get(Channel::SharedVec);
  out.gradient = total.get(Channel::Gradient);
  return out;
}

}  // namespace fastertucker
