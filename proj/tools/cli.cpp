#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fastertucker/checkpoint.hpp"
#include "fastertucker/csf_index.hpp"
#include "fastertucker/error.hpp"
#include "fastertucker/report.hpp"
#include "fastertucker/tensor_store.hpp"
#include "fastertucker/trainer.hpp"

namespace fastertucker::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

std::uint64_t parse_u64(std::string_view s, const std::string& what) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("bad " + what + ": '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::vector<std::uint64_t> parse_extent_list(const std::string& text, std::size_t order) {
  if (text.empty()) throw ConfigError("empty list");
  std::vector<std::uint64_t> out;
  if (const auto caret = text.find('^'); caret != std::string::npos) {
    const auto value = parse_u64(std::string_view(text).substr(0, caret), "list value");
    const auto count = parse_u64(std::string_view(text).substr(caret + 1), "list exponent");
    if (order != 0 && count != order)
      throw ConfigError("'" + text + "' has " + std::to_string(count) + " entries, expected " +
                        std::to_string(order));
    out.assign(count, value);
    return out;
  }
  std::string_view rest(text);
  for (;;) {
    const auto comma = rest.find(',');
    out.push_back(parse_u64(rest.substr(0, comma), "list value"));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.size() == 1 && order > 1) out.assign(order, out.front());
  if (order != 0 && out.size() != order)
    throw ConfigError("'" + text + "' has " + std::to_string(out.size()) + " entries, expected " +
                      std::to_string(order));
  return out;
}

int report_counts(std::ostream& out, const std::vector<CountRow>& rows) {
  out << "quantity,plan,formula,measured,match\n";
  bool ok = true;
  for (const auto& r : rows) {
    const bool match = r.formula == r.measured;
    ok = ok && match;
    out << r.quantity << ',' << r.plan << ',' << r.formula << ',' << r.measured << ','
        << (match ? "yes" : "NO") << '\n';
  }
  return ok ? kExitOk : kExitCountMismatch;
}

namespace {

struct DataFlags {
  std::string input;
  std::string manifest;
  std::size_t order = 0;
  std::string dims;
  std::uint64_t nnz = 0;
  std::uint64_t seed = 1;
  std::vector<double> value_range{1.0, 5.0};
  bool low_rank = false;
};

struct ModelFlags {
  std::string ranks = "8";
  std::size_t core_rank = 8;
  std::optional<std::uint64_t> init_seed;
  double init_lo = 0;
  double init_hi = 1;
  bool no_init_scale = false;
};

struct TrainFlags {
  double test_fraction = 0.1;
  double lr_a = 0.001;
  double lr_b = 0.001;
  double reg_a = 0.01;
  double reg_b = 0.01;
  std::size_t epochs = 50;
  std::string plan = "cached";
  std::string parallel = "serial";
  std::size_t fiber_threshold = kDefaultFiberThreshold;
  std::optional<double> rmse_delta;
  std::vector<double> minmax;
};

struct OutputFlags {
  std::string out;
  std::string checkpoint;
  std::string counters;
  std::string json_summary;
  std::size_t repeats = 3;
};

void add_data_flags(CLI::App* app, DataFlags& f) {
  app->add_option("--input", f.input, "COO file: N 1-based indices then a value per line");
  app->add_option("--manifest", f.manifest, "Regenerate the tensor described by a manifest");
  app->add_option("--order", f.order, "Tensor order N (inferred from --dims or the input)");
  app->add_option("--dims", f.dims, "Mode sizes: I1,...,IN or I^N");
  app->add_option("--nnz", f.nnz, "Number of nonzeros to sample");
  app->add_option("--seed", f.seed, "Seed for sampling, splitting and initialisation");
  app->add_option("--value-range", f.value_range, "Value range lo,hi for uniform values")
      ->delimiter(',')
      ->expected(2);
  app->add_flag("--low-rank", f.low_rank, "Values from a hidden model with --ranks/--core-rank");
}

void add_model_flags(CLI::App* app, ModelFlags& f) {
  app->add_option("--ranks", f.ranks, "Factor ranks J1,...,JN (one value is broadcast)");
  app->add_option("--core-rank", f.core_rank, "Core rank R");
  app->add_option("--init-seed", f.init_seed, "Seed for model initialisation (default: seed + 1)");
  app->add_option("--init-lo", f.init_lo, "Lower bound of uniform initialisation");
  app->add_option("--init-hi", f.init_hi, "Upper bound of uniform initialisation");
  app->add_flag("--no-init-scale", f.no_init_scale, "Do not scale initial entries by 1/sqrt(rank)");
}

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--test-fraction", f.test_fraction, "Held-out fraction (0 disables the test set)");
  app->add_option("--lr-a", f.lr_a, "Factor learning rate");
  app->add_option("--lr-b", f.lr_b, "Core learning rate");
  app->add_option("--reg-a", f.reg_a, "Factor regulariser");
  app->add_option("--reg-b", f.reg_b, "Core regulariser");
  app->add_option("--epochs", f.epochs, "Epoch limit");
  app->add_option("--plan", f.plan, "cached or uncached")->check(CLI::IsMember({"cached", "uncached"}));
  app->add_option("--parallel", f.parallel, "serial or a worker count (FASTERTUCKER_THREADS overrides)");
  app->add_option("--fiber-threshold", f.fiber_threshold, "Max fibers per subtensor");
  app->add_option("--rmse-delta", f.rmse_delta, "Stop once the RMSE change falls below this");
  app->add_option("--minmax-scale", f.minmax, "Rescale values linearly into lo,hi before splitting")
      ->delimiter(',')
      ->expected(2);
}

// Fully validated description of where the tensor comes from.
struct DataPlan {
  std::optional<fs::path> input;
  std::size_t order = 0;
  std::optional<std::vector<index_t>> dims;
  SyntheticSpec synth;
};

std::vector<index_t> to_dims(const std::vector<std::uint64_t>& v) {
  std::vector<index_t> out;
  for (auto d : v) {
    if (d == 0 || d > std::numeric_limits<index_t>::max())
      throw ConfigError("dimension " + std::to_string(d) + " out of range");
    out.push_back(static_cast<index_t>(d));
  }
  return out;
}

std::vector<std::size_t> to_ranks(const std::vector<std::uint64_t>& v) {
  std::vector<std::size_t> out;
  for (auto r : v) {
    if (r == 0) throw ConfigError("ranks must be positive");
    out.push_back(static_cast<std::size_t>(r));
  }
  return out;
}

std::size_t infer_order(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    std::size_t fields = 0;
    while (ss >> tok) {
      if (fields == 0 && tok.front() == '#') break;
      ++fields;
    }
    if (fields > 0) return fields - 1;
  }
  throw ParseError(0, "cannot infer order from an empty file");
}

json manifest_json(const SyntheticSpec& s, const std::string& data, const std::string& hidden) {
  json m;
  m["format"] = "fastertucker-manifest";
  m["version"] = kManifestVersion;
  m["order"] = s.dims.size();
  m["dims"] = s.dims;
  m["nnz"] = s.nnz;
  m["seed"] = s.seed;
  m["value_range"] = {static_cast<double>(s.value_lo), static_cast<double>(s.value_hi)};
  if (s.low_rank) {
    m["low_rank"] = {{"ranks", s.low_rank->ranks}, {"core_rank", s.low_rank->core_rank}};
    m["hidden_checkpoint"] = hidden;
  } else {
    m["low_rank"] = nullptr;
    m["hidden_checkpoint"] = nullptr;
  }
  m["data"] = data;
  return m;
}

SyntheticSpec spec_from_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json m;
  try {
    in >> m;
    if (m.at("version").get<int>() != kManifestVersion) throw ConfigError("unsupported manifest version");
    SyntheticSpec s;
    s.dims = m.at("dims").get<std::vector<index_t>>();
    s.nnz = m.at("nnz").get<std::size_t>();
    s.seed = m.at("seed").get<std::uint64_t>();
    s.value_lo = static_cast<real_t>(m.at("value_range").at(0).get<double>());
    s.value_hi = static_cast<real_t>(m.at("value_range").at(1).get<double>());
    if (const auto& lr = m.at("low_rank"); !lr.is_null())
      s.low_rank = LowRankSpec{lr.at("ranks").get<std::vector<std::size_t>>(), lr.at("core_rank").get<std::size_t>()};
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": bad manifest: " + e.what());
  }
}

DataPlan plan_data(const DataFlags& f, const ModelFlags& mf) {
  DataPlan p;
  const int sources = !f.input.empty() + !f.manifest.empty() + !f.dims.empty();
  if (sources != 1) throw ConfigError("give exactly one of --input, --manifest, --dims");
  if (!f.input.empty()) {
    p.input = f.input;
    p.order = f.order != 0 ? f.order : infer_order(*p.input);
    return p;
  }
  if (!f.manifest.empty()) {
    p.synth = spec_from_manifest(f.manifest);
    p.order = p.synth.dims.size();
    return p;
  }
  p.synth.dims = to_dims(parse_extent_list(f.dims, f.order));
  p.order = p.synth.dims.size();
  if (p.order < 3) throw ConfigError("order must be at least 3");
  if (f.nnz == 0) throw ConfigError("--nnz must be positive");
  p.synth.nnz = f.nnz;
  p.synth.seed = f.seed;
  if (f.value_range.size() != 2 || !(f.value_range[0] < f.value_range[1]))
    throw ConfigError("--value-range needs lo < hi");
  p.synth.value_lo = static_cast<real_t>(f.value_range[0]);
  p.synth.value_hi = static_cast<real_t>(f.value_range[1]);
  if (f.low_rank)
    p.synth.low_rank = LowRankSpec{to_ranks(parse_extent_list(mf.ranks, p.order)), mf.core_rank};
  if (const auto cells = cell_count(p.synth.dims); cells && p.synth.nnz > *cells)
    throw CapacityError("--nnz " + std::to_string(p.synth.nnz) + " exceeds the " + std::to_string(*cells) +
                        " cells of the tensor");
  return p;
}

SparseTensorCoo load_data(const DataPlan& p) {
  if (p.input) return load_coo(*p.input, p.order, p.dims);
  return generate_synthetic(p.synth).tensor;
}

struct ModelPlan {
  std::vector<std::size_t> ranks;
  std::size_t core_rank = 0;
  InitSpec init;
};

ModelPlan plan_model(const ModelFlags& f, std::size_t order, std::uint64_t seed) {
  ModelPlan p;
  p.ranks = to_ranks(parse_extent_list(f.ranks, order));
  if (f.core_rank == 0) throw ConfigError("--core-rank must be positive");
  p.core_rank = f.core_rank;
  if (!(f.init_lo <= f.init_hi)) throw ConfigError("--init-lo must not exceed --init-hi");
  p.init.lo = static_cast<real_t>(f.init_lo);
  p.init.hi = static_cast<real_t>(f.init_hi);
  p.init.seed = f.init_seed.value_or(seed + 1);
  p.init.scaled = !f.no_init_scale;
  return p;
}

std::size_t parse_workers(const std::string& text) {
  if (text == "serial") return 1;
  const auto k = parse_u64(text, "worker count");
  if (k == 0) throw ConfigError("worker count must be positive");
  return static_cast<std::size_t>(k);
}

TrainConfig plan_train(const TrainFlags& f, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.lr_a = static_cast<real_t>(f.lr_a);
  cfg.lr_b = static_cast<real_t>(f.lr_b);
  cfg.reg_a = static_cast<real_t>(f.reg_a);
  cfg.reg_b = static_cast<real_t>(f.reg_b);
  cfg.epochs = f.epochs;
  cfg.plan = f.plan == "uncached" ? Plan::Uncached : Plan::Cached;
  cfg.workers = parse_workers(f.parallel);
  if (const char* env = std::getenv("FASTERTUCKER_THREADS"); env && *env) cfg.workers = parse_workers(env);
  cfg.seed = seed;
  cfg.rmse_delta = f.rmse_delta;
  if (!(f.test_fraction >= 0 && f.test_fraction < 1)) throw ConfigError("--test-fraction must be in [0, 1)");
  if (f.fiber_threshold == 0) throw ConfigError("--fiber-threshold must be positive");
  if (!f.minmax.empty() && !(f.minmax.size() == 2 && f.minmax[0] < f.minmax[1]))
    throw ConfigError("--minmax-scale needs lo < hi");
  cfg.validate();
  return cfg;
}

// Output stream that is either a file or the fallback.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : fallback_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw IoError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : *fallback_; }
  void close(const std::string& path) {
    if (!file_.is_open()) return;
    file_.close();
    if (!file_) throw IoError("write failed for " + path);
  }

 private:
  std::ofstream file_;
  std::ostream* fallback_;
};

json counts_json(const OpCounter& c) {
  json j;
  for (std::size_t k = 0; k < kChannelCount; ++k)
    j[std::string(channel_name(static_cast<Channel>(k)))] = c.get(static_cast<Channel>(k));
  j["total"] = c.total();
  return j;
}

// ---- generate ---------------------------------------------------------------

int cmd_generate(const DataFlags& df, const ModelFlags& mf, const OutputFlags& of, std::ostream& out) {
  if (!df.input.empty()) throw ConfigError("generate does not take --input");
  if (of.out.empty()) throw ConfigError("generate needs --out");
  const DataPlan plan = plan_data(df, mf);
  const SyntheticTensor data = generate_synthetic(plan.synth);

  const fs::path data_path = of.out;
  write_coo(data_path, data.tensor);
  std::string hidden_name;
  if (data.hidden) {
    const fs::path hidden_path = data_path.string() + ".hidden.ftk";
    save_checkpoint(hidden_path, *data.hidden);
    hidden_name = hidden_path.filename().string();
  }
  const fs::path manifest_path = data_path.string() + ".manifest.json";
  std::ofstream m(manifest_path);
  if (!m) throw IoError("cannot write " + manifest_path.string());
  m << manifest_json(plan.synth, data_path.filename().string(), hidden_name).dump(2) << '\n';
  if (!m) throw IoError("write failed for " + manifest_path.string());
  out << "wrote " << data.tensor.nnz() << " entries to " << data_path.string() << '\n';
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const DataFlags& df, const ModelFlags& mf, const TrainFlags& tf, const OutputFlags& of,
              std::ostream& out, std::ostream& err) {
  const DataPlan dplan = plan_data(df, mf);
  const ModelPlan mplan = plan_model(mf, dplan.order, df.seed);
  const TrainConfig cfg = plan_train(tf, df.seed);

  SparseTensorCoo tensor = load_data(dplan);
  if (!tf.minmax.empty())
    tensor.rescale_values(static_cast<real_t>(tf.minmax[0]), static_cast<real_t>(tf.minmax[1]));
  std::optional<DatasetSplit> parts;
  if (tf.test_fraction > 0) parts = split(tensor, tf.test_fraction, df.seed);
  const SparseTensorCoo& train_set = parts ? parts->train : tensor;
  const SparseTensorCoo* test_set = parts ? &parts->test : nullptr;

  const CsfForest forest(train_set, tf.fiber_threshold);
  Model model = init_model(tensor.dims(), mplan.ranks, mplan.core_rank, mplan.init);

  Sink metrics(of.out, out);
  write_metrics_header(metrics.stream());
  Trainer trainer(model, forest, cfg);
  std::vector<EpochMetrics> history;
  auto record = [&](std::size_t epoch, double seconds, std::uint64_t mults) {
    EpochMetrics m;
    m.epoch = epoch;
    m.train = evaluate(model, train_set);
    if (test_set) m.test = evaluate(model, *test_set);
    m.seconds = seconds;
    m.multiplies = mults;
    write_metrics_row(metrics.stream(), m);
    history.push_back(m);
  };

  int code = kExitOk;
  record(0, 0.0, 0);
  try {
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      const auto before = trainer.counter().total();
      const auto t0 = std::chrono::steady_clock::now();
      trainer.run_epoch();
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      record(epoch, dt.count(), trainer.counter().total() - before);
      if (cfg.rmse_delta) {
        const auto& a = history[history.size() - 2];
        const auto& b = history.back();
        const double ra = a.test ? a.test->rmse : a.train.rmse;
        const double rb = b.test ? b.test->rmse : b.train.rmse;
        if (std::abs(ra - rb) < *cfg.rmse_delta) break;
      }
    }
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    code = kExitDivergence;
  }
  metrics.close(of.out);

  if (!of.checkpoint.empty() && code == kExitOk) save_checkpoint(of.checkpoint, model);
  if (!of.counters.empty()) {
    Sink counters(of.counters, out);
    write_counter_csv(counters.stream(), trainer.sweep_log());
    counters.close(of.counters);
  }
  if (!of.json_summary.empty()) {
    json j;
    j["command"] = "train";
    j["status"] = code == kExitOk ? "ok" : "diverged";
    j["order"] = tensor.order();
    j["dims"] = std::vector<index_t>(tensor.dims().begin(), tensor.dims().end());
    j["train_nnz"] = train_set.nnz();
    j["test_nnz"] = test_set ? test_set->nnz() : 0;
    j["seed"] = df.seed;
    j["ranks"] = mplan.ranks;
    j["core_rank"] = mplan.core_rank;
    j["init_seed"] = mplan.init.seed;
    j["lr_a"] = cfg.lr_a;
    j["lr_b"] = cfg.lr_b;
    j["reg_a"] = cfg.reg_a;
    j["reg_b"] = cfg.reg_b;
    j["plan"] = plan_name(cfg.plan);
    j["workers"] = cfg.workers;
    j["fiber_threshold"] = tf.fiber_threshold;
    j["epochs_run"] = trainer.epochs_done();
    const auto& last = history.back();
    j["final"] = {{"train_rmse", last.train.rmse}, {"train_mae", last.train.mae}};
    if (last.test) {
      j["final"]["test_rmse"] = last.test->rmse;
      j["final"]["test_mae"] = last.test->mae;
    }
    double seconds = 0;
    for (const auto& m : history) seconds += m.seconds;
    j["seconds"] = seconds;
    j["multiplies"] = counts_json(trainer.counter());
    Sink js(of.json_summary, out);
    js.stream() << j.dump(2) << '\n';
    js.close(of.json_summary);
  }
  return code;
}

// ---- bench ------------------------------------------------------------------

int cmd_bench(const DataFlags& df, const ModelFlags& mf, const TrainFlags& tf, const OutputFlags& of,
              std::ostream& out) {
  const DataPlan dplan = plan_data(df, mf);
  const ModelPlan mplan = plan_model(mf, dplan.order, df.seed);
  TrainConfig cfg = plan_train(tf, df.seed);
  if (of.repeats == 0) throw ConfigError("--repeats must be positive");

  const SparseTensorCoo tensor = load_data(dplan);
  const CsfForest forest(tensor, tf.fiber_threshold);
  const Model initial = init_model(tensor.dims(), mplan.ranks, mplan.core_rank, mplan.init);
  const std::size_t order = tensor.order();

  Sink sink(of.out, out);
  auto& os = sink.stream();
  os << "plan,workers,factor_sweep_seconds,core_sweep_seconds,ab_products,multiplies\n";
  double factor_s[2] = {0, 0};
  for (const Plan plan : {Plan::Cached, Plan::Uncached}) {
    cfg.plan = plan;
    double best_factor = std::numeric_limits<double>::infinity();
    double best_core = best_factor;
    OpCounter counts;
    for (std::size_t rep = 0; rep < of.repeats; ++rep) {
      Model model = initial;
      Trainer trainer(model, forest, cfg);
      trainer.prepare();
      const auto t0 = std::chrono::steady_clock::now();
      for (mode_t t = 0; t < order; ++t) trainer.update_factor_mode(t);
      const auto t1 = std::chrono::steady_clock::now();
      for (mode_t t = 0; t < order; ++t) trainer.update_core_mode(t);
      const auto t2 = std::chrono::steady_clock::now();
      best_factor = std::min(best_factor, std::chrono::duration<double>(t1 - t0).count() / order);
      best_core = std::min(best_core, std::chrono::duration<double>(t2 - t1).count() / order);
      counts = trainer.counter();
    }
    factor_s[plan == Plan::Cached ? 0 : 1] = best_factor;
    const auto prev = os.precision(6);
    os << plan_name(plan) << ',' << cfg.workers << ',' << best_factor << ',' << best_core << ','
       << counts.get(Channel::AbProducts) << ',' << counts.total() << '\n';
    os.precision(prev);
  }
  os << "# factor sweep speedup (uncached/cached): " << factor_s[1] / factor_s[0] << '\n';
  sink.close(of.out);
  return kExitOk;
}

// ---- count ------------------------------------------------------------------

int cmd_count(const DataFlags& df, const ModelFlags& mf, const TrainFlags& tf, const OutputFlags& of,
              std::ostream& out) {
  const DataPlan dplan = plan_data(df, mf);
  const ModelPlan mplan = plan_model(mf, dplan.order, df.seed);
  if (tf.fiber_threshold == 0) throw ConfigError("--fiber-threshold must be positive");

  const SparseTensorCoo tensor = load_data(dplan);
  const CsfForest forest(tensor, tf.fiber_threshold);
  const Model model(std::vector<index_t>(tensor.dims().begin(), tensor.dims().end()), mplan.ranks,
                    mplan.core_rank);
  const std::size_t order = tensor.order();
  const std::size_t R = mplan.core_rank;
  const std::uint64_t nnz = tensor.nnz();

  const SweepCost cached = counted_sweep_cost(Plan::Cached, forest, model);
  const SweepCost uncached = counted_sweep_cost(Plan::Uncached, forest, model);

  std::uint64_t sv_cached = 0, sv_uncached = 0, grad = 0;
  for (const auto& tree : forest.trees()) {
    const mode_t m = tree.leaf_mode();
    const auto per = cost::shared_vec_per_fiber(order, model.rank(m), R);
    sv_cached += tree.node_count(order - 2) * per;
    sv_uncached += nnz * per;
    grad += nnz * 4 * model.rank(m);
  }
  const auto pass = cost::ab_pass(model.dims(), model.ranks(), R);
  std::vector<CountRow> rows = {
      {"precompute_ab", "cached", pass, cached.precompute},
      {"refresh_ab", "cached", pass, cached.refresh},
      {"sweep_ab", "cached", 0, cached.sweep_ab},
      {"sweep_ab", "uncached", cost::uncached_ab_sweep(order, nnz, model.ranks(), R), uncached.sweep_ab},
      {"shared_vec", "cached", sv_cached, cached.shared_vec},
      {"shared_vec", "uncached", sv_uncached, uncached.shared_vec},
      {"gradient", "cached", grad, cached.gradient},
      {"gradient", "uncached", grad, uncached.gradient},
  };

  Sink sink(of.out, out);
  auto& os = sink.stream();
  const int code = report_counts(os, rows);
  const auto cached_total = cached.ab_products() + cached.shared_vec + cached.gradient;
  const auto uncached_total = uncached.ab_products() + uncached.shared_vec + uncached.gradient;
  os << "# order " << order << ", nnz " << nnz << ", fibers " << cached.fibers << '\n';
  os << "# ab products: cached " << cached.ab_products() << " (precompute " << cached.precompute
     << " + refresh " << cached.refresh << "), uncached " << uncached.ab_products() << '\n';
  os << "# factor pass multiplies: cached " << cached_total << ", uncached " << uncached_total
     << ", ratio uncached/cached " << static_cast<double>(uncached_total) / static_cast<double>(cached_total)
     << '\n';
  sink.close(of.out);
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse tensor FastTucker/FasterTucker trainer", "fastertucker"};
  app.require_subcommand(1);

  DataFlags df;
  ModelFlags mf;
  TrainFlags tf;
  OutputFlags of;

  auto* gen = app.add_subcommand("generate", "Sample a synthetic tensor and write COO + manifest");
  add_data_flags(gen, df);
  add_model_flags(gen, mf);
  gen->add_option("--out", of.out, "Output COO path")->required();

  auto* train = app.add_subcommand("train", "Train and write per-epoch metrics");
  add_data_flags(train, df);
  add_model_flags(train, mf);
  add_train_flags(train, tf);
  train->add_option("--out", of.out, "Metrics CSV (default stdout)");
  train->add_option("--checkpoint", of.checkpoint, "Final model checkpoint");
  train->add_option("--counters", of.counters, "Per-sweep multiply counters CSV");
  train->add_option("--json", of.json_summary, "JSON run summary");

  auto* bench = app.add_subcommand("bench", "Time factor and core sweeps for both plans");
  add_data_flags(bench, df);
  add_model_flags(bench, mf);
  add_train_flags(bench, tf);
  bench->add_option("--out", of.out, "Report CSV (default stdout)");
  bench->add_option("--repeats", of.repeats, "Repetitions; the fastest is reported");

  auto* count = app.add_subcommand("count", "Check measured multiply counts against closed forms");
  add_data_flags(count, df);
  add_model_flags(count, mf);
  count->add_option("--fiber-threshold", tf.fiber_threshold, "Max fibers per subtensor");
  count->add_option("--out", of.out, "Report CSV (default stdout)");

  if (argc <= 1) {
    out << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(df, mf, of, out);
    if (*train) return cmd_train(df, mf, tf, of, out, err);
    if (*bench) return cmd_bench(df, mf, tf, of, out);
    return cmd_count(df, mf, tf, of, out);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"fastertucker"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace fastertucker::cli
