#include "fastertucker/tensor_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>

#include "fastertucker/error.hpp"

namespace fastertucker {

namespace {

// Entry ids ordered lexicographically by coordinate tuple.
std::vector<std::size_t> sorted_entry_order(std::span<const index_t> coords, std::size_t order) {
  const std::size_t nnz = coords.size() / order;
  std::vector<std::size_t> perm(nnz);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    const index_t* ca = coords.data() + a * order;
    const index_t* cb = coords.data() + b * order;
    return std::lexicographical_compare(ca, ca + order, cb, cb + order);
  });
  return perm;
}

// First pair of entries sharing a coordinate tuple, as (earlier, later).
std::optional<std::pair<std::size_t, std::size_t>> find_duplicate(
    std::span<const index_t> coords, std::size_t order) {
  const auto perm = sorted_entry_order(coords, order);
  std::optional<std::pair<std::size_t, std::size_t>> found;
  for (std::size_t k = 1; k < perm.size(); ++k) {
    const index_t* a = coords.data() + perm[k - 1] * order;
    const index_t* b = coords.data() + perm[k] * order;
    if (std::equal(a, a + order, b)) {
      auto pair = std::minmax(perm[k - 1], perm[k]);
      if (!found || pair.second < found->second) found = pair;
    }
  }
  return found;
}

std::string format_coord(std::span<const index_t> c) {
  std::string s = "(";
  for (std::size_t n = 0; n < c.size(); ++n) {
    if (n) s += ",";
    s += std::to_string(c[n] + 1);
  }
  return s + ")";
}

bool is_space(char ch) { return ch == ' ' || ch == '\t' || ch == '\r' || ch == '\v' || ch == '\f'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

SparseTensorCoo::SparseTensorCoo(std::vector<index_t> dims, std::vector<index_t> coords,
                                 std::vector<real_t> values)
    : dims_(std::move(dims)), coords_(std::move(coords)), values_(std::move(values)) {
  validate();
}

void SparseTensorCoo::validate() const {
  const std::size_t n_modes = dims_.size();
  if (n_modes < 3) throw ValidationError("tensor order must be at least 3, got " + std::to_string(n_modes));
  for (std::size_t n = 0; n < n_modes; ++n)
    if (dims_[n] == 0) throw ValidationError("dimension of mode " + std::to_string(n + 1) + " is zero");
  if (values_.empty()) throw ValidationError("tensor has no entries");
  if (coords_.size() != values_.size() * n_modes)
    throw ValidationError("coordinate array does not match entry count");
  for (std::size_t e = 0; e < values_.size(); ++e) {
    const auto c = coord(e);
    for (std::size_t n = 0; n < n_modes; ++n)
      if (c[n] >= dims_[n])
        throw ValidationError("entry " + format_coord(c) + " exceeds dimension " +
                              std::to_string(dims_[n]) + " of mode " + std::to_string(n + 1));
  }
  if (auto dup = find_duplicate(coords_, n_modes))
    throw ValidationError("duplicate coordinate " + format_coord(coord(dup->first)));
}

void SparseTensorCoo::rescale_values(real_t lo, real_t hi) {
  if (!(lo < hi)) throw ConfigError("rescale range must satisfy lo < hi");
  const auto [mn, mx] = value_range();
  const real_t span = mx - mn;
  for (auto& v : values_) v = span > 0 ? lo + (v - mn) / span * (hi - lo) : lo;
}

std::pair<real_t, real_t> SparseTensorCoo::value_range() const {
  if (values_.empty()) return {0, 0};
  const auto [mn, mx] = std::minmax_element(values_.begin(), values_.end());
  return {*mn, *mx};
}

SparseTensorCoo read_coo(std::istream& in, std::size_t order,
                         std::optional<std::vector<index_t>> dims) {
  if (order < 3) throw ConfigError("order must be at least 3");
  if (dims && dims->size() != order)
    throw ConfigError("dims override has " + std::to_string(dims->size()) +
                      " entries, expected " + std::to_string(order));

  std::vector<index_t> coords;
  std::vector<real_t> values;
  std::vector<std::size_t> line_of;
  std::vector<index_t> maxima(order, 0);

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    if (fields.size() != order + 1)
      throw ParseError(lineno, "expected " + std::to_string(order) + " indices and a value, found " +
                                   std::to_string(fields.size()) + " fields");
    for (std::size_t n = 0; n < order; ++n) {
      const auto f = fields[n];
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || p != f.data() + f.size())
        throw ParseError(lineno, "bad index '" + std::string(f) + "'");
      if (v == 0) throw ParseError(lineno, "indices are 1-based, found 0");
      if (v > std::numeric_limits<index_t>::max())
        throw ParseError(lineno, "index " + std::string(f) + " out of range");
      const auto idx = static_cast<index_t>(v - 1);
      if (dims && idx >= (*dims)[n])
        throw ParseError(lineno, "index " + std::string(f) + " exceeds dimension " +
                                     std::to_string((*dims)[n]) + " of mode " + std::to_string(n + 1));
      maxima[n] = std::max(maxima[n], static_cast<index_t>(idx + 1));
      coords.push_back(idx);
    }
    const auto f = fields[order];
    double value = 0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
    if (ec != std::errc{} || p != f.data() + f.size())
      throw ParseError(lineno, "bad value '" + std::string(f) + "'");
    values.push_back(static_cast<real_t>(value));
    line_of.push_back(lineno);
  }
  if (values.empty()) throw ValidationError("no entries found");

  if (auto dup = find_duplicate(coords, order)) {
    throw ValidationError("line " + std::to_string(line_of[dup->second]) + ": duplicate coordinate " +
                          format_coord({coords.data() + dup->second * order, order}) +
                          " (first seen on line " + std::to_string(line_of[dup->first]) + ")");
  }
  return SparseTensorCoo(dims ? std::move(*dims) : std::move(maxima), std::move(coords),
                         std::move(values));
}

SparseTensorCoo load_coo(const std::filesystem::path& path, std::size_t order,
                         std::optional<std::vector<index_t>> dims) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_coo(in, order, std::move(dims));
}

void write_coo(std::ostream& out, const SparseTensorCoo& tensor) {
  const auto old_precision = out.precision(std::numeric_limits<real_t>::max_digits10);
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    for (index_t i : tensor.coord(e)) out << (i + 1) << ' ';
    out << tensor.value(e) << '\n';
  }
  out.precision(old_precision);
}

void write_coo(const std::filesystem::path& path, const SparseTensorCoo& tensor) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_coo(out, tensor);
  if (!out) throw IoError("write failed for " + path.string());
}

std::optional<std::uint64_t> cell_count(std::span<const index_t> dims) {
  std::uint64_t cells = 1;
  for (index_t d : dims)
    if (__builtin_mul_overflow(cells, static_cast<std::uint64_t>(d), &cells)) return std::nullopt;
  return cells;
}

SyntheticTensor generate_synthetic(const SyntheticSpec& spec) {
  const std::size_t order = spec.dims.size();
  if (order < 3) throw ConfigError("order must be at least 3");
  for (index_t d : spec.dims)
    if (d == 0) throw ConfigError("dimensions must be positive");
  if (spec.nnz == 0) throw ConfigError("nnz must be positive");
  if (!spec.low_rank && !(spec.value_lo < spec.value_hi))
    throw ConfigError("value range must satisfy lo < hi");
  const auto cells = cell_count(spec.dims);
  if (cells && spec.nnz > *cells)
    throw CapacityError("nnz " + std::to_string(spec.nnz) + " exceeds the " + std::to_string(*cells) +
                        " cells of the tensor");

  std::mt19937_64 rng(spec.seed);
  std::vector<index_t> coords;
  coords.reserve(spec.nnz * order);

  if (cells) {
    // Floyd's sampling without replacement over linear cell ids.
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(spec.nnz * 2);
    std::vector<std::uint64_t> picked;
    picked.reserve(spec.nnz);
    for (std::uint64_t j = *cells - spec.nnz; j < *cells; ++j) {
      std::uniform_int_distribution<std::uint64_t> pick(0, j);
      std::uint64_t t = pick(rng);
      if (!chosen.insert(t).second) {
        t = j;
        chosen.insert(t);
      }
      picked.push_back(t);
    }
    std::vector<index_t> c(order);
    for (std::uint64_t lin : picked) {
      for (std::size_t n = order; n-- > 0;) {
        c[n] = static_cast<index_t>(lin % spec.dims[n]);
        lin /= spec.dims[n];
      }
      coords.insert(coords.end(), c.begin(), c.end());
    }
  } else {
    // Cell count overflows 64 bits, so nnz is vanishingly sparse: rejection.
    std::unordered_set<std::string> chosen;
    chosen.reserve(spec.nnz * 2);
    std::vector<index_t> c(order);
    while (coords.size() < spec.nnz * order) {
      for (std::size_t n = 0; n < order; ++n)
        c[n] = std::uniform_int_distribution<index_t>(0, spec.dims[n] - 1)(rng);
      std::string key(reinterpret_cast<const char*>(c.data()), order * sizeof(index_t));
      if (chosen.insert(std::move(key)).second) coords.insert(coords.end(), c.begin(), c.end());
    }
  }

  std::vector<real_t> values(spec.nnz);
  SyntheticTensor out;
  if (spec.low_rank) {
    const auto& lr = *spec.low_rank;
    if (lr.ranks.size() != order) throw ConfigError("low-rank ranks must have one entry per mode");
    InitSpec hidden_init;
    hidden_init.seed = spec.seed ^ 0x9e3779b97f4a7c15ULL;
    out.hidden = init_model(spec.dims, lr.ranks, lr.core_rank, hidden_init);
    for (std::size_t e = 0; e < spec.nnz; ++e)
      values[e] = predict_element(*out.hidden, {coords.data() + e * order, order});
  } else {
    std::uniform_real_distribution<double> value(spec.value_lo, spec.value_hi);
    for (auto& v : values) v = static_cast<real_t>(value(rng));
  }
  out.tensor = SparseTensorCoo(spec.dims, std::move(coords), std::move(values));
  return out;
}

DatasetSplit split(const SparseTensorCoo& tensor, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0 && test_fraction < 1))
    throw ConfigError("test fraction must lie strictly between 0 and 1");
  const std::size_t nnz = tensor.nnz();
  if (nnz < 2) throw ConfigError("need at least two entries to split");
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(nnz)));
  n_test = std::clamp<std::size_t>(n_test, 1, nnz - 1);

  std::vector<std::size_t> perm(nnz);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<bool> is_test(nnz, false);
  for (std::size_t k = 0; k < n_test; ++k) is_test[perm[k]] = true;

  const std::size_t order = tensor.order();
  std::vector<index_t> train_c, test_c;
  std::vector<real_t> train_v, test_v;
  train_c.reserve((nnz - n_test) * order);
  test_c.reserve(n_test * order);
  for (std::size_t e = 0; e < nnz; ++e) {
    const auto c = tensor.coord(e);
    auto& dst_c = is_test[e] ? test_c : train_c;
    auto& dst_v = is_test[e] ? test_v : train_v;
    dst_c.insert(dst_c.end(), c.begin(), c.end());
    dst_v.push_back(tensor.value(e));
  }
  std::vector<index_t> dims(tensor.dims().begin(), tensor.dims().end());
  return DatasetSplit{SparseTensorCoo(dims, std::move(train_c), std::move(train_v)),
                      SparseTensorCoo(dims, std::move(test_c), std::move(test_v)), seed};
}

}  // namespace fastertucker
