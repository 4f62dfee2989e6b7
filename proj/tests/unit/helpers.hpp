#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "fastertucker/model.hpp"
#include "fastertucker/tensor_store.hpp"

namespace fastertucker::testing {

inline Model random_model(std::vector<index_t> dims, std::vector<std::size_t> ranks,
                          std::size_t core_rank, std::uint64_t seed) {
  return init_model(dims, ranks, core_rank, InitSpec{-1, 1, seed, false});
}

inline SparseTensorCoo random_tensor(std::vector<index_t> dims, std::size_t nnz, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dims = std::move(dims);
  spec.nnz = nnz;
  spec.seed = seed;
  return generate_synthetic(spec).tensor;
}

inline SparseTensorCoo make_tensor(std::vector<index_t> dims,
                                   const std::vector<std::vector<index_t>>& coords,
                                   const std::vector<real_t>& values) {
  std::vector<index_t> flat;
  for (const auto& c : coords) flat.insert(flat.end(), c.begin(), c.end());
  return SparseTensorCoo(std::move(dims), std::move(flat), values);
}

// Sorted (coordinate, value) pairs.
inline std::vector<std::pair<std::vector<index_t>, real_t>> entry_multiset(const SparseTensorCoo& t) {
  std::vector<std::pair<std::vector<index_t>, real_t>> out;
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    const auto c = t.coord(e);
    out.emplace_back(std::vector<index_t>(c.begin(), c.end()), t.value(e));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fastertucker_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fastertucker::testing
