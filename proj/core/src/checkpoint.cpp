#include "fastertucker/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fastertucker/error.hpp"

namespace fastertucker {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated checkpoint");
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  // Entries are always written as 64-bit reals.
  for (real_t v : m.data()) put<double>(out, static_cast<double>(v));
}

void get_matrix(std::istream& in, Matrix& m) {
  for (auto& v : m.data()) v = static_cast<real_t>(get<double>(in));
}

}  // namespace

void save_checkpoint(std::ostream& out, const Model& model) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.order()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.core_rank()));
  for (index_t d : model.dims()) put<std::uint32_t>(out, d);
  for (std::size_t j : model.ranks()) put<std::uint32_t>(out, static_cast<std::uint32_t>(j));
  for (std::size_t n = 0; n < model.order(); ++n) put_matrix(out, model.factor(n));
  for (std::size_t n = 0; n < model.order(); ++n) put_matrix(out, model.core_t(n));
  if (!out) throw IoError("checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  save_checkpoint(out, model);
}

Model load_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw IoError("not a model checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto order = get<std::uint32_t>(in);
  const auto core_rank = get<std::uint32_t>(in);
  if (order < 3 || order > 64) throw IoError("implausible checkpoint order " + std::to_string(order));
  std::vector<index_t> dims(order);
  std::vector<std::size_t> ranks(order);
  for (auto& d : dims) d = get<std::uint32_t>(in);
  for (auto& j : ranks) j = get<std::uint32_t>(in);
  Model model(std::move(dims), std::move(ranks), core_rank);
  for (std::size_t n = 0; n < model.order(); ++n) get_matrix(in, model.factor(n));
  for (std::size_t n = 0; n < model.order(); ++n) get_matrix(in, model.core_t(n));
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace fastertucker
