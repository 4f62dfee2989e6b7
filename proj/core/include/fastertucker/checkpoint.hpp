#pragma once

#include <filesystem>
#include <iosfwd>

#include "fastertucker/model.hpp"

namespace fastertucker {

// Binary model checkpoint; layout in docs/checkpoint_format.md.
inline constexpr char kCheckpointMagic[8] = {'F', 'T', 'U', 'C', 'K', 'E', 'R', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& out, const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);

Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace fastertucker
