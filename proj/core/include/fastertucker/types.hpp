#pragma once

#include <cstddef>
#include <cstdint>

namespace fastertucker {

#if defined(FASTERTUCKER_FLOAT32)
using real_t = float;
#else
using real_t = double;
#endif

// 0-based coordinate along one mode.
using index_t = std::uint32_t;

using mode_t = std::size_t;

}  // namespace fastertucker
