#pragma once

#include <string>

#include "detnas/supernet.hpp"

namespace detnas {

// Checkpoint file layout (little-endian):
//   magic "DNAS" | u32 version (=1) | u8 phase tag | u64 step | u64 rng seed
//   | u32 tensor count | per tensor: u16 name length, UTF-8 name, u8 rank,
//   u32 dims..., f32 data in row-major order.
// Tensors appear in SupernetWeights::named_tensors() order; the structure
// itself (space, class count) comes from the run configuration and is
// validated on load.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, SupernetWeights& weights);

SupernetWeights load_checkpoint(const std::string& path, const SearchSpaceSpec& space, int classes);

// Phase tag of a checkpoint file without loading the tensors.
Phase peek_checkpoint_phase(const std::string& path);

}  // namespace detnas
