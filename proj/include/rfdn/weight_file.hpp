#pragma once

#include <string>

#include "rfdn/weight_store.hpp"

namespace rfdn {

// Checkpoint format, little-endian on disk regardless of host order:
//   magic "RFDW" | version u32 | tensor count u32
//   per tensor: name length u16, UTF-8 name, rank u8, dims u32 each,
//               raw IEEE-754 binary32 values.
// Tensors are written in lexicographic name order; round-trips are
// bit-exact.

inline constexpr std::uint32_t kWeightFileVersion = 1;

void write_weight_file(const WeightStore& store, const std::string& path);
WeightStore read_weight_file(const std::string& path);

}  // namespace rfdn
