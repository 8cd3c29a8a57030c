#pragma once

#include <string>
#include <utility>
#include <vector>

#include "starpix/engine/nn.hpp"
#include "starpix/engine/tensor.hpp"

namespace starpix::engine {

// YWTS weight container, little-endian throughout:
//   magic "YWTS" | u32 version=1 | u64 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u32 extent[rank]
//               | f32 data (row-major)
// Used for checkpoints and for importing externally produced backbone weights.

void save_weights(const std::string& path, const std::vector<NamedTensorRef<float>>& tensors);

std::vector<std::pair<std::string, Tensor>> load_weights(const std::string& path);

// Copies loaded tensors into the given state slots by name. Missing names and
// shape mismatches are collected and reported together; when require_all is
// false, names absent from `loaded` are left at their current values.
void assign_weights(const std::vector<NamedTensorRef<float>>& state,
                    const std::vector<std::pair<std::string, Tensor>>& loaded, bool require_all);

}  // namespace starpix::engine
