#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "simicl/optimizer.hpp"
#include "simicl/vit.hpp"

namespace simicl {

struct Checkpoint {
    ModelParams<float> params;
    std::optional<OptimizerState<float>> optimizer;
};

// Binary framing: magic, flags, config fields, then named f32 tensors with
// explicit shapes (little-endian). Optimizer state, when present, is appended
// as adam_m.* / adam_v.* tensors plus the step counter. Save/load round-trips
// byte-exactly.
void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const OptimizerState<float>* optimizer = nullptr);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the file bytes; used as the report fingerprint.
uint64_t file_fnv1a(const std::string& path);

} // namespace simicl
