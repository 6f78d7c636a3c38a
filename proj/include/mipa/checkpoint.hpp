#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mipa/nn/param.hpp"

namespace mipa {

inline constexpr std::uint32_t kCheckpointMagic = 0x4150494Du; // "MIPA" little-endian
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, Matrix>> tensors;

    const Matrix* find(const std::string& name) const;
};

// Single versioned archive: magic, version, JSON metadata, then the
// parameter tensors keyed by module path.
void save_checkpoint(const std::string& path, const nlohmann::json& meta, const nn::ParamRefs& params);

// Throws on magic or version mismatch and on truncated archives.
Checkpoint load_checkpoint(const std::string& path);

// Copies tensors into the given parameters by name; every parameter must be
// present with matching shape.
void restore_params(const Checkpoint& checkpoint, const nn::ParamRefs& params);

} // namespace mipa
