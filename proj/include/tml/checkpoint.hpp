#pragma once

#include <optional>
#include <string>

#include "tml/optim.hpp"
#include "tml/ugdc.hpp"

namespace tml {

// Binary checkpoint layout (all integers little-endian):
//   magic "TMLC", u32 version,
//   config block (role, em fields of UGDCConfig, gdc stage names),
//   u32 parameter count, then per parameter: name, dims, raw f32 payload,
//   u8 optimizer flag; when set: u64 step counter plus m/v payloads,
//   trailing u64 FNV-1a checksum over everything before it.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void checkpoint_save(const std::string& path, Model& model, const AdamW* optimizer = nullptr);

// Fails with VersionError / ChecksumError / TruncationError / ConfigError as
// appropriate. The model must have been built with a matching config.
void checkpoint_load(const std::string& path, Model& model, AdamW* optimizer = nullptr);

// Reads only the config block (for building a model to load into).
UGDCConfig checkpoint_peek_config(const std::string& path, Role* role = nullptr);

// Serialized parameter bytes, used by freeze-invariance checks.
std::string parameter_bytes(Model& model);

}  // namespace tml
