// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "mtlf/model.hpp"

namespace mtlf {

inline constexpr const char* kCheckpointMagic = "MTLF1";
inline constexpr int kCheckpointVersion = 1;

/// Writes `dir/manifest.json` (magic, encoder config, ordered parameter
/// names/shapes/byte offsets, task registry) and `dir/weights.bin`
/// (little-endian IEEE-754 float32 in manifest order). Creates `dir`.
void save_checkpoint(const SharedModel<float>& model, const std::filesystem::path& dir);

/// FormatError on magic/version mismatch; CorruptionError when the weights
/// blob or parameter table disagree with the manifest. Nothing is returned
/// unless every check passes.
SharedModel<float> load_checkpoint(const std::filesystem::path& dir);

/// JSON encodings shared with the CLI and results files.
std::string encoder_config_to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const std::string& json);

}  // namespace mtlf
