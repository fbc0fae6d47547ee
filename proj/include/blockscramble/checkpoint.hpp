#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "blockscramble/model.hpp"

namespace blockscramble {

// Binary layout (all integers little-endian):
//   magic "BSCKPT01" | u32 metadata bytes | metadata text (key=value lines)
//   u32 tensor count | per tensor: u32 name bytes, name, u32 rank,
//   u64 dims[rank], f64 values[prod(dims)]
// The metadata holds the ModelConfig plus free-form entries such as the
// training schedule or key fingerprint.
struct Checkpoint {
    Model model;
    std::map<std::string, std::string> extra;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::map<std::string, std::string>& extra = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::map<std::string, std::string> config_to_metadata(const ModelConfig& cfg);
ModelConfig config_from_metadata(const std::map<std::string, std::string>& meta);

} // namespace blockscramble
