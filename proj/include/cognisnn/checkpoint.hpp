#pragma once

#include <map>
#include <string>

#include "cognisnn/network.hpp"

namespace cognisnn {

// Self-describing binary container: header, embedded topology text, task
// registry, free-form metadata, then parameter and BN-state records with
// 64-bit little-endian payloads. Load then save reproduces the bytes exactly.
std::string checkpoint_to_bytes(const Model& model,
                                const std::map<std::string, std::string>& metadata);
Model checkpoint_from_bytes(const std::string& bytes,
                            std::map<std::string, std::string>* metadata_out = nullptr);

void save_checkpoint(const Model& model, const std::string& path,
                     const std::map<std::string, std::string>& metadata = {});
Model load_checkpoint(const std::string& path,
                      std::map<std::string, std::string>* metadata_out = nullptr);

}  // namespace cognisnn
