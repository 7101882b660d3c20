#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "biastransfer/networks.hpp"

namespace bt {

struct CheckpointInfo {
  BundleSpec spec;
  int epoch = -1;
  std::uint64_t seed = 0;
  nlohmann::json extra;  // free-form metadata, e.g. the validation loss
};

/// Container layout: the 8-byte magic "BTCKPT01", a little-endian u64 header
/// length, a JSON header (spec, epoch, seed, parameter names and shapes)
/// and the parameter values as little-endian float32 in header order.
void save_checkpoint(const std::filesystem::path& path, ModelBundle& bundle, int epoch,
                     const nlohmann::json& extra = nlohmann::json::object());

/// Header only.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Builds a bundle from the stored spec and fills its weights.
ModelBundle load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

/// Fills an existing bundle; throws ContractError when the stored spec,
/// parameter names or shapes differ from the bundle's.
CheckpointInfo load_checkpoint_into(const std::filesystem::path& path, ModelBundle& bundle);

}  // namespace bt
