#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "egopose/nn.hpp"
#include "egopose/tensor.hpp"

namespace egopose {

/// Versioned checkpoint container: a JSON config blob plus named float32
/// arrays (row-major, shapes recorded). Array order is deterministic.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  std::string kind;         // "heatmap" | "pose"
  std::string config_json;  // experiment + model configuration
  std::map<std::string, Tensor> arrays;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  void put_params(const nn::ParamCollector& params);
  /// Restores values into matching params/buffers; shape mismatches or
  /// missing arrays are rejected.
  void restore_params(const nn::ParamCollector& params) const;
};

/// FNV-1a over the raw bytes of every array whose name starts with `prefix`
/// (all arrays when empty). Used by the freeze-contract checks.
uint64_t params_hash(const nn::ParamCollector& params, const std::string& prefix = "");

}  // namespace egopose
