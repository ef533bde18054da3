#pragma once

#include <torch/torch.h>

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace styleseg {

/// Self-describing checkpoint container:
///   magic "SSEGCKPT" | u32 version | u64 meta length | meta JSON |
///   concatenated float32 little-endian tensor payloads.
/// The meta JSON carries a caller-supplied config echo plus the tensor
/// manifest (name, shape, element count) in payload order.
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
};

void save_checkpoint(const std::string& path, const nlohmann::json& config_echo,
                     const std::vector<std::pair<std::string, torch::Tensor>>& tensors);

Checkpoint load_checkpoint(const std::string& path);

/// Saves all parameters and buffers of a module.
void save_module_checkpoint(const std::string& path,
                            const nlohmann::json& config_echo,
                            const torch::nn::Module& module);

/// Restores a module from a checkpoint. The stored config echo must equal
/// expected_config exactly, and the stored tensor names must match the
/// module's parameters and buffers one to one.
void load_module_checkpoint(torch::nn::Module& module, const std::string& path,
                            const nlohmann::json& expected_config);

/// The config echo stored at `path`, without loading tensor data into the
/// module.
nlohmann::json checkpoint_config(const std::string& path);

}  // namespace styleseg
