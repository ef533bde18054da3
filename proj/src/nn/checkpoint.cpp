#include "styleseg/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace styleseg {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("checkpoint " + path + ": " + what);
}

}  // namespace

void save_checkpoint(const std::string& path, const nlohmann::json& config_echo,
                     const std::vector<std::pair<std::string, torch::Tensor>>& tensors) {
  nlohmann::json meta;
  meta["config"] = config_echo;
  meta["tensors"] = nlohmann::json::array();
  for (const auto& [name, tensor] : tensors) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = nlohmann::json::array();
    for (long d : tensor.sizes()) entry["shape"].push_back(d);
    entry["numel"] = tensor.numel();
    meta["tensors"].push_back(std::move(entry));
  }
  const std::string meta_str = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint64_t meta_len = meta_str.size();
  out.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  for (const auto& [name, tensor] : tensors) {
    const auto flat = tensor.detach().to(torch::kFloat32).contiguous();
    out.write(reinterpret_cast<const char*>(flat.data_ptr<float>()),
              static_cast<std::streamsize>(flat.numel() * sizeof(float)));
  }
  if (!out) fail(path, "write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(path, "bad magic");
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion) fail(path, "unsupported version");
  std::uint64_t meta_len = 0;
  in.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  if (!in) fail(path, "truncated metadata");

  Checkpoint ckpt;
  ckpt.meta = nlohmann::json::parse(meta_str);
  for (const auto& entry : ckpt.meta.at("tensors")) {
    std::vector<long> shape;
    for (const auto& d : entry.at("shape")) shape.push_back(d.get<long>());
    torch::Tensor t = torch::empty(shape, torch::kFloat32);
    in.read(reinterpret_cast<char*>(t.data_ptr<float>()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!in) fail(path, "truncated tensor data");
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return ckpt;
}

void save_module_checkpoint(const std::string& path,
                            const nlohmann::json& config_echo,
                            const torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
  for (const auto& p : module.named_parameters()) {
    tensors.emplace_back("param/" + p.key(), p.value());
  }
  for (const auto& b : module.named_buffers()) {
    tensors.emplace_back("buffer/" + b.key(), b.value());
  }
  save_checkpoint(path, config_echo, tensors);
}

void load_module_checkpoint(torch::nn::Module& module, const std::string& path,
                            const nlohmann::json& expected_config) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta.at("config") != expected_config) {
    fail(path, "stored config does not match the requested model config");
  }

  std::map<std::string, torch::Tensor> stored(ckpt.tensors.begin(),
                                              ckpt.tensors.end());
  torch::NoGradGuard no_grad;
  std::size_t used = 0;
  for (auto& p : module.named_parameters()) {
    const auto it = stored.find("param/" + p.key());
    if (it == stored.end()) fail(path, "missing parameter " + p.key());
    if (it->second.sizes() != p.value().sizes()) {
      fail(path, "shape mismatch for " + p.key());
    }
    p.value().copy_(it->second);
    ++used;
  }
  for (auto& b : module.named_buffers()) {
    const auto it = stored.find("buffer/" + b.key());
    if (it == stored.end()) fail(path, "missing buffer " + b.key());
    b.value().copy_(it->second.to(b.value().dtype()));
    ++used;
  }
  if (used != stored.size()) {
    fail(path, "checkpoint holds tensors the model does not declare");
  }
}

nlohmann::json checkpoint_config(const std::string& path) {
  return load_checkpoint(path).meta.at("config");
}

}  // namespace styleseg
