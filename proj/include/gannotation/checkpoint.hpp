#pragma once

#include "gannotation/module.hpp"
#include "gannotation/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace gannotation {

class checkpoint_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named float32 arrays plus a JSON manifest.
///
/// On disk: "GANNCKPT", u32 version, u64 manifest length, manifest bytes,
/// u64 array count, then per array: u32 name length, name, 4 x i64 shape,
/// float32 data. Integers are little-endian.
struct Checkpoint {
  nlohmann::json manifest = nlohmann::json::object();
  std::map<std::string, Tensor<float>> arrays;

  const Tensor<float>& array(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes through a temporary file and renames, so readers never see a partial archive.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
void export_parameters(const Module<T>& module, const std::string& prefix, Checkpoint& ckpt) {
  for (const auto& p : module.parameters()) ckpt.arrays[prefix + p.name] = p.var.value().template cast<float>();
}

/// Every parameter must be present with the same shape.
template <typename T>
void import_parameters(const Module<T>& module, const std::string& prefix, const Checkpoint& ckpt) {
  for (const auto& p : module.parameters()) {
    const std::string key = prefix + p.name;
    const auto it = ckpt.arrays.find(key);
    if (it == ckpt.arrays.end()) throw checkpoint_error("checkpoint lacks parameter '" + key + "'");
    if (!(it->second.shape() == p.var.shape())) {
      throw checkpoint_error("parameter '" + key + "' has shape " + to_string(it->second.shape()) +
                             " in checkpoint, model expects " + to_string(p.var.shape()));
    }
    Var<T> v = p.var;
    v.mutable_value() = it->second.template cast<T>();
  }
}

template <typename T>
void export_optimizer(const Adam<T>& opt, const std::string& prefix, Checkpoint& ckpt) {
  const auto& params = opt.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.arrays[prefix + "m." + params[i].name] = opt.first_moments()[i].template cast<float>();
    ckpt.arrays[prefix + "v." + params[i].name] = opt.second_moments()[i].template cast<float>();
  }
  ckpt.manifest["optimizers"][prefix] = opt.steps();
}

template <typename T>
void import_optimizer(Adam<T>& opt, const std::string& prefix, const Checkpoint& ckpt) {
  const auto& params = opt.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor<float>& m = ckpt.array(prefix + "m." + params[i].name);
    const Tensor<float>& v = ckpt.array(prefix + "v." + params[i].name);
    if (!(m.shape() == params[i].var.shape()) || !(v.shape() == params[i].var.shape())) {
      throw checkpoint_error("optimizer state for '" + params[i].name + "' has the wrong shape");
    }
    opt.first_moments()[i] = m.template cast<T>();
    opt.second_moments()[i] = v.template cast<T>();
  }
  const auto& steps = ckpt.manifest.at("optimizers").at(prefix);
  opt.set_steps(steps.get<std::int64_t>());
}

}  // namespace gannotation
