#include "gannotation/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace gannotation {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', 'A', 'N', 'N', 'C', 'K', 'P', 'T'};

template <typename U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& in, const fs::path& path) {
  U v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!in) throw checkpoint_error("truncated checkpoint " + path.string());
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const fs::path& path) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw checkpoint_error("truncated checkpoint " + path.string());
  return s;
}

}  // namespace

const Tensor<float>& Checkpoint::array(const std::string& name) const {
  const auto it = arrays.find(name);
  if (it == arrays.end()) throw checkpoint_error("checkpoint lacks array '" + name + "'");
  return it->second;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw checkpoint_error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string manifest = ckpt.manifest.dump();
    put<std::uint64_t>(out, manifest.size());
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    put<std::uint64_t>(out, ckpt.arrays.size());
    for (const auto& [name, t] : ckpt.arrays) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      const Shape& s = t.shape();
      for (Index d : {s.n, s.c, s.h, s.w}) put<std::int64_t>(out, d);
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!out) throw checkpoint_error("failed writing checkpoint " + path.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw checkpoint_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw checkpoint_error(path.string() + " is not a checkpoint archive");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw checkpoint_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto manifest_len = get<std::uint64_t>(in, path);
  try {
    ckpt.manifest = nlohmann::json::parse(get_bytes(in, manifest_len, path));
  } catch (const nlohmann::json::parse_error& e) {
    throw checkpoint_error(path.string() + ": corrupt manifest: " + e.what());
  }
  const auto count = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in, path);
    std::string name = get_bytes(in, name_len, path);
    Shape s;
    s.n = get<std::int64_t>(in, path);
    s.c = get<std::int64_t>(in, path);
    s.h = get<std::int64_t>(in, path);
    s.w = get<std::int64_t>(in, path);
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw checkpoint_error(path.string() + ": negative extent for " + name);
    Tensor<float> t(s);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!in) throw checkpoint_error("truncated checkpoint " + path.string());
    ckpt.arrays.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

}  // namespace gannotation
