#include "comix/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "comix/errors.hpp"

namespace comix {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'X', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t x) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  os.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  os.write(reinterpret_cast<char*>(b), 8);
}

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_tensor(std::ostream& os, const nn::Tensor& t) {
  put_u32(os, static_cast<uint32_t>(t.rows()));
  put_u32(os, static_cast<uint32_t>(t.cols()));
  for (double x : t.v) {
    uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(os, bits);
  }
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ConfigError("checkpoint: truncated file");
  uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(b[i]) << (8 * i);
  return x;
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw ConfigError("checkpoint: truncated file");
  uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(b[i]) << (8 * i);
  return x;
}

std::string get_str(std::istream& is) {
  uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw ConfigError("checkpoint: truncated string");
  return s;
}

nn::Tensor get_tensor(std::istream& is) {
  uint32_t r = get_u32(is), c = get_u32(is);
  nn::Tensor t = nn::Tensor::zeros(static_cast<int>(r), static_cast<int>(c));
  for (double& x : t.v) {
    uint64_t bits = get_u64(is);
    std::memcpy(&x, &bits, 8);
  }
  return t;
}

void put_named(std::ostream& os, const std::vector<std::pair<std::string, nn::Tensor>>& v) {
  put_u32(os, static_cast<uint32_t>(v.size()));
  for (const auto& [name, t] : v) {
    put_str(os, name);
    put_tensor(os, t);
  }
}

std::vector<std::pair<std::string, nn::Tensor>> get_named(std::istream& is) {
  uint32_t n = get_u32(is);
  std::vector<std::pair<std::string, nn::Tensor>> v;
  v.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = get_str(is);
    v.emplace_back(std::move(name), get_tensor(is));
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& d) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("checkpoint: cannot open for write: " + path);
  os.write(kMagic, 8);
  put_u32(os, kVersion);
  put_str(os, d.meta.config_hash);
  put_u64(os, d.meta.episode);
  put_u64(os, d.meta.env_steps);
  put_u64(os, d.meta.seed);
  put_str(os, d.meta.env_kind);
  put_u32(os, d.meta.n_agents);
  put_u32(os, d.meta.obs_width);
  put_u32(os, d.meta.comm_enabled ? 1 : 0);
  put_u64(os, d.meta.q_opt_steps);
  put_u64(os, d.meta.c_opt_steps);
  put_named(os, d.params);
  put_named(os, d.rms_acc);
  if (!os) throw ConfigError("checkpoint: write failed: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigError("checkpoint: bad magic in " + path);
  uint32_t ver = get_u32(is);
  if (ver != kVersion)
    throw ConfigError("checkpoint: unsupported version " + std::to_string(ver));
  CheckpointData d;
  d.meta.config_hash = get_str(is);
  d.meta.episode = get_u64(is);
  d.meta.env_steps = get_u64(is);
  d.meta.seed = get_u64(is);
  d.meta.env_kind = get_str(is);
  d.meta.n_agents = get_u32(is);
  d.meta.obs_width = get_u32(is);
  d.meta.comm_enabled = get_u32(is) != 0;
  d.meta.q_opt_steps = get_u64(is);
  d.meta.c_opt_steps = get_u64(is);
  d.params = get_named(is);
  d.rms_acc = get_named(is);
  return d;
}

}  // namespace comix
