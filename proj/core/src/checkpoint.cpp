#include "mtae/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace mtae {

namespace {

constexpr char kMagic[4] = {'M', 'T', 'A', 'E'};

void put_u32(std::vector<std::uint8_t>& out, u32 v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, u64 v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
  const std::uint8_t* p;
  std::size_t left;

  void need(std::size_t n) {
    if (left < n) throw Error("checkpoint: truncated file");
  }
  u32 u32_() {
    need(4);
    u32 v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<u32>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  u64 u64_() {
    need(8);
    u64 v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<u64>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    left -= n;
    return s;
  }
  void f32s(float* dst, std::size_t n) {
    need(n * 4);
    std::memcpy(dst, p, n * 4);
    p += n * 4;
    left -= n * 4;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<u32>(ckpt.meta_json.size()));
  out.insert(out.end(), ckpt.meta_json.begin(), ckpt.meta_json.end());
  put_u32(out, static_cast<u32>(ckpt.groups.size()));
  for (const auto& g : ckpt.groups) {
    put_u32(out, static_cast<u32>(g.name.size()));
    out.insert(out.end(), g.name.begin(), g.name.end());
    put_u32(out, static_cast<u32>(g.shape.size()));
    u64 numel = 1;
    for (i64 d : g.shape) {
      if (d <= 0) throw Error("checkpoint: bad dim in group " + g.name);
      put_u64(out, static_cast<u64>(d));
      numel *= static_cast<u64>(d);
    }
    if (numel != g.values.size())
      throw Error("checkpoint: value count mismatch in group " + g.name);
    std::size_t at = out.size();
    out.resize(at + g.values.size() * 4);
    std::memcpy(out.data() + at, g.values.data(), g.values.size() * 4);
  }
  return out;
}

Checkpoint parse_checkpoint(const std::uint8_t* data, std::size_t size) {
  Reader r{data, size};
  r.need(4);
  if (std::memcmp(r.p, kMagic, 4) != 0)
    throw Error("checkpoint: bad magic, not a checkpoint file");
  r.p += 4;
  r.left -= 4;
  u32 version = r.u32_();
  if (version != kCheckpointVersion)
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.meta_json = r.str(r.u32_());
  u32 n_groups = r.u32_();
  ckpt.groups.reserve(n_groups);
  for (u32 gi = 0; gi < n_groups; ++gi) {
    NamedTensorF32 g;
    g.name = r.str(r.u32_());
    u32 rank = r.u32_();
    if (rank > 8) throw Error("checkpoint: implausible rank in " + g.name);
    u64 numel = 1;
    for (u32 d = 0; d < rank; ++d) {
      u64 dim = r.u64_();
      if (dim == 0 || dim > (1ull << 32))
        throw Error("checkpoint: bad dim in group " + g.name);
      g.shape.push_back(static_cast<i64>(dim));
      numel *= dim;
    }
    g.values.resize(numel);
    r.f32s(g.values.data(), numel);
    ckpt.groups.push_back(std::move(g));
  }
  if (r.left != 0) throw Error("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  auto bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("checkpoint: cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("checkpoint: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes.data(), bytes.size());
}

}  // namespace mtae
