#pragma once

// Binary checkpoints for actor and critic parameter blocks.
//
// Layout (all integers and reals little-endian):
//   "DENSEGAP"                      8 bytes
//   u32 version
//   u64 env_steps
//   u32 block count, then per block:
//     str name; i32 x 13 network spec; u32 layer count;
//     per layer: str name, i32 rows, i32 cols;
//     u64 value count; f64 x count
//   u64 FNV-1a of every preceding byte
// where str is a u32 length followed by the bytes.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "densegap/policy/network.hpp"

namespace densegap::policy {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'D', 'E', 'N', 'S', 'E', 'G', 'A', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ParameterBlock actor;
  ParameterBlock critic;
  std::uint64_t env_steps = 0;

  bool operator==(const Checkpoint&) const = default;
};

namespace detail {

inline std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_str(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void put_raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : in_(bytes) {}
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_str(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void get_raw(void* p, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n)
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

inline std::vector<std::int32_t> spec_fields(const NetSpec& s) {
  return {s.fov,        s.grid_channels, s.conv1_out,  s.conv1_kernel, s.conv1_stride,
          s.conv2_out,  s.conv2_kernel,  s.conv2_stride, s.grid_dense, s.ego_in,
          s.ego_dense,  s.trunk,         s.outputs * (s.head == HeadKind::Linear ? -1 : 1)};
}

inline NetSpec spec_from_fields(const std::vector<std::int32_t>& f) {
  NetSpec s;
  s.fov = f[0];
  s.grid_channels = f[1];
  s.conv1_out = f[2];
  s.conv1_kernel = f[3];
  s.conv1_stride = f[4];
  s.conv2_out = f[5];
  s.conv2_kernel = f[6];
  s.conv2_stride = f[7];
  s.grid_dense = f[8];
  s.ego_in = f[9];
  s.ego_dense = f[10];
  s.trunk = f[11];
  s.head = f[12] < 0 ? HeadKind::Linear : HeadKind::BetaShapes;
  s.outputs = f[12] < 0 ? -f[12] : f[12];
  return s;
}

inline void write_block(Writer& w, const std::string& name, const ParameterBlock& b) {
  w.put_str(name);
  for (std::int32_t x : spec_fields(b.spec)) w.put(x);
  w.put(static_cast<std::uint32_t>(b.layout.size()));
  for (const auto& l : b.layout) {
    w.put_str(l.name);
    w.put(static_cast<std::int32_t>(l.rows));
    w.put(static_cast<std::int32_t>(l.cols));
  }
  w.put(static_cast<std::uint64_t>(b.values.size()));
  w.put_raw(b.values.data(), static_cast<std::size_t>(b.values.size()) * sizeof(double));
}

inline ParameterBlock read_block(Reader& r, const std::string& expected_name) {
  const std::string name = r.get_str("block name");
  if (name != expected_name)
    throw CheckpointError("checkpoint block '" + name + "' where '" + expected_name +
                          "' was expected");
  std::vector<std::int32_t> fields(13);
  for (auto& f : fields) f = r.get<std::int32_t>("network spec");
  ParameterBlock b;
  b.spec = spec_from_fields(fields);
  try {
    validate(b.spec);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint has an invalid network spec: ") + e.what());
  }
  const auto layers = r.get<std::uint32_t>("layer count");
  if (layers > 1024) throw CheckpointError("checkpoint layer count is implausible");
  for (std::uint32_t i = 0; i < layers; ++i) {
    LayerShape l;
    l.name = r.get_str("layer name");
    l.rows = r.get<std::int32_t>("layer rows");
    l.cols = r.get<std::int32_t>("layer cols");
    b.layout.push_back(l);
  }
  if (b.layout != make_layout(b.spec))
    throw CheckpointError("checkpoint layout for '" + name + "' does not match its spec");
  const auto count = r.get<std::uint64_t>("value count");
  if (count != layout_size(b.layout))
    throw CheckpointError("checkpoint value count for '" + name + "' does not match its layout");
  b.values.resize(static_cast<Eigen::Index>(count));
  r.get_raw(b.values.data(), count * sizeof(double), "parameter values");
  return b;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  detail::Writer w;
  w.put_raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.put(kCheckpointVersion);
  w.put(c.env_steps);
  w.put(static_cast<std::uint32_t>(2));
  detail::write_block(w, "actor", c.actor);
  detail::write_block(w, "critic", c.critic);
  w.put(detail::fnv1a(w.bytes().data(), w.bytes().size()));
  return std::move(w.bytes());
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  detail::Reader r(bytes);
  char magic[8];
  r.get_raw(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  c.env_steps = r.get<std::uint64_t>("env step count");
  if (r.get<std::uint32_t>("block count") != 2)
    throw CheckpointError("checkpoint must hold exactly an actor and a critic block");
  c.actor = detail::read_block(r, "actor");
  c.critic = detail::read_block(r, "critic");
  const std::size_t body = r.pos();
  const auto sum = r.get<std::uint64_t>("checksum");
  if (r.remaining() != 0) throw CheckpointError("checkpoint has trailing bytes");
  if (sum != detail::fnv1a(bytes.data(), body)) throw CheckpointError("checkpoint checksum mismatch");
  return c;
}

/// Writes to a sibling temporary file and renames it over `path`, so a
/// reader never sees a partially written checkpoint.
inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  const std::string bytes = serialize_checkpoint(c);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw CheckpointError("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place: " + ec.message());
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace densegap::policy
