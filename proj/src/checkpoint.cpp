#include "proxdiff/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "proxdiff/io.hpp"

namespace proxdiff {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

namespace {

constexpr char kMagic[8] = {'P', 'R', 'O', 'X', 'D', 'I', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  std::vector<char>& bytes() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, const std::string& path) : buf_(buf), path_(path) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > buf_.size()) {
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            "checkpoint " + path_ + " is truncated (needed " +
                                std::to_string(pos_ + sizeof(T)) + " bytes, have " +
                                std::to_string(buf_.size()) + ")");
    }
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::vector<char>& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Net& net, const std::string& path) {
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put(kVersion);
  const ArchDescriptor& a = net.arch();
  w.put(static_cast<std::uint8_t>(a.kind));
  w.put(static_cast<std::int32_t>(a.dim));
  w.put(static_cast<std::int32_t>(a.num_labels));
  w.put(static_cast<std::int32_t>(a.width));
  w.put(static_cast<std::int32_t>(a.depth));
  w.put(static_cast<std::int32_t>(a.embed_dim));
  w.put(static_cast<std::int32_t>(a.fourier));
  const ModelMeta& m = net.meta();
  w.put(m.schedule.beta_min);
  w.put(m.schedule.beta_max);
  w.put(m.t_min);
  w.put(static_cast<std::uint32_t>(m.step_grid.size()));
  for (int k : m.step_grid) w.put(static_cast<std::int32_t>(k));
  w.put(static_cast<std::uint64_t>(net.param_count()));
  w.put_bytes(reinterpret_cast<const char*>(net.params().data()),
              static_cast<std::size_t>(net.param_count()) * sizeof(double));
  const std::uint64_t checksum = fnv1a64(w.bytes().data(), w.bytes().size());
  w.put(checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path + " for writing");
  }
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) {
    throw CheckpointError(CheckpointError::Kind::Io, "short write to " + path);
  }
}

Net load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint " + path);
  }
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r(buf, path);
  char magic[8];
  for (char& ch : magic) ch = r.get<char>();
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(CheckpointError::Kind::Magic, path + " is not a checkpoint file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw CheckpointError(CheckpointError::Kind::Version,
                          path + " has format version " + std::to_string(version) +
                              ", this build reads version " + std::to_string(kVersion));
  }
  ArchDescriptor arch;
  arch.kind = static_cast<NetKind>(r.get<std::uint8_t>());
  arch.dim = r.get<std::int32_t>();
  arch.num_labels = r.get<std::int32_t>();
  arch.width = r.get<std::int32_t>();
  arch.depth = r.get<std::int32_t>();
  arch.embed_dim = r.get<std::int32_t>();
  arch.fourier = r.get<std::int32_t>();
  ModelMeta meta;
  meta.schedule.beta_min = r.get<double>();
  meta.schedule.beta_max = r.get<double>();
  meta.t_min = r.get<double>();
  const auto n_grid = r.get<std::uint32_t>();
  meta.step_grid.resize(n_grid);
  for (auto& k : meta.step_grid) k = r.get<std::int32_t>();
  const auto n_params = r.get<std::uint64_t>();

  const std::size_t expected =
      r.pos() + static_cast<std::size_t>(n_params) * sizeof(double) + sizeof(std::uint64_t);
  if (buf.size() != expected) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          path + " has " + std::to_string(buf.size()) + " bytes, expected " +
                              std::to_string(expected));
  }
  const std::uint64_t stored_checksum = fnv1a64(buf.data(), buf.size() - sizeof(std::uint64_t));
  std::uint64_t file_checksum;
  std::memcpy(&file_checksum, buf.data() + buf.size() - sizeof(std::uint64_t),
              sizeof(std::uint64_t));
  if (stored_checksum != file_checksum) {
    throw CheckpointError(CheckpointError::Kind::Checksum, path + " failed its checksum");
  }

  Net net = Net::make(arch, meta, /*init_seed=*/0);
  if (net.param_count() != static_cast<Eigen::Index>(n_params)) {
    throw CheckpointError(CheckpointError::Kind::Descriptor,
                          path + " stores " + std::to_string(n_params) +
                              " parameters but its descriptor implies " +
                              std::to_string(net.param_count()));
  }
  std::memcpy(net.params().data(), buf.data() + r.pos(),
              static_cast<std::size_t>(n_params) * sizeof(double));
  return net;
}

Net load_checkpoint_expect(const std::string& path, NetKind expected) {
  Net net = load_checkpoint(path);
  if (net.arch().kind != expected) {
    const auto name = [](NetKind k) { return k == NetKind::Prox ? "prox" : "score"; };
    throw CheckpointError(CheckpointError::Kind::Descriptor,
                          path + " holds a " + name(net.arch().kind) + " net, expected a " +
                              name(expected) + " net");
  }
  return net;
}

}  // namespace proxdiff
