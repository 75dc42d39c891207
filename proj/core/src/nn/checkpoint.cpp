#include "motorkit/nn/checkpoint.hpp"

#include <cstdint>
#include <fstream>

namespace motorkit::nn {

namespace {
constexpr std::uint32_t kMagic = 0x504B434D;  // "MCKP" little-endian
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint: truncated file");
  return v;
}
void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}
std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  if (!is) throw IoError("checkpoint: truncated string");
  return s;
}
}  // namespace

void save_checkpoint(const std::string& path, const ParamVector& params,
                     const std::string& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
  write_pod(os, kMagic);
  write_pod(os, kVersion);
  write_pod<std::uint32_t>(os, sizeof(real));
  write_string(os, meta);
  const auto& slices = params.layout().slices();
  write_pod<std::uint64_t>(os, slices.size());
  for (const auto& s : slices) {
    write_string(os, s.name);
    write_pod<std::int64_t>(os, s.offset);
    write_pod<std::int64_t>(os, s.size);
  }
  write_pod<std::uint64_t>(os, std::uint64_t(params.size()));
  os.write(reinterpret_cast<const char*>(params.values().data()),
           std::streamsize(sizeof(real) * params.size()));
  if (!os) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  if (read_pod<std::uint32_t>(is) != kMagic)
    throw IoError("checkpoint: bad magic in " + path);
  if (read_pod<std::uint32_t>(is) != kVersion)
    throw IoError("checkpoint: unsupported version in " + path);
  if (read_pod<std::uint32_t>(is) != sizeof(real))
    throw IoError("checkpoint: scalar width mismatch in " + path);
  Checkpoint ckpt;
  ckpt.meta = read_string(is);
  auto layout = std::make_shared<ParamLayout>();
  const auto n_slices = read_pod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n_slices; ++i) {
    const std::string name = read_string(is);
    const auto offset = read_pod<std::int64_t>(is);
    const auto size = read_pod<std::int64_t>(is);
    if (layout->add(name, int(size)) != int(offset))
      throw IoError("checkpoint: layout table is not contiguous in " + path);
  }
  const auto n_values = read_pod<std::uint64_t>(is);
  if (std::int64_t(n_values) != layout->total())
    throw IoError("checkpoint: value count disagrees with layout in " + path);
  ckpt.params = ParamVector(std::move(layout));
  is.read(reinterpret_cast<char*>(ckpt.params.values().data()),
          std::streamsize(sizeof(real) * n_values));
  if (!is) throw IoError("checkpoint: truncated parameter block in " + path);
  return ckpt;
}

}  // namespace motorkit::nn
