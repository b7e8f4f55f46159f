#include "li/litf.hpp"

#include <cstring>
#include <fstream>

#include "li/errors.hpp"

namespace li {

namespace {

constexpr unsigned char kMagic[4] = {0x4C, 0x49, 0x54, 0x46};  // "LITF"
constexpr unsigned char kVersion = 0x01;
constexpr unsigned char kDtypeF32 = 0x01;

void put_u32_le(std::ofstream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t get_u32_le(std::ifstream& in, const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4))
    throw DataError("litf_read: truncated header in " + path);
  return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
         (static_cast<std::uint32_t>(buf[2]) << 16) |
         (static_cast<std::uint32_t>(buf[3]) << 24);
}

}  // namespace

void litf_write(const std::string& path, const LitfTensor& tensor) {
  std::size_t expect = 1;
  for (auto d : tensor.dims) expect *= d;
  if (expect != tensor.data.size())
    throw DataError("litf_write: dims do not match payload size for " + path);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("litf_write: cannot open " + path);
  out.write(reinterpret_cast<const char*>(kMagic), 4);
  out.put(static_cast<char>(kVersion));
  out.put(static_cast<char>(kDtypeF32));
  out.put(static_cast<char>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32_le(out, d);
  // float payload is stored little-endian; this build targets LE hosts only.
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.data.size() * 4));
  if (!out) throw DataError("litf_write: write failed for " + path);
}

LitfTensor litf_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("litf_read: cannot open " + path);
  unsigned char header[3];
  unsigned char magic[4];
  if (!in.read(reinterpret_cast<char*>(magic), 4) ||
      std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("litf_read: bad magic bytes in " + path);
  if (!in.read(reinterpret_cast<char*>(header), 3))
    throw DataError("litf_read: truncated header in " + path);
  if (header[0] != kVersion)
    throw DataError("litf_read: unsupported version in " + path);
  if (header[1] != kDtypeF32)
    throw DataError("litf_read: unsupported dtype in " + path);

  LitfTensor tensor;
  const int ndim = header[2];
  std::size_t count = 1;
  for (int i = 0; i < ndim; ++i) {
    tensor.dims.push_back(get_u32_le(in, path));
    count *= tensor.dims.back();
  }
  tensor.data.resize(count);
  if (!in.read(reinterpret_cast<char*>(tensor.data.data()),
               static_cast<std::streamsize>(count * 4)))
    throw DataError("litf_read: truncated payload in " + path);
  return tensor;
}

}  // namespace li
