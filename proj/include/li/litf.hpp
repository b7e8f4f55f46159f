#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace li {

// LITF tensor file: magic "LITF", version 0x01, dtype 0x01 (little-endian
// float32), ndim byte, ndim uint32 LE dims, row-major payload.
struct LitfTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

void litf_write(const std::string& path, const LitfTensor& tensor);
LitfTensor litf_read(const std::string& path);

}  // namespace li
