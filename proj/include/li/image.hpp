#pragma once

#include <cstddef>
#include <vector>

namespace li {

// Dense w x h x c image, row-major over (row v, col u, channel ch).
struct ImageTensor {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;  // size width * height * channels

  ImageTensor() = default;
  ImageTensor(int w, int h, int c)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0.0f) {}

  float& at(int u, int v, int ch) {
    return data[(static_cast<std::size_t>(v) * width + u) * channels + ch];
  }
  float at(int u, int v, int ch) const {
    return data[(static_cast<std::size_t>(v) * width + u) * channels + ch];
  }
};

}  // namespace li
