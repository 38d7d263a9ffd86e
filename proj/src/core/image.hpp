#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scnn {

// Three-channel image, interleaved RGB, row-major, values in [0,1].
struct Image {
  int64_t width{0}, height{0};
  std::vector<float> px; // height * width * 3

  Image() = default;
  Image(int64_t w, int64_t h) : width(w), height(h), px(static_cast<size_t>(w * h * 3), 0.0f) {}

  float& at(int64_t y, int64_t x, int64_t c) { return px[static_cast<size_t>((y * width + x) * 3 + c)]; }
  float at(int64_t y, int64_t x, int64_t c) const {
    return px[static_cast<size_t>((y * width + x) * 3 + c)];
  }
};

// PNG or JPEG payload -> RGB image in [0,1]. Grayscale replicates to three
// channels, alpha is dropped, 16-bit PNG narrows to 8.
Image decode_image(const uint8_t* bytes, size_t size);
Image decode_image_file(const std::string& path);

// 8-bit RGB PNG, written atomically. No timestamp chunks: identical pixels
// give identical bytes.
void encode_png(const Image& img, const std::string& path);

} // namespace scnn
