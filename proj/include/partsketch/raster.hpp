#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace partsketch {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Decodable image with unsupported dimensions.
class ImageSizeError : public ImageError {
 public:
  using ImageError::ImageError;
};

// Square grayscale image, values in [0,1], row-major, row 0 at the top.
struct SketchRaster {
  std::size_t side = 0;
  std::vector<double> pixels;

  SketchRaster() = default;
  explicit SketchRaster(std::size_t s) : side(s), pixels(s * s, 0.0) {}

  double& at(std::size_t row, std::size_t col) { return pixels[row * side + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels[row * side + col]; }
  friend bool operator==(const SketchRaster&, const SketchRaster&) = default;
};

// 8-bit grayscale PNG bytes. Values are clipped then rounded to 1/255 steps.
std::string encode_png(const SketchRaster& img);
// Accepts any PNG libpng can decode (alpha stripped, colour reduced to
// luminance). Throws ImageError on malformed data, ImageSizeError on
// non-square images.
SketchRaster decode_png(std::string_view bytes);

void write_png(const std::string& path, const SketchRaster& img);
SketchRaster read_png(const std::string& path);

}  // namespace partsketch
