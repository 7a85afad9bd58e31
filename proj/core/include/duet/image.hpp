#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace duet {

// HxWx3 row-major RGB, values in [0, 1]. Generated images always hold exact
// multiples of 1/255 so the 8-bit PPM round-trip is lossless.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> rgb;

  double& at(int y, int x, int c) { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return rgb[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

struct ImageIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// binary PPM (P6), 8-bit; float conversion is round(v * 255) / 255
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

// binary PGM (P5), 8-bit grayscale
void write_pgm(const std::filesystem::path& path, int height, int width,
               const std::vector<uint8_t>& gray);
std::vector<uint8_t> read_pgm(const std::filesystem::path& path, int& height, int& width);

// non-overlapping PxP patches in row-major patch order, each flattened to
// P*P*3 doubles; height and width must be divisible by patch
std::vector<double> extract_patches(const Image& img, int patch);
int64_t patch_count(const Image& img, int patch);

}  // namespace duet
