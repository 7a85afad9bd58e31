#include "duet/image.hpp"

#include <cmath>
#include <fstream>

namespace duet {

namespace {

uint8_t to_byte(double v) {
  double r = std::round(v * 255.0);
  if (r < 0.0) r = 0.0;
  if (r > 255.0) r = 255.0;
  return static_cast<uint8_t>(r);
}

// reads one whitespace-delimited token, skipping '#' comments
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

void read_header(std::istream& in, const char* magic, const std::filesystem::path& path,
                 int& width, int& height) {
  if (next_token(in) != magic)
    throw ImageIoError(path.string() + ": bad magic, expected " + magic);
  width = std::stoi(next_token(in));
  height = std::stoi(next_token(in));
  int maxval = std::stoi(next_token(in));
  if (maxval != 255) throw ImageIoError(path.string() + ": only 8-bit maxval 255 supported");
  if (width <= 0 || height <= 0) throw ImageIoError(path.string() + ": bad dimensions");
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> bytes;
  bytes.reserve(img.rgb.size());
  for (double v : img.rgb) bytes.push_back(to_byte(v));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("short write to " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  Image img;
  read_header(in, "P6", path, img.width, img.height);
  size_t n = static_cast<size_t>(img.width) * static_cast<size_t>(img.height) * 3;
  std::vector<uint8_t> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw ImageIoError(path.string() + ": truncated pixel data");
  img.rgb.resize(n);
  for (size_t i = 0; i < n; ++i) img.rgb[i] = static_cast<double>(bytes[i]) / 255.0;
  return img;
}

void write_pgm(const std::filesystem::path& path, int height, int width,
               const std::vector<uint8_t>& gray) {
  if (gray.size() != static_cast<size_t>(height) * static_cast<size_t>(width))
    throw ImageIoError("pgm: pixel count does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
  if (!out) throw ImageIoError("short write to " + path.string());
}

std::vector<uint8_t> read_pgm(const std::filesystem::path& path, int& height, int& width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  read_header(in, "P5", path, width, height);
  size_t n = static_cast<size_t>(width) * static_cast<size_t>(height);
  std::vector<uint8_t> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw ImageIoError(path.string() + ": truncated pixel data");
  return bytes;
}

int64_t patch_count(const Image& img, int patch) {
  return static_cast<int64_t>(img.height / patch) * (img.width / patch);
}

std::vector<double> extract_patches(const Image& img, int patch) {
  if (patch <= 0 || img.height % patch != 0 || img.width % patch != 0)
    throw ImageIoError("extract_patches: image " + std::to_string(img.width) + "x" +
                       std::to_string(img.height) + " not divisible by patch " +
                       std::to_string(patch));
  int gy = img.height / patch, gx = img.width / patch;
  size_t dim = static_cast<size_t>(patch) * patch * 3;
  std::vector<double> out(static_cast<size_t>(gy) * gx * dim);
  size_t w = 0;
  for (int py = 0; py < gy; ++py)
    for (int px = 0; px < gx; ++px)
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x)
          for (int c = 0; c < 3; ++c) out[w++] = img.at(py * patch + y, px * patch + x, c);
  return out;
}

}  // namespace duet
