#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "duet/image.hpp"
#include "duet/scene.hpp"

using namespace duet;

namespace {
std::filesystem::path tmp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}
}  // namespace

TEST_CASE("ppm write/read is bit-exact for generated images") {
  Scene s = make_scene(99);
  Image img = render_scene(s, 32);
  auto path = tmp_file("duet_io_test.ppm");
  write_ppm(path, img);
  Image back = read_ppm(path);
  CHECK(back.height == img.height);
  CHECK(back.width == img.width);
  CHECK(back.rgb == img.rgb);
  // a second write of the read-back image produces identical bytes
  auto path2 = tmp_file("duet_io_test2.ppm");
  write_ppm(path2, back);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("pgm round-trip and header validation") {
  std::vector<uint8_t> gray = {0, 64, 128, 255, 10, 20};
  auto path = tmp_file("duet_io_test.pgm");
  write_pgm(path, 2, 3, gray);
  int h = 0, w = 0;
  auto back = read_pgm(path, h, w);
  CHECK(h == 2);
  CHECK(w == 3);
  CHECK(back == gray);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(read_ppm("/nonexistent/duet.ppm"), ImageIoError);
  CHECK_THROWS_AS(write_pgm(path, 2, 2, gray), ImageIoError);
}

TEST_CASE("truncated image files are rejected") {
  auto path = tmp_file("duet_trunc.ppm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n4 4\n255\n";
    out << "abc";  // far fewer than 48 pixel bytes
  }
  CHECK_THROWS_WITH_AS(read_ppm(path), doctest::Contains("truncated"), ImageIoError);
  std::filesystem::remove(path);
}

TEST_CASE("patch extraction is row-major and invertible by position") {
  Image img;
  img.height = img.width = 4;
  img.rgb.assign(48, 0.0);
  // mark pixel (y=2, x=3) red: lives in patch row 1, col 1 with patch=2
  img.at(2, 3, 0) = 1.0;
  auto patches = extract_patches(img, 2);
  CHECK(patches.size() == 4 * 12);
  // patch index 3, local pixel (0,1), channel 0
  CHECK(patches[3 * 12 + (0 * 2 + 1) * 3 + 0] == 1.0);
  CHECK(patch_count(img, 2) == 4);
  CHECK_THROWS_AS(extract_patches(img, 3), ImageIoError);
}
