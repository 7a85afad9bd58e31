#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "duet/image.hpp"

namespace duet {

struct GrammarError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ShapeKind { Square, Circle, Triangle };
enum class Color { Red, Green, Blue, Yellow };

constexpr int kGridSize = 4;  // 4x4 layout grid

struct SceneObject {
  ShapeKind shape;
  Color color;
  int row = 0;
  int col = 0;
  bool operator==(const SceneObject&) const = default;
};

// 1-3 objects on the layout grid, no two sharing a cell, kept in row-major
// cell order. Equality compares content; the seed is provenance only.
struct Scene {
  std::vector<SceneObject> objects;
  uint64_t seed = 0;
  bool operator==(const Scene& o) const { return objects == o.objects; }
};

Scene make_scene(uint64_t seed);

// Caption grammar: one clause per object in row-major order, joined by
// "and": "a red square at the top far left". Row words: top/upper/lower/
// bottom; column phrases: far left / left / right / far right. The grammar
// is closed and lossless; parse_caption inverts caption_for exactly.
std::string caption_for(const Scene& scene);
Scene parse_caption(const std::string& caption);

const char* color_word(Color c);
const char* shape_word(ShapeKind s);

// all words the caption/question templates can emit, unsorted, no duplicates
std::vector<std::string> grammar_terminals();

// fixed answer table: 4 colors, 3 shapes, counts one/two/three
const std::vector<std::string>& answer_vocab();

struct Question {
  std::string text;
  int answer_id = 0;  // index into answer_vocab()
};

// deterministic toy-VQA question about one object (color / shape / count)
Question make_question(const Scene& scene, uint64_t seed);

// deterministic flat-color render, no anti-aliasing; resolution 32 or 64
Image render_scene(const Scene& scene, int resolution);

}  // namespace duet
