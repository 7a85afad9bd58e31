#include "duet/scene.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "duet/rng.hpp"

namespace duet {

namespace {

constexpr std::array<const char*, 4> kColorWords = {"red", "green", "blue", "yellow"};
constexpr std::array<const char*, 3> kShapeWords = {"square", "circle", "triangle"};
constexpr std::array<const char*, 4> kRowWords = {"top", "upper", "lower", "bottom"};
constexpr std::array<const char*, 3> kCountWords = {"one", "two", "three"};

// column phrases for columns 0..3
const std::array<std::vector<std::string>, 4> kColPhrases = {
    std::vector<std::string>{"far", "left"},
    std::vector<std::string>{"left"},
    std::vector<std::string>{"right"},
    std::vector<std::string>{"far", "right"},
};

constexpr uint64_t kSceneTag = 0x5343454E45ull;  // stream tags for derived seeds
constexpr uint64_t kQaTag = 0x5141ull;

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

int index_of(const char* const* begin, int n, const std::string& w) {
  for (int i = 0; i < n; ++i)
    if (w == begin[i]) return i;
  return -1;
}

struct TokenCursor {
  const std::vector<std::string>& toks;
  size_t pos = 0;
  const std::string& next(const char* what) {
    if (pos >= toks.size()) throw GrammarError(std::string("caption ends inside ") + what);
    return toks[pos++];
  }
  bool done() const { return pos >= toks.size(); }
};

void expect(TokenCursor& cur, const char* word) {
  const std::string& t = cur.next(word);
  if (t != word) throw GrammarError("expected '" + std::string(word) + "', got '" + t + "'");
}

}  // namespace

const char* color_word(Color c) { return kColorWords[static_cast<size_t>(c)]; }
const char* shape_word(ShapeKind s) { return kShapeWords[static_cast<size_t>(s)]; }

Scene make_scene(uint64_t seed) {
  Rng rng(Rng::mix(seed, kSceneTag));
  Scene scene;
  scene.seed = seed;
  int count = 1 + static_cast<int>(rng.below(3));
  // choose() returns sorted cell indices, so objects come out row-major
  std::vector<int64_t> cells = rng.choose(kGridSize * kGridSize, count);
  for (int64_t cell : cells) {
    SceneObject obj;
    obj.shape = static_cast<ShapeKind>(rng.below(3));
    obj.color = static_cast<Color>(rng.below(4));
    obj.row = static_cast<int>(cell / kGridSize);
    obj.col = static_cast<int>(cell % kGridSize);
    scene.objects.push_back(obj);
  }
  return scene;
}

std::string caption_for(const Scene& scene) {
  std::ostringstream out;
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& o = scene.objects[i];
    if (i) out << " and ";
    out << "a " << color_word(o.color) << " " << shape_word(o.shape) << " at the "
        << kRowWords[static_cast<size_t>(o.row)];
    for (const std::string& w : kColPhrases[static_cast<size_t>(o.col)]) out << " " << w;
  }
  return out.str();
}

Scene parse_caption(const std::string& caption) {
  std::vector<std::string> toks = split_ws(caption);
  if (toks.empty()) throw GrammarError("empty caption");
  TokenCursor cur{toks};
  Scene scene;
  while (true) {
    expect(cur, "a");
    SceneObject obj;
    int color = index_of(kColorWords.data(), 4, cur.next("color"));
    if (color < 0) throw GrammarError("unknown color in caption");
    obj.color = static_cast<Color>(color);
    int shape = index_of(kShapeWords.data(), 3, cur.next("shape"));
    if (shape < 0) throw GrammarError("unknown shape in caption");
    obj.shape = static_cast<ShapeKind>(shape);
    expect(cur, "at");
    expect(cur, "the");
    int row = index_of(kRowWords.data(), 4, cur.next("row"));
    if (row < 0) throw GrammarError("unknown row word in caption");
    obj.row = row;
    std::string c0 = cur.next("column");
    if (c0 == "far") {
      std::string c1 = cur.next("column");
      if (c1 == "left")
        obj.col = 0;
      else if (c1 == "right")
        obj.col = 3;
      else
        throw GrammarError("unknown column phrase 'far " + c1 + "'");
    } else if (c0 == "left") {
      obj.col = 1;
    } else if (c0 == "right") {
      obj.col = 2;
    } else {
      throw GrammarError("unknown column word '" + c0 + "'");
    }
    scene.objects.push_back(obj);
    if (cur.done()) break;
    expect(cur, "and");
  }
  // reject duplicate cells and non-canonical order
  for (size_t i = 1; i < scene.objects.size(); ++i) {
    int prev = scene.objects[i - 1].row * kGridSize + scene.objects[i - 1].col;
    int here = scene.objects[i].row * kGridSize + scene.objects[i].col;
    if (here <= prev) throw GrammarError("caption objects out of canonical order");
  }
  return scene;
}

std::vector<std::string> grammar_terminals() {
  std::vector<std::string> words = {"a",    "and",  "at",   "the",   "what", "color",
                                    "is",   "shape", "how", "many",  "objects", "are",
                                    "there", "far",  "left", "right"};
  for (const char* w : kColorWords) words.push_back(w);
  for (const char* w : kShapeWords) words.push_back(w);
  for (const char* w : kRowWords) words.push_back(w);
  return words;
}

const std::vector<std::string>& answer_vocab() {
  static const std::vector<std::string> table = [] {
    std::vector<std::string> v;
    for (const char* w : kColorWords) v.push_back(w);
    for (const char* w : kShapeWords) v.push_back(w);
    for (const char* w : kCountWords) v.push_back(w);
    return v;
  }();
  return table;
}

Question make_question(const Scene& scene, uint64_t seed) {
  Rng rng(Rng::mix(seed, kQaTag));
  int qtype = static_cast<int>(rng.below(3));
  const SceneObject& obj =
      scene.objects[static_cast<size_t>(rng.below(scene.objects.size()))];
  auto position = [&](std::ostringstream& out) {
    out << "the " << kRowWords[static_cast<size_t>(obj.row)];
    for (const std::string& w : kColPhrases[static_cast<size_t>(obj.col)]) out << " " << w;
  };
  Question q;
  std::ostringstream out;
  if (qtype == 0) {
    out << "what color is the " << shape_word(obj.shape) << " at ";
    position(out);
    q.answer_id = static_cast<int>(obj.color);
  } else if (qtype == 1) {
    out << "what shape is at ";
    position(out);
    q.answer_id = 4 + static_cast<int>(obj.shape);
  } else {
    out << "how many objects are there";
    q.answer_id = 7 + static_cast<int>(scene.objects.size()) - 1;
  }
  q.text = out.str();
  return q;
}

namespace {

std::array<double, 3> color_rgb(Color c) {
  switch (c) {
    case Color::Red: return {1.0, 0.0, 0.0};
    case Color::Green: return {0.0, 1.0, 0.0};
    case Color::Blue: return {0.0, 0.0, 1.0};
    case Color::Yellow: return {1.0, 1.0, 0.0};
  }
  return {0, 0, 0};
}

bool inside_shape(ShapeKind s, int y, int x, int cell) {
  int m = cell / 8;  // 1px margin at 32x32, 2 at 64x64
  double center = (cell - 1) / 2.0;
  switch (s) {
    case ShapeKind::Square:
      return y >= m && y < cell - m && x >= m && x < cell - m;
    case ShapeKind::Circle: {
      double r = cell / 2.0 - 1.0;
      double dy = y - center, dx = x - center;
      return dy * dy + dx * dx <= r * r;
    }
    case ShapeKind::Triangle: {
      if (y < m || y >= cell - m) return false;
      double t = static_cast<double>(y - m) / static_cast<double>(cell - 2 * m - 1);
      double halfw = t * (cell / 2.0 - m);
      return std::abs(x - center) <= halfw;
    }
  }
  return false;
}

}  // namespace

Image render_scene(const Scene& scene, int resolution) {
  if (resolution != 32 && resolution != 64)
    throw GrammarError("render_scene: unsupported resolution " + std::to_string(resolution) +
                       " (expected 32 or 64)");
  Image img;
  img.height = img.width = resolution;
  img.rgb.assign(static_cast<size_t>(resolution) * resolution * 3, 0.0);
  int cell = resolution / kGridSize;
  for (const SceneObject& obj : scene.objects) {
    auto rgb = color_rgb(obj.color);
    for (int y = 0; y < cell; ++y) {
      for (int x = 0; x < cell; ++x) {
        if (!inside_shape(obj.shape, y, x, cell)) continue;
        int py = obj.row * cell + y, px = obj.col * cell + x;
        for (int c = 0; c < 3; ++c) img.at(py, px, c) = rgb[static_cast<size_t>(c)];
      }
    }
  }
  return img;
}

}  // namespace duet
