#include <doctest.h>

#include <algorithm>

#include "duet/data.hpp"
#include "duet/vocab.hpp"

using namespace duet;

TEST_CASE("corpus vocab assigns stable sorted ids after specials") {
  Vocabulary v = Vocabulary::from_corpus({"a red square"});
  CHECK(v.size() == Vocabulary::kFirstWord + 3);
  CHECK(v.id("a") == 36);
  CHECK(v.id("red") == 37);
  CHECK(v.id("square") == 38);
  CHECK(v.token(0) == "[PAD]");
  CHECK(v.token(1) == "[CLS]");
  CHECK(v.token(2) == "[SEP]");
  CHECK(v.token(3) == "[MASK]");
  CHECK(v.token(4) == "<extra_0>");
  CHECK(v.token(35) == "<extra_31>");
}

TEST_CASE("vocab is invariant to corpus order") {
  Vocabulary a = Vocabulary::from_corpus({"a red square", "a blue circle"});
  Vocabulary b = Vocabulary::from_corpus({"a blue circle", "a red square"});
  REQUIRE(a.size() == b.size());
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a.token(i) == b.token(i));
}

TEST_CASE("grammar vocab size equals the closed-form terminal count") {
  // terminals enumerated independently of grammar_terminals():
  // glue: a, and, at, the (4)
  // question: what, color, is, shape, how, many, objects, are, there (9)
  // columns: far, left, right (3)
  // colors (4), shapes (3), rows (4)
  const int64_t expected_words = 4 + 9 + 3 + 4 + 3 + 4;
  Vocabulary v = Vocabulary::grammar();
  CHECK(v.word_count() == expected_words);
  CHECK(v.size() == Vocabulary::kFirstWord + expected_words);

  // the full grammar corpus builds the identical vocabulary
  std::vector<std::string> texts;
  for (uint64_t seed = 0; seed < 4000; ++seed) {
    PairRecord rec = generate_pair(seed, 32, true);
    texts.push_back(rec.caption);
    texts.push_back(rec.qa->text);
  }
  Vocabulary from_corpus = Vocabulary::from_corpus(texts);
  REQUIRE(from_corpus.size() == v.size());
  for (int64_t i = 0; i < v.size(); ++i) CHECK(from_corpus.token(i) == v.token(i));
}

TEST_CASE("encode inserts specials and pads to max_len") {
  Vocabulary v = Vocabulary::grammar();
  Encoded e = v.encode("a red square", 8);
  std::vector<int64_t> want = {Vocabulary::kCls, v.id("a"), v.id("red"), v.id("square"),
                               Vocabulary::kSep, 0, 0, 0};
  CHECK(e.ids == want);
  CHECK(e.mask == std::vector<double>{1, 1, 1, 1, 1, 0, 0, 0});
}

TEST_CASE("encode of empty string is CLS SEP PAD...") {
  Vocabulary v = Vocabulary::grammar();
  Encoded e = v.encode("", 4);
  CHECK(e.ids == std::vector<int64_t>{1, 2, 0, 0});
  CHECK(e.mask == std::vector<double>{1, 1, 0, 0});
}

TEST_CASE("encode rejects unknown tokens and overflow") {
  Vocabulary v = Vocabulary::grammar();
  CHECK_THROWS_WITH_AS(v.encode("a mauve square", 16), doctest::Contains("mauve"), VocabError);
  CHECK_THROWS_AS(v.encode("a red square", 4), VocabError);
}

TEST_CASE("decode(encode(s)) round-trips every corpus caption") {
  Vocabulary v = Vocabulary::grammar();
  for (uint64_t seed = 0; seed < 500; ++seed) {
    PairRecord rec = generate_pair(seed, 32, true);
    CHECK(v.decode(v.encode(rec.caption, 40).ids) == rec.caption);
    CHECK(v.decode(v.encode(rec.qa->text, 40).ids) == rec.qa->text);
  }
}

TEST_CASE("sentinel accessors stay in range") {
  Vocabulary v = Vocabulary::grammar();
  CHECK(v.sentinel(0) == 4);
  CHECK(v.sentinel(31) == 35);
  CHECK(v.is_sentinel(v.sentinel(5)));
  CHECK_FALSE(v.is_word(v.sentinel(5)));
  CHECK_THROWS_AS(v.sentinel(32), VocabError);
}
