#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace duet {

struct VocabError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Encoded {
  std::vector<int64_t> ids;     // [CLS] tokens [SEP] [PAD]...
  std::vector<double> mask;     // 1 for real positions, 0 for padding
};

// Closed toy vocabulary. Fixed ids: [PAD]=0, [CLS]=1, [SEP]=2, [MASK]=3,
// sentinels <extra_0>..<extra_31> at 4..35, then corpus words sorted
// lexicographically from 36.
class Vocabulary {
 public:
  static constexpr int64_t kPad = 0;
  static constexpr int64_t kCls = 1;
  static constexpr int64_t kSep = 2;
  static constexpr int64_t kMask = 3;
  static constexpr int64_t kSentinelBase = 4;
  static constexpr int64_t kSentinelCount = 32;
  static constexpr int64_t kFirstWord = kSentinelBase + kSentinelCount;

  // whitespace + lowercase tokenization over all given texts
  static Vocabulary from_corpus(const std::vector<std::string>& texts);
  // canonical vocabulary over every terminal of the caption/QA grammar;
  // stable regardless of which scenes a particular corpus sampled
  static Vocabulary grammar();

  int64_t size() const { return static_cast<int64_t>(tokens_.size()); }
  int64_t id(const std::string& token) const;
  const std::string& token(int64_t id) const;

  bool is_special(int64_t id) const { return id >= 0 && id < kSentinelBase; }
  bool is_sentinel(int64_t id) const {
    return id >= kSentinelBase && id < kSentinelBase + kSentinelCount;
  }
  bool is_word(int64_t id) const { return id >= kFirstWord && id < size(); }
  int64_t sentinel(int64_t k) const;
  int64_t word_count() const { return size() - kFirstWord; }

  Encoded encode(const std::string& text, int64_t max_len) const;
  // content words only, specials and sentinels skipped
  std::string decode(const std::vector<int64_t>& ids) const;

  static std::vector<std::string> tokenize(const std::string& text);

 private:
  explicit Vocabulary(std::vector<std::string> words);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int64_t> index_;
};

}  // namespace duet
