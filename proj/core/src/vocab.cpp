#include "duet/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "duet/scene.hpp"

namespace duet {

std::vector<std::string> Vocabulary::tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(tok);
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  tokens_ = {"[PAD]", "[CLS]", "[SEP]", "[MASK]"};
  for (int64_t i = 0; i < kSentinelCount; ++i)
    tokens_.push_back("<extra_" + std::to_string(i) + ">");
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (auto& w : words) tokens_.push_back(std::move(w));
  for (size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int64_t>(i);
}

Vocabulary Vocabulary::from_corpus(const std::vector<std::string>& texts) {
  if (texts.empty()) throw VocabError("build_vocab: empty corpus");
  std::set<std::string> words;
  for (const std::string& t : texts)
    for (std::string& w : tokenize(t)) words.insert(std::move(w));
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

Vocabulary Vocabulary::grammar() { return Vocabulary(grammar_terminals()); }

int64_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end())
    throw VocabError("vocab: unknown token '" + token + "' (closed vocabulary)");
  return it->second;
}

const std::string& Vocabulary::token(int64_t id) const {
  if (id < 0 || id >= size())
    throw VocabError("vocab: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

int64_t Vocabulary::sentinel(int64_t k) const {
  if (k < 0 || k >= kSentinelCount)
    throw VocabError("vocab: sentinel index " + std::to_string(k) + " out of range");
  return kSentinelBase + k;
}

Encoded Vocabulary::encode(const std::string& text, int64_t max_len) const {
  std::vector<std::string> toks = tokenize(text);
  if (static_cast<int64_t>(toks.size()) + 2 > max_len)
    throw VocabError("encode: sequence of " + std::to_string(toks.size()) +
                     " tokens overflows max_len " + std::to_string(max_len));
  Encoded enc;
  enc.ids.reserve(static_cast<size_t>(max_len));
  enc.ids.push_back(kCls);
  for (const std::string& t : toks) enc.ids.push_back(id(t));
  enc.ids.push_back(kSep);
  enc.mask.assign(enc.ids.size(), 1.0);
  while (static_cast<int64_t>(enc.ids.size()) < max_len) {
    enc.ids.push_back(kPad);
    enc.mask.push_back(0.0);
  }
  return enc;
}

std::string Vocabulary::decode(const std::vector<int64_t>& ids) const {
  std::string out;
  for (int64_t id : ids) {
    if (!is_word(id)) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

}  // namespace duet
