#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "duet/codebook.hpp"
#include "duet/image.hpp"
#include "duet/scene.hpp"

namespace duet {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PairRecord {
  uint64_t id = 0;
  Scene scene;
  Image image;
  std::string caption;
  std::optional<Question> qa;
};

// pure function of (seed, resolution, with_qa)
PairRecord generate_pair(uint64_t seed, int resolution, bool with_qa);

// record i uses seed mix(corpus_seed, i) and id = i
std::vector<PairRecord> generate_corpus(uint64_t corpus_seed, int count, int resolution,
                                        bool with_qa);

// fits the patch codebook on every patch of the corpus images
Codebook corpus_codebook(const std::vector<PairRecord>& corpus, int patch, int64_t k,
                         uint64_t seed, int iters = 25);

struct ManifestEntry {
  uint64_t id = 0;
  std::string image_path;
  std::string caption;
  std::optional<std::string> question;
  std::optional<int> answer_id;
};

// writes images/pair_NNNNNN.ppm plus manifest.jsonl (one JSON object per
// line with fields id, image_path, caption, optional question/answer_id)
void write_manifest(const std::filesystem::path& out_dir,
                    const std::vector<PairRecord>& corpus);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_file);

}  // namespace duet
