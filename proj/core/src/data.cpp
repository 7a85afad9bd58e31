#include "duet/data.hpp"

#include <fstream>
#include <json.hpp>

#include "duet/rng.hpp"

namespace duet {

PairRecord generate_pair(uint64_t seed, int resolution, bool with_qa) {
  if (resolution != 32 && resolution != 64)
    throw DataError("generate_pair: unsupported resolution " + std::to_string(resolution));
  PairRecord rec;
  rec.id = seed;
  rec.scene = make_scene(seed);
  rec.image = render_scene(rec.scene, resolution);
  rec.caption = caption_for(rec.scene);
  if (with_qa) rec.qa = make_question(rec.scene, seed);
  return rec;
}

std::vector<PairRecord> generate_corpus(uint64_t corpus_seed, int count, int resolution,
                                        bool with_qa) {
  std::vector<PairRecord> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    PairRecord rec = generate_pair(Rng::mix(corpus_seed, static_cast<uint64_t>(i)), resolution,
                                   with_qa);
    rec.id = static_cast<uint64_t>(i);
    out.push_back(std::move(rec));
  }
  return out;
}

Codebook corpus_codebook(const std::vector<PairRecord>& corpus, int patch, int64_t k,
                         uint64_t seed, int iters) {
  if (corpus.empty()) throw DataError("corpus_codebook: empty corpus");
  int64_t dim = static_cast<int64_t>(patch) * patch * 3;
  std::vector<double> pts;
  int64_t n = 0;
  for (const PairRecord& rec : corpus) {
    std::vector<double> p = extract_patches(rec.image, patch);
    n += patch_count(rec.image, patch);
    pts.insert(pts.end(), p.begin(), p.end());
  }
  return fit_codebook(pts, n, dim, k, seed, iters).codebook;
}

namespace {
std::string image_name(uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pair_%06llu.ppm", static_cast<unsigned long long>(id));
  return buf;
}
}  // namespace

void write_manifest(const std::filesystem::path& out_dir,
                    const std::vector<PairRecord>& corpus) {
  std::filesystem::create_directories(out_dir / "images");
  std::ofstream mf(out_dir / "manifest.jsonl");
  if (!mf) throw DataError("cannot open manifest for writing in " + out_dir.string());
  for (const PairRecord& rec : corpus) {
    std::string rel = std::string("images/") + image_name(rec.id);
    write_ppm(out_dir / rel, rec.image);
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    j["image_path"] = rel;
    j["caption"] = rec.caption;
    if (rec.qa) {
      j["question"] = rec.qa->text;
      j["answer_id"] = rec.qa->answer_id;
    }
    mf << j.dump() << "\n";
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_file) {
  std::ifstream in(manifest_file);
  if (!in) throw DataError("cannot open manifest " + manifest_file.string());
  std::vector<ManifestEntry> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(manifest_file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ManifestEntry e;
    e.id = j.at("id").get<uint64_t>();
    e.image_path = j.at("image_path").get<std::string>();
    e.caption = j.at("caption").get<std::string>();
    if (j.contains("question")) e.question = j["question"].get<std::string>();
    if (j.contains("answer_id")) e.answer_id = j["answer_id"].get<int>();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace duet
