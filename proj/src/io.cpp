#include "circqa/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "circqa/error.hpp"

namespace circqa {

std::string fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string file_hash(const fs::path& path) { return fnv1a64(read_text(path)); }

void ensure_fresh_dir(const fs::path& dir) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::Io, dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir, ec)) throw Error(ErrorCode::Io, dir.string() + " is not empty; outputs need a fresh directory");
    return;
  }
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

nlohmann::json example_to_json(const LabeledExample& e) {
  std::vector<std::string> lines;
  for (const auto& s : e.story.sentences) lines.push_back(render_sentence(s));
  return {{"id", e.id},
          {"story_lines", lines},
          {"question", render_question(e.question)},
          {"answer", std::string(answer_name(e.answer))},
          {"n_sentences", e.n_sentences},
          {"n_nouns", e.n_nouns},
          {"support_depth", e.support_depth},
          {"stratum", e.stratum},
          {"corrupted", e.corrupted},
          {"split", std::string(split_name(e.split))},
          {"tags", e.tags}};
}

LabeledExample example_from_json(const nlohmann::json& j) {
  try {
    LabeledExample e;
    e.id = j.at("id").get<std::string>();
    std::vector<SentenceAst> sentences;
    for (const auto& line : j.at("story_lines")) sentences.push_back(parse_sentence(line.get<std::string>()));
    e.story = Story::from_sentences(std::move(sentences));
    e.question = parse_question(j.at("question").get<std::string>());
    e.answer = answer_from_name(j.at("answer").get<std::string>());
    e.n_sentences = j.value("n_sentences", static_cast<int>(e.story.sentences.size()));
    e.n_nouns = j.value("n_nouns", static_cast<int>(e.story.nouns.size()));
    e.support_depth = j.value("support_depth", 0);
    e.stratum = j.value("stratum", 0);
    e.corrupted = j.value("corrupted", false);
    e.split = split_from_name(j.value("split", std::string("train")));
    if (j.contains("tags")) e.tags = j["tags"].get<std::map<std::string, int>>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::Format, std::string("bad example record: ") + ex.what());
  }
}

namespace {

struct SplitFile {
  const char* name;
  std::vector<LabeledExample> DatasetBundle::*member;
};

constexpr SplitFile kSplitFiles[] = {
    {"train", &DatasetBundle::train},     {"valid_v", &DatasetBundle::valid_v}, {"test", &DatasetBundle::test},
    {"valid_c", &DatasetBundle::valid_c}, {"twin", &DatasetBundle::twin},
};

std::string jsonl(const std::vector<LabeledExample>& xs) {
  std::string out;
  for (const auto& e : xs) out += example_to_json(e).dump() + "\n";
  return out;
}

}  // namespace

std::string dataset_hash(const DatasetBundle& b) {
  std::string all;
  for (const auto& f : kSplitFiles) all += std::string(f.name) + "\n" + jsonl(b.*f.member);
  return fnv1a64(all);
}

nlohmann::json write_dataset(const fs::path& dir, const DatasetBundle& b, const nlohmann::json& extra) {
  nlohmann::json files = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& f : kSplitFiles) {
    const std::string text = jsonl(b.*f.member);
    const std::string file = std::string(f.name) + ".jsonl";
    write_text(dir / file, text);
    files[f.name] = {{"file", file}, {"hash", fnv1a64(text)}};
    counts[f.name] = (b.*f.member).size();
  }
  nlohmann::json manifest = {{"task", b.task},
                             {"seed", b.seed},
                             {"config", b.config},
                             {"baseline", b.baseline},
                             {"train_strata", b.train_strata},
                             {"test_strata", b.test_strata},
                             {"counts", counts},
                             {"files", files},
                             {"content_hash", dataset_hash(b)}};
  for (const auto& [k, v] : extra.items()) manifest[k] = v;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

DatasetBundle read_dataset(const fs::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::Format, std::string("bad dataset manifest: ") + ex.what());
  }
  DatasetBundle b;
  b.task = manifest.value("task", std::string());
  b.seed = manifest.value("seed", std::uint64_t{0});
  b.config = manifest.value("config", nlohmann::json::object());
  b.baseline = manifest.value("baseline", 0.5);
  b.train_strata = manifest.value("train_strata", std::vector<int>{});
  b.test_strata = manifest.value("test_strata", std::vector<int>{});
  for (const auto& f : kSplitFiles) {
    const fs::path path = dir / (std::string(f.name) + ".jsonl");
    if (!fs::exists(path)) continue;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        (b.*f.member).push_back(example_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::parse_error& ex) {
        throw Error(ErrorCode::Format, path.string() + ": " + ex.what());
      }
    }
  }
  b.refresh_validation_subsets();
  return b;
}

fs::path save_checkpoint(const fs::path& stem, const nlohmann::json& model, const ParameterStore& store,
                         std::uint64_t seed, int epoch, const nlohmann::json& metrics) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  std::string bytes(store.size() * 8, '\0');
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(store.flat()[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  fs::path bin = stem;
  bin += ".bin";
  fs::path manifest_path = stem;
  manifest_path += ".json";
  write_text(bin, bytes);

  nlohmann::json keys = nlohmann::json::array();
  for (const auto& s : store.slots()) {
    keys.push_back({{"word", s.key.word},
                    {"shape", s.key.shape},
                    {"role", s.role == BoxRole::NounState ? "noun" : "box"},
                    {"offset", s.offset},
                    {"length", s.length}});
  }
  nlohmann::json manifest = {{"backend", model.value("backend", std::string())},
                             {"model", model},
                             {"seed", seed},
                             {"epoch", epoch},
                             {"metrics", metrics},
                             {"parameter_count", store.size()},
                             {"data", bin.filename().string()},
                             {"data_hash", fnv1a64(bytes)},
                             {"keys", keys}};
  write_text(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

Checkpoint load_checkpoint(const fs::path& manifest_path) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::Format, std::string("bad checkpoint manifest: ") + ex.what());
  }
  Checkpoint c;
  c.model = m.at("model");
  c.seed = m.value("seed", std::uint64_t{0});
  c.epoch = m.value("epoch", 0);
  c.metrics = m.value("metrics", nlohmann::json::object());
  std::map<BoxKey, ParameterStore::Entry> entries;
  for (const auto& k : m.at("keys")) {
    entries[BoxKey{k.at("word").get<std::string>(), k.at("shape").get<std::string>()}] = {
        k.value("role", std::string("box")) == "noun" ? BoxRole::NounState : BoxRole::Plain,
        k.at("length").get<std::size_t>()};
  }
  c.store = ParameterStore(entries);
  for (const auto& k : m.at("keys")) {
    const auto& slot = c.store.slot(BoxKey{k.at("word").get<std::string>(), k.at("shape").get<std::string>()});
    if (slot.offset != k.at("offset").get<std::size_t>())
      throw Error(ErrorCode::Format, "checkpoint key order does not match the sorted layout");
  }
  const std::string bytes = read_text(manifest_path.parent_path() / m.at("data").get<std::string>());
  if (bytes.size() != c.store.size() * 8) throw Error(ErrorCode::Format, "checkpoint data has the wrong length");
  for (std::size_t i = 0; i < c.store.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)]))
              << (8 * b);
    c.store.flat()[i] = std::bit_cast<double>(bits);
  }
  return c;
}

void write_predictions(const fs::path& path, const Predictions& preds) {
  std::string out = "id,prediction\n";
  for (const auto& [id, a] : preds) out += id + "," + std::string(answer_name(a)) + "\n";
  write_text(path, out);
}

Predictions read_predictions(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  Predictions p;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line == "id,prediction") continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::Format, "bad prediction row '" + line + "'");
    p[line.substr(0, comma)] = answer_from_name(line.substr(comma + 1));
  }
  return p;
}

}  // namespace circqa
