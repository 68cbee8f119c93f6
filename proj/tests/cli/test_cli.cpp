#include <array>
#include <cstdio>
#include <random>
#include <string>
#include <sys/wait.h>

#include "circqa/io.hpp"
#include "circqa/trainer.hpp"
#include "doctest.h"

using namespace circqa;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(CIRCQA_BIN) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("circqa_cli_" + std::to_string(std::random_device{}()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

const char* kSmallProductivity =
    "--set train_max_sentences=3 --set test_min_sentences=4 --set test_max_sentences=5 --set per_stratum=12 "
    "--set twin_per_stratum=2";

}  // namespace

TEST_CASE("generate is deterministic") {
  TempDir tmp;
  const auto a = run("generate --task productivity --seed 7 --out-dir " + tmp / "a" + " " + kSmallProductivity);
  const auto b = run("generate --task productivity --seed 7 --out-dir " + tmp / "b" + " " + kSmallProductivity);
  CHECK(a.status == 0);
  CHECK(b.status == 0);
  const auto ma = nlohmann::json::parse(read_text(tmp.path / "a" / "manifest.json"));
  const auto mb = nlohmann::json::parse(read_text(tmp.path / "b" / "manifest.json"));
  CHECK(ma["content_hash"] == mb["content_hash"]);
  CHECK(ma["content_hash"] == dataset_hash(read_dataset(tmp.path / "a")));
  CHECK(fs::exists(tmp.path / "a" / "config.ini"));
  const auto c = run("generate --task productivity --seed 8 --out-dir " + tmp / "c" + " " + kSmallProductivity);
  CHECK(nlohmann::json::parse(read_text(tmp.path / "c" / "manifest.json"))["content_hash"] != ma["content_hash"]);
}

TEST_CASE("inspect prints the Alice golden") {
  const auto r = run("inspect --story \"Alice moved to the park. Alice grabbed the milk.\"");
  CHECK(r.status == 0);
  CHECK(r.out == "nouns: Alice:P park:L milk:O\nAlice@[0]\npark@[1]\nto[moved]@[0,1]\nmilk@[2]\ngrabbed@[0,2]\n");
}

TEST_CASE("exit codes") {
  TempDir tmp;
  CHECK(run("").status == 2);
  CHECK(run("frobnicate").status == 2);
  CHECK(run("generate --task productivity").status == 2);
  CHECK(run("generate --task parity --out-dir " + tmp / "x").status == 2);
  CHECK(run("inspect --story \"Alice sat on the mat.\"").status == 1);
  CHECK(run("train --data " + tmp / "nowhere" + " --out-dir " + tmp / "r").status == 2);
  REQUIRE(run("generate --task productivity --out-dir " + tmp / "d" + " " + kSmallProductivity).status == 0);
  // the output directory must be fresh
  CHECK(run("generate --task productivity --out-dir " + tmp / "d" + " " + kSmallProductivity).status == 1);
  CHECK(run("generate --task productivity --out-dir " + tmp / "e" + " --set per_stratum=1").status == 1);
  CHECK(run("generate --task overgeneralisation --out-dir " + tmp / "f").status == 2);
}

TEST_CASE("train, evaluate and report chain") {
  TempDir tmp;
  REQUIRE(run("generate --task productivity --seed 3 --out-dir " + tmp / "data" + " " + kSmallProductivity).status == 0);
  const auto data_before = read_text(tmp.path / "data" / "train.jsonl");
  REQUIRE(run("train --backend neural --epochs 4 --set dim=3 --seed 2 --data " + tmp / "data" + " --out-dir " +
              tmp / "run")
              .status == 0);
  CHECK(read_text(tmp.path / "data" / "train.jsonl") == data_before);
  const auto logs = parse_epoch_csv(read_text(tmp.path / "run" / "metrics.csv"));
  REQUIRE(logs.size() == 4);

  for (const char* scheme : {"AB", "All", "V"}) {
    const std::string out = tmp / (std::string("eval_") + scheme);
    REQUIRE(run("evaluate --run " + tmp / "run" + " --scheme " + scheme + " --out-dir " + out).status == 0);
    const auto j = nlohmann::json::parse(read_text(fs::path(out) / "report.json"));
    const auto chosen = select_model(logs, scheme_from_name(scheme));
    CHECK(j["selection"]["selected_epoch"].get<int>() == logs[chosen].epoch);
    CHECK(j["inputs"]["data_hash"] == dataset_hash(read_dataset(tmp.path / "data")));

    // the report replays exactly from the prediction file
    const auto preds = read_predictions(fs::path(out) / "predictions.csv");
    const auto data = read_dataset(tmp.path / "data");
    CHECK(j["c_score"].get<double>() == c_score(accuracy(data.train, preds), accuracy(data.test, preds)));
    CHECK(j["score_ab"].get<double>() == scheme_score_estimate(data.valid_a, data.valid_b, preds));
    CHECK(j["score_all"].get<double>() == scheme_score_estimate(data.valid_v, data.valid_c, preds));
  }
  CHECK(run("evaluate --run " + tmp / "run" + " --scheme Q --out-dir " + tmp / "bad").status == 2);

  const auto r = run("report --out-dir " + tmp / "summary" + " " + tmp / "eval_AB" + " " + tmp / "eval_V");
  CHECK(r.status == 0);
  const auto summary = read_text(tmp.path / "summary" / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 3);

  const std::string ckpt = tmp / "run/checkpoints/epoch_004.json";
  REQUIRE(run("interpret --checkpoint " + ckpt + " --fragments ID,Ap,Ck-Ap --boxes moved went --out-dir " +
              tmp / "interp")
              .status == 0);
  const auto yes = read_text(tmp.path / "interp" / "fragments_yes.csv");
  CHECK(yes.rfind(",ID,Ap,Ck-Ap\n", 0) == 0);
  CHECK(fs::exists(tmp.path / "interp" / "boxes.csv"));
  CHECK(run("interpret --checkpoint " + ckpt + " --fragments Ap,Zz --out-dir " + tmp / "interp2").status == 1);
}
