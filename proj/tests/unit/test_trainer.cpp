#include <algorithm>
#include <cmath>
#include <set>

#include "circqa/error.hpp"
#include "circqa/trainer.hpp"
#include "doctest.h"

using namespace circqa;

namespace {

DatasetBundle tiny_productivity(std::uint64_t seed = 3) {
  ProductivityConfig c;
  c.train_min_sentences = 2;
  c.train_max_sentences = 4;
  c.test_min_sentences = 5;
  c.test_max_sentences = 6;
  c.per_stratum = 10;
  c.twin_per_stratum = 4;
  return gen_productivity(c, seed);
}

RunConfig tiny_neural(int epochs) {
  RunConfig r = RunConfig::neural_defaults();
  r.model = {{"backend", "neural"}, {"dim", 3}, {"schema", "Flat"}, {"activation", "mish"}};
  r.max_epochs = epochs;
  return r;
}

EpochLog log_of(int epoch, double loss, double v, std::optional<double> train_acc = std::nullopt) {
  EpochLog l;
  l.epoch = epoch;
  l.loss = loss;
  l.validation[Scheme::V] = v;
  l.train_accuracy = train_acc;
  return l;
}

}  // namespace

TEST_CASE("learning rate zero leaves parameters bit-identical") {
  const auto data = tiny_productivity();
  for (const auto& model : {nlohmann::json{{"backend", "quantum"}, {"layers", 1}},
                            nlohmann::json{{"backend", "neural"}, {"dim", 2}, {"schema", "Linear"}}}) {
    RunConfig run;
    run.model = model;
    run.learning_rate = 0.0;
    run.max_epochs = 2;
    run.seed = 5;
    const auto m = make_model(model);
    auto result = train(run, data, *m);
    ParameterStore fresh = result.store;
    m->initialise(fresh, run.seed);
    for (const auto& cp : result.checkpoints) CHECK(cp == fresh.flat());
  }
}

TEST_CASE("updates per epoch follow the batch size") {
  const auto data = tiny_productivity();
  const std::size_t n = data.train.size();
  for (int batch : {1, 4, static_cast<int>(n) + 3}) {
    RunConfig run = tiny_neural(1);
    run.batch_size = batch;
    const auto result = train(run, data);
    REQUIRE(result.logs.size() == 1);
    CHECK(result.logs[0].examples == n);
    CHECK(result.logs[0].updates == (n + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));
  }
}

TEST_CASE("training lowers the loss on a small set") {
  const auto data = tiny_productivity();
  double best_drop = -1e9;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    RunConfig run = tiny_neural(12);
    run.seed = seed;
    const auto result = train(run, data);
    best_drop = std::max(best_drop, result.logs.front().loss - result.logs.back().loss);
    for (std::size_t i = 0; i < result.logs.size(); ++i) {
      CHECK(result.logs[i].epoch == static_cast<int>(i) + 1);
      CHECK(result.logs[i].train_accuracy.has_value() == (i % 3 == 0));
      CHECK(result.logs[i].validation.count(Scheme::V));
      CHECK(result.logs[i].validation.count(Scheme::C));
    }
  }
  CHECK(best_drop > 0.0);
}

TEST_CASE("training is reproducible") {
  const auto data = tiny_productivity();
  RunConfig run = tiny_neural(3);
  run.seed = 11;
  const auto a = train(run, data);
  const auto b = train(run, data);
  CHECK(a.checkpoints == b.checkpoints);
  run.seed = 12;
  CHECK(train(run, data).checkpoints != a.checkpoints);
}

TEST_CASE("callback sees every epoch and may set the checkpoint") {
  const auto data = tiny_productivity();
  int calls = 0;
  const auto result = train(tiny_neural(2), data, [&](EpochLog& log, const ParameterStore&) {
    ++calls;
    log.checkpoint = "ckpt_" + std::to_string(log.epoch) + ".json";
  });
  CHECK(calls == 2);
  CHECK(result.logs[1].checkpoint == "ckpt_2.json");
}

TEST_CASE("select_model ordering") {
  // best score wins
  CHECK(select_model({log_of(1, 0.5, 0.6), log_of(2, 0.9, 0.7), log_of(3, 0.1, 0.65)}, Scheme::V) == 1);
  // tie on score: logged train accuracy closest to the score
  CHECK(select_model({log_of(1, 0.5, 0.7, 0.95), log_of(2, 0.5, 0.7, 0.72), log_of(3, 0.5, 0.7)}, Scheme::V) == 1);
  // unlogged counts as infinitely far
  CHECK(select_model({log_of(1, 0.1, 0.7), log_of(2, 0.9, 0.7, 1.0)}, Scheme::V) == 1);
  // then lower loss
  CHECK(select_model({log_of(1, 0.4, 0.7), log_of(2, 0.3, 0.7)}, Scheme::V) == 1);
  // then the earliest epoch
  CHECK(select_model({log_of(1, 0.3, 0.7), log_of(2, 0.3, 0.7)}, Scheme::V) == 0);
  CHECK_THROWS_AS(select_model({}, Scheme::V), Error);

  EpochLog l;
  l.validation = {{Scheme::V, 0.9}, {Scheme::A, 0.8}, {Scheme::B, 0.6}, {Scheme::C, 0.5}};
  CHECK(*scheme_score(l, Scheme::AB) == doctest::Approx((1 - 2 * 0.2) * 0.8));
  CHECK(*scheme_score(l, Scheme::All) == doctest::Approx((1 - 2 * 0.4) * 0.9));
  CHECK(*scheme_score(l, Scheme::B) == 0.6);
  l.validation.erase(Scheme::B);
  CHECK_FALSE(scheme_score(l, Scheme::AB).has_value());
}

TEST_CASE("step curriculum boundaries") {
  const auto data = tiny_productivity();
  std::set<int> strata;
  for (const auto& e : data.train) strata.insert(e.stratum);
  REQUIRE(strata.size() == 3);
  const std::vector<int> order(strata.begin(), strata.end());
  CurriculumConfig cfg{true, 30, CurriculumMode::Step};
  auto strata_at = [&](int epoch) {
    std::set<int> s;
    for (auto i : curriculum_schedule(data.train, cfg, epoch, 1)) s.insert(data.train[i].stratum);
    return s;
  };
  CHECK(strata_at(0) == std::set<int>{order[0]});
  CHECK(strata_at(9) == std::set<int>{order[0]});
  CHECK(strata_at(10) == std::set<int>{order[0], order[1]});
  CHECK(strata_at(19) == std::set<int>{order[0], order[1]});
  CHECK(strata_at(20) == strata);
  CHECK(curriculum_schedule(data.train, cfg, 30, 1).size() == data.train.size());
  cfg.enabled = false;
  CHECK(curriculum_schedule(data.train, cfg, 0, 1).size() == data.train.size());
}

TEST_CASE("smooth curriculum grows monotonically") {
  const auto data = tiny_productivity();
  CurriculumConfig cfg{true, 30, CurriculumMode::Smooth};
  std::vector<std::size_t> prev;
  for (int epoch = 0; epoch <= 30; ++epoch) {
    const auto cur = curriculum_schedule(data.train, cfg, epoch, 4);
    CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    CHECK(cur.size() >= prev.size());
    prev = cur;
  }
  CHECK(prev.size() == data.train.size());
  // the seeded ramp is deterministic
  CHECK(curriculum_schedule(data.train, cfg, 14, 4) == curriculum_schedule(data.train, cfg, 14, 4));
}

TEST_CASE("stratified folds partition the pool") {
  const auto data = tiny_productivity();
  for (int k : {2, 3, 5}) {
    const auto folds = stratified_folds(data.train, k, 9);
    REQUIRE(folds.size() == static_cast<std::size_t>(k));
    std::vector<int> seen(data.train.size(), 0);
    for (const auto& f : folds)
      for (auto i : f) ++seen[i];
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    // each stratum spread within one of even
    std::map<int, std::vector<int>> per;
    for (const auto& f : folds) {
      std::map<int, int> count;
      for (auto i : f) ++count[data.train[i].stratum];
      for (const auto& e : data.train) per[e.stratum];
      for (auto& [s, v] : per) v.push_back(count[s]);
    }
    for (const auto& [s, v] : per) CHECK(*std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end()) <= 1);
  }
  CHECK_THROWS_AS(stratified_folds(data.train, 1, 0), Error);
}

TEST_CASE("cross-validation report") {
  const auto data = tiny_productivity();
  RunConfig run = tiny_neural(2);
  run.seed = 21;
  const auto cv = cross_validate(run, data, 5);
  REQUIRE(cv.folds.size() == 5);
  double mt = 0.0;
  std::vector<double> tests;
  for (const auto& f : cv.folds) {
    CHECK(f.acc_twin.has_value());
    CHECK(f.selected_epoch >= 1);
    CHECK(f.selected_epoch <= 2);
    CHECK(f.c_score == doctest::Approx(c_score(f.acc_train, f.acc_test)));
    mt += f.acc_test / 5;
    tests.push_back(f.acc_test);
  }
  CHECK(cv.mean_test == doctest::Approx(mt));
  double ss = 0.0;
  for (double t : tests) ss += (t - mt) * (t - mt);
  const double half = 2.7764451051977987 * std::sqrt(ss / 4 / 5);
  CHECK(cv.test_interval.lo == doctest::Approx(mt - half));
  CHECK(cv.test_interval.hi == doctest::Approx(mt + half));

  const auto again = cross_validate(run, data, 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(again.folds[i].acc_test == cv.folds[i].acc_test);
}

TEST_CASE("epoch logs round-trip through CSV and JSON") {
  std::vector<EpochLog> logs = {log_of(1, 0.693147180559945, 0.5, 0.51), log_of(2, 1.0 / 3.0, 2.0 / 3.0)};
  logs[0].validation[Scheme::C] = 0.125;
  logs[0].updates = 40;
  logs[0].examples = 40;
  logs[1].checkpoint = "ckpt/epoch_2.json";
  std::string csv = epoch_csv_header() + "\n";
  for (const auto& l : logs) csv += epoch_csv_row(l) + "\n";
  const auto back = parse_epoch_csv(csv);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].epoch == logs[i].epoch);
    CHECK(back[i].loss == logs[i].loss);
    CHECK(back[i].updates == logs[i].updates);
    CHECK(back[i].validation == logs[i].validation);
    CHECK(back[i].train_accuracy == logs[i].train_accuracy);
    CHECK(back[i].checkpoint == logs[i].checkpoint);
    const auto j = EpochLog::from_json(logs[i].to_json());
    CHECK(j.loss == logs[i].loss);
    CHECK(j.validation == logs[i].validation);
    CHECK(j.train_accuracy == logs[i].train_accuracy);
  }
  CHECK_THROWS_AS(parse_epoch_csv("epoch,loss\n1,2\n"), Error);
}

TEST_CASE("run config JSON") {
  RunConfig r = RunConfig::neural_defaults();
  r.curriculum = {true, 12, CurriculumMode::Step};
  r.scheme = Scheme::AB;
  r.seed = 99;
  const auto back = RunConfig::from_json(r.to_json());
  CHECK(back.to_json() == r.to_json());
  CHECK(RunConfig::from_json(nlohmann::json::object()).to_json() == RunConfig::quantum_defaults().to_json());
  CHECK_THROWS_AS(RunConfig::from_json({{"batch_size", 0}}), Error);
  CHECK_THROWS_AS(RunConfig::from_json({{"scheme", "Z"}}), Error);
}
