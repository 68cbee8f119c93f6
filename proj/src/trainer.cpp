#include "circqa/trainer.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "circqa/error.hpp"
#include "circqa/kernels.hpp"

namespace circqa {

RunConfig RunConfig::quantum_defaults() {
  RunConfig r;
  r.model = {{"backend", "quantum"}, {"layers", 3}};
  r.learning_rate = 0.0005;
  r.batch_size = 1;
  r.max_epochs = 30;
  return r;
}

RunConfig RunConfig::neural_defaults() {
  RunConfig r;
  r.model = {{"backend", "neural"}, {"dim", 12}, {"schema", "Flat"}, {"activation", "mish"}};
  r.learning_rate = 5e-3;
  r.batch_size = 4;
  r.max_epochs = 50;
  return r;
}

nlohmann::json RunConfig::to_json() const {
  return {{"model", model},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"scheme", std::string(scheme_name(scheme))},
          {"curriculum",
           {{"enabled", curriculum.enabled},
            {"epochs", curriculum.epochs},
            {"mode", curriculum.mode == CurriculumMode::Smooth ? "smooth" : "step"}}},
          {"seed", seed},
          {"deterministic", deterministic},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_epsilon", adam_epsilon}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  const bool neural = j.contains("model") && j["model"].value("backend", std::string("quantum")) == "neural";
  RunConfig r = neural ? neural_defaults() : quantum_defaults();
  if (j.contains("model")) r.model = j["model"];
  r.learning_rate = j.value("learning_rate", r.learning_rate);
  r.batch_size = j.value("batch_size", r.batch_size);
  r.max_epochs = j.value("max_epochs", r.max_epochs);
  r.scheme = scheme_from_name(j.value("scheme", std::string("V")));
  if (j.contains("curriculum")) {
    const auto& c = j["curriculum"];
    r.curriculum.enabled = c.value("enabled", false);
    r.curriculum.epochs = c.value("epochs", 30);
    const auto mode = c.value("mode", std::string("smooth"));
    if (mode != "smooth" && mode != "step") throw Error(ErrorCode::InfeasibleConfig, "curriculum mode '" + mode + "'");
    r.curriculum.mode = mode == "smooth" ? CurriculumMode::Smooth : CurriculumMode::Step;
  }
  r.seed = j.value("seed", r.seed);
  r.deterministic = j.value("deterministic", r.deterministic);
  r.beta1 = j.value("beta1", r.beta1);
  r.beta2 = j.value("beta2", r.beta2);
  r.adam_epsilon = j.value("adam_epsilon", r.adam_epsilon);
  if (r.batch_size < 1 || r.max_epochs < 1 || r.learning_rate < 0.0)
    throw Error(ErrorCode::InfeasibleConfig, "batch_size and max_epochs must be >= 1, learning_rate >= 0");
  return r;
}

namespace {

constexpr Scheme kSubsets[] = {Scheme::V, Scheme::A, Scheme::B, Scheme::C};

}  // namespace

nlohmann::json EpochLog::to_json() const {
  nlohmann::json v = nlohmann::json::object();
  for (const auto& [s, acc] : validation) v[std::string(scheme_name(s))] = acc;
  nlohmann::json j = {{"epoch", epoch}, {"loss", loss},     {"updates", updates},
                      {"examples", examples}, {"validation", v}, {"checkpoint", checkpoint}};
  if (train_accuracy) j["train_accuracy"] = *train_accuracy;
  return j;
}

EpochLog EpochLog::from_json(const nlohmann::json& j) {
  EpochLog l;
  l.epoch = j.at("epoch").get<int>();
  l.loss = j.at("loss").get<double>();
  l.updates = j.value("updates", std::size_t{0});
  l.examples = j.value("examples", std::size_t{0});
  if (j.contains("validation")) {
    for (const auto& [k, v] : j["validation"].items()) l.validation[scheme_from_name(k)] = v.get<double>();
  }
  if (j.contains("train_accuracy")) l.train_accuracy = j["train_accuracy"].get<double>();
  l.checkpoint = j.value("checkpoint", std::string());
  return l;
}

std::string epoch_csv_header() { return "epoch,loss,updates,examples,acc_V,acc_A,acc_B,acc_C,train_acc,checkpoint"; }

std::string epoch_csv_row(const EpochLog& log) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string row = std::to_string(log.epoch) + "," + num(log.loss) + "," + std::to_string(log.updates) + "," +
                    std::to_string(log.examples);
  for (auto s : kSubsets) {
    row += ",";
    if (auto it = log.validation.find(s); it != log.validation.end()) row += num(it->second);
  }
  row += ",";
  if (log.train_accuracy) row += num(*log.train_accuracy);
  row += "," + log.checkpoint;
  return row;
}

std::vector<EpochLog> parse_epoch_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<EpochLog> logs;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      if (line != epoch_csv_header()) throw Error(ErrorCode::Format, "unexpected metrics header");
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 10) throw Error(ErrorCode::Format, "metrics row has " + std::to_string(cells.size()) + " cells");
    EpochLog l;
    try {
      l.epoch = std::stoi(cells[0]);
      l.loss = std::stod(cells[1]);
      l.updates = std::stoull(cells[2]);
      l.examples = std::stoull(cells[3]);
      for (int i = 0; i < 4; ++i) {
        if (!cells[4 + i].empty()) l.validation[kSubsets[i]] = std::stod(cells[4 + i]);
      }
      if (!cells[8].empty()) l.train_accuracy = std::stod(cells[8]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Format, "bad metrics row '" + line + "'");
    }
    l.checkpoint = cells[9];
    logs.push_back(std::move(l));
  }
  return logs;
}

std::optional<double> scheme_score(const EpochLog& log, Scheme scheme) {
  auto get = [&](Scheme s) -> std::optional<double> {
    auto it = log.validation.find(s);
    if (it == log.validation.end()) return std::nullopt;
    return it->second;
  };
  switch (scheme) {
    case Scheme::AB: {
      auto a = get(Scheme::A);
      auto b = get(Scheme::B);
      if (!a || !b) return std::nullopt;
      return c_score(*a, *b);
    }
    case Scheme::All: {
      auto v = get(Scheme::V);
      auto c = get(Scheme::C);
      if (!v || !c) return std::nullopt;
      return c_score(*v, *c);
    }
    default: return get(scheme);
  }
}

std::size_t select_model(const std::vector<EpochLog>& logs, Scheme scheme) {
  if (logs.empty()) throw Error(ErrorCode::OutOfRange, "no epochs to select from");
  constexpr double inf = std::numeric_limits<double>::infinity();
  struct Key {
    double score;
    double distance;
    double loss;
    int epoch;
  };
  auto key = [&](const EpochLog& l) {
    const double score = scheme_score(l, scheme).value_or(-inf);
    const double distance = l.train_accuracy ? std::abs(*l.train_accuracy - score) : inf;
    return Key{score, distance, l.loss, l.epoch};
  };
  std::size_t best = 0;
  Key bk = key(logs[0]);
  for (std::size_t i = 1; i < logs.size(); ++i) {
    const Key k = key(logs[i]);
    bool better;
    if (k.score != bk.score) {
      better = k.score > bk.score;
    } else if (k.distance != bk.distance) {
      better = k.distance < bk.distance;
    } else if (k.loss != bk.loss) {
      better = k.loss < bk.loss;
    } else {
      better = k.epoch < bk.epoch;
    }
    if (better) {
      best = i;
      bk = k;
    }
  }
  return best;
}

std::vector<std::size_t> curriculum_schedule(const std::vector<LabeledExample>& train, const CurriculumConfig& cfg,
                                             int epoch, std::uint64_t seed) {
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), 0);
  if (!cfg.enabled || epoch >= cfg.epochs) return all;

  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < train.size(); ++i) strata[train[i].stratum].push_back(i);
  std::mt19937_64 rng(seed ^ 0xc3a5c85c97cb3127ULL);
  for (auto& [_, idx] : strata) std::shuffle(idx.begin(), idx.end(), rng);

  const int m = static_cast<int>(strata.size());
  auto boundary = [&](int j) {
    return static_cast<int>(std::lround(static_cast<double>(j) * cfg.epochs / m));
  };
  std::vector<std::size_t> out;
  int j = 0;
  for (const auto& [_, idx] : strata) {
    const int begin = boundary(j);
    const int end = boundary(j + 1);
    double fraction;
    if (epoch < begin) {
      fraction = 0.0;
    } else if (cfg.mode == CurriculumMode::Step || j == 0 || end <= begin) {
      fraction = 1.0;
    } else {
      fraction = std::min(1.0, static_cast<double>(epoch - begin + 1) / static_cast<double>(end - begin));
    }
    const auto take = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(idx.size())));
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    ++j;
  }
  std::sort(out.begin(), out.end());
  return out;
}

TrainResult train(const RunConfig& run, const DatasetBundle& data, const EpochCallback& on_epoch) {
  const auto model = make_model(run.model);
  return train(run, data, *model, on_epoch);
}

namespace {

double accuracy_of(const SemanticModel& model, const ParameterStore& store, const std::vector<CompiledExample>& xs) {
  if (xs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : xs) {
    if (model.predict(ex, store) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(xs.size());
}

}  // namespace

TrainResult train(const RunConfig& run, const DatasetBundle& data, const SemanticModel& model,
                  const EpochCallback& on_epoch) {
  if (data.train.empty()) throw Error(ErrorCode::InfeasibleConfig, "empty training split");
  const auto train_set = compile_examples(data.train);
  std::map<Scheme, std::vector<CompiledExample>> valid;
  valid[Scheme::V] = compile_examples(data.valid_v);
  valid[Scheme::A] = compile_examples(data.valid_a);
  valid[Scheme::B] = compile_examples(data.valid_b);
  valid[Scheme::C] = compile_examples(data.valid_c);

  std::vector<CompiledExample> everything = train_set;
  for (const auto& [_, xs] : valid) everything.insert(everything.end(), xs.begin(), xs.end());
  for (const auto& e : compile_examples(data.test)) everything.push_back(e);
  for (const auto& e : compile_examples(data.twin)) everything.push_back(e);

  TrainResult result;
  result.store = make_store(model, everything);
  model.initialise(result.store, run.seed);
  ParameterStore& store = result.store;

  const std::size_t n_params = store.size();
  std::vector<double> grad(n_params);
  std::vector<double> m(n_params, 0.0);
  std::vector<double> v(n_params, 0.0);
  std::size_t step = 0;
  std::mt19937_64 shuffle_rng(run.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto& k = kernels();

  for (int epoch = 0; epoch < run.max_epochs; ++epoch) {
    auto order = curriculum_schedule(data.train, run.curriculum, epoch, run.seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog log;
    log.epoch = epoch + 1;
    log.examples = order.size();
    double loss_sum = 0.0;
    const auto batch = static_cast<std::size_t>(run.batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        const double l = model.loss_and_gradient(ex, store, grad);
        if (!std::isfinite(l))
          throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch + 1) + ", example '" + ex.id + "'");
        loss_sum += l;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& g : grad) g *= scale;
      ++step;
      const double bc1 = 1.0 - std::pow(run.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(run.beta2, static_cast<double>(step));
      k.adam_step(store.flat().data(), grad.data(), m.data(), v.data(), n_params, run.learning_rate, run.beta1,
                  run.beta2, run.adam_epsilon, bc1, bc2);
      ++log.updates;
    }
    log.loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
    for (const auto& [s, xs] : valid) {
      if (!xs.empty()) log.validation[s] = accuracy_of(model, store, xs);
    }
    if (epoch % 3 == 0) log.train_accuracy = accuracy_of(model, store, train_set);
    if (on_epoch) on_epoch(log, store);
    result.logs.push_back(log);
    result.checkpoints.push_back(store.flat());
  }
  return result;
}

std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<LabeledExample>& pool, int k,
                                                       std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InfeasibleConfig, "need at least 2 folds");
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < pool.size(); ++i) strata[pool[i].stratum].push_back(i);
  std::mt19937_64 rng(seed ^ 0x2545f4914f6cdd1dULL);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (auto& [_, idx] : strata) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) folds[i % static_cast<std::size_t>(k)].push_back(idx[i]);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

CrossValidation cross_validate(const RunConfig& run, const DatasetBundle& data, int k) {
  std::vector<LabeledExample> pool = data.train;
  pool.insert(pool.end(), data.valid_v.begin(), data.valid_v.end());
  const auto folds = stratified_folds(pool, k, run.seed);
  const auto model = make_model(run.model);

  CrossValidation cv;
  for (int f = 0; f < k; ++f) {
    DatasetBundle b = data;
    b.train.clear();
    b.valid_v.clear();
    std::vector<bool> held(pool.size(), false);
    for (auto i : folds[static_cast<std::size_t>(f)]) held[i] = true;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      auto e = pool[i];
      e.split = held[i] ? Split::ValidV : Split::Train;
      (held[i] ? b.valid_v : b.train).push_back(std::move(e));
    }
    b.refresh_validation_subsets();

    RunConfig fold_run = run;
    fold_run.seed = run.seed + static_cast<std::uint64_t>(f);
    auto result = train(fold_run, b, *model);
    const auto chosen = select_model(result.logs, run.scheme);
    result.store.flat() = result.checkpoints[chosen];

    FoldReport rep;
    rep.fold = f;
    rep.selected_epoch = result.logs[chosen].epoch;
    rep.acc_train = accuracy_of(*model, result.store, compile_examples(b.train));
    rep.acc_test = accuracy_of(*model, result.store, compile_examples(b.test));
    if (!b.twin.empty()) rep.acc_twin = accuracy_of(*model, result.store, compile_examples(b.twin));
    rep.c_score = c_score(rep.acc_train, rep.acc_test);
    cv.folds.push_back(rep);
  }

  const double n = static_cast<double>(k);
  std::vector<double> tests;
  for (const auto& r : cv.folds) {
    cv.mean_train += r.acc_train / n;
    cv.mean_test += r.acc_test / n;
    cv.mean_c_score += r.c_score / n;
    tests.push_back(r.acc_test);
  }
  double var = 0.0;
  for (double t : tests) var += (t - cv.mean_test) * (t - cv.mean_test);
  var /= (n - 1.0);
  const double tq = boost::math::quantile(boost::math::students_t_distribution<double>(n - 1.0), 0.975);
  const double half = tq * std::sqrt(var / n);
  cv.test_interval = {cv.mean_test - half, cv.mean_test + half};
  return cv;
}

}  // namespace circqa
