#include "circqa/metrics.hpp"

#include <boost/math/distributions/beta.hpp>
#include <cstdio>
#include <sstream>

#include "circqa/error.hpp"

namespace circqa {

namespace {

void check_unit(double a, const char* what) {
  if (!(a >= 0.0 && a <= 1.0)) throw Error(ErrorCode::OutOfRange, std::string(what) + " outside [0,1]");
}

}  // namespace

double c_fact(double acc_a, double acc_b) {
  check_unit(acc_a, "acc_a");
  check_unit(acc_b, "acc_b");
  return std::max(0.0, acc_a - acc_b);
}

double c_score(double acc_a, double acc_b) { return (1.0 - 2.0 * c_fact(acc_a, acc_b)) * acc_a; }

bool epsilon_compositional(double acc_a, double acc_b, double epsilon) { return c_fact(acc_a, acc_b) <= epsilon; }

Interval clopper_pearson(std::size_t k, std::size_t n, double confidence) {
  if (n == 0 || k > n) throw Error(ErrorCode::OutOfRange, "clopper_pearson needs 0 <= k <= n, n > 0");
  const double alpha = 1.0 - confidence;
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  Interval iv;
  iv.lo = k == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<double>(kd, nd - kd + 1), alpha / 2);
  iv.hi = k == n ? 1.0
                 : boost::math::quantile(boost::math::beta_distribution<double>(kd + 1, nd - kd), 1 - alpha / 2);
  return iv;
}

Predictions predict_all(const SemanticModel& model, const ParameterStore& store,
                        const std::vector<CompiledExample>& examples) {
  Predictions p;
  for (const auto& ex : examples) p[ex.id] = model.predict(ex, store);
  return p;
}

Tally tally(const std::vector<LabeledExample>& xs, const Predictions& preds, Labels labels) {
  Tally t;
  for (const auto& e : xs) {
    auto it = preds.find(e.id);
    if (it == preds.end()) throw Error(ErrorCode::Format, "no prediction for '" + e.id + "'");
    const Answer gold = labels == Labels::Truth ? e.true_answer() : e.answer;
    ++t.total;
    if (it->second == gold) ++t.correct;
  }
  return t;
}

double accuracy(const std::vector<LabeledExample>& xs, const Predictions& preds, Labels labels) {
  return tally(xs, preds, labels).accuracy();
}

std::vector<StratumAccuracy> per_stratum_accuracy(const std::vector<LabeledExample>& xs, const Predictions& preds) {
  std::map<int, std::vector<LabeledExample>> by;
  for (const auto& e : xs) by[e.stratum].push_back(e);
  std::vector<StratumAccuracy> out;
  for (const auto& [s, group] : by) {
    const auto t = tally(group, preds);
    out.push_back({s, t.total, t.correct, t.accuracy(), clopper_pearson(t.correct, t.total)});
  }
  return out;
}

double scheme_score_estimate(const std::vector<LabeledExample>& valid_a, const std::vector<LabeledExample>& valid_b,
                             const Predictions& preds) {
  if (valid_a.empty() || valid_b.empty()) throw Error(ErrorCode::EmptyHalf, "scheme estimate needs both halves");
  return c_score(accuracy(valid_a, preds), accuracy(valid_b, preds));
}

OvergeneralisationReport overgeneralisation_report(const std::vector<LabeledExample>& train, const Predictions& preds) {
  std::vector<LabeledExample> corrupted;
  std::vector<LabeledExample> clean;
  for (const auto& e : train) (e.corrupted ? corrupted : clean).push_back(e);
  if (corrupted.empty()) throw Error(ErrorCode::NoCorruptedExamples, "bundle has no corrupted train examples");
  OvergeneralisationReport r;
  r.n_corrupted = corrupted.size();
  r.n_clean = clean.size();
  r.acc_corrupted = accuracy(corrupted, preds, Labels::Truth);
  r.acc_clean = clean.empty() ? 0.0 : accuracy(clean, preds, Labels::Truth);
  r.c_fact = c_fact(r.acc_clean, r.acc_corrupted);
  r.overgeneralises = r.acc_corrupted >= r.acc_clean;
  return r;
}

CompositionReport composition_report(const DatasetBundle& bundle, const Predictions& preds,
                                     const std::vector<double>& epsilons) {
  CompositionReport r;
  r.task = bundle.task;
  r.baseline = bundle.baseline;
  r.acc_train = accuracy(bundle.train, preds);
  r.acc_test = accuracy(bundle.test, preds);
  if (!bundle.twin.empty()) r.acc_twin = accuracy(bundle.twin, preds);
  r.train_strata = per_stratum_accuracy(bundle.train, preds);
  r.test_strata = per_stratum_accuracy(bundle.test, preds);
  r.c_fact = c_fact(r.acc_train, r.acc_test);
  r.c_score = c_score(r.acc_train, r.acc_test);
  for (double eps : epsilons) r.epsilon[eps] = epsilon_compositional(r.acc_train, r.acc_test, eps);
  if (!bundle.valid_a.empty() && !bundle.valid_b.empty())
    r.score_ab = scheme_score_estimate(bundle.valid_a, bundle.valid_b, preds);
  if (!bundle.valid_v.empty() && !bundle.valid_c.empty())
    r.score_all = scheme_score_estimate(bundle.valid_v, bundle.valid_c, preds);
  const bool any_corrupted =
      std::any_of(bundle.train.begin(), bundle.train.end(), [](const auto& e) { return e.corrupted; });
  if (any_corrupted) r.overgeneralisation = overgeneralisation_report(bundle.train, preds);
  return r;
}

namespace {

nlohmann::json strata_json(const std::vector<StratumAccuracy>& xs) {
  auto out = nlohmann::json::array();
  for (const auto& s : xs) {
    out.push_back({{"stratum", s.stratum},
                   {"n", s.n},
                   {"correct", s.correct},
                   {"accuracy", s.accuracy},
                   {"ci", {s.interval.lo, s.interval.hi}}});
  }
  return out;
}

}  // namespace

nlohmann::json CompositionReport::to_json() const {
  nlohmann::json j = {{"task", task},
                      {"baseline", baseline},
                      {"acc_train", acc_train},
                      {"acc_test", acc_test},
                      {"c_fact", c_fact},
                      {"c_score", c_score},
                      {"train_strata", strata_json(train_strata)},
                      {"test_strata", strata_json(test_strata)}};
  if (acc_twin) j["acc_twin"] = *acc_twin;
  auto eps = nlohmann::json::object();
  for (const auto& [e, ok] : epsilon) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", e);
    eps[buf] = ok;
  }
  j["epsilon_compositional"] = eps;
  if (score_ab) j["score_ab"] = *score_ab;
  if (score_all) j["score_all"] = *score_all;
  if (overgeneralisation) {
    const auto& o = *overgeneralisation;
    j["overgeneralisation"] = {{"acc_corrupted", o.acc_corrupted}, {"acc_clean", o.acc_clean},
                               {"c_fact", o.c_fact},               {"n_corrupted", o.n_corrupted},
                               {"n_clean", o.n_clean},             {"overgeneralises", o.overgeneralises}};
  }
  return j;
}

std::string CompositionReport::to_text() const {
  std::ostringstream os;
  char buf[160];
  os << "task: " << task << "\n";
  if (baseline != 0.5) {
    std::snprintf(buf, sizeof buf, "baseline (majority prior): %.4f\n", baseline);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "train accuracy: %.4f\ntest accuracy:  %.4f\n", acc_train, acc_test);
  os << buf;
  if (acc_twin) {
    std::snprintf(buf, sizeof buf, "train' accuracy: %.4f\n", *acc_twin);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "c_fact: %.4f\nc_score: %.4f\n", c_fact, c_score);
  os << buf;
  for (const auto& [e, ok] : epsilon) {
    std::snprintf(buf, sizeof buf, "%g-compositional: %s\n", e, ok ? "yes" : "no");
    os << buf;
  }
  if (score_ab) {
    std::snprintf(buf, sizeof buf, "scheme AB estimate: %.4f\n", *score_ab);
    os << buf;
  }
  if (score_all) {
    std::snprintf(buf, sizeof buf, "scheme All estimate: %.4f\n", *score_all);
    os << buf;
  }
  if (overgeneralisation) {
    const auto& o = *overgeneralisation;
    std::snprintf(buf, sizeof buf, "overgeneralisation: acc_C %.4f (n=%zu), acc_A\\C %.4f (n=%zu), c_fact %.4f%s\n",
                  o.acc_corrupted, o.n_corrupted, o.acc_clean, o.n_clean, o.c_fact,
                  o.overgeneralises ? " [overgeneralises]" : "");
    os << buf;
  }
  os << "per stratum:\n" << strata_csv();
  return os.str();
}

std::string CompositionReport::strata_csv() const {
  std::ostringstream os;
  os << "split,stratum,n,correct,accuracy,ci_lo,ci_hi\n";
  char buf[160];
  auto rows = [&](const char* split, const std::vector<StratumAccuracy>& xs) {
    for (const auto& s : xs) {
      std::snprintf(buf, sizeof buf, "%s,%d,%zu,%zu,%.6f,%.6f,%.6f\n", split, s.stratum, s.n, s.correct, s.accuracy,
                    s.interval.lo, s.interval.hi);
      os << buf;
    }
  };
  rows("train", train_strata);
  rows("test", test_strata);
  return os.str();
}

}  // namespace circqa
