#include "circqa/model.hpp"

#include <cmath>

#include "circqa/error.hpp"
#include "circqa/neural.hpp"
#include "circqa/quantum.hpp"

namespace circqa {

CompiledExample compile_story(const Story& story, const Question& q) {
  CompiledExample ex;
  Diagram d = sandwich_expand(build_story_diagram(story));
  auto [person, location] = question_wires(d, q);
  if (!location) {
    d = add_noun(d, q.location, WireType::L);
    location = d.wire_count() - 1;
  }
  ex.story = std::move(d);
  ex.person_wire = person;
  ex.location_wire = *location;
  ex.assertions = build_assertion_pair(q);
  ex.truth = oracle_answer(story, q);
  ex.label = ex.truth;
  return ex;
}

CompiledExample compile_example(const LabeledExample& e) {
  CompiledExample ex = compile_story(e.story, e.question);
  ex.id = e.id;
  ex.label = e.answer;
  return ex;
}

std::vector<CompiledExample> compile_examples(const std::vector<LabeledExample>& xs) {
  std::vector<CompiledExample> out;
  out.reserve(xs.size());
  for (const auto& e : xs) out.push_back(compile_example(e));
  return out;
}

Answer decide(const Overlaps& o) noexcept { return o.yes > o.no ? Answer::Yes : Answer::No; }

std::pair<double, double> answer_probabilities(const Overlaps& o) noexcept {
  const double m = std::max(o.yes, o.no);
  const double ey = std::exp(o.yes - m);
  const double en = std::exp(o.no - m);
  return {ey / (ey + en), en / (ey + en)};
}

double answer_loss(const Overlaps& o, Answer gold, double& d_yes, double& d_no) noexcept {
  const auto [py, pn] = answer_probabilities(o);
  const bool yes = gold == Answer::Yes;
  d_yes = py - (yes ? 1.0 : 0.0);
  d_no = pn - (yes ? 0.0 : 1.0);
  const double m = std::max(o.yes, o.no);
  const double lse = m + std::log(std::exp(o.yes - m) + std::exp(o.no - m));
  return lse - (yes ? o.yes : o.no);
}

double SemanticModel::loss(const CompiledExample& ex, const ParameterStore& store) const {
  double dy = 0.0;
  double dn = 0.0;
  return answer_loss(overlaps(ex, store), ex.label, dy, dn);
}

namespace {

void collect(const SemanticModel& model, const Diagram& d, std::map<BoxKey, ParameterStore::Entry>& entries) {
  for (const auto& layer : d.layers) {
    const auto* box = std::get_if<BoxNode>(&layer.node);
    if (!box) throw Error(ErrorCode::ContainsFrames, "parameter collection needs flat diagrams");
    entries.emplace(box_key(*box), ParameterStore::Entry{box->role, model.parameter_count(*box)});
  }
}

}  // namespace

ParameterStore make_store(const SemanticModel& model, const std::vector<const Diagram*>& diagrams) {
  std::map<BoxKey, ParameterStore::Entry> entries;
  for (const auto* d : diagrams) collect(model, *d, entries);
  return ParameterStore(entries);
}

ParameterStore make_store(const SemanticModel& model, const std::vector<CompiledExample>& examples) {
  std::map<BoxKey, ParameterStore::Entry> entries;
  for (const auto& ex : examples) {
    collect(model, ex.story, entries);
    collect(model, ex.assertions.yes, entries);
    collect(model, ex.assertions.no, entries);
  }
  return ParameterStore(entries);
}

std::unique_ptr<SemanticModel> make_model(const nlohmann::json& config) {
  const auto backend = config.value("backend", std::string("quantum"));
  if (backend == "quantum") return std::make_unique<QuantumModel>(QuantumConfig::from_json(config));
  if (backend == "neural") return std::make_unique<NeuralModel>(NeuralConfig::from_json(config));
  throw Error(ErrorCode::InfeasibleConfig, "unknown backend '" + backend + "'");
}

}  // namespace circqa
