#include <cmath>
#include <numbers>

#include "circqa/error.hpp"
#include "circqa/fragments.hpp"
#include "circqa/neural.hpp"
#include "circqa/quantum.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace circqa;
using testsupport::Rng;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Format;
}

ParameterStore single_wire_store(const SemanticModel& model) {
  std::map<BoxKey, ParameterStore::Entry> entries;
  for (const char* w : {"in", "not_top", "not_bot"}) {
    const BoxNode b{w, {WireType::P}};
    entries[box_key(b)] = {BoxRole::Plain, model.parameter_count(b)};
  }
  return ParameterStore(entries);
}

std::vector<cplx> noun_qubit(const std::string& noun, WireType t, const ParameterStore& store, const QuantumConfig& cfg) {
  return evaluate_story(add_noun(Diagram{}, noun, t), store, cfg).amplitudes;
}

}  // namespace

TEST_CASE("fragment codes expand to parsed stories") {
  const auto f = build_fragment("Ap-Ck-Ao");
  const Story s = Story::from_sentences({parse_sentence("Andrew moved to the park."),
                                         parse_sentence("Clara moved to the kitchen."),
                                         parse_sentence("Andrew picked up the milk.")});
  CHECK(f.story == s);
  CHECK(f.diagram == sandwich_expand(build_story_diagram(s)));

  const auto g = build_fragment("Ap-Co", "k", FragmentCast::default_cast("football"), VerbChoice{"travelled", "put"});
  CHECK(g.story == Story::from_sentences({parse_sentence("Andrew travelled to the park."),
                                          parse_sentence("Clara put down the football.")}));
  REQUIRE(g.diagram.wire_count() == 5);
  CHECK(g.diagram.wires.back().noun == "kitchen");

  const auto id = build_fragment("ID", "Ap");
  CHECK(id.story.sentences.empty());
  CHECK(id.diagram.wire_count() == 2);
  CHECK(id.diagram.layers.size() == 2);
}

TEST_CASE("bad fragment specs") {
  for (const char* spec : {"", "Ax", "App", "Ap-", "pA", "AC", "Ap--Ck"})
    CHECK(code_of([&] { (void)build_fragment(spec); }) == ErrorCode::BadSpec);
  CHECK(code_of([] { (void)build_fragment("Ap", "z"); }) == ErrorCode::BadSpec);
  CHECK(code_of([] { (void)build_fragment("Ap", "", FragmentCast::default_cast(), VerbChoice{"picked", "picked"}); }) ==
        ErrorCode::BadSpec);
  CHECK(code_of([] { (void)build_fragment("Ao", "", FragmentCast::default_cast(), VerbChoice{"moved", "went"}); }) ==
        ErrorCode::BadSpec);
}

TEST_CASE("quantum box overlaps") {
  const QuantumModel model(QuantumConfig{1});
  ParameterStore store = single_wire_store(model);
  // in = identity, not_top = Rz(pi) which is traceless
  store.set({"not_top", "P"}, {std::numbers::pi, 0.0, 0.0});
  std::vector<BoxKey> keys = {{"in", "P"}, {"not_top", "P"}, {"not_bot", "P"}};
  store.set({"not_bot", "P"}, {0.3, 1.1, -0.7});
  const auto m = box_overlap_matrix(keys, model, store);
  CHECK(m[0][1] < 1e-12);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m[i][i] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(m[i][j] == doctest::Approx(m[j][i]).epsilon(1e-12));
      CHECK(m[i][j] <= 1.0 + 1e-12);
    }
  }
  // |Tr Rz(a)|/2 = |cos(a/2)| for a pure rotation
  store.set({"not_bot", "P"}, {0.9, 0.0, 0.0});
  CHECK(box_overlap_matrix(keys, model, store)[0][2] == doctest::Approx(std::cos(0.45)).epsilon(1e-12));

  std::map<BoxKey, ParameterStore::Entry> two = {{{"moved", "PL"}, {BoxRole::Plain, 5}}, {{"in", "P"}, {BoxRole::Plain, 3}}};
  const ParameterStore mixed(two);
  CHECK(code_of([&] { (void)box_overlap_matrix({{"moved", "PL"}, {"in", "P"}}, model, mixed); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("neural box overlaps") {
  const NeuralModel model(NeuralConfig{1, NeuralSchema::Linear, {}, Activation::Mish});
  ParameterStore store = single_wire_store(model);
  store.set({"in", "P"}, {2.0});
  store.set({"not_top", "P"}, {-3.0});
  store.set({"not_bot", "P"}, {0.0});
  const auto m = box_overlap_matrix({{"in", "P"}, {"not_top", "P"}, {"not_bot", "P"}}, model, store);
  CHECK(m[0][1] == doctest::Approx(1.0));
  CHECK(m[0][2] == 0.0);
  CHECK(m[2][2] == 1.0);

  const NeuralModel wide(NeuralConfig{2, NeuralSchema::Linear, {}, Activation::Mish});
  ParameterStore s2 = single_wire_store(wide);
  s2.set({"in", "P"}, {1, 0, 0, 1});
  s2.set({"not_top", "P"}, {0, 1, -1, 0});
  CHECK(box_overlap_matrix({{"in", "P"}, {"not_top", "P"}}, wide, s2)[0][1] == 0.0);
}

TEST_CASE("resolve_box_key") {
  std::map<BoxKey, ParameterStore::Entry> e = {{{"moved", "PL"}, {BoxRole::Plain, 5}},
                                               {{"moved", "P"}, {BoxRole::Plain, 3}},
                                               {{"in", "P"}, {BoxRole::Plain, 3}}};
  const ParameterStore store(e);
  CHECK(resolve_box_key(store, "in") == BoxKey{"in", "P"});
  CHECK(resolve_box_key(store, "moved:PL") == BoxKey{"moved", "PL"});
  CHECK(code_of([&] { (void)resolve_box_key(store, "moved"); }) == ErrorCode::MissingParameters);
  CHECK(code_of([&] { (void)resolve_box_key(store, "went"); }) == ErrorCode::MissingParameters);
  CHECK(code_of([&] { (void)resolve_box_key(store, "in:L"); }) == ErrorCode::MissingParameters);
}

TEST_CASE("fragment effect reproduces the assertion overlap") {
  Rng rng(81);
  const QuantumModel model(QuantumConfig{2});
  const Question q{"Andrew", "park"};
  for (const auto& [spec, extra] : std::vector<std::pair<std::string, std::string>>{
           {"Ap-Ck", ""}, {"Ao-Ck", "p"}, {"Ck-Ap-Ao", ""}, {"Ak-Cp-Ak", ""}}) {
    const auto f = build_fragment(spec, extra);
    const auto ex = compile_story(f.story, q);
    ParameterStore store = make_store(model, std::vector<CompiledExample>{ex});
    model.initialise(store, rng());
    const auto p = noun_qubit("Andrew", WireType::P, store, model.quantum_config());
    const auto l = noun_qubit("park", WireType::L, store, model.quantum_config());
    const auto o = model.overlaps(ex, store);
    for (Answer a : {Answer::Yes, Answer::No}) {
      const auto e = fragment_effect(f, q, a, model, store);
      cplx s = 0.0;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          const cplx phi_i = p[i & 1] * l[i >> 1];
          const cplx phi_j = p[j & 1] * l[j >> 1];
          s += std::conj(phi_i) * e[i * 4 + j] * phi_j;
        }
      }
      CHECK(std::abs(s.imag()) < 1e-10);
      CHECK(s.real() == doctest::Approx(a == Answer::Yes ? o.yes : o.no).epsilon(1e-10));
    }
  }
}

TEST_CASE("assertion-relative overlaps") {
  Rng rng(82);
  const QuantumModel qm(QuantumConfig{1});
  const NeuralModel nm(NeuralConfig{3, NeuralSchema::Flat, {}, Activation::Mish});
  const Question q{"Andrew", "park"};
  const std::vector<Fragment> frags = {build_fragment("ID", "ACpk"), build_fragment("Ap", "Ck"),
                                       build_fragment("Ak-Cp"), build_fragment("Ap-Ck"), build_fragment("Cp-Ak")};
  for (const SemanticModel* m : {static_cast<const SemanticModel*>(&qm), static_cast<const SemanticModel*>(&nm)}) {
    std::vector<const Diagram*> ds;
    for (const auto& f : frags) ds.push_back(&f.diagram);
    const auto pair = build_assertion_pair(q);
    ds.push_back(&pair.yes);
    ds.push_back(&pair.no);
    ParameterStore store = make_store(*m, ds);
    m->initialise(store, rng());
    const auto mat = assertion_relative_matrix(frags, q, Answer::Yes, *m, store);
    double best = 0.0;
    for (std::size_t i = 0; i < frags.size(); ++i) {
      for (std::size_t j = 0; j < frags.size(); ++j) {
        CHECK(mat[i][j] == mat[j][i]);
        CHECK(mat[i][j] >= 0.0);
        CHECK(mat[i][j] <= 1.0 + 1e-12);
        best = std::max(best, mat[i][j]);
      }
      CHECK(assertion_relative_overlap(frags[i], frags[i], q, Answer::Yes, *m, store) ==
            doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(best == doctest::Approx(1.0));
    CHECK(code_of([&] { (void)assertion_relative_overlap(frags[0], build_fragment("Ap"), q, Answer::No, *m, store); }) ==
          ErrorCode::CastMismatch);
  }
  // fragments that touch disjoint nouns commute
  ParameterStore store;
  {
    std::vector<const Diagram*> ds = {&frags[3].diagram, &frags[2].diagram};
    const auto pair = build_assertion_pair(q);
    ds.push_back(&pair.yes);
    store = make_store(qm, ds);
    qm.initialise(store, 5);
  }
  const auto swapped = build_fragment("Ck-Ap");
  CHECK(assertion_relative_overlap(frags[3], swapped, q, Answer::Yes, qm, store) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(code_of([&] { (void)fragment_effect(frags[3], q, Answer::Yes, nm, store); }) == ErrorCode::BadSpec);
}

TEST_CASE("confounding split") {
  Rng rng(83);
  std::vector<LabeledExample> xs;
  Predictions p;
  for (int i = 0; i < 400; ++i) {
    LabeledExample e;
    e.id = std::to_string(i);
    e.story = testsupport::random_story(rng, 1 + testsupport::pick(rng, 6), 3, 3, 2);
    e.question = testsupport::random_question(rng, e.story, 3);
    e.answer = oracle_answer(e.story, e.question);
    p[e.id] = testsupport::pick(rng, 2) ? Answer::Yes : Answer::No;
    xs.push_back(e);
  }
  const auto buckets = confounding_split(xs, p);
  std::size_t total = 0;
  for (const auto& b : buckets) {
    // brute force recount
    Tally t;
    for (const auto& e : xs) {
      int c = 0;
      for (const auto& s : e.story.sentences)
        if (std::holds_alternative<MoveSentence>(s) && std::get<MoveSentence>(s).location == e.question.location) ++c;
      if (c != b.count || e.answer != b.answer) continue;
      ++t.total;
      if (p[e.id] == e.answer) ++t.correct;
    }
    CHECK(t.total == b.tally.total);
    CHECK(t.correct == b.tally.correct);
    total += b.tally.total;
  }
  CHECK(total == xs.size());
  // a yes answer always has at least one confounding sentence
  for (const auto& b : buckets)
    if (b.answer == Answer::Yes) CHECK(b.count >= 1);
}
