#include "circqa/fragments.hpp"

#include <cmath>
#include <sstream>

#include "circqa/error.hpp"
#include "circqa/neural.hpp"
#include "circqa/quantum.hpp"

namespace circqa {

FragmentCast FragmentCast::default_cast(const std::string& object) {
  return FragmentCast{{{'A', "Andrew"}, {'C', "Clara"}, {'p', "park"}, {'k', "kitchen"}, {'o', object}}};
}

namespace {

const std::string& cast_noun(const FragmentCast& cast, char letter, const std::string& spec) {
  auto it = cast.nouns.find(letter);
  if (it == cast.nouns.end()) throw Error(ErrorCode::BadSpec, "letter '" + std::string(1, letter) + "' in '" + spec + "'");
  return it->second;
}

SentenceAst expand_code(const std::string& code, const std::string& spec, const FragmentCast& cast,
                        const VerbChoice& verbs) {
  if (code.size() != 2) throw Error(ErrorCode::BadSpec, "code '" + code + "' in '" + spec + "'");
  const std::string& person = cast_noun(cast, code[0], spec);
  const std::string& target = cast_noun(cast, code[1], spec);
  if (!vocab::is_person(person)) throw Error(ErrorCode::BadSpec, "'" + person + "' is not a person");
  if (vocab::is_location(target)) {
    if (vocab::verb_class(verbs.movement) != VerbClass::Move && vocab::verb_class(verbs.movement) != VerbClass::Journey)
      throw Error(ErrorCode::BadSpec, "'" + verbs.movement + "' is not a movement verb");
    return MoveSentence{person, target, verbs.movement, false};
  }
  if (vocab::is_object(target)) {
    const auto cls = vocab::verb_class(verbs.object);
    if (!cls || *cls == VerbClass::Move || *cls == VerbClass::Journey)
      throw Error(ErrorCode::BadSpec, "'" + verbs.object + "' is not an object verb");
    std::string particle;
    if (*cls == VerbClass::Picked) particle = "up";
    if (*cls == VerbClass::Put) particle = "down";
    return ObjectSentence{person, target, verbs.object, particle};
  }
  throw Error(ErrorCode::BadSpec, "'" + target + "' is neither a location nor an object");
}

}  // namespace

Fragment build_fragment(const std::string& spec, const std::string& extra, const FragmentCast& cast,
                        const VerbChoice& verbs) {
  if (spec.empty()) throw Error(ErrorCode::BadSpec, "empty fragment spec");
  std::vector<SentenceAst> sentences;
  if (spec != "ID") {
    std::istringstream in(spec);
    std::string code;
    while (std::getline(in, code, '-')) sentences.push_back(expand_code(code, spec, cast, verbs));
    if (spec.back() == '-') throw Error(ErrorCode::BadSpec, "trailing '-' in '" + spec + "'");
  }
  Fragment f;
  f.spec = spec;
  f.story = Story::from_sentences(std::move(sentences));
  f.diagram = sandwich_expand(build_story_diagram(f.story));
  for (char c : extra) {
    const std::string& noun = cast_noun(cast, c, extra);
    if (f.story.mentions(noun)) continue;
    bool present = false;
    for (const auto& w : f.diagram.wires) present = present || w.noun == noun;
    if (!present) f.diagram = add_noun(f.diagram, noun, *vocab::noun_type(noun));
  }
  return f;
}

BoxKey resolve_box_key(const ParameterStore& store, const std::string& word) {
  if (auto colon = word.find(':'); colon != std::string::npos) {
    BoxKey key{word.substr(0, colon), word.substr(colon + 1)};
    store.slot(key);
    return key;
  }
  std::vector<BoxKey> found;
  for (const auto& s : store.slots()) {
    if (s.key.word == word) found.push_back(s.key);
  }
  if (found.size() != 1)
    throw Error(ErrorCode::MissingParameters,
                "'" + word + "' matches " + std::to_string(found.size()) + " stored boxes; use word:SHAPE");
  return found[0];
}

std::vector<std::vector<double>> box_overlap_matrix(const std::vector<BoxKey>& keys, const SemanticModel& model,
                                                    const ParameterStore& store) {
  const std::size_t n = keys.size();
  for (const auto& k : keys) {
    if (k.shape != keys.front().shape) throw Error(ErrorCode::ShapeMismatch, k.str() + " vs " + keys.front().str());
    store.slot(k);
  }
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  if (const auto* q = dynamic_cast<const QuantumModel*>(&model)) {
    const std::size_t k = keys.empty() ? 0 : keys.front().shape.size();
    std::vector<std::vector<cplx>> us;
    for (const auto& key : keys) us.push_back(box_unitary(k, store.values(key), q->quantum_config().layers));
    const double dim = std::ldexp(1.0, static_cast<int>(k));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        cplx tr = 0.0;
        for (std::size_t e = 0; e < us[i].size(); ++e) tr += std::conj(us[i][e]) * us[j][e];
        out[i][j] = std::abs(tr) / dim;
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = store.values(keys[i]);
    for (std::size_t j = 0; j < n; ++j) {
      const auto b = store.values(keys[j]);
      double ab = 0.0;
      double aa = 0.0;
      double bb = 0.0;
      for (std::size_t e = 0; e < a.size(); ++e) {
        ab += a[e] * b[e];
        aa += a[e] * a[e];
        bb += b[e] * b[e];
      }
      out[i][j] = aa > 0.0 && bb > 0.0 ? std::abs(ab) / std::sqrt(aa * bb) : (i == j ? 1.0 : 0.0);
    }
  }
  return out;
}

namespace {

std::vector<std::string> sorted_nouns(const Diagram& d) {
  std::vector<std::string> out;
  for (const auto& w : d.wires) out.push_back(w.noun);
  std::sort(out.begin(), out.end());
  return out;
}

std::array<std::size_t, 2> target_wires(const Fragment& f, const Question& q) {
  std::optional<std::size_t> p;
  std::optional<std::size_t> l;
  for (std::size_t i = 0; i < f.diagram.wires.size(); ++i) {
    if (f.diagram.wires[i].noun == q.person) p = i;
    if (f.diagram.wires[i].noun == q.location) l = i;
  }
  if (!p || !l) throw Error(ErrorCode::CastMismatch, "fragment '" + f.spec + "' lacks the question nouns");
  return {*p, *l};
}

}  // namespace

std::array<cplx, 16> fragment_effect(const Fragment& f, const Question& q, Answer assertion,
                                     const SemanticModel& model, const ParameterStore& store) {
  const auto* qm = dynamic_cast<const QuantumModel*>(&model);
  if (!qm) throw Error(ErrorCode::BadSpec, "fragment effects are defined for the quantum backend");
  const int layers = qm->quantum_config().layers;
  const auto wires = target_wires(f, q);

  Diagram open = f.diagram;
  std::erase_if(open.layers, [&](const PlacedNode& layer) {
    const auto* box = std::get_if<BoxNode>(&layer.node);
    return box && box->role == BoxRole::NounState && (layer.wires[0] == wires[0] || layer.wires[0] == wires[1]);
  });
  const auto gates = compile_gates(open, store, layers);

  const auto pair = build_assertion_pair(q);
  const auto a = evaluate_story(assertion == Answer::Yes ? pair.yes : pair.no, store, qm->quantum_config());

  const std::size_t n = open.wire_count();
  std::array<std::vector<cplx>, 4> projected;  // (<a| (x) I) U |j, others>
  for (std::size_t j = 0; j < 4; ++j) {
    StateVector psi{n, std::vector<cplx>(std::size_t{1} << n, 0.0)};
    std::size_t start = 0;
    if (j & 1) start |= std::size_t{1} << wires[0];
    if (j & 2) start |= std::size_t{1} << wires[1];
    psi.amplitudes[start] = 1.0;
    for (const auto& g : gates) apply_gate(psi, g, store.flat());
    auto& out = projected[j];
    const std::size_t b0 = std::size_t{1} << wires[0];
    const std::size_t b1 = std::size_t{1} << wires[1];
    for (std::size_t x = 0; x < psi.amplitudes.size(); ++x) {
      if (x & (b0 | b1)) continue;
      const std::array<std::size_t, 4> idx = {x, x | b0, x | b1, x | b0 | b1};
      cplx s = 0.0;
      for (int i = 0; i < 4; ++i) s += std::conj(a.amplitudes[i]) * psi.amplitudes[idx[i]];
      out.push_back(s);
    }
  }
  std::array<cplx, 16> e{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      cplx s = 0.0;
      for (std::size_t r = 0; r < projected[i].size(); ++r) s += std::conj(projected[i][r]) * projected[j][r];
      e[i * 4 + j] = s;
    }
  }
  return e;
}

namespace {

double hs(const std::array<cplx, 16>& a, const std::array<cplx, 16>& b) {
  // Tr(A B) for Hermitian A, B
  cplx s = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) s += a[i * 4 + j] * b[j * 4 + i];
  }
  return s.real();
}

}  // namespace

double assertion_relative_overlap(const Fragment& a, const Fragment& b, const Question& q, Answer assertion,
                                  const SemanticModel& model, const ParameterStore& store) {
  if (sorted_nouns(a.diagram) != sorted_nouns(b.diagram))
    throw Error(ErrorCode::CastMismatch, "'" + a.spec + "' and '" + b.spec + "' use different nouns");
  if (dynamic_cast<const QuantumModel*>(&model)) {
    const auto ea = fragment_effect(a, q, assertion, model, store);
    const auto eb = fragment_effect(b, q, assertion, model, store);
    const double norm = std::sqrt(hs(ea, ea) * hs(eb, eb));
    if (norm <= 0.0) return 0.0;
    return std::clamp(hs(ea, eb) / norm, 0.0, 1.0);
  }
  const auto* nm = dynamic_cast<const NeuralModel*>(&model);
  if (!nm) throw Error(ErrorCode::BadSpec, "unsupported backend");
  const auto dim = static_cast<std::size_t>(nm->neural_config().dim);
  auto projected = [&](const Fragment& f) {
    const auto w = target_wires(f, q);
    return project_wires(evaluate_story_vector(f.diagram, store, nm->neural_config()), dim, w[0], w[1]);
  };
  const auto u = projected(a);
  const auto v = projected(b);
  const double norm = std::sqrt(comp_overlap(u, u) * comp_overlap(v, v));
  if (norm <= 0.0) return 0.0;
  return std::min(1.0, std::abs(comp_overlap(u, v)) / norm);
}

std::vector<std::vector<double>> assertion_relative_matrix(const std::vector<Fragment>& fragments, const Question& q,
                                                           Answer assertion, const SemanticModel& model,
                                                           const ParameterStore& store) {
  const std::size_t n = fragments.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      m[i][j] = m[j][i] = assertion_relative_overlap(fragments[i], fragments[j], q, assertion, model, store);
      best = std::max(best, m[i][j]);
    }
  }
  if (best > 0.0) {
    for (auto& row : m) {
      for (auto& v : row) v /= best;
    }
  }
  return m;
}

int confounding_count(const Story& story, const Question& q) {
  int count = 0;
  for (const auto& s : story.sentences) {
    if (is_move(s) && sentence_target(s) == q.location) ++count;
  }
  return count;
}

std::vector<ConfoundingBucket> confounding_split(const std::vector<LabeledExample>& xs, const Predictions& preds) {
  std::map<std::pair<int, int>, std::vector<LabeledExample>> buckets;
  for (const auto& e : xs) buckets[{confounding_count(e.story, e.question), static_cast<int>(e.answer)}].push_back(e);
  std::vector<ConfoundingBucket> out;
  for (const auto& [key, group] : buckets) {
    out.push_back({key.first, static_cast<Answer>(key.second), tally(group, preds)});
  }
  return out;
}

}  // namespace circqa
