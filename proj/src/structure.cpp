#include "circqa/dataset.hpp"

#include <algorithm>
#include <map>

namespace circqa {

namespace {

struct Labelling {
  std::map<std::string, std::string> labels;
  int people = 0;
  int locations = 0;
  int objects = 0;

  // Label for `noun`, allocating the next typed index when it is new.
  std::string label(const std::string& noun) {
    if (auto it = labels.find(noun); it != labels.end()) return it->second;
    std::string l;
    switch (*vocab::noun_type(noun)) {
      case WireType::P: l = "P" + std::to_string(people++); break;
      case WireType::L: l = "L" + std::to_string(locations++); break;
      case WireType::O: l = "O" + std::to_string(objects++); break;
    }
    labels.emplace(noun, l);
    return l;
  }
};

std::string encode(const SentenceAst& s, Labelling& lab) {
  const auto cls = static_cast<int>(*vocab::verb_class(sentence_verb(s)));
  std::string out;
  if (const auto* m = std::get_if<MoveSentence>(&s)) {
    out = "M" + std::to_string(cls) + (m->back ? "b" : "");
  } else {
    out = "O" + std::to_string(cls);
  }
  const std::string p = lab.label(sentence_person(s));
  const std::string t = lab.label(sentence_target(s));
  return out + "(" + p + "," + t + ")";
}

bool shares_noun(const SentenceAst& a, const SentenceAst& b) {
  const std::string& pa = sentence_person(a);
  const std::string& ta = sentence_target(a);
  const std::string& pb = sentence_person(b);
  const std::string& tb = sentence_target(b);
  return pa == pb || pa == tb || ta == pb || ta == tb;
}

class Canonicaliser {
 public:
  Canonicaliser(const Story& story, const Question& q) : story_(story), q_(q) {
    const std::size_t n = story.sentences.size();
    preds_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < j; ++i) {
        if (shares_noun(story.sentences[i], story.sentences[j])) preds_[j].push_back(i);
      }
    }
  }

  std::vector<std::string> run() {
    std::vector<std::string> prefix;
    std::vector<bool> placed(story_.sentences.size(), false);
    dfs(placed, Labelling{}, prefix);
    return best_;
  }

 private:
  void dfs(std::vector<bool>& placed, const Labelling& lab, std::vector<std::string>& prefix) {
    // prune branches already worse than the best complete sequence
    if (!best_.empty()) {
      for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (prefix[i] < best_[i]) break;
        if (prefix[i] > best_[i]) return;
      }
    }
    if (prefix.size() == story_.sentences.size()) {
      Labelling l = lab;
      std::vector<std::string> full = prefix;
      const std::string p = l.label(q_.person);
      const std::string loc = l.label(q_.location);
      full.push_back("Q(" + p + "," + loc + ")");
      if (best_.empty() || full < best_) best_ = std::move(full);
      return;
    }
    std::vector<std::pair<std::string, std::size_t>> options;
    for (std::size_t i = 0; i < placed.size(); ++i) {
      if (placed[i]) continue;
      const bool ready =
          std::all_of(preds_[i].begin(), preds_[i].end(), [&](std::size_t p) { return placed[p]; });
      if (!ready) continue;
      Labelling l = lab;
      options.emplace_back(encode(story_.sentences[i], l), i);
    }
    const auto min_enc = std::min_element(options.begin(), options.end())->first;
    for (const auto& [enc, i] : options) {
      if (enc != min_enc) continue;
      Labelling l = lab;
      encode(story_.sentences[i], l);
      placed[i] = true;
      prefix.push_back(enc);
      dfs(placed, l, prefix);
      prefix.pop_back();
      placed[i] = false;
    }
  }

  const Story& story_;
  const Question& q_;
  std::vector<std::vector<std::size_t>> preds_;
  std::vector<std::string> best_;
};

}  // namespace

StructureGraph structure_graph(const Story& story, const Question& q) {
  const auto tokens = Canonicaliser(story, q).run();
  StructureGraph g;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) g.canonical += ' ';
    g.canonical += tokens[i];
  }
  return g;
}

SynonymDistance synonym_distance(const Story& story) {
  SynonymDistance d;
  for (const auto& s : story.sentences) {
    const auto cls = *vocab::verb_class(sentence_verb(s));
    if (sentence_verb(s) == vocab::class_representative(cls)) continue;
    ++d.total;
    if (cls == VerbClass::Move || cls == VerbClass::Journey) ++d.movement;
  }
  return d;
}

}  // namespace circqa
