#include "circqa/grammar.hpp"

#include <algorithm>
#include <sstream>

#include "circqa/error.hpp"

namespace circqa {

namespace vocab {

namespace {

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& set, std::string_view w) {
  return std::find(set.begin(), set.end(), w) != set.end();
}

template <std::size_t N>
int index_of(const std::array<std::string_view, N>& set, std::string_view w) {
  auto it = std::find(set.begin(), set.end(), w);
  return it == set.end() ? -1 : static_cast<int>(it - set.begin());
}

constexpr std::array<std::string_view, 9> kParticles = {"back", "to", "up", "down", "the", "Is", "is", "in", "not"};

}  // namespace

bool is_person(std::string_view w) { return contains(kPeople, w) || contains(kExtraPeople, w); }
bool is_object(std::string_view w) { return contains(kObjects, w); }
bool is_location(std::string_view w) { return contains(kLocations, w); }

std::optional<WireType> noun_type(std::string_view w) {
  if (is_person(w)) return WireType::P;
  if (is_object(w)) return WireType::O;
  if (is_location(w)) return WireType::L;
  return std::nullopt;
}

std::optional<VerbClass> verb_class(std::string_view w) {
  if (contains(kMoveVerbs, w)) return VerbClass::Move;
  if (contains(kJourneyVerbs, w)) return VerbClass::Journey;
  if (contains(kGrabVerbs, w)) return VerbClass::Grab;
  if (w == "picked") return VerbClass::Picked;
  if (w == "put") return VerbClass::Put;
  return std::nullopt;
}

bool is_known_token(std::string_view w) {
  return noun_type(w).has_value() || verb_class(w).has_value() || contains(kParticles, w);
}

std::vector<std::string_view> class_members(VerbClass c) {
  switch (c) {
    case VerbClass::Move: return {kMoveVerbs.begin(), kMoveVerbs.end()};
    case VerbClass::Journey: return {kJourneyVerbs.begin(), kJourneyVerbs.end()};
    case VerbClass::Grab: return {kGrabVerbs.begin(), kGrabVerbs.end()};
    case VerbClass::Picked: return {"picked"};
    case VerbClass::Put: return {"put"};
  }
  return {};
}

std::string_view class_representative(VerbClass c) {
  switch (c) {
    case VerbClass::Move: return "moved";
    case VerbClass::Journey: return "travelled";
    case VerbClass::Grab: return "grabbed";
    case VerbClass::Picked: return "picked";
    case VerbClass::Put: return "put";
  }
  return "";
}

std::string_view class_name(VerbClass c) {
  switch (c) {
    case VerbClass::Move: return "move";
    case VerbClass::Journey: return "journey";
    case VerbClass::Grab: return "grab";
    case VerbClass::Picked: return "picked";
    case VerbClass::Put: return "put";
  }
  return "";
}

int person_index(std::string_view w) { return index_of(kPeople, w); }
int location_index(std::string_view w) { return index_of(kLocations, w); }

}  // namespace vocab

const std::string& sentence_person(const SentenceAst& s) {
  return std::visit([](const auto& v) -> const std::string& { return v.person; }, s);
}

const std::string& sentence_target(const SentenceAst& s) {
  if (const auto* m = std::get_if<MoveSentence>(&s)) return m->location;
  return std::get<ObjectSentence>(s).object;
}

const std::string& sentence_verb(const SentenceAst& s) {
  return std::visit([](const auto& v) -> const std::string& { return v.verb; }, s);
}

bool is_move(const SentenceAst& s) { return std::holds_alternative<MoveSentence>(s); }

Story Story::from_sentences(std::vector<SentenceAst> sentences) {
  Story story;
  story.sentences = std::move(sentences);
  for (const auto& s : story.sentences) {
    for (const std::string* noun : {&sentence_person(s), &sentence_target(s)}) {
      if (std::find(story.nouns.begin(), story.nouns.end(), *noun) == story.nouns.end())
        story.nouns.push_back(*noun);
    }
  }
  return story;
}

std::vector<std::string> Story::people() const {
  std::vector<std::string> out;
  for (const auto& n : nouns) {
    if (vocab::is_person(n)) out.push_back(n);
  }
  return out;
}

bool Story::mentions(std::string_view noun) const {
  return std::find(nouns.begin(), nouns.end(), noun) != nouns.end();
}

namespace {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream is{std::string(text)};
  std::string tok;
  while (is >> tok) tokens.push_back(tok);
  return tokens;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

void check_tokens(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) {
    if (!vocab::is_known_token(t)) throw Error(ErrorCode::UnknownToken, "'" + t + "'");
  }
}

[[noreturn]] void malformed(std::string_view text) {
  throw Error(ErrorCode::MalformedSentence, "'" + std::string(text) + "'");
}

}  // namespace

SentenceAst parse_sentence(std::string_view raw) {
  std::string_view text = trim(raw);
  if (text.empty() || text.back() != '.') {
    check_tokens(tokenize(text.empty() ? text : text.substr(0, text.size() - (text.back() == '?' ? 1 : 0))));
    malformed(text);
  }
  const auto tokens = tokenize(text.substr(0, text.size() - 1));
  check_tokens(tokens);
  if (tokens.size() < 3 || !vocab::is_person(tokens[0])) malformed(text);

  const auto verb = vocab::verb_class(tokens[1]);
  if (!verb) malformed(text);
  const std::string& last = tokens.back();

  switch (*verb) {
    case VerbClass::Move:
    case VerbClass::Journey: {
      // P verb [back] to the L
      const bool back = tokens.size() == 6;
      if (tokens.size() != 5 && !back) malformed(text);
      if (back && tokens[2] != "back") malformed(text);
      const std::size_t k = back ? 3 : 2;
      if (tokens[k] != "to" || tokens[k + 1] != "the" || !vocab::is_location(last)) malformed(text);
      return MoveSentence{tokens[0], last, tokens[1], back};
    }
    case VerbClass::Grab: {
      if (tokens.size() != 4 || tokens[2] != "the" || !vocab::is_object(last)) malformed(text);
      return ObjectSentence{tokens[0], last, tokens[1], ""};
    }
    case VerbClass::Picked:
    case VerbClass::Put: {
      const char* particle = *verb == VerbClass::Picked ? "up" : "down";
      if (tokens.size() != 5 || tokens[2] != particle || tokens[3] != "the" || !vocab::is_object(last))
        malformed(text);
      return ObjectSentence{tokens[0], last, tokens[1], particle};
    }
  }
  malformed(text);
}

std::string render_sentence(const SentenceAst& s) {
  if (const auto* m = std::get_if<MoveSentence>(&s)) {
    return m->person + " " + m->verb + (m->back ? " back" : "") + " to the " + m->location + ".";
  }
  const auto& o = std::get<ObjectSentence>(s);
  return o.person + " " + o.verb + (o.particle.empty() ? "" : " " + o.particle) + " the " + o.object + ".";
}

Question parse_question(std::string_view raw) {
  std::string_view text = trim(raw);
  if (text.empty() || text.back() != '?') {
    check_tokens(tokenize(text));
    malformed(text);
  }
  const auto tokens = tokenize(text.substr(0, text.size() - 1));
  check_tokens(tokens);
  if (tokens.size() != 5 || tokens[0] != "Is" || !vocab::is_person(tokens[1]) || tokens[2] != "in" ||
      tokens[3] != "the" || !vocab::is_location(tokens[4]))
    malformed(text);
  return Question{tokens[1], tokens[4]};
}

std::string render_question(const Question& q) { return "Is " + q.person + " in the " + q.location + "?"; }

namespace {

// strips an "N. " or "Q. " line prefix
std::string_view strip_number(std::string_view line, bool& is_question) {
  is_question = false;
  if (line.size() >= 3 && line[0] == 'Q' && line[1] == '.' && line[2] == ' ') {
    is_question = true;
    return trim(line.substr(3));
  }
  std::size_t i = 0;
  while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
  if (i > 0 && i + 1 < line.size() && line[i] == '.' && line[i + 1] == ' ') return trim(line.substr(i + 2));
  return line;
}

}  // namespace

std::pair<Story, Question> parse_story_text(std::string_view text) {
  std::vector<SentenceAst> sentences;
  std::optional<Question> question;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    std::string_view l = trim(line);
    if (l.empty()) continue;
    if (question) throw Error(ErrorCode::MalformedSentence, "text after the question line");
    bool is_q = false;
    l = strip_number(l, is_q);
    if (is_q || (!l.empty() && l.back() == '?')) {
      question = parse_question(l);
    } else {
      sentences.push_back(parse_sentence(l));
    }
  }
  if (!question) throw Error(ErrorCode::MalformedSentence, "story has no question line");
  return {Story::from_sentences(std::move(sentences)), *question};
}

std::string render_story_text(const Story& story, const Question& q) {
  std::string out;
  for (std::size_t i = 0; i < story.sentences.size(); ++i) {
    out += std::to_string(i + 1) + ". " + render_sentence(story.sentences[i]) + "\n";
  }
  out += "Q. " + render_question(q) + "\n";
  return out;
}

namespace {

Diagram single_box(const Shape& shape, const std::string& word) {
  Diagram d = open_diagram(shape);
  std::vector<std::size_t> wires(shape.size());
  for (std::size_t i = 0; i < wires.size(); ++i) wires[i] = i;
  return append_node(d, BoxNode{word, shape, BoxRole::Plain, false}, wires);
}

Diagram single_node(const Shape& shape, const Node& node) {
  Diagram d = open_diagram(shape);
  std::vector<std::size_t> wires(shape.size());
  for (std::size_t i = 0; i < wires.size(); ++i) wires[i] = i;
  return append_node(d, node, wires);
}

FrameNode wrap(const std::string& word, const Shape& shape, std::vector<std::size_t> hole, Diagram contents) {
  FrameNode f;
  f.word = word;
  f.shape = shape;
  f.holes.push_back(std::move(hole));
  f.contents.emplace_back(std::move(contents));
  return f;
}

}  // namespace

Node sentence_gadget(const SentenceAst& s) {
  if (const auto* m = std::get_if<MoveSentence>(&s)) {
    const Shape pl{WireType::P, WireType::L};
    FrameNode to = wrap("to", pl, {0}, single_box({WireType::P}, m->verb));
    if (!m->back) return to;
    return wrap("back", pl, {0, 1}, single_node(pl, to));
  }
  const auto& o = std::get<ObjectSentence>(s);
  const Shape po{WireType::P, WireType::O};
  if (o.particle.empty()) return BoxNode{o.verb, po, BoxRole::Plain, false};
  return wrap(o.particle, po, {0, 1}, single_box(po, o.verb));
}

Diagram build_story_diagram(const Story& story) {
  Diagram d;
  auto wire_of = [&](const std::string& noun) -> std::size_t {
    for (std::size_t i = 0; i < d.wires.size(); ++i) {
      if (d.wires[i].noun == noun) return i;
    }
    const auto type = vocab::noun_type(noun);
    if (!type) throw Error(ErrorCode::UnknownToken, "'" + noun + "'");
    d = add_noun(d, noun, *type);
    return d.wires.size() - 1;
  };
  for (const auto& s : story.sentences) {
    const std::size_t p = wire_of(sentence_person(s));
    const std::size_t t = wire_of(sentence_target(s));
    d = append_node(d, sentence_gadget(s), {p, t});
  }
  return d;
}

AssertionPair build_assertion_pair(const Question& q) {
  if (!vocab::is_person(q.person)) throw Error(ErrorCode::UnknownToken, "'" + q.person + "'");
  if (!vocab::is_location(q.location)) throw Error(ErrorCode::UnknownToken, "'" + q.location + "'");
  const Shape pl{WireType::P, WireType::L};
  Diagram base = add_noun(add_noun(Diagram{}, q.person, WireType::P), q.location, WireType::L);

  Diagram in = single_box({WireType::P}, "in");
  FrameNode is_in = wrap("is", pl, {0}, in);
  FrameNode not_in = wrap("not", {WireType::P}, {0}, in);
  FrameNode is_not_in = wrap("is", pl, {0}, single_node({WireType::P}, not_in));

  return AssertionPair{sandwich_expand(append_node(base, is_in, {0, 1})),
                       sandwich_expand(append_node(base, is_not_in, {0, 1}))};
}

std::pair<std::size_t, std::optional<std::size_t>> question_wires(const Diagram& story, const Question& q) {
  std::optional<std::size_t> person;
  std::optional<std::size_t> location;
  for (std::size_t i = 0; i < story.wires.size(); ++i) {
    if (story.wires[i].noun == q.person) person = i;
    if (story.wires[i].noun == q.location) location = i;
  }
  if (!person) throw Error(ErrorCode::PersonNotInStory, "'" + q.person + "'");
  return {*person, location};
}

}  // namespace circqa
