#pragma once

// The restricted story fragment: six sentence templates over a fixed
// vocabulary, plus the yes/no location question.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "circqa/diagram.hpp"

namespace circqa {

enum class VerbClass : std::uint8_t { Move, Journey, Grab, Picked, Put };

namespace vocab {

inline constexpr std::array<std::string_view, 8> kPeople = {"Andrew", "Bill",  "Clara",   "Denise",
                                                            "Eric",   "Fred",  "Gillian", "Heidi"};
/// Names accepted by the parser for illustration stories; generators never use them.
inline constexpr std::array<std::string_view, 2> kExtraPeople = {"Alice", "Bob"};
inline constexpr std::array<std::string_view, 4> kObjects = {"apple", "football", "milk", "slippers"};
inline constexpr std::array<std::string_view, 8> kLocations = {"kitchen", "office",   "hallway", "bedroom",
                                                               "garden",  "bathroom", "cinema",  "park"};
inline constexpr std::array<std::string_view, 2> kMoveVerbs = {"moved", "went"};
inline constexpr std::array<std::string_view, 2> kJourneyVerbs = {"travelled", "journeyed"};
inline constexpr std::array<std::string_view, 6> kGrabVerbs = {"discarded", "dropped", "left",
                                                               "grabbed",   "took",    "got"};

bool is_person(std::string_view w);
bool is_object(std::string_view w);
bool is_location(std::string_view w);
std::optional<WireType> noun_type(std::string_view w);
std::optional<VerbClass> verb_class(std::string_view w);
bool is_known_token(std::string_view w);

/// Members of a synonym class.
std::vector<std::string_view> class_members(VerbClass c);
/// The fixed representative used for base (distance 0) examples.
std::string_view class_representative(VerbClass c);
std::string_view class_name(VerbClass c);

/// Index into kPeople, -1 for anything else.
int person_index(std::string_view w);
int location_index(std::string_view w);

}  // namespace vocab

struct MoveSentence {
  std::string person;
  std::string location;
  std::string verb;
  bool back = false;

  friend bool operator==(const MoveSentence&, const MoveSentence&) = default;
};

/// Object interactions. `particle` is empty for grab-class verbs, "up" for
/// picked and "down" for put.
struct ObjectSentence {
  std::string person;
  std::string object;
  std::string verb;
  std::string particle;

  friend bool operator==(const ObjectSentence&, const ObjectSentence&) = default;
};

using SentenceAst = std::variant<MoveSentence, ObjectSentence>;

const std::string& sentence_person(const SentenceAst& s);
/// The location or object the sentence mentions.
const std::string& sentence_target(const SentenceAst& s);
const std::string& sentence_verb(const SentenceAst& s);
bool is_move(const SentenceAst& s);

struct Story {
  std::vector<SentenceAst> sentences;
  /// Distinct nouns in first-mention order.
  std::vector<std::string> nouns;

  static Story from_sentences(std::vector<SentenceAst> sentences);
  std::vector<std::string> people() const;
  bool mentions(std::string_view noun) const;

  friend bool operator==(const Story&, const Story&) = default;
};

struct Question {
  std::string person;
  std::string location;

  friend bool operator==(const Question&, const Question&) = default;
};

/// Throws UnknownToken for out-of-vocabulary words and MalformedSentence for
/// anything that is not one of the templates.
SentenceAst parse_sentence(std::string_view text);
std::string render_sentence(const SentenceAst& s);

Question parse_question(std::string_view text);
std::string render_question(const Question& q);

/// Story text format: one sentence per line (an optional "N. " prefix is
/// accepted), with a final "Q. Is X in the Y?" line.
std::pair<Story, Question> parse_story_text(std::string_view text);
std::string render_story_text(const Story& story, const Question& q);

/// One wire per distinct noun, opened by its noun state, then one gadget per
/// sentence in order. Frames are left unexpanded.
Diagram build_story_diagram(const Story& story);

/// Gadget node for a single sentence, shaped over (person, target).
Node sentence_gadget(const SentenceAst& s);

struct AssertionPair {
  Diagram yes;
  Diagram no;
};

/// 2-wire assertion diagrams `is[in]` and `is[not[in]]`, already flattened.
AssertionPair build_assertion_pair(const Question& q);

/// Story wire indices of (person, location). Throws PersonNotInStory when the
/// person has no wire; returns nullopt for the location when it is unmentioned.
std::pair<std::size_t, std::optional<std::size_t>> question_wires(const Diagram& story, const Question& q);

}  // namespace circqa
