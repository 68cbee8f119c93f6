#pragma once

// Labelled examples, the symbolic answer oracle and the four seeded dataset
// generators (productivity, systematicity, substitutivity, overgeneralisation).

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "circqa/grammar.hpp"
#include "json.hpp"

namespace circqa {

enum class Answer : std::uint8_t { No, Yes };

inline Answer negate(Answer a) noexcept { return a == Answer::Yes ? Answer::No : Answer::Yes; }
std::string_view answer_name(Answer a) noexcept;
Answer answer_from_name(std::string_view s);

enum class Split : std::uint8_t { Train, Test, ValidV, ValidC, Twin };
std::string_view split_name(Split s) noexcept;
Split split_from_name(std::string_view s);

struct LabeledExample {
  std::string id;
  Story story;
  Question question;
  Answer answer = Answer::No;
  int n_sentences = 0;
  int n_nouns = 0;
  int support_depth = 0;
  int stratum = 0;
  bool corrupted = false;
  Split split = Split::Train;
  /// Generator-specific metadata (noun groups, synonym distances, ...).
  std::map<std::string, int> tags;

  /// The oracle label, independent of any corruption.
  Answer true_answer() const;
};

/// Location of the person's last movement, if they ever move.
std::optional<std::string> last_location(const Story& story, const std::string& person);

/// yes iff the person's last movement ends at the question location.
/// Throws PersonNotInStory.
Answer oracle_answer(const Story& story, const Question& q);

/// Sentences after the one that settles the answer: the person's last move,
/// or their first mention when they never move.
int support_depth(const Story& story, const Question& q);

struct DatasetBundle {
  std::string task;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<int> train_strata;
  std::vector<int> test_strata;
  /// Majority-class prior over the whole bundle (0.5 for balanced tasks).
  double baseline = 0.5;

  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  std::vector<LabeledExample> valid_v;
  std::vector<LabeledExample> valid_c;
  /// Productivity' twin drawn from the train distribution, when generated.
  std::vector<LabeledExample> twin;

  // Derived subsets, refreshed by refresh_validation_subsets().
  std::vector<LabeledExample> valid_a;
  std::vector<LabeledExample> valid_b;

  void refresh_validation_subsets();
  std::vector<const LabeledExample*> all() const;
};

enum class Scheme : std::uint8_t { V, A, B, C, AB, All };

std::string_view scheme_name(Scheme s) noexcept;
/// Throws UnknownScheme.
Scheme scheme_from_name(std::string_view s);

/// V: train-distribution sample; A: its top-2 train strata; C: test-distribution
/// sample; B: its bottom-2 test strata; AB = A u B; All = V u C.
std::vector<LabeledExample> assign_validation_scheme(const DatasetBundle& bundle, Scheme scheme);

struct ProductivityConfig {
  int train_min_sentences = 2;
  int train_max_sentences = 5;
  int test_min_sentences = 6;
  int test_max_sentences = 10;
  int per_stratum = 60;
  int twin_per_stratum = 20;
  /// 0 means unlimited.
  int max_nouns = 10;
  double valid_fraction = 0.2;
  double move_probability = 0.65;
  double back_probability = 0.25;

  nlohmann::json to_json() const;
  static ProductivityConfig from_json(const nlohmann::json& j);
};

/// Noun groups used to restrict systematicity samples. Indices refer to the
/// fixed vocabulary order; the same layout is used for people and locations.
struct NounGroupLayout {
  std::map<int, std::vector<int>> groups;

  static NounGroupLayout default_layout();
  /// Smallest group containing every index (ties: smaller |id|, positive first).
  int assign(const std::set<int>& members) const;
};

struct SystematicityConfig {
  int min_sentences = 2;
  int max_sentences = 5;
  int per_cell = 24;
  int max_stratum = 3;
  int base_person = 0;
  int base_location = 0;
  int max_nouns = 10;
  double valid_fraction = 0.2;
  double move_probability = 0.65;

  nlohmann::json to_json() const;
  static SystematicityConfig from_json(const nlohmann::json& j);
};

/// (person, location) pairs in the base pairing set.
bool is_base_pair(const SystematicityConfig& cfg, int person, int location);

struct PairProfile {
  int total_pairs = 0;
  int base_pairs = 0;
  int stratum() const { return total_pairs - base_pairs; }
};

/// Distinct movement pairs plus the question pair; object interactions ignored.
PairProfile pair_profile(const SystematicityConfig& cfg, const Story& story, const Question& q);

struct SubstitutivityConfig {
  int n_structures = 100;
  int min_sentences = 2;
  int max_sentences = 6;
  int pool_per_stratum = 200;
  int max_nouns = 10;
  std::vector<int> train_tiers = {0, 1, 2};
  std::vector<int> test_tiers = {3, 4};
  double valid_fraction = 0.2;

  nlohmann::json to_json() const;
  static SubstitutivityConfig from_json(const nlohmann::json& j);
};

/// Canonical form of a story + question: nouns as typed first-use indices,
/// verbs as class ids, sentence order canonicalised over the commutations
/// allowed between sentences with disjoint nouns.
struct StructureGraph {
  std::string canonical;

  friend bool operator==(const StructureGraph&, const StructureGraph&) = default;
  friend auto operator<=>(const StructureGraph&, const StructureGraph&) = default;
};

StructureGraph structure_graph(const Story& story, const Question& q);

struct SynonymDistance {
  int total = 0;
  int movement = 0;
};

/// Verb replacements relative to the class representatives.
SynonymDistance synonym_distance(const Story& story);

DatasetBundle gen_productivity(const ProductivityConfig& cfg, std::uint64_t seed);
DatasetBundle gen_systematicity(const SystematicityConfig& cfg, std::uint64_t seed);
DatasetBundle gen_substitutivity(const SubstitutivityConfig& cfg, std::uint64_t seed);

/// Nested, per-(answer, n_sentences) stratified label corruption of the train split.
std::vector<DatasetBundle> gen_overgeneralisation(const DatasetBundle& base, const std::vector<double>& fractions,
                                                  std::uint64_t seed);

/// Words (nouns, verbs, particles) used by a set of examples.
std::set<std::string> vocabulary_of(const std::vector<LabeledExample>& examples);
std::set<std::string> vocabulary_of(const Story& story);

}  // namespace circqa
