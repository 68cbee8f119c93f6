#include "circqa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <unordered_set>

#include "circqa/error.hpp"

namespace circqa {

std::string_view answer_name(Answer a) noexcept { return a == Answer::Yes ? "yes" : "no"; }

Answer answer_from_name(std::string_view s) {
  if (s == "yes") return Answer::Yes;
  if (s == "no") return Answer::No;
  throw Error(ErrorCode::Format, "bad answer '" + std::string(s) + "'");
}

std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::ValidV: return "valid_v";
    case Split::ValidC: return "valid_c";
    case Split::Twin: return "twin";
  }
  return "";
}

Split split_from_name(std::string_view s) {
  for (auto v : {Split::Train, Split::Test, Split::ValidV, Split::ValidC, Split::Twin}) {
    if (split_name(v) == s) return v;
  }
  throw Error(ErrorCode::Format, "bad split '" + std::string(s) + "'");
}

std::string_view scheme_name(Scheme s) noexcept {
  switch (s) {
    case Scheme::V: return "V";
    case Scheme::A: return "A";
    case Scheme::B: return "B";
    case Scheme::C: return "C";
    case Scheme::AB: return "AB";
    case Scheme::All: return "All";
  }
  return "";
}

Scheme scheme_from_name(std::string_view s) {
  for (auto v : {Scheme::V, Scheme::A, Scheme::B, Scheme::C, Scheme::AB, Scheme::All}) {
    if (scheme_name(v) == s) return v;
  }
  throw Error(ErrorCode::UnknownScheme, "'" + std::string(s) + "'");
}

std::optional<std::string> last_location(const Story& story, const std::string& person) {
  std::optional<std::string> loc;
  for (const auto& s : story.sentences) {
    if (const auto* m = std::get_if<MoveSentence>(&s); m && m->person == person) loc = m->location;
  }
  return loc;
}

Answer oracle_answer(const Story& story, const Question& q) {
  if (!story.mentions(q.person)) throw Error(ErrorCode::PersonNotInStory, "'" + q.person + "'");
  const auto loc = last_location(story, q.person);
  return loc && *loc == q.location ? Answer::Yes : Answer::No;
}

int support_depth(const Story& story, const Question& q) {
  const int n = static_cast<int>(story.sentences.size());
  int last_move = -1;
  int first_mention = -1;
  for (int i = 0; i < n; ++i) {
    const auto& s = story.sentences[static_cast<std::size_t>(i)];
    if (sentence_person(s) != q.person) continue;
    if (first_mention < 0) first_mention = i;
    if (is_move(s)) last_move = i;
  }
  const int support = last_move >= 0 ? last_move : first_mention;
  if (support < 0) throw Error(ErrorCode::PersonNotInStory, "'" + q.person + "'");
  return n - 1 - support;
}

Answer LabeledExample::true_answer() const { return oracle_answer(story, question); }

void DatasetBundle::refresh_validation_subsets() {
  std::vector<int> tr = train_strata;
  std::vector<int> te = test_strata;
  std::sort(tr.begin(), tr.end());
  std::sort(te.begin(), te.end());
  std::set<int> hard(tr.size() > 2 ? tr.end() - 2 : tr.begin(), tr.end());
  std::set<int> easy(te.begin(), te.size() > 2 ? te.begin() + 2 : te.end());
  valid_a.clear();
  valid_b.clear();
  for (const auto& e : valid_v) {
    if (hard.count(e.stratum)) valid_a.push_back(e);
  }
  for (const auto& e : valid_c) {
    if (easy.count(e.stratum)) valid_b.push_back(e);
  }
}

std::vector<const LabeledExample*> DatasetBundle::all() const {
  std::vector<const LabeledExample*> out;
  for (const auto* split : {&train, &test, &valid_v, &valid_c, &twin}) {
    for (const auto& e : *split) out.push_back(&e);
  }
  return out;
}

std::vector<LabeledExample> assign_validation_scheme(const DatasetBundle& bundle, Scheme scheme) {
  std::vector<LabeledExample> out;
  auto add = [&](const std::vector<LabeledExample>& xs) { out.insert(out.end(), xs.begin(), xs.end()); };
  switch (scheme) {
    case Scheme::V: add(bundle.valid_v); break;
    case Scheme::A: add(bundle.valid_a); break;
    case Scheme::B: add(bundle.valid_b); break;
    case Scheme::C: add(bundle.valid_c); break;
    case Scheme::AB:
      add(bundle.valid_a);
      add(bundle.valid_b);
      break;
    case Scheme::All:
      add(bundle.valid_v);
      add(bundle.valid_c);
      break;
  }
  return out;
}

std::set<std::string> vocabulary_of(const Story& story) {
  std::set<std::string> out;
  for (const auto& s : story.sentences) {
    out.insert(sentence_person(s));
    out.insert(sentence_target(s));
    out.insert(sentence_verb(s));
    if (const auto* m = std::get_if<MoveSentence>(&s)) {
      out.insert("to");
      if (m->back) out.insert("back");
    } else if (const auto& p = std::get<ObjectSentence>(s).particle; !p.empty()) {
      out.insert(p);
    }
  }
  return out;
}

std::set<std::string> vocabulary_of(const std::vector<LabeledExample>& examples) {
  std::set<std::string> out;
  for (const auto& e : examples) {
    auto v = vocabulary_of(e.story);
    out.insert(v.begin(), v.end());
    out.insert(e.question.person);
    out.insert(e.question.location);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling helpers

namespace {

using Rng = std::mt19937_64;

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& xs) {
  return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
}

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

std::vector<std::string> to_strings(auto const& arr) { return {arr.begin(), arr.end()}; }

struct Cast {
  std::vector<std::string> people;
  std::vector<std::string> locations;
  std::vector<std::string> objects;
};

std::vector<std::string> sample_subset(Rng& rng, std::vector<std::string> pool, int k) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(std::min<int>(k, static_cast<int>(pool.size()))));
  return pool;
}

Cast sample_cast(Rng& rng, int n_sentences, int max_nouns) {
  const int limit = max_nouns <= 0 ? 20 : max_nouns;
  const int cap_p = std::min(8, n_sentences);
  const int cap_l = std::min(8, n_sentences);
  const int cap_o = std::min(4, n_sentences);
  for (;;) {
    const int kp = std::uniform_int_distribution<int>(1, cap_p)(rng);
    const int kl = std::uniform_int_distribution<int>(1, cap_l)(rng);
    const int ko = std::uniform_int_distribution<int>(0, cap_o)(rng);
    if (kp + kl + ko > limit) continue;
    return Cast{sample_subset(rng, to_strings(vocab::kPeople), kp),
                sample_subset(rng, to_strings(vocab::kLocations), kl),
                sample_subset(rng, to_strings(vocab::kObjects), ko)};
  }
}

const std::vector<std::string>& movement_verbs() {
  static const std::vector<std::string> v = {"moved", "went", "travelled", "journeyed"};
  return v;
}

SentenceAst sample_object_sentence(Rng& rng, const std::string& person, const std::string& object) {
  static const std::vector<std::string> verbs = {"discarded", "dropped", "left", "grabbed",
                                                 "took",      "got",     "picked", "put"};
  const std::string& verb = pick(rng, verbs);
  std::string particle;
  if (verb == "picked") particle = "up";
  if (verb == "put") particle = "down";
  return ObjectSentence{person, object, verb, particle};
}

SentenceAst sample_sentence(Rng& rng, const Cast& cast, double move_p, double back_p) {
  const std::string& person = pick(rng, cast.people);
  if (cast.objects.empty() || coin(rng, move_p)) {
    return MoveSentence{person, pick(rng, cast.locations), pick(rng, movement_verbs()), coin(rng, back_p)};
  }
  return sample_object_sentence(rng, person, pick(rng, cast.objects));
}

Story sample_story(Rng& rng, const Cast& cast, int n, double move_p, double back_p) {
  std::vector<SentenceAst> sentences;
  sentences.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sentences.push_back(sample_sentence(rng, cast, move_p, back_p));
  return Story::from_sentences(std::move(sentences));
}

std::optional<Question> make_question(Rng& rng, const Story& story, Answer want) {
  auto people = story.people();
  std::shuffle(people.begin(), people.end(), rng);
  std::vector<std::string> story_locations;
  for (const auto& n : story.nouns) {
    if (vocab::is_location(n)) story_locations.push_back(n);
  }
  for (const auto& person : people) {
    const auto loc = last_location(story, person);
    if (want == Answer::Yes) {
      if (loc) return Question{person, *loc};
      continue;
    }
    std::vector<std::string> options;
    for (const auto& l : story_locations) {
      if (!loc || l != *loc) options.push_back(l);
    }
    if (options.empty()) {
      for (auto l : vocab::kLocations) {
        if (!loc || l != *loc) options.emplace_back(l);
      }
    }
    return Question{person, pick(rng, options)};
  }
  return std::nullopt;
}

std::string content_key(const Story& story, const Question& q) { return render_story_text(story, q); }

LabeledExample make_example(const Story& story, const Question& q, int stratum) {
  LabeledExample e;
  e.story = story;
  e.question = q;
  e.answer = oracle_answer(story, q);
  e.n_sentences = static_cast<int>(story.sentences.size());
  e.n_nouns = static_cast<int>(story.nouns.size());
  e.support_depth = support_depth(story, q);
  e.stratum = stratum;
  return e;
}

bool covered(const Story& story, const Question& q, const std::set<std::string>& vocab) {
  for (const auto& w : vocabulary_of(story)) {
    if (!vocab.count(w)) return false;
  }
  return vocab.count(q.person) && vocab.count(q.location);
}

// Splits one stratum's examples into (kept, reserved) with round(fraction * n) reserved.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> reserve_fraction(
    Rng& rng, std::vector<LabeledExample> xs, double fraction) {
  std::shuffle(xs.begin(), xs.end(), rng);
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(xs.size())));
  std::vector<LabeledExample> reserved(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<LabeledExample> kept(xs.begin() + static_cast<std::ptrdiff_t>(k), xs.end());
  return {std::move(kept), std::move(reserved)};
}

void assign_ids(DatasetBundle& b, const std::string& prefix) {
  std::size_t counter = 0;
  auto tag = [&](std::vector<LabeledExample>& xs, Split split) {
    for (auto& e : xs) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%06zu", counter++);
      e.id = prefix + buf;
      e.split = split;
    }
  };
  tag(b.train, Split::Train);
  tag(b.valid_v, Split::ValidV);
  tag(b.test, Split::Test);
  tag(b.valid_c, Split::ValidC);
  tag(b.twin, Split::Twin);
}

void finish_bundle(DatasetBundle& b) {
  std::size_t yes = 0;
  std::size_t total = 0;
  for (const auto* e : b.all()) {
    if (e->split == Split::Twin) continue;
    ++total;
    if (e->answer == Answer::Yes) ++yes;
  }
  if (total > 0) {
    const double p = static_cast<double>(yes) / static_cast<double>(total);
    b.baseline = std::max(p, 1.0 - p);
  }
  b.refresh_validation_subsets();
}

/// Fills one productivity stratum with exactly `count` examples balanced by
/// answer and capped per support depth.
std::vector<LabeledExample> fill_stratum(Rng& rng, const ProductivityConfig& cfg, int n, int count,
                                         std::unordered_set<std::string>& seen,
                                         const std::set<std::string>* closure) {
  std::vector<LabeledExample> out;
  int need[2] = {count / 2, count - count / 2};  // index by Answer
  std::vector<int> cap(2);
  for (int a = 0; a < 2; ++a) cap[a] = std::max(1, static_cast<int>(std::ceil(2.0 * need[a] / n)));
  std::vector<std::vector<int>> per_depth(2, std::vector<int>(static_cast<std::size_t>(n), 0));

  const long budget = 4000L * std::max(count, 1) + 20000L;
  for (long attempt = 0; attempt < budget && (need[0] > 0 || need[1] > 0); ++attempt) {
    const bool relaxed = attempt > budget / 2;
    Answer want;
    if (need[0] > 0 && need[1] > 0) {
      want = coin(rng, 0.5) ? Answer::Yes : Answer::No;
    } else {
      want = need[1] > 0 ? Answer::Yes : Answer::No;
    }
    const Cast cast = sample_cast(rng, n, cfg.max_nouns);
    Story story = sample_story(rng, cast, n, cfg.move_probability, cfg.back_probability);
    if (cfg.max_nouns > 0 && static_cast<int>(story.nouns.size()) > cfg.max_nouns) continue;
    auto q = make_question(rng, story, want);
    if (!q) continue;
    if (cfg.max_nouns > 0 && !story.mentions(q->location) &&
        static_cast<int>(story.nouns.size()) + 1 > cfg.max_nouns)
      continue;
    if (closure && !covered(story, *q, *closure)) continue;
    const int a = static_cast<int>(want);
    const int depth = support_depth(story, *q);
    if (!relaxed && per_depth[static_cast<std::size_t>(a)][static_cast<std::size_t>(depth)] >= cap[a]) continue;
    auto key = content_key(story, *q);
    if (!seen.insert(key).second) continue;
    ++per_depth[static_cast<std::size_t>(a)][static_cast<std::size_t>(depth)];
    --need[a];
    out.push_back(make_example(story, *q, n));
  }
  if (need[0] > 0 || need[1] > 0)
    throw Error(ErrorCode::InfeasibleConfig,
                "could not fill productivity stratum " + std::to_string(n) + " with " + std::to_string(count));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Productivity

nlohmann::json ProductivityConfig::to_json() const {
  return {{"train_min_sentences", train_min_sentences},
          {"train_max_sentences", train_max_sentences},
          {"test_min_sentences", test_min_sentences},
          {"test_max_sentences", test_max_sentences},
          {"per_stratum", per_stratum},
          {"twin_per_stratum", twin_per_stratum},
          {"max_nouns", max_nouns},
          {"valid_fraction", valid_fraction},
          {"move_probability", move_probability},
          {"back_probability", back_probability}};
}

ProductivityConfig ProductivityConfig::from_json(const nlohmann::json& j) {
  ProductivityConfig c;
  c.train_min_sentences = j.value("train_min_sentences", c.train_min_sentences);
  c.train_max_sentences = j.value("train_max_sentences", c.train_max_sentences);
  c.test_min_sentences = j.value("test_min_sentences", c.test_min_sentences);
  c.test_max_sentences = j.value("test_max_sentences", c.test_max_sentences);
  c.per_stratum = j.value("per_stratum", c.per_stratum);
  c.twin_per_stratum = j.value("twin_per_stratum", c.twin_per_stratum);
  c.max_nouns = j.value("max_nouns", c.max_nouns);
  c.valid_fraction = j.value("valid_fraction", c.valid_fraction);
  c.move_probability = j.value("move_probability", c.move_probability);
  c.back_probability = j.value("back_probability", c.back_probability);
  return c;
}

DatasetBundle gen_productivity(const ProductivityConfig& cfg, std::uint64_t seed) {
  if (cfg.train_min_sentences < 1 || cfg.train_max_sentences < cfg.train_min_sentences ||
      cfg.test_max_sentences < cfg.test_min_sentences)
    throw Error(ErrorCode::InfeasibleConfig, "bad productivity depth ranges");
  if (cfg.per_stratum < 2) throw Error(ErrorCode::InfeasibleConfig, "per_stratum < 2 cannot balance answers");
  if (cfg.test_min_sentences <= cfg.train_max_sentences)
    throw Error(ErrorCode::InfeasibleConfig, "test strata must be strictly deeper than train strata");
  if (cfg.max_nouns > 0 && cfg.max_nouns < 2) throw Error(ErrorCode::InfeasibleConfig, "max_nouns < 2");

  Rng rng(seed);
  DatasetBundle b;
  b.task = "productivity";
  b.seed = seed;
  b.config = cfg.to_json();
  std::unordered_set<std::string> seen;

  for (int n = cfg.train_min_sentences; n <= cfg.train_max_sentences; ++n) {
    b.train_strata.push_back(n);
    auto xs = fill_stratum(rng, cfg, n, cfg.per_stratum, seen, nullptr);
    auto [kept, reserved] = reserve_fraction(rng, std::move(xs), cfg.valid_fraction);
    b.train.insert(b.train.end(), kept.begin(), kept.end());
    b.valid_v.insert(b.valid_v.end(), reserved.begin(), reserved.end());
  }
  const auto closure = vocabulary_of(b.train);
  for (int n = cfg.test_min_sentences; n <= cfg.test_max_sentences; ++n) {
    b.test_strata.push_back(n);
    auto xs = fill_stratum(rng, cfg, n, cfg.per_stratum, seen, &closure);
    auto [kept, reserved] = reserve_fraction(rng, std::move(xs), cfg.valid_fraction);
    b.test.insert(b.test.end(), kept.begin(), kept.end());
    b.valid_c.insert(b.valid_c.end(), reserved.begin(), reserved.end());
  }
  if (cfg.twin_per_stratum > 0) {
    Rng twin_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (int n = cfg.train_min_sentences; n <= cfg.train_max_sentences; ++n) {
      auto xs = fill_stratum(twin_rng, cfg, n, cfg.twin_per_stratum, seen, nullptr);
      b.twin.insert(b.twin.end(), xs.begin(), xs.end());
    }
  }
  assign_ids(b, "prod-");
  finish_bundle(b);
  return b;
}

// ---------------------------------------------------------------------------
// Systematicity

NounGroupLayout NounGroupLayout::default_layout() {
  NounGroupLayout l;
  l.groups = {
      {0, {0, 1, 2, 3, 4, 5, 6, 7}},
      {1, {0}},
      {2, {0, 3, 4, 5}},
      {-2, {1, 2, 6, 7}},
      {3, {1, 2}},
      {4, {1, 2, 3, 4}},
      {-4, {0, 5, 6, 7}},
  };
  return l;
}

int NounGroupLayout::assign(const std::set<int>& members) const {
  int best = 0;
  std::size_t best_size = SIZE_MAX;
  for (const auto& [id, group] : groups) {
    const bool contains = std::all_of(members.begin(), members.end(), [&](int m) {
      return std::find(group.begin(), group.end(), m) != group.end();
    });
    if (!contains) continue;
    const auto better = [&] {
      if (group.size() != best_size) return group.size() < best_size;
      if (std::abs(id) != std::abs(best)) return std::abs(id) < std::abs(best);
      return id > best;
    };
    if (better()) {
      best = id;
      best_size = group.size();
    }
  }
  return best;
}

nlohmann::json SystematicityConfig::to_json() const {
  return {{"min_sentences", min_sentences}, {"max_sentences", max_sentences},
          {"per_cell", per_cell},           {"max_stratum", max_stratum},
          {"base_person", base_person},     {"base_location", base_location},
          {"max_nouns", max_nouns},         {"valid_fraction", valid_fraction},
          {"move_probability", move_probability}};
}

SystematicityConfig SystematicityConfig::from_json(const nlohmann::json& j) {
  SystematicityConfig c;
  c.min_sentences = j.value("min_sentences", c.min_sentences);
  c.max_sentences = j.value("max_sentences", c.max_sentences);
  c.per_cell = j.value("per_cell", c.per_cell);
  c.max_stratum = j.value("max_stratum", c.max_stratum);
  c.base_person = j.value("base_person", c.base_person);
  c.base_location = j.value("base_location", c.base_location);
  c.max_nouns = j.value("max_nouns", c.max_nouns);
  c.valid_fraction = j.value("valid_fraction", c.valid_fraction);
  c.move_probability = j.value("move_probability", c.move_probability);
  return c;
}

bool is_base_pair(const SystematicityConfig& cfg, int person, int location) {
  return person == cfg.base_person || location == cfg.base_location;
}

PairProfile pair_profile(const SystematicityConfig& cfg, const Story& story, const Question& q) {
  std::set<std::pair<int, int>> pairs;
  for (const auto& s : story.sentences) {
    if (const auto* m = std::get_if<MoveSentence>(&s))
      pairs.emplace(vocab::person_index(m->person), vocab::location_index(m->location));
  }
  pairs.emplace(vocab::person_index(q.person), vocab::location_index(q.location));
  PairProfile p;
  p.total_pairs = static_cast<int>(pairs.size());
  for (const auto& [person, loc] : pairs) {
    if (is_base_pair(cfg, person, loc)) ++p.base_pairs;
  }
  return p;
}

namespace {

Story sample_systematic_story(Rng& rng, const SystematicityConfig& cfg, const NounGroupLayout& layout, int n) {
  static const std::vector<double> base_rates = {1.0, 0.75, 0.5, 0.25, 0.0};
  const double p_base = pick(rng, base_rates);
  std::vector<int> ids;
  for (const auto& [id, _] : layout.groups) ids.push_back(id);
  const auto& person_group = layout.groups.at(pick(rng, ids));
  const auto& location_group = layout.groups.at(pick(rng, ids));
  const auto people = to_strings(vocab::kPeople);
  const auto locations = to_strings(vocab::kLocations);
  const auto objects = to_strings(vocab::kObjects);

  std::vector<SentenceAst> sentences;
  std::vector<std::string> movers;
  for (int i = 0; i < n; ++i) {
    if (!movers.empty() && !coin(rng, cfg.move_probability)) {
      sentences.push_back(sample_object_sentence(rng, pick(rng, movers), pick(rng, objects)));
      continue;
    }
    std::string person;
    std::string location;
    if (coin(rng, p_base)) {
      if (coin(rng, 0.5)) {
        person = people[static_cast<std::size_t>(cfg.base_person)];
        location = locations[static_cast<std::size_t>(pick(rng, location_group))];
      } else {
        person = people[static_cast<std::size_t>(pick(rng, person_group))];
        location = locations[static_cast<std::size_t>(cfg.base_location)];
      }
    } else {
      person = people[static_cast<std::size_t>(pick(rng, person_group))];
      location = locations[static_cast<std::size_t>(pick(rng, location_group))];
    }
    movers.push_back(person);
    sentences.push_back(MoveSentence{person, location, pick(rng, movement_verbs()), coin(rng, 0.25)});
  }
  return Story::from_sentences(std::move(sentences));
}

}  // namespace

DatasetBundle gen_systematicity(const SystematicityConfig& cfg, std::uint64_t seed) {
  if (cfg.min_sentences < 1 || cfg.max_sentences < cfg.min_sentences || cfg.per_cell < 2 || cfg.max_stratum < 1)
    throw Error(ErrorCode::InfeasibleConfig, "bad systematicity config");
  if (cfg.base_person < 0 || cfg.base_person >= 8 || cfg.base_location < 0 || cfg.base_location >= 8)
    throw Error(ErrorCode::InfeasibleConfig, "base noun index out of range");

  Rng rng(seed);
  const auto layout = NounGroupLayout::default_layout();
  const int n_depths = cfg.max_sentences - cfg.min_sentences + 1;
  const int n_strata = cfg.max_stratum + 1;
  // need[depth][stratum][answer]
  std::vector<int> need(static_cast<std::size_t>(n_depths * n_strata * 2));
  auto cell = [&](int depth, int stratum, int answer) -> int& {
    return need[static_cast<std::size_t>(((depth - cfg.min_sentences) * n_strata + stratum) * 2 + answer)];
  };
  for (int d = cfg.min_sentences; d <= cfg.max_sentences; ++d) {
    for (int s = 0; s < n_strata; ++s) {
      cell(d, s, 0) = cfg.per_cell / 2;
      cell(d, s, 1) = cfg.per_cell - cfg.per_cell / 2;
    }
  }

  std::unordered_set<std::string> seen;
  std::vector<LabeledExample> accepted;
  const long budget = 3000L * static_cast<long>(need.size()) * cfg.per_cell;
  for (long attempt = 0; attempt < budget; ++attempt) {
    // Once the budget is half spent, unfillable yes quotas become no quotas:
    // more systematic coverage is preferred over an exact class balance.
    if (attempt == budget / 2) {
      for (int d = cfg.min_sentences; d <= cfg.max_sentences; ++d) {
        for (int s = 0; s < n_strata; ++s) {
          cell(d, s, 0) += cell(d, s, 1);
          cell(d, s, 1) = 0;
        }
      }
    }
    if (std::all_of(need.begin(), need.end(), [](int v) { return v == 0; })) break;
    const int n = std::uniform_int_distribution<int>(cfg.min_sentences, cfg.max_sentences)(rng);
    Story story = sample_systematic_story(rng, cfg, layout, n);
    if (cfg.max_nouns > 0 && static_cast<int>(story.nouns.size()) > cfg.max_nouns) continue;
    const Answer want = coin(rng, 0.5) ? Answer::Yes : Answer::No;
    auto q = make_question(rng, story, want);
    if (!q) continue;
    const int stratum = pair_profile(cfg, story, *q).stratum();
    if (stratum > cfg.max_stratum) continue;
    int& quota = cell(n, stratum, static_cast<int>(want));
    if (quota == 0) continue;
    if (!seen.insert(content_key(story, *q)).second) continue;
    --quota;
    LabeledExample e = make_example(story, *q, stratum);
    const auto profile = pair_profile(cfg, story, *q);
    e.tags["total_pairs"] = profile.total_pairs;
    e.tags["base_pairs"] = profile.base_pairs;
    std::set<int> ps;
    std::set<int> ls;
    for (const auto& s : story.sentences) {
      if (const auto* m = std::get_if<MoveSentence>(&s)) {
        ps.insert(vocab::person_index(m->person));
        ls.insert(vocab::location_index(m->location));
      }
    }
    ps.insert(vocab::person_index(q->person));
    ls.insert(vocab::location_index(q->location));
    e.tags["person_group"] = layout.assign(ps);
    e.tags["location_group"] = layout.assign(ls);
    accepted.push_back(std::move(e));
  }

  DatasetBundle b;
  b.task = "systematicity";
  b.seed = seed;
  b.config = cfg.to_json();
  b.train_strata = {0};
  for (int s = 1; s <= cfg.max_stratum; ++s) b.test_strata.push_back(s);

  std::map<int, std::vector<LabeledExample>> by_stratum;
  for (auto& e : accepted) by_stratum[e.stratum].push_back(std::move(e));
  for (auto& [stratum, xs] : by_stratum) {
    auto [kept, reserved] = reserve_fraction(rng, std::move(xs), cfg.valid_fraction);
    if (stratum == 0) {
      b.train.insert(b.train.end(), kept.begin(), kept.end());
      b.valid_v.insert(b.valid_v.end(), reserved.begin(), reserved.end());
    } else {
      b.test.insert(b.test.end(), kept.begin(), kept.end());
      b.valid_c.insert(b.valid_c.end(), reserved.begin(), reserved.end());
    }
  }
  // test examples must stay inside the compositional closure of train
  const auto closure = vocabulary_of(b.train);
  auto outside = [&](const LabeledExample& e) { return !covered(e.story, e.question, closure); };
  std::erase_if(b.test, outside);
  std::erase_if(b.valid_c, outside);
  if (b.train.empty() || b.test.empty())
    throw Error(ErrorCode::InfeasibleConfig, "systematicity generation produced an empty split");
  assign_ids(b, "syst-");
  finish_bundle(b);
  return b;
}

// ---------------------------------------------------------------------------
// Substitutivity

nlohmann::json SubstitutivityConfig::to_json() const {
  return {{"n_structures", n_structures}, {"min_sentences", min_sentences},
          {"max_sentences", max_sentences}, {"pool_per_stratum", pool_per_stratum},
          {"max_nouns", max_nouns},       {"train_tiers", train_tiers},
          {"test_tiers", test_tiers},     {"valid_fraction", valid_fraction}};
}

SubstitutivityConfig SubstitutivityConfig::from_json(const nlohmann::json& j) {
  SubstitutivityConfig c;
  c.n_structures = j.value("n_structures", c.n_structures);
  c.min_sentences = j.value("min_sentences", c.min_sentences);
  c.max_sentences = j.value("max_sentences", c.max_sentences);
  c.pool_per_stratum = j.value("pool_per_stratum", c.pool_per_stratum);
  c.max_nouns = j.value("max_nouns", c.max_nouns);
  c.train_tiers = j.value("train_tiers", c.train_tiers);
  c.test_tiers = j.value("test_tiers", c.test_tiers);
  c.valid_fraction = j.value("valid_fraction", c.valid_fraction);
  return c;
}

namespace {

std::string& verb_of(SentenceAst& s) {
  return std::visit([](auto& v) -> std::string& { return v.verb; }, s);
}

bool replaceable(const SentenceAst& s) {
  return vocab::class_members(*vocab::verb_class(sentence_verb(s))).size() > 1;
}

Story with_representatives(const Story& story) {
  auto sentences = story.sentences;
  for (auto& s : sentences) verb_of(s) = std::string(vocab::class_representative(*vocab::verb_class(verb_of(s))));
  return Story::from_sentences(std::move(sentences));
}

Story with_replacements(Rng& rng, const Story& base, int count) {
  auto sentences = base.sentences;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (replaceable(sentences[i])) slots.push_back(i);
  }
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(static_cast<std::size_t>(count));
  for (auto i : slots) {
    const auto cls = *vocab::verb_class(verb_of(sentences[i]));
    std::vector<std::string> others;
    for (auto m : vocab::class_members(cls)) {
      if (m != vocab::class_representative(cls)) others.emplace_back(m);
    }
    verb_of(sentences[i]) = pick(rng, others);
  }
  return Story::from_sentences(std::move(sentences));
}

// Distinct non-base variants reachable by synonym replacement.
std::size_t variant_space(const Story& base) {
  std::size_t n = 1;
  for (const auto& s : base.sentences) {
    n *= vocab::class_members(*vocab::verb_class(sentence_verb(s))).size();
    if (n > 64) return 64;
  }
  return n - 1;
}

// A variant with about `count` replacements whose text is not in `used`.
// Falls back to nearby counts and finally to exhaustive enumeration.
std::optional<Story> fresh_variant(Rng& rng, const Story& base, int count, int slots,
                                   const std::set<std::string>& used) {
  auto key = [](const Story& st) {
    std::string k;
    for (const auto& x : st.sentences) k += render_sentence(x);
    return k;
  };
  for (int delta = 0; delta < slots; ++delta) {
    for (int c : {count - delta, count + delta}) {
      if (c < 1 || c > slots) continue;
      for (int attempt = 0; attempt < 20; ++attempt) {
        Story st = with_replacements(rng, base, c);
        if (!used.count(key(st))) return st;
      }
    }
  }
  std::vector<std::size_t> slot_idx;
  for (std::size_t i = 0; i < base.sentences.size(); ++i) {
    if (replaceable(base.sentences[i])) slot_idx.push_back(i);
  }
  std::vector<std::size_t> digit(slot_idx.size(), 0);
  while (true) {
    std::size_t i = 0;
    for (; i < digit.size(); ++i) {
      const auto cls = *vocab::verb_class(sentence_verb(base.sentences[slot_idx[i]]));
      if (++digit[i] < vocab::class_members(cls).size()) break;
      digit[i] = 0;
    }
    if (i == digit.size()) return std::nullopt;
    auto sentences = base.sentences;
    for (std::size_t j = 0; j < digit.size(); ++j) {
      const auto cls = *vocab::verb_class(sentence_verb(base.sentences[slot_idx[j]]));
      verb_of(sentences[slot_idx[j]]) = std::string(vocab::class_members(cls)[digit[j]]);
    }
    Story st = Story::from_sentences(std::move(sentences));
    if (!used.count(key(st))) return st;
  }
}

}  // namespace

DatasetBundle gen_substitutivity(const SubstitutivityConfig& cfg, std::uint64_t seed) {
  if (cfg.n_structures < 1 || cfg.max_sentences < cfg.min_sentences || cfg.min_sentences < 1)
    throw Error(ErrorCode::InfeasibleConfig, "bad substitutivity config");
  Rng rng(seed);

  // Base pool drawn like productivity data, without support-depth quotas.
  ProductivityConfig pool_cfg;
  pool_cfg.max_nouns = cfg.max_nouns;
  std::unordered_set<std::string> seen;
  std::map<std::pair<int, int>, std::vector<std::pair<Story, Question>>> cells;  // (n, answer)
  std::set<StructureGraph> structures;
  for (int n = cfg.min_sentences; n <= cfg.max_sentences; ++n) {
    for (auto& e : fill_stratum(rng, pool_cfg, n, cfg.pool_per_stratum, seen, nullptr)) {
      Story base = with_representatives(e.story);
      if (variant_space(base) < 4) continue;
      if (!structures.insert(structure_graph(base, e.question)).second) continue;
      cells[{n, static_cast<int>(e.answer)}].emplace_back(std::move(base), e.question);
    }
  }
  if (static_cast<int>(structures.size()) < cfg.n_structures)
    throw Error(ErrorCode::NotEnoughStructures, std::to_string(structures.size()) + " unique structures, " +
                                                    std::to_string(cfg.n_structures) + " requested");

  // round-robin over (n, answer) cells keeps the sample balanced
  std::vector<std::pair<Story, Question>> chosen;
  for (auto& [_, xs] : cells) std::shuffle(xs.begin(), xs.end(), rng);
  std::map<std::pair<int, int>, std::size_t> cursor;
  while (static_cast<int>(chosen.size()) < cfg.n_structures) {
    for (auto& [key, xs] : cells) {
      if (static_cast<int>(chosen.size()) >= cfg.n_structures) break;
      auto& c = cursor[key];
      if (c < xs.size()) chosen.push_back(xs[c++]);
    }
  }

  std::vector<LabeledExample> all;
  for (std::size_t s = 0; s < chosen.size(); ++s) {
    const auto& [base, q] = chosen[s];
    const int slots = static_cast<int>(std::count_if(base.sentences.begin(), base.sentences.end(), replaceable));
    std::set<std::string> used;
    for (int v = 0; v <= 4; ++v) {
      const int count = v == 0 ? 0 : std::clamp((v * slots + 3) / 4, 1, slots);
      Story story = v == 0 ? base : *fresh_variant(rng, base, count, slots, used);
      std::string k;
      for (const auto& x : story.sentences) k += render_sentence(x);
      used.insert(k);
      LabeledExample e = make_example(story, q, 0);
      const auto dist = synonym_distance(story);
      e.tags["structure"] = static_cast<int>(s);
      e.tags["variant"] = v;
      e.tags["replacements"] = dist.total;
      e.tags["movement_replacements"] = dist.movement;
      all.push_back(std::move(e));
    }
  }

  // Tier 0 is the base; the rest are ranked by (movement, total) replacements
  // and cut into four quantile bins, ties kept together.
  std::vector<std::pair<int, int>> keys;
  for (const auto& e : all) {
    if (e.tags.at("variant") != 0) keys.emplace_back(e.tags.at("movement_replacements"), e.tags.at("replacements"));
  }
  std::sort(keys.begin(), keys.end());
  for (auto& e : all) {
    if (e.tags.at("variant") == 0) {
      e.stratum = 0;
      continue;
    }
    const std::pair<int, int> key{e.tags.at("movement_replacements"), e.tags.at("replacements")};
    const auto rank = static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), key) - keys.begin());
    e.stratum = 1 + static_cast<int>(4 * rank / keys.size());
  }

  DatasetBundle b;
  b.task = "substitutivity";
  b.seed = seed;
  b.config = cfg.to_json();
  b.train_strata = cfg.train_tiers;
  b.test_strata = cfg.test_tiers;
  std::map<int, std::vector<LabeledExample>> by_stratum;
  for (auto& e : all) by_stratum[e.stratum].push_back(std::move(e));
  auto in = [](const std::vector<int>& xs, int v) { return std::find(xs.begin(), xs.end(), v) != xs.end(); };
  for (auto& [stratum, xs] : by_stratum) {
    auto [kept, reserved] = reserve_fraction(rng, std::move(xs), cfg.valid_fraction);
    if (in(cfg.train_tiers, stratum)) {
      b.train.insert(b.train.end(), kept.begin(), kept.end());
      b.valid_v.insert(b.valid_v.end(), reserved.begin(), reserved.end());
    } else if (in(cfg.test_tiers, stratum)) {
      b.test.insert(b.test.end(), kept.begin(), kept.end());
      b.valid_c.insert(b.valid_c.end(), reserved.begin(), reserved.end());
    }
  }
  assign_ids(b, "subs-");
  finish_bundle(b);
  return b;
}

// ---------------------------------------------------------------------------
// Overgeneralisation

std::vector<DatasetBundle> gen_overgeneralisation(const DatasetBundle& base, const std::vector<double>& fractions,
                                                  std::uint64_t seed) {
  Rng rng(seed);
  // One permutation per (answer, n_sentences) cell; every fraction corrupts a
  // prefix of it, which makes the corrupted sets nested.
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < base.train.size(); ++i) {
    const auto& e = base.train[i];
    cells[{static_cast<int>(e.true_answer()), e.n_sentences}].push_back(i);
  }
  for (auto& [_, idx] : cells) std::shuffle(idx.begin(), idx.end(), rng);

  std::vector<DatasetBundle> out;
  for (double f : fractions) {
    if (f < 0.0 || f > 1.0) throw Error(ErrorCode::InfeasibleConfig, "corruption fraction outside [0,1]");
    DatasetBundle b = base;
    b.task = base.task + "-overgen";
    b.config["corruption_fraction"] = f;
    b.config["corruption_seed"] = seed;
    for (const auto& [_, idx] : cells) {
      const auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(idx.size())));
      for (std::size_t j = 0; j < k; ++j) {
        auto& e = b.train[idx[j]];
        e.corrupted = true;
        e.answer = negate(e.true_answer());
      }
    }
    b.refresh_validation_subsets();
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace circqa
