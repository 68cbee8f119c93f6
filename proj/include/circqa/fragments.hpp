#pragma once

// Interpretability tools: small story fragments written in a two-letter
// shorthand, box-to-box overlaps through map-state duality, fragment
// comparisons relative to an assertion, and the confounding-sentence split.

#include <array>
#include <map>
#include <string>
#include <vector>

#include "circqa/kernels.hpp"
#include "circqa/metrics.hpp"
#include "circqa/model.hpp"

namespace circqa {

/// Letters usable in fragment codes: upper case for people, lower case for
/// locations and objects.
struct FragmentCast {
  std::map<char, std::string> nouns;

  /// A=Andrew, C=Clara, p=park, k=kitchen, o=<object>.
  static FragmentCast default_cast(const std::string& object = "milk");
};

/// Verbs used when a code expands to a sentence.
struct VerbChoice {
  std::string movement = "moved";
  /// "picked" and "put" take their particle automatically.
  std::string object = "picked";
};

struct Fragment {
  std::string spec;
  Story story;
  /// Flat diagram: the story's nouns in first-mention order, then any extra
  /// cast nouns as bare noun states.
  Diagram diagram;
};

/// "ID" (no sentences) or dash-separated codes like "Ap-Ck-Ao"; `extra`
/// lists further cast letters whose noun states are added. Throws BadSpec.
Fragment build_fragment(const std::string& spec, const std::string& extra = "",
                        const FragmentCast& cast = FragmentCast::default_cast(), const VerbChoice& verbs = {});

/// The unique stored key for a word, or the exact "word:SHAPE" key.
/// Throws MissingParameters when absent or ambiguous.
BoxKey resolve_box_key(const ParameterStore& store, const std::string& word);

/// Quantum: |Tr(Ui^dag Uj)| / 2^k. Neural: |cosine| of the flattened box
/// parameters. Throws ShapeMismatch.
std::vector<std::vector<double>> box_overlap_matrix(const std::vector<BoxKey>& keys, const SemanticModel& model,
                                                    const ParameterStore& store);

/// 4x4 effect of a fragment on the question wires (quantum only): the
/// question wires are left open, all other nouns are prepared, the fragment
/// is applied and the assertion is measured on the question wires.
std::array<cplx, 16> fragment_effect(const Fragment& f, const Question& q, Answer assertion,
                                     const SemanticModel& model, const ParameterStore& store);

/// Normalised similarity of two fragments relative to an assertion: the
/// Hilbert-Schmidt overlap of their effects (quantum) or |cosine| of the
/// projected story vectors (neural). Throws CastMismatch.
double assertion_relative_overlap(const Fragment& a, const Fragment& b, const Question& q, Answer assertion,
                                  const SemanticModel& model, const ParameterStore& store);

/// Pairwise matrix, rescaled so the largest entry is 1.
std::vector<std::vector<double>> assertion_relative_matrix(const std::vector<Fragment>& fragments, const Question& q,
                                                           Answer assertion, const SemanticModel& model,
                                                           const ParameterStore& store);

/// Sentences mentioning the question location.
int confounding_count(const Story& story, const Question& q);

struct ConfoundingBucket {
  int count = 0;
  Answer answer = Answer::No;
  Tally tally;
};

std::vector<ConfoundingBucket> confounding_split(const std::vector<LabeledExample>& xs, const Predictions& preds);

}  // namespace circqa
