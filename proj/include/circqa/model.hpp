#pragma once

// Backend-independent view of a semantic model: compiled examples, the
// decision rule, the loss and the parameter store they share.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "circqa/dataset.hpp"
#include "circqa/params.hpp"
#include "json.hpp"

namespace circqa {

/// A story diagram and both assertions, flattened and wired for evaluation.
struct CompiledExample {
  std::string id;
  Diagram story;
  AssertionPair assertions;
  std::size_t person_wire = 0;
  std::size_t location_wire = 0;
  /// The training label (possibly corrupted) and the oracle label.
  Answer label = Answer::No;
  Answer truth = Answer::No;
};

/// A question location the story never mentions gets a fresh wire holding
/// only its noun state. Throws PersonNotInStory.
CompiledExample compile_story(const Story& story, const Question& q);
CompiledExample compile_example(const LabeledExample& e);
std::vector<CompiledExample> compile_examples(const std::vector<LabeledExample>& xs);

struct Overlaps {
  double yes = 0.0;
  double no = 0.0;
};

/// Larger overlap wins; ties go to no.
Answer decide(const Overlaps& o) noexcept;

/// Softmax over the raw overlap pair: (p_yes, p_no).
std::pair<double, double> answer_probabilities(const Overlaps& o) noexcept;

/// Cross-entropy against `gold`; writes dL/d(overlap) for each answer.
double answer_loss(const Overlaps& o, Answer gold, double& d_yes, double& d_no) noexcept;

class SemanticModel {
 public:
  virtual ~SemanticModel() = default;

  virtual std::string backend() const = 0;
  virtual nlohmann::json config() const = 0;
  virtual std::size_t parameter_count(const BoxNode& box) const = 0;
  virtual void initialise(ParameterStore& store, std::uint64_t seed) const = 0;
  /// Parameters making the box act as the identity. Throws BadSpec when the
  /// configuration has no identity point.
  virtual std::vector<double> identity_parameters(const BoxNode& box) const = 0;

  virtual Overlaps overlaps(const CompiledExample& ex, const ParameterStore& store) const = 0;
  /// Adds dL/dtheta for the example's training label into `grad`; returns L.
  virtual double loss_and_gradient(const CompiledExample& ex, const ParameterStore& store,
                                   std::vector<double>& grad) const = 0;

  Answer predict(const CompiledExample& ex, const ParameterStore& store) const {
    return decide(overlaps(ex, store));
  }
  double loss(const CompiledExample& ex, const ParameterStore& store) const;
};

/// Store holding every box of the given diagrams, zero-initialised.
ParameterStore make_store(const SemanticModel& model, const std::vector<const Diagram*>& diagrams);
ParameterStore make_store(const SemanticModel& model, const std::vector<CompiledExample>& examples);

/// Builds a model from its config JSON (the "backend" field selects it).
std::unique_ptr<SemanticModel> make_model(const nlohmann::json& config);

}  // namespace circqa
