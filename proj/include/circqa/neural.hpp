#pragma once

// Direct-sum semantics: each noun wire carries a slice of R^d, boxes are small
// feed-forward maps on the concatenated slices of their wires, overlap is a
// dot product and discarding drops coordinates.

#include <span>
#include <vector>

#include "circqa/model.hpp"

namespace circqa {

enum class NeuralSchema : std::uint8_t { Linear, Flat, Hidden };
enum class Activation : std::uint8_t { ReLU, Mish };

struct NeuralConfig {
  int dim = 12;
  NeuralSchema schema = NeuralSchema::Flat;
  /// Latent widths of the Hidden schema, in multiples of dim.
  std::vector<int> hidden;
  Activation activation = Activation::Mish;

  nlohmann::json to_json() const;
  static NeuralConfig from_json(const nlohmann::json& j);
};

double activate(Activation a, double x) noexcept;
double activate_derivative(Activation a, double x) noexcept;

/// One dense layer of a box network inside its parameter slot.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  bool bias = false;
  bool activated = false;
  /// Offset of the out x in weight matrix (row-major), bias follows.
  std::size_t offset = 0;
};

std::vector<DenseLayer> box_network(const NeuralConfig& cfg, std::size_t k);
std::size_t box_parameter_count(const NeuralConfig& cfg, std::size_t k);

/// Applies a k-wire box to x (length k*dim). Throws TypeMismatch for the
/// adjoint of a non-linear box.
std::vector<double> apply_box(const NeuralConfig& cfg, std::size_t k, std::span<const double> params,
                              std::span<const double> x, bool adjoint = false);

/// Concatenated per-wire vectors after every layer. Throws MissingParameters.
std::vector<double> evaluate_story_vector(const Diagram& d, const ParameterStore& store, const NeuralConfig& cfg);

/// Throws LengthMismatch.
double comp_overlap(std::span<const double> u, std::span<const double> v);

/// Story coordinates of the (person, location) wires.
std::vector<double> project_wires(std::span<const double> story, std::size_t dim, std::size_t person,
                                  std::size_t location);

class NeuralModel final : public SemanticModel {
 public:
  explicit NeuralModel(NeuralConfig cfg = {}) : cfg_(std::move(cfg)) {}

  const NeuralConfig& neural_config() const noexcept { return cfg_; }

  std::string backend() const override { return "neural"; }
  nlohmann::json config() const override;
  std::size_t parameter_count(const BoxNode& box) const override;
  void initialise(ParameterStore& store, std::uint64_t seed) const override;
  std::vector<double> identity_parameters(const BoxNode& box) const override;
  Overlaps overlaps(const CompiledExample& ex, const ParameterStore& store) const override;
  double loss_and_gradient(const CompiledExample& ex, const ParameterStore& store,
                           std::vector<double>& grad) const override;

 private:
  NeuralConfig cfg_;
};

}  // namespace circqa
