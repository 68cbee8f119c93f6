#pragma once

// Statevector semantics: one qubit per noun wire (wire i is bit i of the
// amplitude index), Euler rotations for single-wire boxes and noun states,
// stacked Sim4 layers for multi-wire boxes.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "circqa/kernels.hpp"
#include "circqa/model.hpp"

namespace circqa {

struct QuantumConfig {
  int layers = 3;

  nlohmann::json to_json() const;
  static QuantumConfig from_json(const nlohmann::json& j);
};

enum class GateKind : std::uint8_t { Rx, Rz, CRx };

/// A rotation by sign * theta, theta = params[param].
struct Gate {
  GateKind kind = GateKind::Rx;
  std::size_t target = 0;
  std::size_t control = 0;
  std::size_t param = 0;
  double sign = 1.0;
};

/// 3 for single-wire boxes and noun states, layers * (3k - 1) otherwise.
std::size_t ansatz_parameter_count(std::size_t k, int layers);

/// Gates of one box placed on `wires`, in application order, with parameter
/// indices starting at `offset`.
std::vector<Gate> box_gates(std::size_t k, const std::vector<std::size_t>& wires, std::size_t offset, bool adjoint,
                            int layers);

/// Row-major 2^k x 2^k matrix; local wire i is bit i. Throws WrongParamLength.
std::vector<cplx> box_unitary(std::size_t k, std::span<const double> params, int layers, bool adjoint = false);

struct StateVector {
  std::size_t n_qubits = 0;
  std::vector<cplx> amplitudes;

  double norm() const;
};

/// Gate list for a whole flat diagram. Throws MissingParameters, ContainsFrames.
std::vector<Gate> compile_gates(const Diagram& d, const ParameterStore& store, int layers);

void apply_gate(StateVector& psi, const Gate& g, std::span<const double> params, bool inverse = false);

StateVector evaluate_story(const Diagram& d, const ParameterStore& store, const QuantumConfig& cfg = {});

/// 4x4 reduced density matrix on (wires[0], wires[1]), row-major; index
/// bit 0 is wires[0]. Throws WireMapInvalid.
std::array<cplx, 16> reduced_density(const StateVector& psi, std::array<std::size_t, 2> wires);

/// <a|rho|a> where a is a 2-qubit assertion state and rho the story state
/// reduced onto the mapped wires. Throws WireMapInvalid.
double assertion_overlap(const StateVector& story, const StateVector& assertion, std::array<std::size_t, 2> wire_map);
double assertion_overlap(const StateVector& story, const Diagram& assertion, const ParameterStore& store,
                         std::array<std::size_t, 2> wire_map, const QuantumConfig& cfg = {});

class QuantumModel final : public SemanticModel {
 public:
  explicit QuantumModel(QuantumConfig cfg = {}) : cfg_(cfg) {}

  const QuantumConfig& quantum_config() const noexcept { return cfg_; }

  std::string backend() const override { return "quantum"; }
  nlohmann::json config() const override;
  std::size_t parameter_count(const BoxNode& box) const override;
  void initialise(ParameterStore& store, std::uint64_t seed) const override;
  std::vector<double> identity_parameters(const BoxNode& box) const override;
  Overlaps overlaps(const CompiledExample& ex, const ParameterStore& store) const override;
  double loss_and_gradient(const CompiledExample& ex, const ParameterStore& store,
                           std::vector<double>& grad) const override;

 private:
  QuantumConfig cfg_;
};

}  // namespace circqa
