#include "circqa/quantum.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "circqa/error.hpp"

namespace circqa {

nlohmann::json QuantumConfig::to_json() const {
  return {{"backend", "quantum"},
          {"ansatz", "Sim4"},
          {"single_wire", "Euler"},
          {"qubits_per_noun", 1},
          {"layers", layers}};
}

QuantumConfig QuantumConfig::from_json(const nlohmann::json& j) {
  QuantumConfig c;
  c.layers = j.value("layers", c.layers);
  if (c.layers < 1) throw Error(ErrorCode::InfeasibleConfig, "quantum layers must be >= 1");
  if (j.value("qubits_per_noun", 1) != 1) throw Error(ErrorCode::InfeasibleConfig, "only 1 qubit per noun");
  if (j.value("ansatz", std::string("Sim4")) != "Sim4") throw Error(ErrorCode::InfeasibleConfig, "unknown ansatz");
  return c;
}

std::size_t ansatz_parameter_count(std::size_t k, int layers) {
  if (k == 1) return 3;
  return static_cast<std::size_t>(layers) * (3 * k - 1);
}

std::vector<Gate> box_gates(std::size_t k, const std::vector<std::size_t>& wires, std::size_t offset, bool adjoint,
                            int layers) {
  std::vector<Gate> gates;
  if (k == 1) {
    // U = Rz(p0) Rx(p1) Rz(p2)
    gates.push_back({GateKind::Rz, wires[0], 0, offset + 2, 1.0});
    gates.push_back({GateKind::Rx, wires[0], 0, offset + 1, 1.0});
    gates.push_back({GateKind::Rz, wires[0], 0, offset + 0, 1.0});
  } else {
    for (int l = 0; l < layers; ++l) {
      const std::size_t base = offset + static_cast<std::size_t>(l) * (3 * k - 1);
      for (std::size_t i = 0; i < k; ++i) gates.push_back({GateKind::Rx, wires[i], 0, base + i, 1.0});
      for (std::size_t i = 0; i < k; ++i) gates.push_back({GateKind::Rz, wires[i], 0, base + k + i, 1.0});
      for (std::size_t j = 0; j + 1 < k; ++j)
        gates.push_back({GateKind::CRx, wires[j + 1], wires[j], base + 2 * k + j, 1.0});
    }
  }
  if (adjoint) {
    std::reverse(gates.begin(), gates.end());
    for (auto& g : gates) g.sign = -1.0;
  }
  return gates;
}

namespace {

std::array<cplx, 4> rotation(GateKind kind, double angle) {
  const double c = std::cos(angle / 2);
  const double s = std::sin(angle / 2);
  if (kind == GateKind::Rz) return {cplx(c, -s), 0.0, 0.0, cplx(c, s)};
  return {cplx(c, 0), cplx(0, -s), cplx(0, -s), cplx(c, 0)};
}

const std::array<cplx, 4> kHalfX = {0.0, 0.5, 0.5, 0.0};
const std::array<cplx, 4> kHalfZ = {0.5, 0.0, 0.0, -0.5};

}  // namespace

void apply_gate(StateVector& psi, const Gate& g, std::span<const double> params, bool inverse) {
  const double angle = g.sign * params[g.param] * (inverse ? -1.0 : 1.0);
  const auto m = rotation(g.kind, angle);
  const auto& k = kernels();
  if (g.kind == GateKind::CRx) {
    k.apply_c1q(psi.amplitudes.data(), psi.n_qubits, g.control, g.target, m.data());
  } else {
    k.apply_1q(psi.amplitudes.data(), psi.n_qubits, g.target, m.data());
  }
}

std::vector<cplx> box_unitary(std::size_t k, std::span<const double> params, int layers, bool adjoint) {
  if (k == 0) throw Error(ErrorCode::IndexOutOfRange, "box on no wires");
  const std::size_t expected = ansatz_parameter_count(k, layers);
  if (params.size() != expected)
    throw Error(ErrorCode::WrongParamLength,
                "expected " + std::to_string(expected) + " parameters, got " + std::to_string(params.size()));
  std::vector<std::size_t> wires(k);
  for (std::size_t i = 0; i < k; ++i) wires[i] = i;
  const auto gates = box_gates(k, wires, 0, adjoint, layers);
  const std::size_t dim = std::size_t{1} << k;
  std::vector<cplx> u(dim * dim);
  for (std::size_t col = 0; col < dim; ++col) {
    StateVector psi{k, std::vector<cplx>(dim, 0.0)};
    psi.amplitudes[col] = 1.0;
    for (const auto& g : gates) apply_gate(psi, g, params);
    for (std::size_t row = 0; row < dim; ++row) u[row * dim + col] = psi.amplitudes[row];
  }
  return u;
}

double StateVector::norm() const {
  double s = 0.0;
  for (const auto& a : amplitudes) s += std::norm(a);
  return std::sqrt(s);
}

std::vector<Gate> compile_gates(const Diagram& d, const ParameterStore& store, int layers) {
  std::vector<Gate> gates;
  for (const auto& layer : d.layers) {
    const auto* box = std::get_if<BoxNode>(&layer.node);
    if (!box) throw Error(ErrorCode::ContainsFrames, "quantum evaluation needs a flat diagram");
    const auto& slot = store.slot(box_key(*box));
    const std::size_t k = box->shape.size();
    if (slot.length != ansatz_parameter_count(k, layers))
      throw Error(ErrorCode::WrongParamLength, slot.key.str());
    auto g = box_gates(k, layer.wires, slot.offset, box->adjoint, layers);
    gates.insert(gates.end(), g.begin(), g.end());
  }
  return gates;
}

namespace {

StateVector zero_state(std::size_t n) {
  StateVector psi{n, std::vector<cplx>(std::size_t{1} << n, 0.0)};
  psi.amplitudes[0] = 1.0;
  return psi;
}

StateVector run(const std::vector<Gate>& gates, std::size_t n, std::span<const double> params) {
  auto psi = zero_state(n);
  for (const auto& g : gates) apply_gate(psi, g, params);
  return psi;
}

void check_map(const StateVector& psi, std::array<std::size_t, 2> w) {
  if (w[0] == w[1] || w[0] >= psi.n_qubits || w[1] >= psi.n_qubits)
    throw Error(ErrorCode::WireMapInvalid, "wire map must name two distinct story wires");
}

// Calls f(base, idx[4]) for every assignment of the unmapped bits, with idx[i]
// the full index whose mapped bits spell i (bit 0 = w[0], bit 1 = w[1]).
template <typename F>
void for_each_block(std::size_t n, std::array<std::size_t, 2> w, F&& f) {
  const std::size_t b0 = std::size_t{1} << w[0];
  const std::size_t b1 = std::size_t{1} << w[1];
  const std::size_t dim = std::size_t{1} << n;
  for (std::size_t x = 0; x < dim; ++x) {
    if (x & (b0 | b1)) continue;
    const std::array<std::size_t, 4> idx = {x, x | b0, x | b1, x | b0 | b1};
    f(idx);
  }
}

// Accumulates 2 * sign * Im<lambda|G psi> for each gate while walking back.
void backprop(const std::vector<Gate>& gates, StateVector psi, StateVector lambda, std::span<const double> params,
              std::vector<double>& grad) {
  const auto& k = kernels();
  for (auto it = gates.rbegin(); it != gates.rend(); ++it) {
    const Gate& g = *it;
    const auto& gen = g.kind == GateKind::Rz ? kHalfZ : kHalfX;
    const long control = g.kind == GateKind::CRx ? static_cast<long>(g.control) : -1;
    const cplx b = k.braket_1q(lambda.amplitudes.data(), psi.amplitudes.data(), psi.n_qubits, g.target, control,
                               gen.data());
    grad[g.param] += 2.0 * g.sign * b.imag();
    apply_gate(psi, g, params, true);
    apply_gate(lambda, g, params, true);
  }
}

}  // namespace

StateVector evaluate_story(const Diagram& d, const ParameterStore& store, const QuantumConfig& cfg) {
  return run(compile_gates(d, store, cfg.layers), d.wire_count(), store.flat());
}

std::array<cplx, 16> reduced_density(const StateVector& psi, std::array<std::size_t, 2> wires) {
  check_map(psi, wires);
  std::array<cplx, 16> rho{};
  for_each_block(psi.n_qubits, wires, [&](const std::array<std::size_t, 4>& idx) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) rho[i * 4 + j] += psi.amplitudes[idx[i]] * std::conj(psi.amplitudes[idx[j]]);
    }
  });
  return rho;
}

namespace {

double quadratic_form(const std::array<cplx, 16>& rho, const std::vector<cplx>& a) {
  cplx s = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) s += std::conj(a[i]) * rho[i * 4 + j] * a[j];
  }
  return s.real();
}

}  // namespace

double assertion_overlap(const StateVector& story, const StateVector& assertion, std::array<std::size_t, 2> wire_map) {
  if (assertion.n_qubits != 2) throw Error(ErrorCode::WireMapInvalid, "assertion must have exactly two wires");
  return quadratic_form(reduced_density(story, wire_map), assertion.amplitudes);
}

double assertion_overlap(const StateVector& story, const Diagram& assertion, const ParameterStore& store,
                         std::array<std::size_t, 2> wire_map, const QuantumConfig& cfg) {
  return assertion_overlap(story, evaluate_story(assertion, store, cfg), wire_map);
}

nlohmann::json QuantumModel::config() const { return cfg_.to_json(); }

std::size_t QuantumModel::parameter_count(const BoxNode& box) const {
  return ansatz_parameter_count(box.shape.size(), cfg_.layers);
}

void QuantumModel::initialise(ParameterStore& store, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (auto& v : store.flat()) v = angle(rng);
}

std::vector<double> QuantumModel::identity_parameters(const BoxNode& box) const {
  return std::vector<double>(parameter_count(box), 0.0);
}

Overlaps QuantumModel::overlaps(const CompiledExample& ex, const ParameterStore& store) const {
  const auto psi = evaluate_story(ex.story, store, cfg_);
  const auto rho = reduced_density(psi, {ex.person_wire, ex.location_wire});
  const auto yes = evaluate_story(ex.assertions.yes, store, cfg_);
  const auto no = evaluate_story(ex.assertions.no, store, cfg_);
  return {quadratic_form(rho, yes.amplitudes), quadratic_form(rho, no.amplitudes)};
}

double QuantumModel::loss_and_gradient(const CompiledExample& ex, const ParameterStore& store,
                                       std::vector<double>& grad) const {
  if (grad.size() != store.size()) throw Error(ErrorCode::LengthMismatch, "gradient buffer size");
  const auto params = std::span<const double>(store.flat());
  const std::array<std::size_t, 2> wires = {ex.person_wire, ex.location_wire};

  const auto story_gates = compile_gates(ex.story, store, cfg_.layers);
  const auto yes_gates = compile_gates(ex.assertions.yes, store, cfg_.layers);
  const auto no_gates = compile_gates(ex.assertions.no, store, cfg_.layers);
  const auto psi = run(story_gates, ex.story.wire_count(), params);
  const auto a_yes = run(yes_gates, 2, params);
  const auto a_no = run(no_gates, 2, params);
  const auto rho = reduced_density(psi, wires);
  const Overlaps o{quadratic_form(rho, a_yes.amplitudes), quadratic_form(rho, a_no.amplitudes)};
  double g_yes = 0.0;
  double g_no = 0.0;
  const double loss = answer_loss(o, ex.label, g_yes, g_no);

  // story side: lambda = sum_c g_c (|a_c><a_c| (x) I) psi
  StateVector lambda{psi.n_qubits, std::vector<cplx>(psi.amplitudes.size(), 0.0)};
  for_each_block(psi.n_qubits, wires, [&](const std::array<std::size_t, 4>& idx) {
    cplx s_yes = 0.0;
    cplx s_no = 0.0;
    for (int j = 0; j < 4; ++j) {
      s_yes += std::conj(a_yes.amplitudes[j]) * psi.amplitudes[idx[j]];
      s_no += std::conj(a_no.amplitudes[j]) * psi.amplitudes[idx[j]];
    }
    for (int i = 0; i < 4; ++i)
      lambda.amplitudes[idx[i]] = g_yes * a_yes.amplitudes[i] * s_yes + g_no * a_no.amplitudes[i] * s_no;
  });
  backprop(story_gates, psi, std::move(lambda), params, grad);

  // assertion side: lambda_c = g_c rho a_c
  auto assertion_side = [&](const std::vector<Gate>& gates, const StateVector& a, double g) {
    StateVector l{2, std::vector<cplx>(4, 0.0)};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) l.amplitudes[i] += g * rho[i * 4 + j] * a.amplitudes[j];
    }
    backprop(gates, a, std::move(l), params, grad);
  };
  assertion_side(yes_gates, a_yes, g_yes);
  assertion_side(no_gates, a_no, g_no);
  return loss;
}

}  // namespace circqa
