#include "circqa/neural.hpp"

#include <cmath>
#include <random>

#include "circqa/error.hpp"
#include "circqa/kernels.hpp"

namespace circqa {

namespace {

std::string schema_name(NeuralSchema s) {
  switch (s) {
    case NeuralSchema::Linear: return "Linear";
    case NeuralSchema::Flat: return "Flat";
    case NeuralSchema::Hidden: return "Hidden";
  }
  return "";
}

}  // namespace

nlohmann::json NeuralConfig::to_json() const {
  return {{"backend", "neural"},
          {"dim", dim},
          {"schema", schema_name(schema)},
          {"hidden", hidden},
          {"activation", activation == Activation::Mish ? "mish" : "relu"}};
}

NeuralConfig NeuralConfig::from_json(const nlohmann::json& j) {
  NeuralConfig c;
  c.dim = j.value("dim", c.dim);
  const auto schema = j.value("schema", std::string("Flat"));
  if (schema == "Linear") {
    c.schema = NeuralSchema::Linear;
  } else if (schema == "Flat") {
    c.schema = NeuralSchema::Flat;
  } else if (schema == "Hidden") {
    c.schema = NeuralSchema::Hidden;
  } else {
    throw Error(ErrorCode::InfeasibleConfig, "unknown neural schema '" + schema + "'");
  }
  c.hidden = j.value("hidden", c.hidden);
  const auto act = j.value("activation", std::string("mish"));
  if (act == "mish") {
    c.activation = Activation::Mish;
  } else if (act == "relu") {
    c.activation = Activation::ReLU;
  } else {
    throw Error(ErrorCode::InfeasibleConfig, "unknown activation '" + act + "'");
  }
  if (c.dim < 1) throw Error(ErrorCode::InfeasibleConfig, "dim must be >= 1");
  if (c.schema == NeuralSchema::Hidden && c.hidden.empty())
    throw Error(ErrorCode::InfeasibleConfig, "Hidden schema needs at least one latent width");
  for (int h : c.hidden) {
    if (h < 1) throw Error(ErrorCode::InfeasibleConfig, "latent widths must be >= 1");
  }
  return c;
}

namespace {

double softplus(double x) noexcept { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double activate(Activation a, double x) noexcept {
  if (a == Activation::ReLU) return x > 0.0 ? x : 0.0;
  return x * std::tanh(softplus(x));
}

double activate_derivative(Activation a, double x) noexcept {
  if (a == Activation::ReLU) return x > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(softplus(x));
  return t + x * (1.0 - t * t) * sigmoid(x);
}

std::vector<DenseLayer> box_network(const NeuralConfig& cfg, std::size_t k) {
  const std::size_t n = k * static_cast<std::size_t>(cfg.dim);
  std::vector<DenseLayer> layers;
  std::size_t offset = 0;
  auto add = [&](std::size_t in, std::size_t out, bool bias, bool act) {
    layers.push_back({in, out, bias, act, offset});
    offset += in * out + (bias ? out : 0);
  };
  switch (cfg.schema) {
    case NeuralSchema::Linear: add(n, n, false, false); break;
    case NeuralSchema::Flat: add(n, n, true, true); break;
    case NeuralSchema::Hidden: {
      std::size_t in = n;
      for (int h : cfg.hidden) {
        const std::size_t out = static_cast<std::size_t>(h * cfg.dim);
        add(in, out, true, true);
        in = out;
      }
      add(in, n, true, true);
      break;
    }
  }
  return layers;
}

std::size_t box_parameter_count(const NeuralConfig& cfg, std::size_t k) {
  const auto layers = box_network(cfg, k);
  const auto& last = layers.back();
  return last.offset + last.in * last.out + (last.bias ? last.out : 0);
}

namespace {

struct Trace {
  std::vector<std::vector<double>> inputs;  // input of each dense layer
  std::vector<std::vector<double>> pre;     // pre-activation of each dense layer
};

std::vector<double> forward(const NeuralConfig& cfg, const std::vector<DenseLayer>& net,
                            std::span<const double> params, std::span<const double> x, Trace* trace) {
  const auto& k = kernels();
  std::vector<double> a(x.begin(), x.end());
  for (const auto& layer : net) {
    std::vector<double> z(layer.out);
    k.matvec(params.data() + layer.offset, a.data(), z.data(), layer.out, layer.in);
    if (layer.bias) {
      const double* b = params.data() + layer.offset + layer.in * layer.out;
      for (std::size_t i = 0; i < layer.out; ++i) z[i] += b[i];
    }
    std::vector<double> y = z;
    if (layer.activated) {
      for (auto& v : y) v = activate(cfg.activation, v);
    }
    if (trace) {
      trace->inputs.push_back(std::move(a));
      trace->pre.push_back(std::move(z));
    }
    a = std::move(y);
  }
  return a;
}

// Returns dL/dx; adds dL/dparams into grad (aligned with params).
std::vector<double> backward(const NeuralConfig& cfg, const std::vector<DenseLayer>& net,
                             std::span<const double> params, const Trace& trace, std::vector<double> g,
                             double* grad) {
  const auto& k = kernels();
  for (std::size_t li = net.size(); li-- > 0;) {
    const auto& layer = net[li];
    if (layer.activated) {
      for (std::size_t i = 0; i < layer.out; ++i) g[i] *= activate_derivative(cfg.activation, trace.pre[li][i]);
    }
    k.outer_acc(grad + layer.offset, g.data(), trace.inputs[li].data(), layer.out, layer.in);
    if (layer.bias) {
      double* gb = grad + layer.offset + layer.in * layer.out;
      for (std::size_t i = 0; i < layer.out; ++i) gb[i] += g[i];
    }
    std::vector<double> gx(layer.in, 0.0);
    k.matvec_t(params.data() + layer.offset, g.data(), gx.data(), layer.out, layer.in);
    g = std::move(gx);
  }
  return g;
}

std::vector<double> transpose(std::span<const double> w, std::size_t n) {
  std::vector<double> t(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) t[c * n + r] = w[r * n + c];
  }
  return t;
}

void check_adjoint(const NeuralConfig& cfg, bool adjoint) {
  if (adjoint && cfg.schema != NeuralSchema::Linear)
    throw Error(ErrorCode::TypeMismatch, "adjoint is only defined for the Linear schema");
}

}  // namespace

std::vector<double> apply_box(const NeuralConfig& cfg, std::size_t k, std::span<const double> params,
                              std::span<const double> x, bool adjoint) {
  check_adjoint(cfg, adjoint);
  const std::size_t n = k * static_cast<std::size_t>(cfg.dim);
  if (x.size() != n) throw Error(ErrorCode::LengthMismatch, "box input length");
  if (params.size() != box_parameter_count(cfg, k)) throw Error(ErrorCode::WrongParamLength, "box parameters");
  const auto net = box_network(cfg, k);
  if (adjoint) {
    const auto t = transpose(params, n);
    return forward(cfg, net, t, x, nullptr);
  }
  return forward(cfg, net, params, x, nullptr);
}

namespace {

struct LayerRecord {
  const ParamSlot* slot = nullptr;
  bool noun_state = false;
  bool adjoint = false;
  std::vector<std::size_t> wires;
  std::vector<double> transposed;  // adjoint Linear weights
  Trace trace;
};

std::vector<double> run_diagram(const Diagram& d, const ParameterStore& store, const NeuralConfig& cfg,
                                std::vector<LayerRecord>* records) {
  const std::size_t dim = static_cast<std::size_t>(cfg.dim);
  std::vector<double> state(d.wire_count() * dim, 0.0);
  for (const auto& layer : d.layers) {
    const auto* box = std::get_if<BoxNode>(&layer.node);
    if (!box) throw Error(ErrorCode::ContainsFrames, "neural evaluation needs a flat diagram");
    const auto& slot = store.slot(box_key(*box));
    const auto params = store.values(slot.key);
    LayerRecord rec;
    rec.slot = &slot;
    rec.wires = layer.wires;
    rec.adjoint = box->adjoint;
    if (box->role == BoxRole::NounState) {
      if (slot.length != dim) throw Error(ErrorCode::WrongParamLength, slot.key.str());
      std::copy(params.begin(), params.end(), state.begin() + static_cast<std::ptrdiff_t>(layer.wires[0] * dim));
      rec.noun_state = true;
    } else {
      const std::size_t k = layer.wires.size();
      if (slot.length != box_parameter_count(cfg, k)) throw Error(ErrorCode::WrongParamLength, slot.key.str());
      check_adjoint(cfg, box->adjoint);
      std::vector<double> x;
      x.reserve(k * dim);
      for (auto w : layer.wires) x.insert(x.end(), state.begin() + w * dim, state.begin() + (w + 1) * dim);
      const auto net = box_network(cfg, k);
      std::vector<double> y;
      if (box->adjoint) {
        rec.transposed = transpose(params, k * dim);
        y = forward(cfg, net, rec.transposed, x, records ? &rec.trace : nullptr);
      } else {
        y = forward(cfg, net, params, x, records ? &rec.trace : nullptr);
      }
      for (std::size_t i = 0; i < k; ++i)
        std::copy(y.begin() + i * dim, y.begin() + (i + 1) * dim, state.begin() + layer.wires[i] * dim);
    }
    if (records) records->push_back(std::move(rec));
  }
  return state;
}

void backprop_diagram(const std::vector<LayerRecord>& records, const ParameterStore& store, const NeuralConfig& cfg,
                      std::vector<double> g, std::vector<double>& grad) {
  const std::size_t dim = static_cast<std::size_t>(cfg.dim);
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    const auto& rec = *it;
    double* pg = grad.data() + rec.slot->offset;
    if (rec.noun_state) {
      const std::size_t w = rec.wires[0];
      for (std::size_t i = 0; i < dim; ++i) {
        pg[i] += g[w * dim + i];
        g[w * dim + i] = 0.0;
      }
      continue;
    }
    const std::size_t k = rec.wires.size();
    std::vector<double> gy;
    gy.reserve(k * dim);
    for (auto w : rec.wires) gy.insert(gy.end(), g.begin() + w * dim, g.begin() + (w + 1) * dim);
    const auto net = box_network(cfg, k);
    std::vector<double> gx;
    if (rec.adjoint) {
      const std::size_t n = k * dim;
      std::vector<double> gt(n * n, 0.0);
      gx = backward(cfg, net, rec.transposed, rec.trace, std::move(gy), gt.data());
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) pg[c * n + r] += gt[r * n + c];
      }
    } else {
      gx = backward(cfg, net, store.values(rec.slot->key), rec.trace, std::move(gy), pg);
    }
    for (std::size_t i = 0; i < k; ++i)
      std::copy(gx.begin() + i * dim, gx.begin() + (i + 1) * dim, g.begin() + rec.wires[i] * dim);
  }
}

}  // namespace

std::vector<double> evaluate_story_vector(const Diagram& d, const ParameterStore& store, const NeuralConfig& cfg) {
  return run_diagram(d, store, cfg, nullptr);
}

double comp_overlap(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::LengthMismatch, "overlap of vectors with different lengths");
  return kernels().dot(u.data(), v.data(), u.size());
}

std::vector<double> project_wires(std::span<const double> story, std::size_t dim, std::size_t person,
                                  std::size_t location) {
  if (person == location || (person + 1) * dim > story.size() || (location + 1) * dim > story.size())
    throw Error(ErrorCode::WireMapInvalid, "wire map must name two distinct story wires");
  std::vector<double> out(story.begin() + static_cast<std::ptrdiff_t>(person * dim),
                          story.begin() + static_cast<std::ptrdiff_t>((person + 1) * dim));
  out.insert(out.end(), story.begin() + static_cast<std::ptrdiff_t>(location * dim),
             story.begin() + static_cast<std::ptrdiff_t>((location + 1) * dim));
  return out;
}

nlohmann::json NeuralModel::config() const { return cfg_.to_json(); }

std::size_t NeuralModel::parameter_count(const BoxNode& box) const {
  if (box.role == BoxRole::NounState) return static_cast<std::size_t>(cfg_.dim);
  return box_parameter_count(cfg_, box.shape.size());
}

void NeuralModel::initialise(ParameterStore& store, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  auto& flat = store.flat();
  for (const auto& slot : store.slots()) {
    double* p = flat.data() + slot.offset;
    if (slot.role == BoxRole::NounState) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (std::size_t i = 0; i < slot.length; ++i) p[i] = u(rng);
      continue;
    }
    for (const auto& layer : box_network(cfg_, slot.key.shape.size())) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t i = 0; i < layer.in * layer.out; ++i) p[layer.offset + i] = u(rng);
      if (layer.bias) {
        for (std::size_t i = 0; i < layer.out; ++i) p[layer.offset + layer.in * layer.out + i] = 0.0;
      }
    }
  }
}

std::vector<double> NeuralModel::identity_parameters(const BoxNode& box) const {
  if (box.role == BoxRole::NounState) throw Error(ErrorCode::BadSpec, "noun states have no identity");
  if (cfg_.schema != NeuralSchema::Linear)
    throw Error(ErrorCode::BadSpec, "only the Linear schema has identity parameters");
  const std::size_t n = box.shape.size() * static_cast<std::size_t>(cfg_.dim);
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) p[i * n + i] = 1.0;
  return p;
}

Overlaps NeuralModel::overlaps(const CompiledExample& ex, const ParameterStore& store) const {
  const auto story = evaluate_story_vector(ex.story, store, cfg_);
  const auto proj = project_wires(story, static_cast<std::size_t>(cfg_.dim), ex.person_wire, ex.location_wire);
  return {comp_overlap(proj, evaluate_story_vector(ex.assertions.yes, store, cfg_)),
          comp_overlap(proj, evaluate_story_vector(ex.assertions.no, store, cfg_))};
}

double NeuralModel::loss_and_gradient(const CompiledExample& ex, const ParameterStore& store,
                                      std::vector<double>& grad) const {
  if (grad.size() != store.size()) throw Error(ErrorCode::LengthMismatch, "gradient buffer size");
  const std::size_t dim = static_cast<std::size_t>(cfg_.dim);
  std::vector<LayerRecord> story_rec;
  std::vector<LayerRecord> yes_rec;
  std::vector<LayerRecord> no_rec;
  const auto story = run_diagram(ex.story, store, cfg_, &story_rec);
  const auto yes = run_diagram(ex.assertions.yes, store, cfg_, &yes_rec);
  const auto no = run_diagram(ex.assertions.no, store, cfg_, &no_rec);
  const auto proj = project_wires(story, dim, ex.person_wire, ex.location_wire);
  const Overlaps o{comp_overlap(proj, yes), comp_overlap(proj, no)};
  double g_yes = 0.0;
  double g_no = 0.0;
  const double loss = answer_loss(o, ex.label, g_yes, g_no);

  std::vector<double> g_story(story.size(), 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    g_story[ex.person_wire * dim + i] = g_yes * yes[i] + g_no * no[i];
    g_story[ex.location_wire * dim + i] = g_yes * yes[dim + i] + g_no * no[dim + i];
  }
  backprop_diagram(story_rec, store, cfg_, std::move(g_story), grad);
  std::vector<double> g_a(proj.size());
  for (std::size_t i = 0; i < proj.size(); ++i) g_a[i] = g_yes * proj[i];
  backprop_diagram(yes_rec, store, cfg_, g_a, grad);
  for (std::size_t i = 0; i < proj.size(); ++i) g_a[i] = g_no * proj[i];
  backprop_diagram(no_rec, store, cfg_, std::move(g_a), grad);
  return loss;
}

}  // namespace circqa
