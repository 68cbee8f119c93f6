#include "circqa/diagram.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "circqa/error.hpp"

namespace circqa {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::UnfilledHole: return "UnfilledHole";
    case ErrorCode::ContainsFrames: return "ContainsFrames";
    case ErrorCode::SignatureMismatch: return "SignatureMismatch";
    case ErrorCode::OverlappingSpans: return "OverlappingSpans";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::MalformedSentence: return "MalformedSentence";
    case ErrorCode::PersonNotInStory: return "PersonNotInStory";
    case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::NotEnoughStructures: return "NotEnoughStructures";
    case ErrorCode::UnknownScheme: return "UnknownScheme";
    case ErrorCode::WrongParamLength: return "WrongParamLength";
    case ErrorCode::MissingParameters: return "MissingParameters";
    case ErrorCode::WireMapInvalid: return "WireMapInvalid";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyHalf: return "EmptyHalf";
    case ErrorCode::NoCorruptedExamples: return "NoCorruptedExamples";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CastMismatch: return "CastMismatch";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Error";
}

char to_char(WireType t) noexcept {
  switch (t) {
    case WireType::P: return 'P';
    case WireType::O: return 'O';
    case WireType::L: return 'L';
  }
  return '?';
}

WireType wire_type_from_char(char c) {
  switch (c) {
    case 'P': return WireType::P;
    case 'O': return WireType::O;
    case 'L': return WireType::L;
    default: throw Error(ErrorCode::Format, std::string("unknown wire type '") + c + "'");
  }
}

std::string shape_string(const Shape& shape) {
  std::string out;
  out.reserve(shape.size());
  for (auto t : shape) out.push_back(to_char(t));
  return out;
}

Shape shape_from_string(const std::string& text) {
  Shape shape;
  shape.reserve(text.size());
  for (char c : text) shape.push_back(wire_type_from_char(c));
  return shape;
}

bool operator==(const FrameNode& a, const FrameNode& b) {
  return a.word == b.word && a.shape == b.shape && a.holes == b.holes && a.contents == b.contents;
}

bool operator==(const PlacedNode& a, const PlacedNode& b) {
  return a.node == b.node && a.wires == b.wires;
}

bool operator==(const Diagram& a, const Diagram& b) {
  return a.wires == b.wires && a.layers == b.layers;
}

const std::string& node_word(const Node& node) {
  return std::visit([](const auto& n) -> const std::string& { return n.word; }, node);
}

const Shape& node_shape(const Node& node) {
  return std::visit([](const auto& n) -> const Shape& { return n.shape; }, node);
}

bool Diagram::is_flat() const noexcept {
  return std::all_of(layers.begin(), layers.end(), [](const PlacedNode& p) {
    return std::holds_alternative<BoxNode>(p.node);
  });
}

Diagram open_diagram(const Shape& shape) {
  Diagram d;
  for (auto t : shape) d.wires.push_back(Wire{"", t});
  return d;
}

Diagram add_noun(const Diagram& d, const std::string& noun, WireType type) {
  Diagram out = d;
  out.wires.push_back(Wire{noun, type});
  out.layers.push_back(PlacedNode{BoxNode{noun, {type}, BoxRole::NounState, false},
                                  {out.wires.size() - 1}});
  return out;
}

namespace {

void check_frame(const FrameNode& f);

void check_node(const Node& node) {
  if (const auto* box = std::get_if<BoxNode>(&node)) {
    if (box->shape.empty()) throw Error(ErrorCode::TypeMismatch, "box '" + box->word + "' has empty shape");
    if (box->role == BoxRole::NounState && box->shape.size() != 1)
      throw Error(ErrorCode::TypeMismatch, "noun state '" + box->word + "' must have one wire");
    return;
  }
  check_frame(std::get<FrameNode>(node));
}

void check_placement(const Diagram& d, const PlacedNode& p) {
  const Shape& shape = node_shape(p.node);
  if (p.wires.empty()) throw Error(ErrorCode::IndexOutOfRange, "node '" + node_word(p.node) + "' placed on no wires");
  if (p.wires.size() != shape.size())
    throw Error(ErrorCode::TypeMismatch, "node '" + node_word(p.node) + "' expects " +
                                             std::to_string(shape.size()) + " wires");
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < p.wires.size(); ++i) {
    std::size_t w = p.wires[i];
    if (w >= d.wires.size())
      throw Error(ErrorCode::IndexOutOfRange, "wire " + std::to_string(w) + " out of range");
    if (!seen.insert(w).second)
      throw Error(ErrorCode::IndexOutOfRange, "wire " + std::to_string(w) + " repeated");
    if (d.wires[w].type != shape[i])
      throw Error(ErrorCode::TypeMismatch, "node '" + node_word(p.node) + "' expects " +
                                               to_char(shape[i]) + " on wire " + std::to_string(w));
  }
}

void check_frame(const FrameNode& f) {
  if (f.shape.empty()) throw Error(ErrorCode::TypeMismatch, "frame '" + f.word + "' has empty shape");
  if (f.contents.size() != f.holes.size())
    throw Error(ErrorCode::UnfilledHole, "frame '" + f.word + "' hole/content count differs");
  std::set<std::size_t> used;
  for (std::size_t h = 0; h < f.holes.size(); ++h) {
    const auto& hole = f.holes[h];
    if (hole.empty()) throw Error(ErrorCode::TypeMismatch, "frame '" + f.word + "' has an empty hole");
    for (auto pos : hole) {
      if (pos >= f.shape.size())
        throw Error(ErrorCode::IndexOutOfRange, "frame '" + f.word + "' hole position out of range");
      // a position may only belong to one hole: contents never span two holes
      if (!used.insert(pos).second)
        throw Error(ErrorCode::TypeMismatch, "frame '" + f.word + "' holes overlap");
    }
    if (!f.contents[h]) continue;
    const Diagram& inner = *f.contents[h];
    if (inner.wires.size() != hole.size())
      throw Error(ErrorCode::TypeMismatch, "frame '" + f.word + "' hole " + std::to_string(h) + " arity differs");
    for (std::size_t i = 0; i < hole.size(); ++i) {
      if (inner.wires[i].type != f.shape[hole[i]])
        throw Error(ErrorCode::TypeMismatch, "frame '" + f.word + "' hole " + std::to_string(h) + " type differs");
    }
    type_check(inner, false);
  }
}

}  // namespace

void type_check(const Diagram& d, bool closed) {
  std::vector<bool> touched(d.wires.size(), false);
  for (const auto& layer : d.layers) {
    check_node(layer.node);
    check_placement(d, layer);
    const auto* box = std::get_if<BoxNode>(&layer.node);
    const bool is_state = box != nullptr && box->role == BoxRole::NounState;
    for (auto w : layer.wires) {
      if (closed && !touched[w]) {
        if (!is_state || box->word != d.wires[w].noun)
          throw Error(ErrorCode::TypeMismatch, "wire " + std::to_string(w) + " not opened by its noun state");
      } else if (is_state && touched[w]) {
        throw Error(ErrorCode::TypeMismatch, "noun state '" + box->word + "' on an already used wire");
      }
      touched[w] = true;
    }
  }
  if (closed) {
    for (std::size_t w = 0; w < d.wires.size(); ++w) {
      if (!touched[w]) throw Error(ErrorCode::TypeMismatch, "wire " + std::to_string(w) + " has no noun state");
    }
  }
}

bool is_well_typed(const Diagram& d, bool closed) noexcept {
  try {
    type_check(d, closed);
    return true;
  } catch (const Error&) {
    return false;
  }
}

Diagram append_node(const Diagram& d, const Node& node, const std::vector<std::size_t>& wires) {
  PlacedNode placed{node, wires};
  check_node(placed.node);
  check_placement(d, placed);
  if (const auto* box = std::get_if<BoxNode>(&node); box && box->role == BoxRole::NounState) {
    for (const auto& layer : d.layers) {
      if (std::find(layer.wires.begin(), layer.wires.end(), wires[0]) != layer.wires.end())
        throw Error(ErrorCode::TypeMismatch, "noun state '" + box->word + "' on an already used wire");
    }
  }
  Diagram out = d;
  out.layers.push_back(std::move(placed));
  return out;
}

namespace {

void expand_into(const PlacedNode& placed, std::vector<PlacedNode>& out) {
  if (std::holds_alternative<BoxNode>(placed.node)) {
    out.push_back(placed);
    return;
  }
  const auto& frame = std::get<FrameNode>(placed.node);
  auto shell = [&](const std::string& suffix) {
    out.push_back(PlacedNode{BoxNode{frame.word + suffix, frame.shape, BoxRole::Plain, false}, placed.wires});
  };
  shell("_top");
  for (std::size_t h = 0; h < frame.holes.size(); ++h) {
    if (h >= frame.contents.size() || !frame.contents[h])
      throw Error(ErrorCode::UnfilledHole, "frame '" + frame.word + "' hole " + std::to_string(h) + " is empty");
    if (h > 0) shell("_mid_" + std::to_string(h - 1));
    const Diagram inner = sandwich_expand(*frame.contents[h]);
    const auto& hole = frame.holes[h];
    for (const auto& layer : inner.layers) {
      PlacedNode mapped{layer.node, {}};
      mapped.wires.reserve(layer.wires.size());
      for (auto w : layer.wires) mapped.wires.push_back(placed.wires[hole[w]]);
      out.push_back(std::move(mapped));
    }
  }
  shell("_bot");
}

}  // namespace

Diagram sandwich_expand(const Diagram& d) {
  Diagram out;
  out.wires = d.wires;
  out.layers.reserve(d.layers.size());
  for (const auto& layer : d.layers) expand_into(layer, out.layers);
  return out;
}

Diagram dagger(const Diagram& d) {
  if (!d.is_flat()) throw Error(ErrorCode::ContainsFrames, "dagger requires a frame-free diagram");
  Diagram out;
  out.wires = d.wires;
  out.layers.assign(d.layers.rbegin(), d.layers.rend());
  for (auto& layer : out.layers) {
    auto& box = std::get<BoxNode>(layer.node);
    box.adjoint = !box.adjoint;
  }
  return out;
}

namespace {

std::vector<std::size_t> span_wires(const Diagram& d, LayerSpan span) {
  std::set<std::size_t> ws;
  for (std::size_t i = span.begin; i < span.end; ++i) ws.insert(d.layers[i].wires.begin(), d.layers[i].wires.end());
  return {ws.begin(), ws.end()};
}

void check_span(const Diagram& d, LayerSpan span) {
  if (span.begin >= span.end || span.end > d.layers.size())
    throw Error(ErrorCode::IndexOutOfRange, "layer span [" + std::to_string(span.begin) + "," +
                                                std::to_string(span.end) + ") invalid");
}

bool has_noun_states(const Diagram& d) {
  return std::any_of(d.layers.begin(), d.layers.end(), [](const PlacedNode& p) {
    const auto* box = std::get_if<BoxNode>(&p.node);
    return box && box->role == BoxRole::NounState;
  });
}

}  // namespace

Shape span_signature(const Diagram& d, LayerSpan span) {
  check_span(d, span);
  Shape sig;
  for (auto w : span_wires(d, span)) sig.push_back(d.wires[w].type);
  return sig;
}

Diagram swap_fragment(const Diagram& d, LayerSpan a, LayerSpan b) {
  check_span(d, a);
  check_span(d, b);
  if (a == b) return d;
  if (a.begin < b.end && b.begin < a.end) throw Error(ErrorCode::OverlappingSpans, "layer spans overlap");
  if (span_signature(d, a) != span_signature(d, b))
    throw Error(ErrorCode::SignatureMismatch,
                shape_string(span_signature(d, a)) + " vs " + shape_string(span_signature(d, b)));
  if (b.begin < a.begin) std::swap(a, b);

  Diagram out;
  out.wires = d.wires;
  auto copy = [&](std::size_t from, std::size_t to) {
    out.layers.insert(out.layers.end(), d.layers.begin() + static_cast<std::ptrdiff_t>(from),
                      d.layers.begin() + static_cast<std::ptrdiff_t>(to));
  };
  copy(0, a.begin);
  copy(b.begin, b.end);
  copy(a.end, b.begin);
  copy(a.begin, a.end);
  copy(b.end, d.layers.size());
  type_check(out, has_noun_states(d));
  return out;
}

Diagram normalize_wire_order(const Diagram& d) {
  std::vector<std::size_t> order;
  std::vector<bool> seen(d.wires.size(), false);
  for (const auto& layer : d.layers) {
    for (auto w : layer.wires) {
      if (!seen[w]) {
        seen[w] = true;
        order.push_back(w);
      }
    }
  }
  for (std::size_t w = 0; w < d.wires.size(); ++w) {
    if (!seen[w]) order.push_back(w);
  }
  std::vector<std::size_t> new_index(d.wires.size());
  Diagram out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    new_index[order[i]] = i;
    out.wires.push_back(d.wires[order[i]]);
  }
  out.layers = d.layers;
  for (auto& layer : out.layers) {
    for (auto& w : layer.wires) w = new_index[w];
  }
  return out;
}

namespace {

std::string node_text(const Node& node);

std::string index_list(const std::vector<std::size_t>& wires) {
  std::string out = "[";
  for (std::size_t i = 0; i < wires.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(wires[i]);
  }
  return out + "]";
}

bool is_identity_placement(const std::vector<std::size_t>& wires, std::size_t n) {
  if (wires.size() != n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (wires[i] != i) return false;
  }
  return true;
}

std::string node_text(const Node& node) {
  if (const auto* box = std::get_if<BoxNode>(&node)) return box->adjoint ? box->word + "^dag" : box->word;
  const auto& frame = std::get<FrameNode>(node);
  std::string out = frame.word;
  for (std::size_t h = 0; h < frame.holes.size(); ++h) {
    out += '[';
    if (h < frame.contents.size() && frame.contents[h]) {
      const Diagram& inner = *frame.contents[h];
      for (std::size_t i = 0; i < inner.layers.size(); ++i) {
        if (i) out += "; ";
        const auto& layer = inner.layers[i];
        out += node_text(layer.node);
        if (!is_identity_placement(layer.wires, inner.wires.size())) out += '@' + index_list(layer.wires);
      }
    } else {
      out += '?';
    }
    out += ']';
  }
  return out;
}

}  // namespace

std::string serialize(const Diagram& d) {
  std::ostringstream os;
  os << "nouns:";
  for (const auto& w : d.wires) os << ' ' << (w.noun.empty() ? "_" : w.noun) << ':' << to_char(w.type);
  os << '\n';
  for (const auto& layer : d.layers) os << node_text(layer.node) << '@' << index_list(layer.wires) << '\n';
  return os.str();
}

namespace {

void collect_words(const Diagram& d, std::vector<std::string>& out) {
  for (const auto& layer : d.layers) {
    if (const auto* box = std::get_if<BoxNode>(&layer.node)) {
      out.push_back(box->word);
      continue;
    }
    for (const auto& inner : std::get<FrameNode>(layer.node).contents) {
      if (inner) collect_words(*inner, out);
    }
  }
}

}  // namespace

std::vector<std::string> inner_words(const Diagram& d) {
  std::vector<std::string> out;
  collect_words(d, out);
  return out;
}

}  // namespace circqa
