#pragma once

// Text-circuit intermediate representation.
//
// A Diagram is an ordered list of noun wires plus an ordered list of layers.
// Each layer places one node (a plain box, a noun state or a frame whose holes
// are filled with sub-diagrams) onto an explicit list of wire indices. Wire
// indices need not be adjacent: the symmetric structure is implicit.
//
// Diagrams are plain values. Every operation here is pure and returns a new
// diagram, so a const Diagram can be shared freely between threads.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace circqa {

enum class WireType : std::uint8_t { P, O, L };

char to_char(WireType t) noexcept;
WireType wire_type_from_char(char c);

using Shape = std::vector<WireType>;

/// "PL", "P", "PO", ...
std::string shape_string(const Shape& shape);
Shape shape_from_string(const std::string& text);

enum class BoxRole : std::uint8_t { NounState, Plain };

struct BoxNode {
  std::string word;
  Shape shape;
  BoxRole role = BoxRole::Plain;
  bool adjoint = false;

  friend bool operator==(const BoxNode&, const BoxNode&) = default;
};

struct Diagram;

/// A box with holes. `holes[i]` lists positions into `shape`; `contents[i]`
/// is an open diagram whose wires carry exactly those types.
struct FrameNode {
  std::string word;
  Shape shape;
  std::vector<std::vector<std::size_t>> holes;
  std::vector<std::optional<Diagram>> contents;

  friend bool operator==(const FrameNode& a, const FrameNode& b);
};

using Node = std::variant<BoxNode, FrameNode>;

const std::string& node_word(const Node& node);
const Shape& node_shape(const Node& node);

struct PlacedNode {
  Node node;
  std::vector<std::size_t> wires;

  friend bool operator==(const PlacedNode& a, const PlacedNode& b);
};

/// An empty noun name marks an open wire (used inside frame holes).
struct Wire {
  std::string noun;
  WireType type = WireType::P;

  friend bool operator==(const Wire&, const Wire&) = default;
};

struct Diagram {
  std::vector<Wire> wires;
  std::vector<PlacedNode> layers;

  std::size_t wire_count() const noexcept { return wires.size(); }
  bool is_flat() const noexcept;

  friend bool operator==(const Diagram& a, const Diagram& b);
};

/// Diagram with open (stateless) wires of the given types, for hole contents.
Diagram open_diagram(const Shape& shape);

/// Appends a fresh wire for `noun` and its noun-state layer.
Diagram add_noun(const Diagram& d, const std::string& noun, WireType type);

/// Appends `node` as the last layer on `wires`.
/// Throws IndexOutOfRange (empty/out-of-range/repeated indices) or
/// TypeMismatch (wire kinds differ from the node shape).
Diagram append_node(const Diagram& d, const Node& node, const std::vector<std::size_t>& wires);

/// Checks all layer placements and frame contents. `closed` additionally
/// requires every wire to be opened by its own noun state.
void type_check(const Diagram& d, bool closed);
bool is_well_typed(const Diagram& d, bool closed) noexcept;

/// Lowers every frame into `<word>_top`, hole contents, `<word>_mid_<i>` between
/// holes and `<word>_bot`, innermost frames first. Throws UnfilledHole.
Diagram sandwich_expand(const Diagram& d);

/// Reverses the layers and toggles each box's adjoint flag. Throws ContainsFrames.
Diagram dagger(const Diagram& d);

/// Half-open range of layer indices.
struct LayerSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const LayerSpan&, const LayerSpan&) = default;
};

/// Types of the wires touched by a span, in wire order.
Shape span_signature(const Diagram& d, LayerSpan span);

/// Exchanges the positions of two disjoint layer ranges with equal boundary
/// signatures. Throws SignatureMismatch, OverlappingSpans, IndexOutOfRange, or
/// TypeMismatch when the reordered diagram no longer type-checks.
Diagram swap_fragment(const Diagram& d, LayerSpan a, LayerSpan b);

/// Renumbers wires by first use so diagrams equal up to wire relabelling
/// compare equal.
Diagram normalize_wire_order(const Diagram& d);

/// Deterministic text form: a noun header followed by one `word@[i,j]` line per layer.
std::string serialize(const Diagram& d);

/// Inner (non noun-state, non frame) box words, recursively through holes.
std::vector<std::string> inner_words(const Diagram& d);

}  // namespace circqa
