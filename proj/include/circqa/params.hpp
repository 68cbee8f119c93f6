#pragma once

// Flat parameter storage keyed by (word, shape). A box and its adjoint share
// the same entry.

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "circqa/diagram.hpp"

namespace circqa {

struct BoxKey {
  std::string word;
  std::string shape;

  std::string str() const { return word + ":" + shape; }

  friend bool operator==(const BoxKey&, const BoxKey&) = default;
  friend auto operator<=>(const BoxKey&, const BoxKey&) = default;
};

BoxKey box_key(const BoxNode& box);

struct ParamSlot {
  BoxKey key;
  BoxRole role = BoxRole::Plain;
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Keys are laid out in sorted order, so two stores built from the same key
/// set flatten identically regardless of insertion order.
class ParameterStore {
 public:
  struct Entry {
    BoxRole role = BoxRole::Plain;
    std::size_t length = 0;
  };

  ParameterStore() = default;
  explicit ParameterStore(const std::map<BoxKey, Entry>& entries);

  bool contains(const BoxKey& key) const;
  /// Throws MissingParameters.
  const ParamSlot& slot(const BoxKey& key) const;
  std::span<double> values(const BoxKey& key);
  std::span<const double> values(const BoxKey& key) const;
  /// Throws WrongParamLength.
  void set(const BoxKey& key, const std::vector<double>& values);

  const std::vector<ParamSlot>& slots() const noexcept { return slots_; }
  std::vector<double>& flat() noexcept { return flat_; }
  const std::vector<double>& flat() const noexcept { return flat_; }
  std::size_t size() const noexcept { return flat_.size(); }

  /// Same keys, lengths and order.
  bool same_layout(const ParameterStore& other) const;

 private:
  std::vector<ParamSlot> slots_;
  std::map<BoxKey, std::size_t> index_;
  std::vector<double> flat_;
};

}  // namespace circqa
