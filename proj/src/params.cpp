#include "circqa/params.hpp"

#include "circqa/error.hpp"

namespace circqa {

BoxKey box_key(const BoxNode& box) { return BoxKey{box.word, shape_string(box.shape)}; }

ParameterStore::ParameterStore(const std::map<BoxKey, Entry>& entries) {
  std::size_t offset = 0;
  for (const auto& [key, e] : entries) {
    index_.emplace(key, slots_.size());
    slots_.push_back(ParamSlot{key, e.role, offset, e.length});
    offset += e.length;
  }
  flat_.assign(offset, 0.0);
}

bool ParameterStore::contains(const BoxKey& key) const { return index_.count(key) > 0; }

const ParamSlot& ParameterStore::slot(const BoxKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw Error(ErrorCode::MissingParameters, "no parameters for " + key.str());
  return slots_[it->second];
}

std::span<double> ParameterStore::values(const BoxKey& key) {
  const auto& s = slot(key);
  return {flat_.data() + s.offset, s.length};
}

std::span<const double> ParameterStore::values(const BoxKey& key) const {
  const auto& s = slot(key);
  return {flat_.data() + s.offset, s.length};
}

void ParameterStore::set(const BoxKey& key, const std::vector<double>& values) {
  const auto& s = slot(key);
  if (values.size() != s.length)
    throw Error(ErrorCode::WrongParamLength, key.str() + " expects " + std::to_string(s.length) + " values, got " +
                                                 std::to_string(values.size()));
  std::copy(values.begin(), values.end(), flat_.begin() + static_cast<std::ptrdiff_t>(s.offset));
}

bool ParameterStore::same_layout(const ParameterStore& other) const {
  if (slots_.size() != other.slots_.size()) return false;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const auto& a = slots_[i];
    const auto& b = other.slots_[i];
    if (a.key != b.key || a.length != b.length || a.offset != b.offset) return false;
  }
  return true;
}

}  // namespace circqa
