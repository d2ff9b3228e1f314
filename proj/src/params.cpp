#include "datk/params.hpp"

#include "datk/error.hpp"

namespace datk {

void ParameterSet::add(const std::string& name, Tensor value, bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{name, std::move(value), trainable, std::nullopt});
}

ParameterSet::Entry& ParameterSet::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second];
}

const ParameterSet::Entry& ParameterSet::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second];
}

Tensor& ParameterSet::at(const std::string& name) { return entry(name).value; }
const Tensor& ParameterSet::at(const std::string& name) const { return entry(name).value; }

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::vector<std::string> ParameterSet::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (e.trainable) out.push_back(e.name);
  }
  return out;
}

}  // namespace datk
