#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "datk/tensor.hpp"

namespace datk {

// Named arrays of one network, in insertion order. Trainable entries are
// updated by the optimizer; the rest (batch-norm running statistics) are
// mutated only by train-mode forward passes.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
    std::optional<Tensor> velocity;
  };

  void add(const std::string& name, Tensor value, bool trainable = true);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::vector<std::string> names() const;
  std::vector<std::string> trainable_names() const;
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline bool operator==(const ParameterSet::Entry& a, const ParameterSet::Entry& b) {
  return a.name == b.name && a.value == b.value && a.trainable == b.trainable &&
         a.velocity == b.velocity;
}

// Gradients produced by one backward pass.
struct GradientRecord {
  std::map<std::string, Tensor> grads;
  std::optional<Tensor> input_grad;

  bool has(const std::string& name) const { return grads.count(name) != 0; }
};

}  // namespace datk
