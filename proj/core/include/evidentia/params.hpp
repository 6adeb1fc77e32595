#pragma once

#include <map>
#include <string>

#include "evidentia/array.hpp"
#include "evidentia/error.hpp"

namespace evidentia {

// Named trainable arrays. Hypothesis and evidence encoders resolve to the
// same names here, which is what makes the training Siamese.
class ParameterStore {
 public:
  struct Entry {
    Array value;
    bool decay = true;  // whether L2 regularization applies
  };

  void add(const std::string& name, Array value, bool decay) {
    if (entries_.count(name))
      throw ValidationError("parameter already defined: " + name);
    entries_[name] = Entry{std::move(value), decay};
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  const Array& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("unknown parameter: " + name);
    return it->second.value;
  }
  Array& mutable_value(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("unknown parameter: " + name);
    return it->second.value;
  }
  bool decays(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("unknown parameter: " + name);
    return it->second.decay;
  }

  // Deterministically ordered (std::map) — iteration order is part of the
  // reproducibility contract.
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }
  size_t count() const { return entries_.size(); }

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace evidentia
