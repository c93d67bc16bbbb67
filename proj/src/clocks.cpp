// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/clocks.hpp"

#include <algorithm>
#include <stdexcept>

namespace qsim::clocks {

std::uint64_t LamportClock::receive(std::uint64_t received, MergeRule rule) {
  switch (rule) {
    case MergeRule::MaxThenTick:
      value_ = std::max(value_, received) + 1;
      break;
    case MergeRule::TickThenMax:
      value_ = std::max(value_ + 1, received);
      break;
  }
  return value_;
}

const char* to_string(CausalOrder order) {
  switch (order) {
    case CausalOrder::Before: return "Before";
    case CausalOrder::After: return "After";
    case CausalOrder::Equal: return "Equal";
    case CausalOrder::Concurrent: return "Concurrent";
  }
  return "?";
}

VectorClock::VectorClock(std::size_t n_processes, int owner_index)
    : components_(n_processes, 0), owner_(owner_index) {
  if (owner_index < 0 || static_cast<std::size_t>(owner_index) >= n_processes)
    throw std::invalid_argument("VectorClock: owner index out of range");
}

VectorClock::VectorClock(std::vector<std::uint64_t> components, int owner_index)
    : components_(std::move(components)), owner_(owner_index) {
  if (owner_ < 0 || static_cast<std::size_t>(owner_) >= components_.size())
    throw std::invalid_argument("VectorClock: owner index out of range");
}

void VectorClock::local_event() { ++components_[owner_]; }

void VectorClock::receive(std::span<const std::uint64_t> received) {
  if (received.size() != components_.size())
    throw std::invalid_argument("VectorClock: stamp length mismatch");
  for (std::size_t i = 0; i < components_.size(); ++i)
    components_[i] = std::max(components_[i], received[i]);
  ++components_[owner_];
}

std::string VectorClock::to_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(components_[i]);
  }
  out += "]";
  return out;
}

CausalOrder causal_order(std::span<const std::uint64_t> a,
                         std::span<const std::uint64_t> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("causal_order: stamp length mismatch");
  bool a_less = false;
  bool b_less = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) a_less = true;
    if (b[i] < a[i]) b_less = true;
  }
  if (!a_less && !b_less) return CausalOrder::Equal;
  if (a_less && !b_less) return CausalOrder::Before;
  if (b_less && !a_less) return CausalOrder::After;
  return CausalOrder::Concurrent;
}

CausalOrder causal_order(const VectorClock& a, const VectorClock& b) {
  return causal_order(std::span<const std::uint64_t>(a.components()),
                      std::span<const std::uint64_t>(b.components()));
}

}  // namespace qsim::clocks
