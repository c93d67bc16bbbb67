// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qsim::clocks {

/// How a Lamport clock folds in a received timestamp.
///   MaxThenTick: max(local, received) + 1 — strictly monotone on causal edges.
///   TickThenMax: max(local + 1, received) — receive events may share the
///                sender's timestamp; causal edges are only non-decreasing.
enum class MergeRule { MaxThenTick, TickThenMax };

/// A (value, owner) pair. Lexicographic order on (value, owner) is a total
/// order used wherever ties between processes must break deterministically.
struct LamportStamp {
  std::uint64_t value = 0;
  int owner = 0;

  auto operator<=>(const LamportStamp&) const = default;
};

/// Scalar logical clock. The owner is fixed for the clock's lifetime and the
/// value never decreases.
class LamportClock {
 public:
  explicit LamportClock(int owner, std::uint64_t value = 0)
      : value_(value), owner_(owner) {}

  /// Local event: advances the counter by exactly one.
  std::uint64_t tick() { return ++value_; }

  /// Folds in the timestamp carried by a received message.
  std::uint64_t receive(std::uint64_t received,
                        MergeRule rule = MergeRule::MaxThenTick);

  std::uint64_t value() const { return value_; }
  int owner() const { return owner_; }
  LamportStamp stamp() const { return {value_, owner_}; }

 private:
  std::uint64_t value_;
  int owner_;
};

enum class CausalOrder { Before, After, Equal, Concurrent };

const char* to_string(CausalOrder order);

/// Per-process vector of event counters. The vector length is the cluster
/// size and never changes; only the owner slot is advanced by local events.
class VectorClock {
 public:
  VectorClock(std::size_t n_processes, int owner_index);
  VectorClock(std::vector<std::uint64_t> components, int owner_index);

  /// Local event: advances the owner slot by exactly one.
  void local_event();

  /// Receive: element-wise max with the received stamp, then one local tick.
  /// Throws std::invalid_argument on length mismatch (misconfigured cluster).
  void receive(std::span<const std::uint64_t> received);

  const std::vector<std::uint64_t>& components() const { return components_; }
  int owner_index() const { return owner_; }
  std::string to_string() const;

 private:
  std::vector<std::uint64_t> components_;
  int owner_;
};

/// Happens-before comparison of two vector stamps.
/// Throws std::invalid_argument on length mismatch.
CausalOrder causal_order(std::span<const std::uint64_t> a,
                         std::span<const std::uint64_t> b);

CausalOrder causal_order(const VectorClock& a, const VectorClock& b);

}  // namespace qsim::clocks
