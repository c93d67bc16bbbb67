// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>

#include "qsim/clocks.hpp"

namespace qsim::crdt {

using Stamp = clocks::LamportStamp;

/// One map slot: the value (or a tombstone for a delete) and the stamp of the
/// write that set it.
struct LwwEntry {
  std::optional<std::string> value;  // nullopt marks a delete
  Stamp stamp;

  bool operator==(const LwwEntry&) const = default;
};

/// Last-write-wins map: per key, the entry with the lexicographically largest
/// (stamp value, writer) pair survives. Merge is commutative, associative and
/// idempotent, so replicas applying the same writes in any order converge.
class LwwMap {
 public:
  /// Applies a write; the entry changes only if the stamp outranks the
  /// existing one. Returns whether the entry changed.
  bool put(const std::string& key, std::string value, Stamp stamp);

  /// Delete as a stamped tombstone write, so delete/put races merge totally.
  bool erase(const std::string& key, Stamp stamp);

  void merge(const LwwMap& other);

  /// Live value (deleted and absent keys both read as nullopt).
  std::optional<std::string> get(const std::string& key) const;

  const std::map<std::string, LwwEntry>& entries() const { return entries_; }

  /// Sorted "key value stamp owner" lines for golden-file comparison.
  std::string dump() const;

  bool operator==(const LwwMap&) const = default;

 private:
  bool apply(const std::string& key, LwwEntry entry);

  std::map<std::string, LwwEntry> entries_;
};

/// Read a key across replicas: the highest-stamped entry that at least a
/// strict majority of replicas hold, or nullopt when no entry has a quorum
/// (or the quorum entry is a tombstone).
std::optional<std::string> majority_read(std::span<const LwwMap> replicas,
                                         const std::string& key);

}  // namespace qsim::crdt
