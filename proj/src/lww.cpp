// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/lww.hpp"

#include <map>
#include <vector>

#include "qsim/election.hpp"

namespace qsim::crdt {

bool LwwMap::apply(const std::string& key, LwwEntry entry) {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_.emplace(key, std::move(entry));
    return true;
  }
  if (entry.stamp > it->second.stamp) {
    it->second = std::move(entry);
    return true;
  }
  return false;
}

bool LwwMap::put(const std::string& key, std::string value, Stamp stamp) {
  return apply(key, LwwEntry{std::move(value), stamp});
}

bool LwwMap::erase(const std::string& key, Stamp stamp) {
  return apply(key, LwwEntry{std::nullopt, stamp});
}

void LwwMap::merge(const LwwMap& other) {
  for (const auto& [key, entry] : other.entries_) apply(key, entry);
}

std::optional<std::string> LwwMap::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

std::string LwwMap::dump() const {
  std::string out;
  for (const auto& [key, entry] : entries_) {
    out += key;
    out.push_back(' ');
    out += entry.value ? *entry.value : "(deleted)";
    out.push_back(' ');
    out += std::to_string(entry.stamp.value);
    out.push_back(' ');
    out += std::to_string(entry.stamp.owner);
    out.push_back('\n');
  }
  return out;
}

std::optional<std::string> majority_read(std::span<const LwwMap> replicas,
                                         const std::string& key) {
  if (replicas.empty()) return std::nullopt;
  int quorum = election::quorum_size(static_cast<int>(replicas.size()));

  // Count identical entries (value and stamp both).
  std::map<std::pair<Stamp, std::optional<std::string>>, int> counts;
  for (const auto& replica : replicas) {
    auto it = replica.entries().find(key);
    if (it == replica.entries().end()) continue;
    ++counts[{it->second.stamp, it->second.value}];
  }

  std::optional<std::pair<Stamp, std::optional<std::string>>> best;
  for (const auto& [entry, count] : counts) {
    if (count < quorum) continue;
    if (!best || entry.first > best->first) best = entry;
  }
  if (!best) return std::nullopt;
  return best->second;
}

}  // namespace qsim::crdt
