// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qsim::merkle {

using Hash = std::array<std::uint8_t, 32>;

std::string to_hex(const Hash& hash);

/// SHA-256 with 1-byte domain separation: 0x00 before leaf data, 0x01 before
/// interior child pairs, which blocks leaf/interior second-preimage splices.
Hash hash_value(std::string_view bytes);
Hash hash_leaf(std::string_view key, const Hash& value_hash);
Hash hash_interior(const Hash& left, const Hash& right);

struct Leaf {
  std::string key;
  Hash value_hash;
};

/// Audit proof for one leaf: the sibling hashes from the leaf to the root.
/// The index/size pair fixes which side each sibling joins on.
struct AuditProof {
  std::uint64_t leaf_index = 0;
  std::uint64_t tree_size = 0;
  std::vector<Hash> siblings;

  std::string to_bytes() const;
  static std::optional<AuditProof> from_bytes(std::string_view bytes);
};

/// Consistency proof: evidence that the first old_size leaves of a tree of
/// new_size leaves reproduce a given older root.
struct ConsistencyProof {
  std::uint64_t old_size = 0;
  std::uint64_t new_size = 0;
  std::vector<Hash> hashes;

  std::string to_bytes() const;
  static std::optional<ConsistencyProof> from_bytes(std::string_view bytes);
};

struct DiffResult {
  std::vector<std::string> keys;       // diverging keys, in leaf order
  std::size_t hash_comparisons = 0;    // pruning effectiveness measure
};

/// History-friendly binary hash tree over ordered (key, value-hash) leaves:
/// the left subtree of n leaves covers the largest power of two below n, so
/// the shape is a deterministic function of the leaf count and append-only
/// growth admits consistency proofs.
class Tree {
 public:
  /// Keys must be strictly ascending (sorted, unique); throws otherwise.
  static Tree build(const std::vector<std::pair<std::string, std::string>>& items);
  static Tree from_leaves(std::vector<Leaf> leaves);

  const Hash& root() const;
  std::size_t leaf_count() const { return leaves_.size(); }
  const std::vector<Leaf>& leaves() const { return leaves_; }

  /// Throws std::invalid_argument when the key is absent.
  AuditProof audit_proof(std::string_view key) const;
  AuditProof audit_proof_for_index(std::uint64_t index) const;

  /// Throws std::invalid_argument when old_size exceeds the leaf count.
  ConsistencyProof consistency_proof(std::uint64_t old_size) const;

 private:
  Hash subtree_hash(std::size_t lo, std::size_t hi) const;

  std::vector<Leaf> leaves_;
  mutable std::optional<Hash> root_;
};

/// Recomputes the root from the leaf upward; false on any mismatch, including
/// malformed index/size/path-length combinations.
bool verify_audit(const Hash& root, std::string_view key,
                  std::string_view value, const AuditProof& proof);
bool verify_audit_hash(const Hash& root, const Hash& leaf_hash,
                       const AuditProof& proof);

/// Recomputes both roots from the proof; false on any mismatch.
bool verify_consistency(const Hash& old_root, const Hash& new_root,
                        const ConsistencyProof& proof);

/// Exact set of diverging keys between two trees over the same ordered key
/// universe, pruning equal-hash subtrees. Throws when the trees disagree on
/// leaf count or key order.
DiffResult diff(const Tree& a, const Tree& b);

}  // namespace qsim::merkle
