// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/merkle.hpp"

#include <openssl/sha.h>

#include <cstring>
#include <stdexcept>

namespace qsim::merkle {

namespace {

constexpr std::uint8_t kLeafPrefix = 0x00;
constexpr std::uint8_t kInteriorPrefix = 0x01;

Hash sha256(const std::uint8_t* data, std::size_t len) {
  Hash out;
  SHA256(data, len, out.data());
  return out;
}

void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

std::uint64_t get_u64le(std::string_view bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes[i]))
         << (8 * i);
  return v;
}

/// Largest power of two strictly below n (n >= 2).
std::size_t split_point(std::size_t n) {
  std::size_t k = 1;
  while (k * 2 < n) k *= 2;
  return k;
}

Hash empty_root() {
  return sha256(nullptr, 0);
}

}  // namespace

std::string to_hex(const Hash& hash) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t byte : hash) {
    out.push_back(digits[byte >> 4]);
    out.push_back(digits[byte & 0xf]);
  }
  return out;
}

Hash hash_value(std::string_view bytes) {
  return sha256(reinterpret_cast<const std::uint8_t*>(bytes.data()),
                bytes.size());
}

Hash hash_leaf(std::string_view key, const Hash& value_hash) {
  std::string buf;
  buf.push_back(static_cast<char>(kLeafPrefix));
  put_u64le(buf, key.size());
  buf.append(key);
  buf.append(reinterpret_cast<const char*>(value_hash.data()),
             value_hash.size());
  return sha256(reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size());
}

Hash hash_interior(const Hash& left, const Hash& right) {
  std::uint8_t buf[1 + 32 + 32];
  buf[0] = kInteriorPrefix;
  std::memcpy(buf + 1, left.data(), 32);
  std::memcpy(buf + 33, right.data(), 32);
  return sha256(buf, sizeof buf);
}

// --- tree ----------------------------------------------------------------------

Tree Tree::build(
    const std::vector<std::pair<std::string, std::string>>& items) {
  std::vector<Leaf> leaves;
  leaves.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0 && !(items[i - 1].first < items[i].first))
      throw std::invalid_argument(
          "merkle: keys must be strictly ascending (sorted, unique)");
    leaves.push_back({items[i].first, hash_value(items[i].second)});
  }
  return from_leaves(std::move(leaves));
}

Tree Tree::from_leaves(std::vector<Leaf> leaves) {
  Tree tree;
  tree.leaves_ = std::move(leaves);
  return tree;
}

Hash Tree::subtree_hash(std::size_t lo, std::size_t hi) const {
  std::size_t n = hi - lo;
  if (n == 1) return hash_leaf(leaves_[lo].key, leaves_[lo].value_hash);
  std::size_t k = split_point(n);
  return hash_interior(subtree_hash(lo, lo + k), subtree_hash(lo + k, hi));
}

const Hash& Tree::root() const {
  if (!root_)
    root_ = leaves_.empty() ? empty_root() : subtree_hash(0, leaves_.size());
  return *root_;
}

AuditProof Tree::audit_proof(std::string_view key) const {
  for (std::size_t i = 0; i < leaves_.size(); ++i)
    if (leaves_[i].key == key) return audit_proof_for_index(i);
  throw std::invalid_argument("merkle: key not present: " + std::string(key));
}

AuditProof Tree::audit_proof_for_index(std::uint64_t index) const {
  if (index >= leaves_.size())
    throw std::invalid_argument("merkle: leaf index out of range");
  AuditProof proof;
  proof.leaf_index = index;
  proof.tree_size = leaves_.size();

  // Collect siblings from the leaf upward.
  struct Frame {
    std::size_t lo, hi;
  };
  std::vector<Frame> stack;
  std::size_t lo = 0, hi = leaves_.size();
  while (hi - lo > 1) {
    stack.push_back({lo, hi});
    std::size_t k = split_point(hi - lo);
    if (index < lo + k)
      hi = lo + k;
    else
      lo = lo + k;
  }
  for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
    std::size_t k = split_point(it->hi - it->lo);
    if (index < it->lo + k)
      proof.siblings.push_back(subtree_hash(it->lo + k, it->hi));
    else
      proof.siblings.push_back(subtree_hash(it->lo, it->lo + k));
  }
  return proof;
}

ConsistencyProof Tree::consistency_proof(std::uint64_t old_size) const {
  if (old_size > leaves_.size())
    throw std::invalid_argument("merkle: old size exceeds current tree");
  ConsistencyProof proof;
  proof.old_size = old_size;
  proof.new_size = leaves_.size();
  if (old_size == 0 || old_size == leaves_.size()) return proof;  // empty

  // SUBPROOF(m, D[lo:hi], complete): complete means the range is exactly the
  // old tree, whose hash the verifier already knows.
  struct Rec {
    const Tree& tree;
    std::vector<Hash>& out;
    void operator()(std::uint64_t m, std::size_t lo, std::size_t hi,
                    bool complete) const {
      std::size_t n = hi - lo;
      if (m == n) {
        if (!complete) out.push_back(tree.subtree_hash(lo, hi));
        return;
      }
      std::size_t k = split_point(n);
      if (m <= k) {
        (*this)(m, lo, lo + k, complete);
        out.push_back(tree.subtree_hash(lo + k, hi));
      } else {
        (*this)(m - k, lo + k, hi, false);
        out.push_back(tree.subtree_hash(lo, lo + k));
      }
    }
  };
  Rec{*this, proof.hashes}(old_size, 0, leaves_.size(), true);
  return proof;
}

// --- verification ----------------------------------------------------------------

bool verify_audit_hash(const Hash& root, const Hash& leaf_hash,
                       const AuditProof& proof) {
  if (proof.tree_size == 0 || proof.leaf_index >= proof.tree_size) return false;
  std::uint64_t fn = proof.leaf_index;
  std::uint64_t sn = proof.tree_size - 1;
  Hash r = leaf_hash;
  for (const Hash& p : proof.siblings) {
    if (sn == 0) return false;  // path longer than the tree is deep
    if ((fn & 1) != 0 || fn == sn) {
      r = hash_interior(p, r);
      if ((fn & 1) == 0) {
        while (fn != 0 && (fn & 1) == 0) {
          fn >>= 1;
          sn >>= 1;
        }
      }
    } else {
      r = hash_interior(r, p);
    }
    fn >>= 1;
    sn >>= 1;
  }
  return sn == 0 && r == root;
}

bool verify_audit(const Hash& root, std::string_view key,
                  std::string_view value, const AuditProof& proof) {
  return verify_audit_hash(root, hash_leaf(key, hash_value(value)), proof);
}

bool verify_consistency(const Hash& old_root, const Hash& new_root,
                        const ConsistencyProof& proof) {
  const std::uint64_t first = proof.old_size;
  const std::uint64_t second = proof.new_size;
  if (first > second) return false;
  if (first == second)
    return proof.hashes.empty() && old_root == new_root;
  if (first == 0) return proof.hashes.empty() && old_root == empty_root();

  std::vector<Hash> path = proof.hashes;
  if (path.empty()) return false;
  // A power-of-two old tree is a complete subtree, so its root opens the path.
  if ((first & (first - 1)) == 0) path.insert(path.begin(), old_root);

  std::uint64_t fn = first - 1;
  std::uint64_t sn = second - 1;
  while ((fn & 1) != 0) {
    fn >>= 1;
    sn >>= 1;
  }
  Hash fr = path[0];
  Hash sr = path[0];
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Hash& c = path[i];
    if (sn == 0) return false;
    if ((fn & 1) != 0 || fn == sn) {
      fr = hash_interior(c, fr);
      sr = hash_interior(c, sr);
      if ((fn & 1) == 0) {
        while (fn != 0 && (fn & 1) == 0) {
          fn >>= 1;
          sn >>= 1;
        }
      }
    } else {
      sr = hash_interior(sr, c);
    }
    fn >>= 1;
    sn >>= 1;
  }
  return sn == 0 && fr == old_root && sr == new_root;
}

// --- serialization ----------------------------------------------------------------

std::string AuditProof::to_bytes() const {
  std::string out;
  put_u64le(out, leaf_index);
  put_u64le(out, tree_size);
  for (const Hash& h : siblings)
    out.append(reinterpret_cast<const char*>(h.data()), h.size());
  return out;
}

std::optional<AuditProof> AuditProof::from_bytes(std::string_view bytes) {
  if (bytes.size() < 16 || (bytes.size() - 16) % 32 != 0) return std::nullopt;
  AuditProof proof;
  proof.leaf_index = get_u64le(bytes);
  proof.tree_size = get_u64le(bytes.substr(8));
  for (std::size_t off = 16; off < bytes.size(); off += 32) {
    Hash h;
    std::memcpy(h.data(), bytes.data() + off, 32);
    proof.siblings.push_back(h);
  }
  return proof;
}

std::string ConsistencyProof::to_bytes() const {
  std::string out;
  put_u64le(out, old_size);
  put_u64le(out, new_size);
  for (const Hash& h : hashes)
    out.append(reinterpret_cast<const char*>(h.data()), h.size());
  return out;
}

std::optional<ConsistencyProof> ConsistencyProof::from_bytes(
    std::string_view bytes) {
  if (bytes.size() < 16 || (bytes.size() - 16) % 32 != 0) return std::nullopt;
  ConsistencyProof proof;
  proof.old_size = get_u64le(bytes);
  proof.new_size = get_u64le(bytes.substr(8));
  for (std::size_t off = 16; off < bytes.size(); off += 32) {
    Hash h;
    std::memcpy(h.data(), bytes.data() + off, 32);
    proof.hashes.push_back(h);
  }
  return proof;
}

// --- diff -------------------------------------------------------------------------

namespace {

struct HashedNode {
  std::size_t lo, hi;
  Hash hash;
  int left = -1, right = -1;
};

int hash_nodes(const Tree& tree, std::size_t lo, std::size_t hi,
               std::vector<HashedNode>& nodes) {
  HashedNode node;
  node.lo = lo;
  node.hi = hi;
  if (hi - lo == 1) {
    const Leaf& leaf = tree.leaves()[lo];
    node.hash = hash_leaf(leaf.key, leaf.value_hash);
    nodes.push_back(node);
    return static_cast<int>(nodes.size()) - 1;
  }
  std::size_t k = split_point(hi - lo);
  int left = hash_nodes(tree, lo, lo + k, nodes);
  int right = hash_nodes(tree, lo + k, hi, nodes);
  node.left = left;
  node.right = right;
  node.hash = hash_interior(nodes[static_cast<std::size_t>(left)].hash,
                            nodes[static_cast<std::size_t>(right)].hash);
  nodes.push_back(node);
  return static_cast<int>(nodes.size()) - 1;
}

void diff_rec(const Tree& a, const Tree& b,
              const std::vector<HashedNode>& na,
              const std::vector<HashedNode>& nb, int ia, int ib,
              DiffResult& result) {
  const HashedNode& x = na[static_cast<std::size_t>(ia)];
  const HashedNode& y = nb[static_cast<std::size_t>(ib)];
  ++result.hash_comparisons;
  if (x.hash == y.hash) return;  // identical subtree pruned
  if (x.hi - x.lo == 1) {
    const Leaf& la = a.leaves()[x.lo];
    const Leaf& lb = b.leaves()[y.lo];
    if (la.key != lb.key)
      throw std::invalid_argument("merkle diff: key universes differ");
    result.keys.push_back(la.key);
    return;
  }
  diff_rec(a, b, na, nb, x.left, y.left, result);
  diff_rec(a, b, na, nb, x.right, y.right, result);
}

}  // namespace

DiffResult diff(const Tree& a, const Tree& b) {
  if (a.leaf_count() != b.leaf_count())
    throw std::invalid_argument("merkle diff: trees must share a key universe");
  DiffResult result;
  if (a.leaf_count() == 0) {
    ++result.hash_comparisons;
    return result;
  }
  std::vector<HashedNode> na, nb;
  int ra = hash_nodes(a, 0, a.leaf_count(), na);
  int rb = hash_nodes(b, 0, b.leaf_count(), nb);
  diff_rec(a, b, na, nb, ra, rb, result);
  return result;
}

}  // namespace qsim::merkle
