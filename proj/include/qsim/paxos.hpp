// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qsim/election.hpp"
#include "qsim/sim.hpp"

namespace qsim::paxos {

using election::Ballot;
using election::quorum_size;
using sim::ProcessId;
using sim::Time;

using Value = std::string;

// --- wire messages (slot 0 carries single-decree instances) -----------------

struct Prepare {
  std::uint64_t slot = 0;
  Ballot ballot;
};

struct Promise {
  std::uint64_t slot = 0;
  Ballot ballot;                                    // the promised ballot
  std::optional<std::pair<Ballot, Value>> accepted; // highest prior accept
};

struct Nack {
  std::uint64_t slot = 0;
  Ballot promised;  // lets the proposer jump past the competing round
};

struct Accept {
  std::uint64_t slot = 0;
  Ballot ballot;
  Value value;
};

struct Accepted {
  std::uint64_t slot = 0;
  Ballot ballot;
  Value value;
};

namespace tag {
inline constexpr const char* prepare = "px.prepare";
inline constexpr const char* promise = "px.promise";
inline constexpr const char* nack = "px.nack";
inline constexpr const char* accept = "px.accept";
inline constexpr const char* accepted = "px.accepted";
}  // namespace tag

sim::Payload encode(const Prepare&);
sim::Payload encode(const Promise&);
sim::Payload encode(const Nack&);
sim::Payload encode(const Accept&);
sim::Payload encode(const Accepted&);

Prepare decode_prepare(const sim::Payload&);
Promise decode_promise(const sim::Payload&);
Nack decode_nack(const sim::Payload&);
Accept decode_accept(const sim::Payload&);
Accepted decode_accepted(const sim::Payload&);

// --- acceptor ----------------------------------------------------------------

/// Single-instance acceptor: promises never decrease, and an accepted entry
/// never outranks the promise.
struct Acceptor {
  std::optional<Ballot> promised;
  std::optional<std::pair<Ballot, Value>> accepted;

  std::variant<Promise, Nack> on_prepare(const Ballot& ballot);
  std::variant<Accepted, Nack> on_accept(const Ballot& ballot,
                                         const Value& value);
};

// --- learner -----------------------------------------------------------------

/// Single-instance learner. Votes are tallied per (ballot, value) by distinct
/// acceptor, so duplicated deliveries cannot forge a quorum. A second
/// distinct value reaching quorum is the safety violation this whole artifact
/// exists to rule out; it is reported through the conflict flag.
struct Learner {
  std::map<std::pair<Ballot, Value>, std::set<ProcessId>> votes;
  std::optional<Value> decided;
  std::optional<Ballot> decided_ballot;
  bool conflict = false;

  /// Returns the value if this tally decides the instance (fires once).
  std::optional<Value> on_accepted(ProcessId acceptor, const Ballot& ballot,
                                   const Value& value, int n_acceptors);
};

// --- proposer ----------------------------------------------------------------

/// Single-instance proposer for one value. Abortable: a Nack or a timeout
/// ends the round, and the next round uses a ballot above everything seen.
class Proposer {
 public:
  enum class Phase { Idle, Prepared, Accepting, Done };

  Proposer(ProcessId self, int n_acceptors)
      : self_(self), n_acceptors_(n_acceptors) {}

  /// Starts the first round. Throws std::logic_error if a round is in flight
  /// (abortable consensus requires a fresh round instead).
  Prepare propose(Value value);

  /// Abandons the current round and opens a new one with a higher ballot.
  Prepare next_round();

  /// Returns the Accept to send (to the promising quorum) when the quorum is
  /// reached; identifies the chosen value by the highest-ballot prior accept.
  struct AcceptPlan {
    Accept accept;
    std::vector<ProcessId> quorum;
  };
  std::optional<AcceptPlan> on_promise(ProcessId from, const Promise& promise);

  /// Records the competing round from a Nack. Returns true if the current
  /// round is now dead and a retry is warranted.
  bool on_nack(const Nack& nack);

  /// Raises the floor for future rounds (ballot fencing across leader terms).
  void bump_round(std::uint64_t round) {
    max_round_seen_ = std::max(max_round_seen_, round);
  }

  void mark_done() { phase_ = Phase::Done; }

  Phase phase() const { return phase_; }
  const Ballot& ballot() const { return ballot_; }
  const Value& value() const { return value_; }

 private:
  ProcessId self_;
  int n_acceptors_;
  Phase phase_ = Phase::Idle;
  Ballot ballot_{0, 0};
  Value value_;
  std::uint64_t max_round_seen_ = 0;
  std::vector<ProcessId> promisers_;
  std::optional<std::pair<Ballot, Value>> best_accepted_;
};

// --- snapshot / revert --------------------------------------------------------

struct SnapshotRecord {
  std::uint64_t round_number = 0;
  Value value;
};

/// Append-only store for decided-state snapshots; revert returns the most
/// recent record. The trace is the persistence channel.
class SnapshotStore {
 public:
  void snapshot(SnapshotRecord record) { records_.push_back(std::move(record)); }
  /// Throws std::logic_error when no snapshot exists.
  SnapshotRecord revert() const;
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<SnapshotRecord> records_;
};

// --- per-process machine -------------------------------------------------------

struct NodeConfig {
  /// Proposer pids and the value each proposes. Every process is an acceptor
  /// and a learner.
  std::map<ProcessId, Value> proposals;
  bool retry = true;
  Time retry_base = 60;
  Time retry_jitter = 40;
};

/// One cluster process: acceptor + learner, proposer when configured.
/// Decisions emit a Decide record and a snapshot StateNote.
class Node : public sim::Machine {
 public:
  explicit Node(NodeConfig config) : config_(std::move(config)) {}

  void init(sim::Context& ctx) override;
  void on_message(sim::Context& ctx, ProcessId from,
                  const sim::Payload& payload) override;
  void on_timer(sim::Context& ctx, std::string_view name) override;

  const std::optional<Value>& decided() const { return learner_.decided; }
  const Learner& learner() const { return learner_; }
  const Acceptor& acceptor() const { return acceptor_; }
  const SnapshotStore& snapshots() const { return snapshots_; }

  static constexpr const char* kRetryTimer = "px.retry";

 private:
  void send_prepare(sim::Context& ctx, const Prepare& prepare);
  void arm_retry(sim::Context& ctx);

  NodeConfig config_;
  Acceptor acceptor_;
  Learner learner_;
  std::optional<Proposer> proposer_;
  SnapshotStore snapshots_;
};

}  // namespace qsim::paxos
