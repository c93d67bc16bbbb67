// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qsim/election.hpp"
#include "qsim/fdetect.hpp"
#include "qsim/paxos.hpp"
#include "qsim/sim.hpp"

namespace qsim::seqlog {

using paxos::Value;
using sim::ProcessId;
using sim::Time;

/// Append-only log of decided values with no gaps: decided_upto always equals
/// the entry count, and a decided slot is never rewritten.
class ReplicatedLog {
 public:
  /// Appends the decided value for the next contiguous slot. Throws
  /// std::invalid_argument when slot != decided_upto (callers buffer
  /// out-of-order decisions instead of writing them).
  void append_decided(std::uint64_t slot, Value value);

  std::uint64_t decided_upto() const { return entries_.size(); }
  const std::vector<Value>& entries() const { return entries_; }
  bool contains(const Value& value) const;

 private:
  std::vector<Value> entries_;
};

/// True iff every pair of logs is prefix-comparable (the shorter one is a
/// prefix of the longer).
bool prefix_consistent(const std::vector<const ReplicatedLog*>& logs);

enum class Role { Leader, Acceptor, Learner };
const char* to_string(Role role);

/// Post-election role grouping rules.
///   EvenRankAcceptors: even non-leader ranks vote, odd ranks only learn.
///   SuccessorLearner:  the rank after the leader learns, the rest vote.
enum class RoleRule { EvenRankAcceptors, SuccessorLearner };

Role assign_role(ProcessId rank, ProcessId leader, int n, RoleRule rule);

/// Voting-set policy for the replica machine. AllVoters keeps the acceptor
/// set independent of which process leads, so quorums intersect across
/// re-elections; the grouped rules mirror assign_role.
enum class Grouping { AllVoters, EvenRankAcceptors, SuccessorLearner };

std::vector<ProcessId> acceptor_set(ProcessId leader, int n, Grouping grouping);

struct ReplicaConfig {
  std::vector<Value> values;  // the submission stream, known cluster-wide
  bool raft = false;          // false: fixed proposer, no election
  ProcessId fixed_proposer = 0;
  Grouping grouping = Grouping::AllVoters;
  fdetect::Config fd;
  Time candidacy_wait = 60;
  Time candidacy_jitter = 30;
  Time progress_timeout = 150;  // leader re-prepares a stuck slot
};

/// One replica: per-slot Paxos acceptor/learner plus the leader-side proposer
/// that replays the submission stream. In raft mode a failure detector and
/// the election module choose the proposer, and a leader crash triggers
/// re-election; the new leader re-runs undecided slots from its own log.
class ReplicaNode : public sim::Machine {
 public:
  explicit ReplicaNode(ReplicaConfig config) : config_(std::move(config)) {}

  void init(sim::Context& ctx) override;
  void on_message(sim::Context& ctx, ProcessId from,
                  const sim::Payload& payload) override;
  void on_timer(sim::Context& ctx, std::string_view name) override;

  const ReplicatedLog& log() const { return log_; }
  std::optional<ProcessId> leader() const;
  bool replication_complete() const;

  static constexpr const char* kCandidacyTimer = "raft.candidacy";
  static constexpr const char* kProgressTimer = "raft.progress";

 private:
  bool is_leader(const sim::Context& ctx) const;
  void on_leadership(sim::Context& ctx);
  void drive(sim::Context& ctx);
  void apply_decision(sim::Context& ctx, std::uint64_t slot, const Value& value);
  void handle_paxos(sim::Context& ctx, ProcessId from,
                    const sim::Payload& payload);
  void handle_election(sim::Context& ctx, const sim::Payload& payload);
  void handle_heartbeat(sim::Context& ctx, ProcessId from);
  std::optional<Value> next_pending_value() const;
  std::vector<ProcessId> current_acceptors() const;

  ReplicaConfig config_;
  ReplicatedLog log_;
  std::map<std::uint64_t, Value> decided_buffer_;  // out-of-order decisions
  std::map<std::uint64_t, paxos::Acceptor> acceptors_;
  std::map<std::uint64_t, paxos::Learner> learners_;

  // Leader side: one in-flight instance at a time.
  std::optional<std::uint64_t> proposing_slot_;
  std::optional<paxos::Proposer> slot_proposer_;
  std::uint64_t term_round_ = 0;

  // Raft mode.
  std::optional<fdetect::Detector> detector_;
  std::optional<election::Elector> elector_;
  std::optional<ProcessId> settled_leader_;
  int cluster_size_hint_ = 0;
};

}  // namespace qsim::seqlog
