// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsim/sim.hpp"

namespace qsim::election {

using sim::ProcessId;
using sim::Time;

/// Strict majority. Throws std::invalid_argument for n < 1.
int quorum_size(int n);

/// Totally ordered proposal identifier: lexicographic on (round, pid).
struct Ballot {
  std::uint64_t round = 0;
  ProcessId pid = 0;

  auto operator<=>(const Ballot&) const = default;
  std::string to_string() const {
    return std::to_string(round) + "." + std::to_string(pid);
  }
};

enum class Phase { Idle, Candidate, Settled };

/// Ballot-based leader election logic (a bully variant). Every ballot message
/// observed counts toward the quorum; once a quorum of ballots has been seen
/// and the leader differs from the highest ballot's issuer, that issuer is
/// announced. A node that is leaderless when a ballot arrives joins the
/// election with its own ballot, so any started election eventually reaches
/// quorum at every correct node.
///
/// Pure transition logic; the caller turns the returned actions into
/// messages. One instance per process; the electorate defaults to the whole
/// cluster but can be restricted (e.g. transaction participants electing a
/// recovery surrogate among themselves).
class Elector {
 public:
  Elector(ProcessId owner, int electorate_size);

  struct Actions {
    std::optional<Ballot> broadcast_ballot;  // candidacy announcement
    std::optional<Ballot> announce_leader;   // quorum reached: set-leader
  };

  /// Candidacy trigger (timer expiry with a dead or unknown leader).
  /// No-op unless the election is open.
  Actions start_candidacy();

  /// A ballot message from the electorate (possibly our own broadcast).
  Actions on_ballot(const Ballot& ballot);

  /// A set-leader announcement. Adopted only if it outranks the currently
  /// adopted one; counters reset on adoption.
  bool on_set_leader(const Ballot& winner);

  /// The current leader is gone (failure detector suspicion or a fresh
  /// cluster): reopens the election.
  void leader_lost();

  std::optional<ProcessId> leader() const {
    return adopted_ ? std::optional<ProcessId>(adopted_->pid) : std::nullopt;
  }
  std::optional<Ballot> adopted_ballot() const { return adopted_; }
  Phase phase() const { return phase_; }
  int promise_count() const { return promise_count_; }
  std::optional<Ballot> max_ballot_seen() const { return max_ballot_seen_; }
  bool election_open() const { return phase_ != Phase::Settled; }

 private:
  Ballot fresh_ballot();

  ProcessId owner_;
  int electorate_;
  Phase phase_ = Phase::Idle;
  std::optional<Ballot> adopted_;
  std::optional<Ballot> max_ballot_seen_;
  int promise_count_ = 0;
  std::uint64_t max_round_seen_ = 0;  // survives elections; rounds only grow
};

/// Election machine for a whole cluster: candidacy timers staggered per
/// process, ballots and set-leader messages on the wire, settlement surfaced
/// as StateNote records ("leader=<pid> ballot=<r.p>").
class ElectionMachine : public sim::Machine {
 public:
  explicit ElectionMachine(Time candidacy_delay) : delay_(candidacy_delay) {}

  void init(sim::Context& ctx) override;
  void on_message(sim::Context& ctx, ProcessId from,
                  const sim::Payload& payload) override;
  void on_timer(sim::Context& ctx, std::string_view name) override;

  const Elector& elector() const { return *elector_; }

  static constexpr const char* kBallotTag = "el.ballot";
  static constexpr const char* kSetLeaderTag = "el.leader";
  static constexpr const char* kCandidacyTimer = "el.candidacy";

  static sim::Payload encode_ballot(const Ballot& b);
  static sim::Payload encode_set_leader(const Ballot& b);
  static Ballot decode(const sim::Payload& payload);

 private:
  void apply(sim::Context& ctx, const Elector::Actions& actions);

  Time delay_;
  std::optional<Elector> elector_;
};

}  // namespace qsim::election
