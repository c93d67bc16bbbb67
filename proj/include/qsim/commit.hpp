// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qsim/election.hpp"
#include "qsim/sim.hpp"

namespace qsim::commit {

using sim::ProcessId;
using sim::Time;

enum class Phase { Working, Prepared, PreCommitted, Committed, Aborted };

const char* to_string(Phase phase);
Phase phase_from_string(const std::string& name);

inline bool terminal(Phase phase) {
  return phase == Phase::Committed || phase == Phase::Aborted;
}

/// Participant-side transaction state machine. A Yes vote is binding: the
/// participant can only leave Prepared through a coordinator (or surrogate)
/// command.
struct ParticipantTx {
  Phase phase = Phase::Working;

  /// Returns the reply to send, or nullopt for a duplicate vote request
  /// after the phase moved on.
  std::optional<bool> vote(bool yes);

  /// Prepared -> PreCommitted (3PC). False when not applicable.
  bool precommit();

  enum class Outcome { Committed, Aborted, Ignored, Violation };

  /// doCommit/doAbort. Commit from Working is a protocol violation; commands
  /// repeated after a terminal state are ignored duplicates.
  Outcome finalize(bool commit, bool three_phase);
};

/// Coordinator-side state: the vote map and phase gates.
struct CoordinatorTx {
  enum class Phase { Init, Voting, AwaitAck, Committed, Aborted };

  Phase phase = Phase::Init;
  std::vector<ProcessId> participants;
  std::map<ProcessId, bool> votes;
  std::set<ProcessId> acks;

  /// Init -> Voting. Throws on an empty participant set or a second begin.
  void begin();

  void record_vote(ProcessId from, bool yes) { votes.emplace(from, yes); }
  bool all_votes_in() const { return votes.size() == participants.size(); }
  bool any_no() const;
  bool all_yes() const { return all_votes_in() && !any_no(); }

  void record_ack(ProcessId from) { acks.insert(from); }
  bool all_acks_in() const { return acks.size() == participants.size(); }
};

struct Config {
  bool three_phase = false;
  int tx_id = 1;
  ProcessId coordinator = 0;
  std::vector<ProcessId> participants;
  std::map<ProcessId, bool> votes;  // scripted vote per participant
  Time vote_timeout = 60;
  Time ack_timeout = 60;
  /// 3PC only: coordinator silence before the termination protocol runs.
  Time silence_timeout = 150;
  Time report_timeout = 60;
};

namespace tag {
inline constexpr const char* can_commit = "tx.canCommit";
inline constexpr const char* can_precommit = "tx.canPreCommit";
inline constexpr const char* vote = "tx.vote";
inline constexpr const char* do_precommit = "tx.doPreCommit";
inline constexpr const char* ack = "tx.ack";
inline constexpr const char* do_commit = "tx.doCommit";
inline constexpr const char* do_abort = "tx.doAbort";
inline constexpr const char* have_committed = "tx.haveCommitted";
inline constexpr const char* query_state = "tx.query";
inline constexpr const char* state_report = "tx.report";
}  // namespace tag

class CoordinatorNode : public sim::Machine {
 public:
  explicit CoordinatorNode(Config config) : config_(std::move(config)) {}

  void init(sim::Context& ctx) override;
  void on_message(sim::Context& ctx, ProcessId from,
                  const sim::Payload& payload) override;
  void on_timer(sim::Context& ctx, std::string_view name) override;

  const CoordinatorTx& tx() const { return tx_; }

  static constexpr const char* kVoteTimer = "tx.votes";
  static constexpr const char* kAckTimer = "tx.acks";

 private:
  void decide_commit(sim::Context& ctx);
  void decide_abort(sim::Context& ctx, const char* why);
  void send_to_participants(sim::Context& ctx, const sim::Payload& payload);

  Config config_;
  CoordinatorTx tx_;
};

/// A participant. In 3PC mode, coordinator silence triggers the termination
/// protocol: participants elect a surrogate among themselves; the surrogate
/// collects states and commits when any participant pre-committed, otherwise
/// aborts.
class ParticipantNode : public sim::Machine {
 public:
  explicit ParticipantNode(Config config) : config_(std::move(config)) {}

  void init(sim::Context& ctx) override;
  void on_message(sim::Context& ctx, ProcessId from,
                  const sim::Payload& payload) override;
  void on_timer(sim::Context& ctx, std::string_view name) override;

  Phase phase() const { return tx_.phase; }

  static constexpr const char* kSilenceTimer = "tx.silence";
  static constexpr const char* kReportTimer = "tx.reports";

 private:
  void finalize(sim::Context& ctx, bool commit);
  void refresh_silence(sim::Context& ctx);
  void send_to_participants(sim::Context& ctx, const sim::Payload& payload);
  void surrogate_decide(sim::Context& ctx);

  Config config_;
  ParticipantTx tx_;
  bool my_vote_ = true;

  // Termination protocol (3PC).
  std::optional<election::Elector> elector_;
  bool termination_started_ = false;
  std::map<ProcessId, Phase> reports_;
  std::set<ProcessId> surrogate_acks_;
  bool surrogate_committing_ = false;
};

}  // namespace qsim::commit
