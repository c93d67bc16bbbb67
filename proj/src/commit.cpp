// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/commit.hpp"

#include <algorithm>
#include <stdexcept>

#include "qsim/wire.hpp"

namespace qsim::commit {

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::Working: return "Working";
    case Phase::Prepared: return "Prepared";
    case Phase::PreCommitted: return "PreCommitted";
    case Phase::Committed: return "Committed";
    case Phase::Aborted: return "Aborted";
  }
  return "?";
}

Phase phase_from_string(const std::string& name) {
  if (name == "Working") return Phase::Working;
  if (name == "Prepared") return Phase::Prepared;
  if (name == "PreCommitted") return Phase::PreCommitted;
  if (name == "Committed") return Phase::Committed;
  if (name == "Aborted") return Phase::Aborted;
  throw std::invalid_argument("unknown phase: " + name);
}

std::optional<bool> ParticipantTx::vote(bool yes) {
  if (phase != Phase::Working) return std::nullopt;  // duplicate request
  if (yes) {
    phase = Phase::Prepared;
    return true;
  }
  phase = Phase::Aborted;  // a No vote aborts locally right away
  return false;
}

bool ParticipantTx::precommit() {
  if (phase != Phase::Prepared) return false;
  phase = Phase::PreCommitted;
  return true;
}

ParticipantTx::Outcome ParticipantTx::finalize(bool commit, bool three_phase) {
  if (terminal(phase)) return Outcome::Ignored;
  if (commit) {
    Phase required = three_phase ? Phase::PreCommitted : Phase::Prepared;
    if (phase != required) return Outcome::Violation;
    phase = Phase::Committed;
    return Outcome::Committed;
  }
  phase = Phase::Aborted;
  return Outcome::Aborted;
}

void CoordinatorTx::begin() {
  if (participants.empty())
    throw std::invalid_argument("commit: no participants configured");
  if (phase != Phase::Init)
    throw std::logic_error("commit: transaction already begun");
  phase = Phase::Voting;
}

bool CoordinatorTx::any_no() const {
  return std::any_of(votes.begin(), votes.end(),
                     [](const auto& kv) { return !kv.second; });
}

namespace {

std::string tx_body(int tx_id) {
  std::string body;
  wire::put_i64(body, tx_id);
  return body;
}

}  // namespace

// --- coordinator ---------------------------------------------------------------

void CoordinatorNode::send_to_participants(sim::Context& ctx,
                                           const sim::Payload& payload) {
  for (ProcessId p : config_.participants) ctx.send(p, payload);
}

void CoordinatorNode::init(sim::Context& ctx) {
  tx_.participants = config_.participants;
  tx_.begin();
  const char* request =
      config_.three_phase ? tag::can_precommit : tag::can_commit;
  send_to_participants(ctx, {request, tx_body(config_.tx_id)});
  ctx.set_timer(kVoteTimer, config_.vote_timeout);
}

void CoordinatorNode::decide_commit(sim::Context& ctx) {
  tx_.phase = CoordinatorTx::Phase::Committed;
  send_to_participants(ctx, {tag::do_commit, tx_body(config_.tx_id)});
  ctx.decide("tx=" + std::to_string(config_.tx_id) + " outcome=Committed");
}

void CoordinatorNode::decide_abort(sim::Context& ctx, const char* why) {
  tx_.phase = CoordinatorTx::Phase::Aborted;
  send_to_participants(ctx, {tag::do_abort, tx_body(config_.tx_id)});
  ctx.decide("tx=" + std::to_string(config_.tx_id) + " outcome=Aborted");
  ctx.note(std::string("abort cause=") + why);
}

void CoordinatorNode::on_message(sim::Context& ctx, ProcessId from,
                                 const sim::Payload& payload) {
  if (payload.tag == tag::vote) {
    if (tx_.phase != CoordinatorTx::Phase::Voting) return;
    wire::Reader reader(payload.body);
    reader.i64();  // tx id
    bool yes = reader.u64() != 0;
    tx_.record_vote(from, yes);
    if (tx_.any_no()) {
      ctx.cancel_timer(kVoteTimer);
      decide_abort(ctx, "vote-no");
    } else if (tx_.all_yes()) {
      ctx.cancel_timer(kVoteTimer);
      if (config_.three_phase) {
        tx_.phase = CoordinatorTx::Phase::AwaitAck;
        send_to_participants(ctx, {tag::do_precommit, tx_body(config_.tx_id)});
        ctx.set_timer(kAckTimer, config_.ack_timeout);
      } else {
        decide_commit(ctx);
      }
    }

  } else if (payload.tag == tag::ack) {
    if (tx_.phase != CoordinatorTx::Phase::AwaitAck) return;
    tx_.record_ack(from);
    if (tx_.all_acks_in()) {
      ctx.cancel_timer(kAckTimer);
      decide_commit(ctx);
    }

  } else if (payload.tag == tag::have_committed) {
    // Completion notice; the coordinator may forget the transaction now.
    ctx.note("haveCommitted from=" + std::to_string(from));
  }
}

void CoordinatorNode::on_timer(sim::Context& ctx, std::string_view name) {
  if (name == kVoteTimer && tx_.phase == CoordinatorTx::Phase::Voting) {
    decide_abort(ctx, "vote-timeout");
  } else if (name == kAckTimer && tx_.phase == CoordinatorTx::Phase::AwaitAck) {
    decide_abort(ctx, "ack-timeout");
  }
}

// --- participant ---------------------------------------------------------------

void ParticipantNode::send_to_participants(sim::Context& ctx,
                                           const sim::Payload& payload) {
  for (ProcessId p : config_.participants) ctx.send(p, payload);
}

void ParticipantNode::init(sim::Context& ctx) {
  auto it = config_.votes.find(ctx.self());
  my_vote_ = it == config_.votes.end() ? true : it->second;
  if (config_.three_phase)
    ctx.set_timer(kSilenceTimer, config_.silence_timeout);
}

void ParticipantNode::refresh_silence(sim::Context& ctx) {
  if (config_.three_phase && !terminal(tx_.phase) && !termination_started_)
    ctx.set_timer(kSilenceTimer, config_.silence_timeout);
}

void ParticipantNode::finalize(sim::Context& ctx, bool commit) {
  auto outcome = tx_.finalize(commit, config_.three_phase);
  switch (outcome) {
    case ParticipantTx::Outcome::Committed:
      ctx.decide("tx=" + std::to_string(config_.tx_id) + " outcome=Committed");
      ctx.send(config_.coordinator, {tag::have_committed, tx_body(config_.tx_id)});
      break;
    case ParticipantTx::Outcome::Aborted:
      ctx.decide("tx=" + std::to_string(config_.tx_id) + " outcome=Aborted");
      break;
    case ParticipantTx::Outcome::Ignored:
      return;
    case ParticipantTx::Outcome::Violation:
      ctx.fault("doCommit outside the prepared phase");
      return;
  }
  ctx.cancel_timer(kSilenceTimer);
  ctx.cancel_timer(kReportTimer);
}

void ParticipantNode::on_message(sim::Context& ctx, ProcessId from,
                                 const sim::Payload& payload) {
  if (payload.tag == tag::can_commit || payload.tag == tag::can_precommit) {
    refresh_silence(ctx);
    auto reply = tx_.vote(my_vote_);
    if (reply) {
      std::string body = tx_body(config_.tx_id);
      wire::put_u64(body, *reply ? 1 : 0);
      ctx.send(from, {tag::vote, body});
      if (!*reply)
        ctx.decide("tx=" + std::to_string(config_.tx_id) + " outcome=Aborted");
    }

  } else if (payload.tag == tag::do_precommit) {
    refresh_silence(ctx);
    if (tx_.precommit()) ctx.note("precommitted");
    if (tx_.phase == Phase::PreCommitted)
      ctx.send(from, {tag::ack, tx_body(config_.tx_id)});

  } else if (payload.tag == tag::ack) {
    if (!surrogate_committing_) return;
    surrogate_acks_.insert(from);
    bool all_acked = true;
    for (const auto& [pid, phase] : reports_)
      if (!surrogate_acks_.count(pid)) all_acked = false;
    if (all_acked) {
      surrogate_committing_ = false;
      send_to_participants(ctx, {tag::do_commit, tx_body(config_.tx_id)});
    }

  } else if (payload.tag == tag::do_commit) {
    finalize(ctx, true);

  } else if (payload.tag == tag::do_abort) {
    finalize(ctx, false);

  } else if (payload.tag == tag::query_state) {
    std::string body = tx_body(config_.tx_id);
    wire::put_str(body, to_string(tx_.phase));
    ctx.send(from, {tag::state_report, body});

  } else if (payload.tag == tag::state_report) {
    wire::Reader reader(payload.body);
    reader.i64();
    reports_[from] = phase_from_string(reader.str());

  } else if (payload.tag == election::ElectionMachine::kBallotTag) {
    if (terminal(tx_.phase)) return;
    if (!elector_) {  // someone else hit the silence timeout first
      termination_started_ = true;
      elector_.emplace(ctx.self(),
                       static_cast<int>(config_.participants.size()));
    }
    auto actions = elector_->on_ballot(election::ElectionMachine::decode(payload));
    if (actions.broadcast_ballot)
      send_to_participants(ctx, election::ElectionMachine::encode_ballot(
                                    *actions.broadcast_ballot));
    if (actions.announce_leader)
      send_to_participants(ctx, election::ElectionMachine::encode_set_leader(
                                    *actions.announce_leader));

  } else if (payload.tag == election::ElectionMachine::kSetLeaderTag) {
    if (terminal(tx_.phase)) return;
    if (!elector_) {
      termination_started_ = true;
      elector_.emplace(ctx.self(),
                       static_cast<int>(config_.participants.size()));
    }
    auto winner = election::ElectionMachine::decode(payload);
    if (elector_->on_set_leader(winner) && winner.pid == ctx.self() &&
        !terminal(tx_.phase)) {
      ctx.note("surrogate");
      send_to_participants(ctx, {tag::query_state, tx_body(config_.tx_id)});
      ctx.set_timer(kReportTimer, config_.report_timeout);
    }
  }
}

void ParticipantNode::surrogate_decide(sim::Context& ctx) {
  reports_[ctx.self()] = tx_.phase;
  bool any_precommitted = false;
  for (const auto& [pid, phase] : reports_)
    if (phase == Phase::PreCommitted || phase == Phase::Committed)
      any_precommitted = true;
  if (any_precommitted) {
    // Resume from the furthest phase: everyone pre-commits, then commits.
    surrogate_committing_ = true;
    ctx.note("surrogate-decision outcome=Committed");
    send_to_participants(ctx, {tag::do_precommit, tx_body(config_.tx_id)});
  } else {
    ctx.note("surrogate-decision outcome=Aborted");
    send_to_participants(ctx, {tag::do_abort, tx_body(config_.tx_id)});
  }
}

void ParticipantNode::on_timer(sim::Context& ctx, std::string_view name) {
  if (name == kSilenceTimer) {
    if (terminal(tx_.phase) || termination_started_) return;
    termination_started_ = true;
    ctx.note("coordinator-silent");
    elector_.emplace(ctx.self(), static_cast<int>(config_.participants.size()));
    auto actions = elector_->start_candidacy();
    if (actions.broadcast_ballot)
      send_to_participants(ctx, election::ElectionMachine::encode_ballot(
                                    *actions.broadcast_ballot));

  } else if (name == kReportTimer) {
    if (terminal(tx_.phase)) return;
    surrogate_decide(ctx);
  }
}

}  // namespace qsim::commit
