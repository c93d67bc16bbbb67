// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/election.hpp"

#include <stdexcept>

#include "qsim/wire.hpp"

namespace qsim::election {

int quorum_size(int n) {
  if (n < 1) throw std::invalid_argument("quorum_size: n must be >= 1");
  return n / 2 + 1;
}

Elector::Elector(ProcessId owner, int electorate_size)
    : owner_(owner), electorate_(electorate_size) {
  if (electorate_size < 1)
    throw std::invalid_argument("elector: electorate must be non-empty");
}

Ballot Elector::fresh_ballot() {
  ++max_round_seen_;
  return Ballot{max_round_seen_, owner_};
}

Elector::Actions Elector::start_candidacy() {
  Actions actions;
  if (phase_ != Phase::Idle) return actions;  // settled or already a candidate
  phase_ = Phase::Candidate;
  actions.broadcast_ballot = fresh_ballot();
  return actions;
}

Elector::Actions Elector::on_ballot(const Ballot& ballot) {
  Actions actions;
  max_round_seen_ = std::max(max_round_seen_, ballot.round);
  if (!max_ballot_seen_ || ballot > *max_ballot_seen_)
    max_ballot_seen_ = ballot;
  ++promise_count_;

  // A leaderless node that hears an election joins it with its own ballot.
  if (phase_ == Phase::Idle) {
    phase_ = Phase::Candidate;
    actions.broadcast_ballot = fresh_ballot();
    if (*actions.broadcast_ballot > *max_ballot_seen_)
      max_ballot_seen_ = actions.broadcast_ballot;
  }

  // Re-checked on every ballot, not just the quorum transition, so a higher
  // ballot arriving late still wins everywhere. A settled leader is only
  // displaced by a strictly higher ballot.
  if (promise_count_ >= quorum_size(electorate_) &&
      (!adopted_ || (*max_ballot_seen_ > *adopted_ &&
                     max_ballot_seen_->pid != adopted_->pid))) {
    adopted_ = max_ballot_seen_;
    actions.announce_leader = max_ballot_seen_;
  }
  return actions;
}

bool Elector::on_set_leader(const Ballot& winner) {
  max_round_seen_ = std::max(max_round_seen_, winner.round);
  if (adopted_ && *adopted_ >= winner) {
    // Duplicate or stale announcement; settling is idempotent.
    if (phase_ != Phase::Settled && adopted_ == winner) phase_ = Phase::Settled;
    return false;
  }
  adopted_ = winner;
  phase_ = Phase::Settled;
  promise_count_ = 0;
  max_ballot_seen_.reset();
  return true;
}

void Elector::leader_lost() {
  phase_ = Phase::Idle;
  promise_count_ = 0;
  max_ballot_seen_.reset();
  adopted_.reset();
}

sim::Payload ElectionMachine::encode_ballot(const Ballot& b) {
  std::string body;
  wire::put_u64(body, b.round);
  wire::put_i64(body, b.pid);
  return {kBallotTag, body};
}

sim::Payload ElectionMachine::encode_set_leader(const Ballot& b) {
  std::string body;
  wire::put_u64(body, b.round);
  wire::put_i64(body, b.pid);
  return {kSetLeaderTag, body};
}

Ballot ElectionMachine::decode(const sim::Payload& payload) {
  wire::Reader reader(payload.body);
  Ballot b;
  b.round = reader.u64();
  b.pid = static_cast<ProcessId>(reader.i64());
  return b;
}

void ElectionMachine::init(sim::Context& ctx) {
  elector_.emplace(ctx.self(), ctx.cluster_size());
  ctx.set_timer(kCandidacyTimer, delay_);
}

void ElectionMachine::apply(sim::Context& ctx,
                            const Elector::Actions& actions) {
  if (actions.broadcast_ballot)
    broadcast(ctx, encode_ballot(*actions.broadcast_ballot));
  if (actions.announce_leader) {
    broadcast(ctx, encode_set_leader(*actions.announce_leader));
    ctx.note("leader=" + std::to_string(actions.announce_leader->pid) +
             " ballot=" + actions.announce_leader->to_string());
  }
}

void ElectionMachine::on_message(sim::Context& ctx, ProcessId /*from*/,
                                 const sim::Payload& payload) {
  if (payload.tag == kBallotTag) {
    apply(ctx, elector_->on_ballot(decode(payload)));
  } else if (payload.tag == kSetLeaderTag) {
    Ballot winner = decode(payload);
    bool adopted = elector_->on_set_leader(winner);
    if (!elector_->election_open()) ctx.cancel_timer(kCandidacyTimer);
    if (adopted)
      ctx.note("leader=" + std::to_string(winner.pid) +
               " ballot=" + winner.to_string());
  }
}

void ElectionMachine::on_timer(sim::Context& ctx, std::string_view name) {
  if (name != kCandidacyTimer) return;
  apply(ctx, elector_->start_candidacy());
}

}  // namespace qsim::election
