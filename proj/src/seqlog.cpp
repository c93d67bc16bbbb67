// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/seqlog.hpp"

#include <algorithm>
#include <stdexcept>

#include "qsim/wire.hpp"

namespace qsim::seqlog {

namespace {
constexpr const char* kFdTimer = "raft.fd";
}

void ReplicatedLog::append_decided(std::uint64_t slot, Value value) {
  if (slot != entries_.size())
    throw std::invalid_argument("log: slot " + std::to_string(slot) +
                                " is not the next contiguous slot");
  entries_.push_back(std::move(value));
}

bool ReplicatedLog::contains(const Value& value) const {
  return std::find(entries_.begin(), entries_.end(), value) != entries_.end();
}

bool prefix_consistent(const std::vector<const ReplicatedLog*>& logs) {
  for (std::size_t i = 0; i < logs.size(); ++i) {
    for (std::size_t j = i + 1; j < logs.size(); ++j) {
      const auto& a = logs[i]->entries();
      const auto& b = logs[j]->entries();
      std::size_t len = std::min(a.size(), b.size());
      for (std::size_t k = 0; k < len; ++k)
        if (a[k] != b[k]) return false;
    }
  }
  return true;
}

const char* to_string(Role role) {
  switch (role) {
    case Role::Leader: return "Leader";
    case Role::Acceptor: return "Acceptor";
    case Role::Learner: return "Learner";
  }
  return "?";
}

Role assign_role(ProcessId rank, ProcessId leader, int n, RoleRule rule) {
  if (leader < 0 || leader >= n)
    throw std::invalid_argument("assign_role: leader out of range");
  if (rank == leader) return Role::Leader;
  switch (rule) {
    case RoleRule::EvenRankAcceptors:
      return rank % 2 == 0 ? Role::Acceptor : Role::Learner;
    case RoleRule::SuccessorLearner:
      return rank == (leader + 1) % n ? Role::Learner : Role::Acceptor;
  }
  return Role::Learner;
}

std::vector<ProcessId> acceptor_set(ProcessId leader, int n, Grouping grouping) {
  std::vector<ProcessId> out;
  for (ProcessId p = 0; p < n; ++p) {
    switch (grouping) {
      case Grouping::AllVoters:
        out.push_back(p);
        break;
      case Grouping::EvenRankAcceptors:
        if (assign_role(p, leader, n, RoleRule::EvenRankAcceptors) ==
            Role::Acceptor)
          out.push_back(p);
        break;
      case Grouping::SuccessorLearner:
        if (assign_role(p, leader, n, RoleRule::SuccessorLearner) ==
            Role::Acceptor)
          out.push_back(p);
        break;
    }
  }
  return out;
}

// --- replica machine ---------------------------------------------------------

void ReplicaNode::init(sim::Context& ctx) {
  cluster_size_hint_ = ctx.cluster_size();
  if (config_.raft) {
    detector_.emplace(ctx.self(), ctx.cluster_size(), config_.fd);
    elector_.emplace(ctx.self(), ctx.cluster_size());
    if (ctx.cluster_size() > 1)
      ctx.set_timer(kFdTimer, config_.fd.heartbeat_interval);
    Time jitter = config_.candidacy_jitter > 0
                      ? static_cast<Time>(ctx.random() %
                                          static_cast<std::uint64_t>(
                                              config_.candidacy_jitter))
                      : 0;
    ctx.set_timer(kCandidacyTimer, config_.candidacy_wait + jitter);
  } else {
    settled_leader_ = config_.fixed_proposer;
    if (ctx.self() == config_.fixed_proposer) on_leadership(ctx);
  }
}

std::optional<ProcessId> ReplicaNode::leader() const {
  if (config_.raft) return elector_ ? elector_->leader() : std::nullopt;
  return settled_leader_;
}

bool ReplicaNode::is_leader(const sim::Context& ctx) const {
  auto l = leader();
  return l && *l == ctx.self();
}

bool ReplicaNode::replication_complete() const {
  if (log_.decided_upto() < config_.values.size()) return false;
  for (const auto& value : config_.values)
    if (!log_.contains(value)) return false;
  return true;
}

std::vector<ProcessId> ReplicaNode::current_acceptors() const {
  auto l = leader();
  int cluster = cluster_size_hint_;
  if (!l || config_.grouping == Grouping::AllVoters) {
    std::vector<ProcessId> all(static_cast<std::size_t>(cluster));
    for (int p = 0; p < cluster; ++p) all[static_cast<std::size_t>(p)] = p;
    return all;
  }
  return acceptor_set(*l, cluster, config_.grouping);
}

std::optional<Value> ReplicaNode::next_pending_value() const {
  for (const auto& value : config_.values) {
    if (log_.contains(value)) continue;
    bool buffered = false;
    for (const auto& [slot, v] : decided_buffer_)
      if (v == value) buffered = true;
    if (!buffered) return value;
  }
  return std::nullopt;
}

void ReplicaNode::on_leadership(sim::Context& ctx) {
  if (elector_ && elector_->adopted_ballot())
    term_round_ = elector_->adopted_ballot()->round;
  cluster_size_hint_ = ctx.cluster_size();
  drive(ctx);
}

void ReplicaNode::drive(sim::Context& ctx) {
  cluster_size_hint_ = ctx.cluster_size();
  if (!is_leader(ctx) || proposing_slot_) return;
  auto value = next_pending_value();
  if (!value) {
    if (replication_complete()) ctx.note("replication-complete");
    return;
  }
  std::uint64_t slot = log_.decided_upto();
  while (decided_buffer_.count(slot)) ++slot;

  auto acceptors = current_acceptors();
  slot_proposer_.emplace(ctx.self(), static_cast<int>(acceptors.size()));
  slot_proposer_->bump_round(term_round_);
  paxos::Prepare prepare = slot_proposer_->propose(*value);
  prepare.slot = slot;
  proposing_slot_ = slot;
  for (ProcessId target : acceptors) ctx.send(target, paxos::encode(prepare));
  ctx.set_timer(kProgressTimer, config_.progress_timeout);
}

void ReplicaNode::apply_decision(sim::Context& ctx, std::uint64_t slot,
                                 const Value& value) {
  decided_buffer_[slot] = value;
  while (decided_buffer_.count(log_.decided_upto())) {
    std::uint64_t next = log_.decided_upto();
    log_.append_decided(next, decided_buffer_[next]);
    decided_buffer_.erase(next);
  }
  if (proposing_slot_ && (*proposing_slot_ < log_.decided_upto() ||
                          decided_buffer_.count(*proposing_slot_))) {
    proposing_slot_.reset();
    slot_proposer_.reset();
    ctx.cancel_timer(kProgressTimer);
  }
  drive(ctx);
}

void ReplicaNode::handle_paxos(sim::Context& ctx, ProcessId from,
                               const sim::Payload& payload) {
  if (payload.tag == paxos::tag::prepare) {
    auto m = paxos::decode_prepare(payload);
    auto reply = acceptors_[m.slot].on_prepare(m.ballot);
    if (auto* promise = std::get_if<paxos::Promise>(&reply)) {
      promise->slot = m.slot;
      ctx.send(from, paxos::encode(*promise));
    } else {
      auto nack = std::get<paxos::Nack>(reply);
      nack.slot = m.slot;
      ctx.send(from, paxos::encode(nack));
    }

  } else if (payload.tag == paxos::tag::promise) {
    auto m = paxos::decode_promise(payload);
    if (!slot_proposer_ || !proposing_slot_ || *proposing_slot_ != m.slot)
      return;
    auto plan = slot_proposer_->on_promise(from, m);
    if (plan) {
      plan->accept.slot = m.slot;
      for (ProcessId target : plan->quorum)
        ctx.send(target, paxos::encode(plan->accept));
    }

  } else if (payload.tag == paxos::tag::nack) {
    auto m = paxos::decode_nack(payload);
    if (!slot_proposer_ || !proposing_slot_ || *proposing_slot_ != m.slot)
      return;
    if (slot_proposer_->on_nack(m))
      ctx.set_timer(kProgressTimer, config_.progress_timeout / 2 + 1);

  } else if (payload.tag == paxos::tag::accept) {
    auto m = paxos::decode_accept(payload);
    auto reply = acceptors_[m.slot].on_accept(m.ballot, m.value);
    if (auto* accepted = std::get_if<paxos::Accepted>(&reply)) {
      accepted->slot = m.slot;
      broadcast(ctx, paxos::encode(*accepted));
    } else {
      auto nack = std::get<paxos::Nack>(reply);
      nack.slot = m.slot;
      ctx.send(from, paxos::encode(nack));
    }

  } else if (payload.tag == paxos::tag::accepted) {
    auto m = paxos::decode_accepted(payload);
    auto& learner = learners_[m.slot];
    auto decided = learner.on_accepted(
        from, m.ballot, m.value, static_cast<int>(current_acceptors().size()));
    if (learner.conflict) {
      ctx.fault("conflicting decision slot=" + std::to_string(m.slot));
      return;
    }
    if (decided) {
      ctx.decide("slot=" + std::to_string(m.slot) + " value=" + *decided +
                 " ballot=" + m.ballot.to_string());
      apply_decision(ctx, m.slot, *decided);
    }
  }
}

void ReplicaNode::handle_heartbeat(sim::Context& ctx, ProcessId from) {
  if (!detector_) return;
  if (detector_->on_heartbeat(from, ctx.now()))
    ctx.note("restore p=" + std::to_string(from));
}

void ReplicaNode::handle_election(sim::Context& ctx,
                                  const sim::Payload& payload) {
  using election::ElectionMachine;
  if (payload.tag == ElectionMachine::kBallotTag) {
    auto actions = elector_->on_ballot(ElectionMachine::decode(payload));
    if (actions.broadcast_ballot)
      broadcast(ctx, ElectionMachine::encode_ballot(*actions.broadcast_ballot));
    if (actions.announce_leader)
      broadcast(ctx,
                ElectionMachine::encode_set_leader(*actions.announce_leader));
  } else if (payload.tag == ElectionMachine::kSetLeaderTag) {
    auto winner = ElectionMachine::decode(payload);
    bool was_leader = is_leader(ctx);
    bool adopted = elector_->on_set_leader(winner);
    if (!elector_->election_open()) ctx.cancel_timer(kCandidacyTimer);
    if (!adopted) return;
    settled_leader_ = winner.pid;
    ctx.note("leader=" + std::to_string(winner.pid) +
             " ballot=" + winner.to_string());
    if (winner.pid == ctx.self()) {
      on_leadership(ctx);
    } else if (was_leader) {
      // Deposed: stop proposing; the new leader re-runs open slots.
      proposing_slot_.reset();
      slot_proposer_.reset();
      ctx.cancel_timer(kProgressTimer);
    }
  }
}

void ReplicaNode::on_message(sim::Context& ctx, ProcessId from,
                             const sim::Payload& payload) {
  cluster_size_hint_ = ctx.cluster_size();
  if (payload.tag == fdetect::DetectorMachine::kHeartbeatTag) {
    handle_heartbeat(ctx, from);
  } else if (payload.tag.rfind("el.", 0) == 0) {
    if (elector_) handle_election(ctx, payload);
  } else if (payload.tag.rfind("px.", 0) == 0) {
    handle_paxos(ctx, from, payload);
  }
}

void ReplicaNode::on_timer(sim::Context& ctx, std::string_view name) {
  cluster_size_hint_ = ctx.cluster_size();
  if (name == kFdTimer) {
    auto result = detector_->on_interval(ctx.now());
    for (ProcessId peer : result.heartbeat_targets)
      ctx.send(peer, {fdetect::DetectorMachine::kHeartbeatTag, ""});
    for (ProcessId peer : result.newly_suspected) {
      ctx.note("suspect p=" + std::to_string(peer));
      auto l = leader();
      if (l && *l == peer) {
        elector_->leader_lost();
        settled_leader_.reset();
        Time jitter =
            config_.candidacy_jitter > 0
                ? static_cast<Time>(ctx.random() %
                                    static_cast<std::uint64_t>(
                                        config_.candidacy_jitter))
                : 0;
        ctx.set_timer(kCandidacyTimer, config_.candidacy_wait / 2 + 1 + jitter);
      }
    }
    ctx.set_timer(kFdTimer, config_.fd.heartbeat_interval);

  } else if (name == kCandidacyTimer) {
    if (!elector_) return;
    auto actions = elector_->start_candidacy();
    if (actions.broadcast_ballot)
      broadcast(ctx, election::ElectionMachine::encode_ballot(
                         *actions.broadcast_ballot));

  } else if (name == kProgressTimer) {
    if (!is_leader(ctx) || !proposing_slot_ || !slot_proposer_) return;
    paxos::Prepare prepare = slot_proposer_->next_round();
    prepare.slot = *proposing_slot_;
    for (ProcessId target : current_acceptors())
      ctx.send(target, paxos::encode(prepare));
    ctx.set_timer(kProgressTimer, config_.progress_timeout);
  }
}

}  // namespace qsim::seqlog
