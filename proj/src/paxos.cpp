// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/paxos.hpp"

#include <algorithm>
#include <stdexcept>

#include "qsim/wire.hpp"

namespace qsim::paxos {

namespace {

void put_ballot(std::string& body, const Ballot& b) {
  wire::put_u64(body, b.round);
  wire::put_i64(body, b.pid);
}

Ballot read_ballot(wire::Reader& reader) {
  Ballot b;
  b.round = reader.u64();
  b.pid = static_cast<ProcessId>(reader.i64());
  return b;
}

}  // namespace

sim::Payload encode(const Prepare& m) {
  std::string body;
  wire::put_u64(body, m.slot);
  put_ballot(body, m.ballot);
  return {tag::prepare, body};
}

sim::Payload encode(const Promise& m) {
  std::string body;
  wire::put_u64(body, m.slot);
  put_ballot(body, m.ballot);
  wire::put_u64(body, m.accepted ? 1 : 0);
  if (m.accepted) {
    put_ballot(body, m.accepted->first);
    wire::put_str(body, m.accepted->second);
  }
  return {tag::promise, body};
}

sim::Payload encode(const Nack& m) {
  std::string body;
  wire::put_u64(body, m.slot);
  put_ballot(body, m.promised);
  return {tag::nack, body};
}

sim::Payload encode(const Accept& m) {
  std::string body;
  wire::put_u64(body, m.slot);
  put_ballot(body, m.ballot);
  wire::put_str(body, m.value);
  return {tag::accept, body};
}

sim::Payload encode(const Accepted& m) {
  std::string body;
  wire::put_u64(body, m.slot);
  put_ballot(body, m.ballot);
  wire::put_str(body, m.value);
  return {tag::accepted, body};
}

Prepare decode_prepare(const sim::Payload& p) {
  wire::Reader reader(p.body);
  Prepare m;
  m.slot = reader.u64();
  m.ballot = read_ballot(reader);
  return m;
}

Promise decode_promise(const sim::Payload& p) {
  wire::Reader reader(p.body);
  Promise m;
  m.slot = reader.u64();
  m.ballot = read_ballot(reader);
  if (reader.u64() != 0) {
    Ballot b = read_ballot(reader);
    m.accepted = {b, reader.str()};
  }
  return m;
}

Nack decode_nack(const sim::Payload& p) {
  wire::Reader reader(p.body);
  Nack m;
  m.slot = reader.u64();
  m.promised = read_ballot(reader);
  return m;
}

Accept decode_accept(const sim::Payload& p) {
  wire::Reader reader(p.body);
  Accept m;
  m.slot = reader.u64();
  m.ballot = read_ballot(reader);
  m.value = reader.str();
  return m;
}

Accepted decode_accepted(const sim::Payload& p) {
  wire::Reader reader(p.body);
  Accepted m;
  m.slot = reader.u64();
  m.ballot = read_ballot(reader);
  m.value = reader.str();
  return m;
}

// --- acceptor ----------------------------------------------------------------

std::variant<Promise, Nack> Acceptor::on_prepare(const Ballot& ballot) {
  if (!promised || ballot > *promised) {
    promised = ballot;
    return Promise{0, ballot, accepted};
  }
  return Nack{0, *promised};
}

std::variant<Accepted, Nack> Acceptor::on_accept(const Ballot& ballot,
                                                 const Value& value) {
  if (!promised || ballot >= *promised) {
    promised = ballot;
    accepted = {ballot, value};
    return Accepted{0, ballot, value};
  }
  return Nack{0, *promised};
}

// --- learner -----------------------------------------------------------------

std::optional<Value> Learner::on_accepted(ProcessId acceptor,
                                          const Ballot& ballot,
                                          const Value& value,
                                          int n_acceptors) {
  auto& voters = votes[{ballot, value}];
  voters.insert(acceptor);
  if (static_cast<int>(voters.size()) < quorum_size(n_acceptors))
    return std::nullopt;
  if (!decided) {
    decided = value;
    decided_ballot = ballot;
    return value;
  }
  if (*decided != value) conflict = true;
  return std::nullopt;
}

// --- proposer ----------------------------------------------------------------

Prepare Proposer::propose(Value value) {
  if (phase_ != Phase::Idle)
    throw std::logic_error("proposer: a round is already in flight");
  value_ = std::move(value);
  return next_round();
}

Prepare Proposer::next_round() {
  ++max_round_seen_;
  ballot_ = Ballot{max_round_seen_, self_};
  phase_ = Phase::Prepared;
  promisers_.clear();
  best_accepted_.reset();
  return Prepare{0, ballot_};
}

std::optional<Proposer::AcceptPlan> Proposer::on_promise(
    ProcessId from, const Promise& promise) {
  if (phase_ != Phase::Prepared || promise.ballot != ballot_)
    return std::nullopt;  // stale round or already accepting
  if (std::find(promisers_.begin(), promisers_.end(), from) != promisers_.end())
    return std::nullopt;  // duplicate delivery
  promisers_.push_back(from);
  if (promise.accepted &&
      (!best_accepted_ || promise.accepted->first > best_accepted_->first))
    best_accepted_ = promise.accepted;
  if (static_cast<int>(promisers_.size()) < quorum_size(n_acceptors_))
    return std::nullopt;
  phase_ = Phase::Accepting;
  AcceptPlan plan;
  plan.accept = Accept{0, ballot_,
                       best_accepted_ ? best_accepted_->second : value_};
  plan.quorum = promisers_;
  return plan;
}

bool Proposer::on_nack(const Nack& nack) {
  max_round_seen_ = std::max(max_round_seen_, nack.promised.round);
  if (phase_ == Phase::Done || phase_ == Phase::Idle) return false;
  return true;
}

// --- snapshot store -------------------------------------------------------------

SnapshotRecord SnapshotStore::revert() const {
  if (records_.empty())
    throw std::logic_error("snapshot store: nothing to revert to");
  return records_.back();
}

// --- machine ---------------------------------------------------------------------

void Node::init(sim::Context& ctx) {
  auto it = config_.proposals.find(ctx.self());
  if (it == config_.proposals.end()) return;
  proposer_.emplace(ctx.self(), ctx.cluster_size());
  ctx.note("propose value=" + it->second);
  send_prepare(ctx, proposer_->propose(it->second));
}

void Node::send_prepare(sim::Context& ctx, const Prepare& prepare) {
  broadcast(ctx, encode(prepare));
  if (config_.retry) arm_retry(ctx);
}

void Node::arm_retry(sim::Context& ctx) {
  Time backoff = config_.retry_base +
                 static_cast<Time>(ctx.random() %
                                   static_cast<std::uint64_t>(
                                       std::max<Time>(config_.retry_jitter, 1)));
  ctx.set_timer(kRetryTimer, backoff);
}

void Node::on_timer(sim::Context& ctx, std::string_view name) {
  if (name != kRetryTimer || !proposer_) return;
  if (proposer_->phase() == Proposer::Phase::Done || learner_.decided) return;
  send_prepare(ctx, proposer_->next_round());
}

void Node::on_message(sim::Context& ctx, ProcessId from,
                      const sim::Payload& payload) {
  if (payload.tag == tag::prepare) {
    Prepare m = decode_prepare(payload);
    auto reply = acceptor_.on_prepare(m.ballot);
    if (auto* promise = std::get_if<Promise>(&reply)) {
      promise->slot = m.slot;
      ctx.send(from, encode(*promise));
    } else {
      auto nack = std::get<Nack>(reply);
      nack.slot = m.slot;
      ctx.send(from, encode(nack));
    }

  } else if (payload.tag == tag::promise) {
    if (!proposer_) return;
    auto plan = proposer_->on_promise(from, decode_promise(payload));
    if (plan)
      for (ProcessId target : plan->quorum) ctx.send(target, encode(plan->accept));

  } else if (payload.tag == tag::nack) {
    if (!proposer_) return;
    if (proposer_->on_nack(decode_nack(payload)) && config_.retry)
      arm_retry(ctx);

  } else if (payload.tag == tag::accept) {
    Accept m = decode_accept(payload);
    auto reply = acceptor_.on_accept(m.ballot, m.value);
    if (auto* accepted = std::get_if<Accepted>(&reply)) {
      accepted->slot = m.slot;
      broadcast(ctx, encode(*accepted));  // every process learns
    } else {
      auto nack = std::get<Nack>(reply);
      nack.slot = m.slot;
      ctx.send(from, encode(nack));
    }

  } else if (payload.tag == tag::accepted) {
    Accepted m = decode_accepted(payload);
    auto value =
        learner_.on_accepted(from, m.ballot, m.value, ctx.cluster_size());
    if (learner_.conflict) {
      ctx.fault("conflicting decision for value=" + m.value);
      return;
    }
    if (value) {
      ctx.decide("slot=0 value=" + *value + " ballot=" + m.ballot.to_string());
      snapshots_.snapshot({m.ballot.round, *value});
      ctx.note("snapshot round=" + std::to_string(m.ballot.round) +
               " value=" + *value);
      if (proposer_) {
        proposer_->mark_done();
        ctx.cancel_timer(kRetryTimer);
      }
    }
  }
}

}  // namespace qsim::paxos
