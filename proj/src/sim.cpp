// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/sim.hpp"

#include <algorithm>
#include <stdexcept>

namespace qsim::sim {

const char* to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::FairLoss: return "fair-loss";
    case ChannelKind::Stubborn: return "stubborn";
    case ChannelKind::Perfect: return "perfect";
  }
  return "?";
}

const char* to_string(HaltCause cause) {
  switch (cause) {
    case HaltCause::Predicate: return "Predicate";
    case HaltCause::Exhausted: return "Exhausted";
    case HaltCause::Budget: return "Budget";
    case HaltCause::Fault: return "Fault";
  }
  return "?";
}

void ChannelSpec::validate() const {
  if (drop_probability < 0.0 || drop_probability > 1.0)
    throw std::invalid_argument("channel: drop_probability outside [0,1]");
  if (duplicate_probability < 0.0 || duplicate_probability > 1.0)
    throw std::invalid_argument("channel: duplicate_probability outside [0,1]");
  if (max_delay < 1)
    throw std::invalid_argument("channel: max_delay must be >= 1");
  if (kind == ChannelKind::Perfect &&
      (drop_probability != 0.0 || duplicate_probability != 0.0))
    throw std::invalid_argument(
        "channel: a perfect link neither drops nor duplicates");
  if (kind == ChannelKind::Stubborn && retransmit_interval < 1)
    throw std::invalid_argument(
        "channel: stubborn link needs retransmit_interval >= 1");
}

void SimConfig::validate() const {
  if (n_processes < 1)
    throw std::invalid_argument("config: n_processes must be >= 1");
  channel.validate();
  for (const auto& [pid, at] : crash_schedule) {
    if (pid < 0 || pid >= n_processes)
      throw std::invalid_argument("config: crash pid out of range");
    if (at < 0) throw std::invalid_argument("config: crash time negative");
  }
  for (const auto& window : partition_schedule) {
    if (window.start < 0 || window.end < window.start)
      throw std::invalid_argument("config: bad partition window");
    Simulator::validate_partition(window.groups, n_processes);
  }
}

void Simulator::validate_partition(const Partition& groups, int n) {
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const auto& group : groups) {
    for (ProcessId pid : group) {
      if (pid < 0 || pid >= n)
        throw std::invalid_argument("partition: pid out of range");
      if (seen[static_cast<std::size_t>(pid)])
        throw std::invalid_argument("partition: groups overlap");
      seen[static_cast<std::size_t>(pid)] = true;
    }
  }
  for (bool s : seen)
    if (!s) throw std::invalid_argument("partition: groups must cover all pids");
}

/// Context implementation bound to one machine invocation.
class Simulator::MachineContext : public Context {
 public:
  MachineContext(Simulator& sim, ProcessId self) : sim_(sim), self_(self) {}

  Time now() const override { return sim_.now_; }
  ProcessId self() const override { return self_; }
  int cluster_size() const override { return sim_.config_.n_processes; }

  void send(ProcessId dst, Payload payload) override {
    if (dst < 0 || dst >= sim_.config_.n_processes)
      throw std::invalid_argument("send: destination out of range");
    sim_.enqueue_send(self_, dst, std::move(payload));
  }

  void set_timer(std::string_view name, Time delay) override {
    if (delay < 0) throw std::invalid_argument("set_timer: negative delay");
    auto key = std::make_pair(self_, std::string(name));
    std::uint64_t gen = ++sim_.timer_gen_[key];
    Event ev;
    ev.at = sim_.now_ + delay;
    ev.id = sim_.next_id();
    ev.actor = self_;
    ev.kind = Event::Kind::Timer;
    ev.timer_name = key.second;
    ev.timer_gen = gen;
    sim_.queue_.push(std::move(ev));
  }

  void cancel_timer(std::string_view name) override {
    auto key = std::make_pair(self_, std::string(name));
    auto it = sim_.timer_gen_.find(key);
    if (it != sim_.timer_gen_.end()) ++it->second;
  }

  std::uint64_t random() override { return sim_.rng_.next(); }

  void note(std::string detail) override {
    sim_.append({sim_.now_, TraceKind::StateNote, self_, std::move(detail)});
  }

  void decide(std::string detail) override {
    sim_.append({sim_.now_, TraceKind::Decide, self_, std::move(detail)});
  }

  void fault(std::string detail) override {
    sim_.append(
        {sim_.now_, TraceKind::StateNote, self_, "fault: " + std::move(detail)});
    if (!sim_.fault_index_) sim_.fault_index_ = sim_.trace_.size() - 1;
  }

 private:
  Simulator& sim_;
  ProcessId self_;
};

Simulator::Simulator(SimConfig config,
                     std::vector<std::unique_ptr<Machine>> machines)
    : config_(std::move(config)),
      machines_(std::move(machines)),
      rng_(config_.seed) {
  config_.validate();
  if (static_cast<int>(machines_.size()) != config_.n_processes)
    throw std::invalid_argument("simulator: one machine per process required");
  status_.resize(machines_.size());
  for (const auto& [pid, at] : config_.crash_schedule) crash(pid, at);
  for (ProcessId pid = 0; pid < config_.n_processes; ++pid)
    run_machine(pid, [&](Context& ctx) { machines_[pid]->init(ctx); });
}

void Simulator::append(TraceRecord rec) { trace_.push_back(std::move(rec)); }

void Simulator::run_machine(ProcessId pid,
                            const std::function<void(Context&)>& fn) {
  MachineContext ctx(*this, pid);
  fn(ctx);
}

bool Simulator::crossing_partition(ProcessId src, ProcessId dst) const {
  if (!group_of_) return false;
  return (*group_of_)[static_cast<std::size_t>(src)] !=
         (*group_of_)[static_cast<std::size_t>(dst)];
}

void Simulator::apply_scheduled_partitions() {
  if (manual_partition_) return;
  for (const auto& window : config_.partition_schedule) {
    if (now_ >= window.start && now_ < window.end) {
      std::vector<int> groups(static_cast<std::size_t>(config_.n_processes), 0);
      for (std::size_t g = 0; g < window.groups.size(); ++g)
        for (ProcessId pid : window.groups[g])
          groups[static_cast<std::size_t>(pid)] = static_cast<int>(g);
      group_of_ = std::move(groups);
      return;
    }
  }
  group_of_.reset();
}

void Simulator::partition(const Partition& groups) {
  validate_partition(groups, config_.n_processes);
  std::vector<int> mapping(static_cast<std::size_t>(config_.n_processes), 0);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (ProcessId pid : groups[g])
      mapping[static_cast<std::size_t>(pid)] = static_cast<int>(g);
  group_of_ = std::move(mapping);
  manual_partition_ = true;
}

void Simulator::heal() {
  group_of_.reset();
  manual_partition_ = false;
}

void Simulator::crash(ProcessId pid, Time at) {
  if (pid < 0 || pid >= config_.n_processes)
    throw std::invalid_argument("crash: pid out of range");
  Event ev;
  ev.at = std::max(at, now_);
  ev.phase = 0;
  ev.id = next_id();
  ev.actor = pid;
  ev.kind = Event::Kind::Crash;
  queue_.push(std::move(ev));
}

void Simulator::enqueue_send(ProcessId src, ProcessId dst, Payload payload) {
  if (status_[static_cast<std::size_t>(src)].crashed) return;
  const ChannelSpec& ch = config_.channel;
  Time delay = rng_.between(1, ch.max_delay);
  Time deliver_at = now_ + delay;
  if (ch.kind == ChannelKind::Perfect) {
    Time& floor = fifo_floor_[{src, dst}];
    deliver_at = std::max(deliver_at, floor);
    floor = deliver_at;
  }

  std::uint64_t id = next_id();
  append({now_, TraceKind::Send, src,
          "#" + std::to_string(id) + " to=" + std::to_string(dst) + " " +
              payload.tag +
              (payload.body.empty() ? "" : " " + payload.body)});

  if (ch.kind == ChannelKind::Stubborn)
    stubborn_pending_[id] = PendingStubborn{src, dst, payload};

  bool duplicate =
      ch.duplicate_probability > 0.0 && rng_.chance(ch.duplicate_probability);

  Event ev;
  ev.at = deliver_at;
  ev.id = id;
  ev.actor = dst;
  ev.kind = Event::Kind::Delivery;
  ev.envelope = Envelope{id, src, dst, payload, now_, deliver_at};
  ev.logical_id = id;
  queue_.push(ev);

  if (duplicate) {
    Time dup_delay = rng_.between(1, ch.max_delay);
    std::uint64_t dup_id = next_id();
    append({now_, TraceKind::Duplicate, src,
            "#" + std::to_string(dup_id) + " of=#" + std::to_string(id) +
                " to=" + std::to_string(dst)});
    Event dup{};
    dup.at = now_ + dup_delay;
    dup.id = dup_id;
    dup.actor = dst;
    dup.kind = Event::Kind::Delivery;
    dup.envelope = Envelope{dup_id, src, dst, std::move(payload), now_,
                            now_ + dup_delay};
    dup.logical_id = id;
    queue_.push(std::move(dup));
  }
}

void Simulator::schedule_delivery(ProcessId src, ProcessId dst,
                                  const Payload& payload,
                                  std::uint64_t logical_id, Time deliver_at,
                                  bool retransmission) {
  Event ev;
  ev.at = deliver_at;
  ev.id = next_id();
  ev.actor = dst;
  ev.kind = Event::Kind::Delivery;
  ev.envelope = Envelope{ev.id, src, dst, payload, now_, deliver_at};
  ev.retransmission = retransmission;
  ev.logical_id = logical_id;
  queue_.push(std::move(ev));
}

std::optional<TraceRecord> Simulator::step() {
  while (!queue_.empty() && !fault_index_) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = std::max(now_, ev.at);
    apply_scheduled_partitions();

    switch (ev.kind) {
      case Event::Kind::Crash: {
        auto& st = status_[static_cast<std::size_t>(ev.actor)];
        if (st.crashed) continue;  // already down; no record
        st.crashed = true;
        st.crashed_at = now_;
        TraceRecord rec{now_, TraceKind::Crash, ev.actor, "halt"};
        append(rec);
        return rec;
      }

      case Event::Kind::Timer: {
        auto key = std::make_pair(ev.actor, ev.timer_name);
        auto it = timer_gen_.find(key);
        if (it == timer_gen_.end() || it->second != ev.timer_gen)
          continue;  // cancelled or superseded; not an event anymore
        if (status_[static_cast<std::size_t>(ev.actor)].crashed)
          continue;  // crashed processes emit nothing
        TraceRecord rec{now_, TraceKind::TimerFire, ev.actor, ev.timer_name};
        append(rec);
        run_machine(ev.actor, [&](Context& ctx) {
          machines_[static_cast<std::size_t>(ev.actor)]->on_timer(
              ctx, ev.timer_name);
        });
        return rec;
      }

      case Event::Kind::Delivery: {
        const Envelope& env = ev.envelope;
        const ChannelSpec& ch = config_.channel;
        std::string head = "#" + std::to_string(env.id) +
                           " from=" + std::to_string(env.src) + " " +
                           env.payload.tag;

        auto drop = [&](const char* reason) {
          TraceRecord rec{now_, TraceKind::Drop, env.dst,
                          head + " reason=" + reason};
          append(rec);
          return rec;
        };

        if (status_[static_cast<std::size_t>(env.dst)].crashed) {
          stubborn_pending_.erase(ev.logical_id);
          return drop("crashed");
        }
        if (crossing_partition(env.src, env.dst)) {
          TraceRecord rec = drop("partition");
          if (ch.kind == ChannelKind::Stubborn &&
              stubborn_pending_.count(ev.logical_id))
            schedule_delivery(env.src, env.dst, env.payload, ev.logical_id,
                              now_ + ch.retransmit_interval, true);
          return rec;
        }
        if (ch.kind != ChannelKind::Perfect &&
            ch.drop_probability > 0.0 && rng_.chance(ch.drop_probability)) {
          TraceRecord rec = drop("chance");
          if (ch.kind == ChannelKind::Stubborn &&
              stubborn_pending_.count(ev.logical_id))
            schedule_delivery(env.src, env.dst, env.payload, ev.logical_id,
                              now_ + ch.retransmit_interval, true);
          return rec;
        }

        stubborn_pending_.erase(ev.logical_id);
        TraceRecord rec{now_, TraceKind::Deliver, env.dst,
                        head + (env.payload.body.empty()
                                    ? ""
                                    : " " + env.payload.body)};
        append(rec);
        run_machine(env.dst, [&](Context& ctx) {
          machines_[static_cast<std::size_t>(env.dst)]->on_message(
              ctx, env.src, env.payload);
        });
        return rec;
      }
    }
  }
  return std::nullopt;
}

Simulator::RunResult Simulator::run_until(const Predicate& predicate,
                                          std::uint64_t max_steps) {
  RunResult result;
  if (fault_index_) {
    result.halted_by = HaltCause::Fault;
    return result;
  }
  if (predicate && predicate(*this)) {
    result.halted_by = HaltCause::Predicate;
    return result;
  }
  while (result.steps < max_steps) {
    if (!step()) {
      result.halted_by = fault_index_ ? HaltCause::Fault : HaltCause::Exhausted;
      return result;
    }
    ++result.steps;
    if (fault_index_) {
      result.halted_by = HaltCause::Fault;
      return result;
    }
    if (predicate && predicate(*this)) {
      result.halted_by = HaltCause::Predicate;
      return result;
    }
  }
  result.halted_by = HaltCause::Budget;
  return result;
}

Simulator::RunResult Simulator::run(std::uint64_t max_steps) {
  return run_until(nullptr, max_steps);
}

}  // namespace qsim::sim
