// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qsim/rng.hpp"
#include "qsim/trace.hpp"

namespace qsim::sim {

/// Protocol message carried by an Envelope. Machines dispatch on the tag and
/// parse the body with qsim::wire.
struct Payload {
  std::string tag;
  std::string body;
};

enum class ChannelKind { FairLoss, Stubborn, Perfect };

const char* to_string(ChannelKind kind);

struct ChannelSpec {
  ChannelKind kind = ChannelKind::Perfect;
  double drop_probability = 0.0;
  double duplicate_probability = 0.0;
  Time max_delay = 1;
  Time retransmit_interval = 0;  // Stubborn only

  /// Throws std::invalid_argument if the spec violates its own invariants
  /// (Perfect must not drop or duplicate, Stubborn needs an interval >= 1).
  void validate() const;
};

/// A grouping of all process ids into disjoint sets. While a partition is
/// active, envelopes crossing groups are dropped.
using Partition = std::vector<std::vector<ProcessId>>;

struct PartitionWindow {
  Time start = 0;
  Time end = 0;  // exclusive
  Partition groups;
};

struct SimConfig {
  int n_processes = 1;
  std::uint64_t seed = 0;
  ChannelSpec channel;
  std::map<ProcessId, Time> crash_schedule;
  std::vector<PartitionWindow> partition_schedule;

  void validate() const;
};

struct ProcessStatus {
  bool crashed = false;
  Time crashed_at = 0;
};

struct Envelope {
  std::uint64_t id = 0;
  ProcessId src = 0;
  ProcessId dst = 0;
  Payload payload;
  Time sent_at = 0;
  Time deliver_at = 0;
};

/// Host-side interface handed to machines. Every output a machine can produce
/// (messages, timers, randomness, trace notes) flows through here, so the same
/// protocol code runs under the seeded simulator and the exhaustive explorer.
class Context {
 public:
  virtual ~Context() = default;

  virtual Time now() const = 0;
  virtual ProcessId self() const = 0;
  virtual int cluster_size() const = 0;

  virtual void send(ProcessId dst, Payload payload) = 0;
  /// Replaces any pending timer with the same name on this process.
  virtual void set_timer(std::string_view name, Time delay) = 0;
  virtual void cancel_timer(std::string_view name) = 0;

  virtual std::uint64_t random() = 0;

  virtual void note(std::string detail) = 0;    // StateNote record
  virtual void decide(std::string detail) = 0;  // Decide record
  /// Invariant violation: records the fault and halts the run.
  virtual void fault(std::string detail) = 0;
};

inline void broadcast(Context& ctx, const Payload& payload,
                      bool include_self = true) {
  for (int p = 0; p < ctx.cluster_size(); ++p) {
    if (!include_self && p == ctx.self()) continue;
    ctx.send(p, payload);
  }
}

/// A protocol state machine hosted on one process. Implementations must be
/// deterministic: all randomness comes from Context::random.
class Machine {
 public:
  virtual ~Machine() = default;
  virtual void init(Context&) {}
  virtual void on_message(Context&, ProcessId /*from*/, const Payload&) {}
  virtual void on_timer(Context&, std::string_view /*name*/) {}
};

enum class HaltCause { Predicate, Exhausted, Budget, Fault };

const char* to_string(HaltCause cause);

/// Deterministic discrete-event network simulator. Single-threaded; runs with
/// different seeds are independent and may execute on parallel threads.
class Simulator {
 public:
  Simulator(SimConfig config, std::vector<std::unique_ptr<Machine>> machines);

  /// Processes the earliest event. Returns the record describing it, or
  /// nullopt when the queue is exhausted (normal termination) or the run has
  /// faulted. Ties break on (time, envelope id, actor id); crash events at a
  /// tick precede deliveries at the same tick.
  std::optional<TraceRecord> step();

  struct RunResult {
    std::uint64_t steps = 0;
    HaltCause halted_by = HaltCause::Exhausted;
  };

  using Predicate = std::function<bool(const Simulator&)>;

  RunResult run_until(const Predicate& predicate, std::uint64_t max_steps);
  RunResult run(std::uint64_t max_steps);

  void partition(const Partition& groups);
  void heal();
  void crash(ProcessId pid, Time at);

  Time now() const { return now_; }
  int cluster_size() const { return config_.n_processes; }
  const SimConfig& config() const { return config_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  const ProcessStatus& status(ProcessId pid) const { return status_.at(pid); }
  bool correct(ProcessId pid) const { return !status_.at(pid).crashed; }
  Machine& machine(ProcessId pid) { return *machines_.at(pid); }
  const Machine& machine(ProcessId pid) const { return *machines_.at(pid); }

  template <class T>
  T& machine_as(ProcessId pid) {
    return dynamic_cast<T&>(machine(pid));
  }
  template <class T>
  const T& machine_as(ProcessId pid) const {
    return dynamic_cast<const T&>(machine(pid));
  }

  bool faulted() const { return fault_index_.has_value(); }
  std::optional<std::size_t> fault_index() const { return fault_index_; }

  /// Throws std::invalid_argument unless the groups are disjoint and cover
  /// all process ids.
  static void validate_partition(const Partition& groups, int n);

 private:
  struct Event {
    Time at = 0;
    int phase = 1;  // 0 for crash events: a crash at t precedes deliveries at t
    std::uint64_t id = 0;
    ProcessId actor = 0;
    enum class Kind { Delivery, Timer, Crash } kind = Kind::Delivery;
    Envelope envelope;           // Delivery
    std::string timer_name;      // Timer
    std::uint64_t timer_gen = 0; // Timer staleness check
    bool retransmission = false; // Delivery on a Stubborn channel
    std::uint64_t logical_id = 0;
  };

  struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      if (a.phase != b.phase) return a.phase > b.phase;
      if (a.id != b.id) return a.id > b.id;
      return a.actor > b.actor;
    }
  };

  class MachineContext;
  friend class MachineContext;

  std::uint64_t next_id() { return ++id_counter_; }
  void enqueue_send(ProcessId src, ProcessId dst, Payload payload);
  void schedule_delivery(ProcessId src, ProcessId dst, const Payload& payload,
                         std::uint64_t logical_id, Time deliver_at,
                         bool retransmission);
  void run_machine(ProcessId pid, const std::function<void(Context&)>& fn);
  void append(TraceRecord rec);
  bool crossing_partition(ProcessId src, ProcessId dst) const;
  void apply_scheduled_partitions();

  SimConfig config_;
  std::vector<std::unique_ptr<Machine>> machines_;
  std::vector<ProcessStatus> status_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  std::vector<TraceRecord> trace_;
  Rng rng_;
  Time now_ = 0;
  std::uint64_t id_counter_ = 0;
  std::optional<std::size_t> fault_index_;

  // Active partition (manual or scheduled): process id -> group index.
  std::optional<std::vector<int>> group_of_;
  bool manual_partition_ = false;

  // Timer generations: (pid, name) -> generation. A popped timer event whose
  // generation is stale was cancelled or superseded.
  std::map<std::pair<ProcessId, std::string>, std::uint64_t> timer_gen_;

  // Stubborn bookkeeping: logical message id -> delivered yet?
  struct PendingStubborn {
    ProcessId src;
    ProcessId dst;
    Payload payload;
  };
  std::map<std::uint64_t, PendingStubborn> stubborn_pending_;

  // Perfect channels deliver per-(src,dst) in send order.
  std::map<std::pair<ProcessId, ProcessId>, Time> fifo_floor_;
};

}  // namespace qsim::sim
