// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <map>
#include <set>
#include <vector>

#include "qsim/sim.hpp"

namespace qsim::fdetect {

using sim::ProcessId;
using sim::Time;

struct Config {
  Time heartbeat_interval = 10;
  Time initial_timeout = 30;
  /// Added to a peer's timeout each time a suspicion turns out to be false.
  Time timeout_increment = 15;
};

/// Eventually-perfect failure detector: heartbeats to every peer, suspicion on
/// silence, and per-peer timeouts that grow after each false suspicion. All
/// peers start out trusted.
class Detector {
 public:
  Detector(ProcessId owner, int n_processes, Config config);

  struct IntervalResult {
    std::vector<ProcessId> heartbeat_targets;  // every peer, suspected or not
    std::vector<ProcessId> newly_suspected;
  };

  /// Periodic tick: emits heartbeat targets and moves silent peers to the
  /// suspected set.
  IntervalResult on_interval(Time now);

  /// Heartbeat from a peer. Returns true if the peer had been suspected (its
  /// timeout grows and it moves back to the alive view). Throws on a
  /// self-heartbeat, which indicates a wiring bug.
  bool on_heartbeat(ProcessId from, Time now);

  bool suspects(ProcessId pid) const { return suspected_.count(pid) > 0; }
  const std::set<ProcessId>& suspected() const { return suspected_; }
  const std::set<ProcessId>& alive_view() const { return alive_; }
  Time timeout_of(ProcessId pid) const { return timeout_.at(pid); }
  ProcessId owner() const { return owner_; }

 private:
  ProcessId owner_;
  Config config_;
  std::set<ProcessId> alive_;
  std::set<ProcessId> suspected_;
  std::map<ProcessId, Time> timeout_;
  std::map<ProcessId, Time> last_heard_;
};

/// Hosts a Detector inside the simulator: heartbeats on a periodic timer,
/// suspicion changes surfaced as StateNote records ("suspect p=..." /
/// "restore p=...").
class DetectorMachine : public sim::Machine {
 public:
  explicit DetectorMachine(Config config) : config_(config) {}

  void init(sim::Context& ctx) override;
  void on_message(sim::Context& ctx, ProcessId from,
                  const sim::Payload& payload) override;
  void on_timer(sim::Context& ctx, std::string_view name) override;

  const Detector& detector() const { return *detector_; }

  static constexpr const char* kHeartbeatTag = "fd.hb";
  static constexpr const char* kIntervalTimer = "fd.interval";

 private:
  Config config_;
  std::optional<Detector> detector_;
};

}  // namespace qsim::fdetect
