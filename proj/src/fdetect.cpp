// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/fdetect.hpp"

#include <stdexcept>

namespace qsim::fdetect {

Detector::Detector(ProcessId owner, int n_processes, Config config)
    : owner_(owner), config_(config) {
  for (ProcessId p = 0; p < n_processes; ++p) {
    if (p == owner_) continue;
    alive_.insert(p);
    timeout_[p] = config_.initial_timeout;
    last_heard_[p] = 0;
  }
}

Detector::IntervalResult Detector::on_interval(Time now) {
  IntervalResult result;
  for (const auto& [peer, deadline] : timeout_) {
    result.heartbeat_targets.push_back(peer);
    if (alive_.count(peer) && now - last_heard_[peer] > deadline) {
      alive_.erase(peer);
      suspected_.insert(peer);
      result.newly_suspected.push_back(peer);
    }
  }
  return result;
}

bool Detector::on_heartbeat(ProcessId from, Time now) {
  if (from == owner_)
    throw std::logic_error("failure detector: heartbeat from self");
  last_heard_[from] = now;
  if (suspected_.erase(from) > 0) {
    alive_.insert(from);
    timeout_[from] += config_.timeout_increment;
    return true;
  }
  return false;
}

void DetectorMachine::init(sim::Context& ctx) {
  detector_.emplace(ctx.self(), ctx.cluster_size(), config_);
  if (ctx.cluster_size() > 1)
    ctx.set_timer(kIntervalTimer, config_.heartbeat_interval);
}

void DetectorMachine::on_message(sim::Context& ctx, ProcessId from,
                                 const sim::Payload& payload) {
  if (payload.tag != kHeartbeatTag) return;
  if (detector_->on_heartbeat(from, ctx.now()))
    ctx.note("restore p=" + std::to_string(from) +
             " timeout=" + std::to_string(detector_->timeout_of(from)));
}

void DetectorMachine::on_timer(sim::Context& ctx, std::string_view name) {
  if (name != kIntervalTimer) return;
  auto result = detector_->on_interval(ctx.now());
  for (ProcessId peer : result.heartbeat_targets)
    ctx.send(peer, {kHeartbeatTag, ""});
  for (ProcessId peer : result.newly_suspected)
    ctx.note("suspect p=" + std::to_string(peer));
  ctx.set_timer(kIntervalTimer, config_.heartbeat_interval);
}

}  // namespace qsim::fdetect
