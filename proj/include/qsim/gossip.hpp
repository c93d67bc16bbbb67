// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsim/rng.hpp"
#include "qsim/sim.hpp"

namespace qsim::gossip {

using sim::ProcessId;
using sim::Time;

/// Push rumor mongering: an infected node pushes the rumor to `fanout` peers
/// per round until its round budget runs out. Infection is monotone — a node
/// never un-learns the rumor.
struct GossipState {
  ProcessId owner = 0;
  bool infected = false;
  int fanout = 1;
  std::string rumor;
  int rounds_remaining = 0;
};

/// One round: picks min(fanout, peers) targets uniformly without replacement
/// through the seeded generator. Empty when uninfected or out of rounds.
std::vector<ProcessId> gossip_round(GossipState& state,
                                    std::span<const ProcessId> peers,
                                    Rng& rng);

struct RumorConfig {
  ProcessId origin = 0;
  int fanout = 2;
  int rounds = 10;
  std::string rumor = "rumor";
  Time round_interval = 5;
};

class RumorMachine : public sim::Machine {
 public:
  explicit RumorMachine(RumorConfig config) : config_(std::move(config)) {}

  void init(sim::Context& ctx) override;
  void on_message(sim::Context& ctx, ProcessId from,
                  const sim::Payload& payload) override;
  void on_timer(sim::Context& ctx, std::string_view name) override;

  bool infected() const { return state_.infected; }

  static constexpr const char* kRumorTag = "gossip.rumor";
  static constexpr const char* kRoundTimer = "gossip.round";

 private:
  void push(sim::Context& ctx);

  RumorConfig config_;
  GossipState state_;
};

}  // namespace qsim::gossip
