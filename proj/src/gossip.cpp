// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/gossip.hpp"

namespace qsim::gossip {

std::vector<ProcessId> gossip_round(GossipState& state,
                                    std::span<const ProcessId> peers,
                                    Rng& rng) {
  std::vector<ProcessId> targets;
  if (!state.infected || state.rounds_remaining <= 0 || peers.empty())
    return targets;
  std::size_t k = static_cast<std::size_t>(state.fanout);
  auto picks = rng.sample(peers.size(), k);  // clamps to the peer count
  targets.reserve(picks.size());
  for (std::size_t index : picks) targets.push_back(peers[index]);
  --state.rounds_remaining;
  return targets;
}

void RumorMachine::init(sim::Context& ctx) {
  state_.owner = ctx.self();
  state_.fanout = config_.fanout;
  if (ctx.self() == config_.origin) {
    state_.infected = true;
    state_.rumor = config_.rumor;
    state_.rounds_remaining = config_.rounds;
    ctx.note("infected origin");
    ctx.set_timer(kRoundTimer, config_.round_interval);
  }
}

void RumorMachine::push(sim::Context& ctx) {
  if (!state_.infected || state_.rounds_remaining <= 0) return;
  std::vector<ProcessId> pool;
  for (int p = 0; p < ctx.cluster_size(); ++p)
    if (p != ctx.self()) pool.push_back(p);

  std::size_t k = std::min<std::size_t>(
      static_cast<std::size_t>(std::max(state_.fanout, 1)), pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j =
        i + static_cast<std::size_t>(ctx.random() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
    ctx.send(pool[i], {kRumorTag, state_.rumor});
  }
  --state_.rounds_remaining;
  if (state_.rounds_remaining > 0)
    ctx.set_timer(kRoundTimer, config_.round_interval);
}

void RumorMachine::on_message(sim::Context& ctx, ProcessId /*from*/,
                              const sim::Payload& payload) {
  if (payload.tag != kRumorTag) return;
  if (!state_.infected) {
    state_.infected = true;
    state_.rumor = payload.body;
    state_.rounds_remaining = config_.rounds;
    ctx.note("infected");
    ctx.set_timer(kRoundTimer, config_.round_interval);
  }
}

void RumorMachine::on_timer(sim::Context& ctx, std::string_view name) {
  if (name == kRoundTimer) push(ctx);
}

}  // namespace qsim::gossip
