// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
//
// Test-only oracles, independent of the implementation paths they check:
// random causal executions with a brute-force happens-before closure, and a
// naive set-difference for hash-tree comparison.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qsim/clocks.hpp"
#include "qsim/rng.hpp"

namespace qsim::testing {

/// One event of a randomly generated execution.
struct OracleEvent {
  int pid = 0;
  enum class Kind { Internal, Send, Receive } kind = Kind::Internal;
  int peer = -1;      // send destination / receive source
  int matching = -1;  // receive: index of the matching send event
  std::vector<std::uint64_t> vector_stamp;
  std::uint64_t lamport_standard = 0;
  std::uint64_t lamport_alt = 0;  // the max(local+1, received) variant
};

struct Execution {
  int n_processes = 0;
  std::vector<OracleEvent> events;  // in global generation order

  /// happens_before[a][b]: event a causally precedes event b (strict).
  std::vector<std::vector<bool>> happens_before;
};

/// Generates an execution of ≤ max_events events over n processes, stamps
/// every event with vector and Lamport clocks, and computes the causal
/// closure by brute force (process order + send→receive edges, transitively).
inline Execution random_execution(int n, int max_events, Rng& rng) {
  Execution exec;
  exec.n_processes = n;

  struct PendingSend {
    int event_index;
    int dst;
  };
  std::vector<PendingSend> in_flight;
  std::vector<clocks::VectorClock> vcs;
  std::vector<clocks::LamportClock> lp_standard;
  std::vector<clocks::LamportClock> lp_alt;
  for (int p = 0; p < n; ++p) {
    vcs.emplace_back(static_cast<std::size_t>(n), p);
    lp_standard.emplace_back(p);
    lp_alt.emplace_back(p);
  }

  int count = static_cast<int>(rng.between(1, max_events));
  for (int i = 0; i < count; ++i) {
    int pid = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    OracleEvent event;
    event.pid = pid;

    // Receive one of the sends addressed to pid, if any and the coin agrees.
    std::vector<std::size_t> receivable;
    for (std::size_t k = 0; k < in_flight.size(); ++k)
      if (in_flight[k].dst == pid) receivable.push_back(k);
    if (!receivable.empty() && rng.chance(0.5)) {
      std::size_t pick = receivable[rng.below(receivable.size())];
      int send_index = in_flight[pick].event_index;
      in_flight.erase(in_flight.begin() + static_cast<long>(pick));
      event.kind = OracleEvent::Kind::Receive;
      event.matching = send_index;
      event.peer = exec.events[static_cast<std::size_t>(send_index)].pid;
      vcs[pid].receive(exec.events[static_cast<std::size_t>(send_index)]
                           .vector_stamp);
      lp_standard[pid].receive(
          exec.events[static_cast<std::size_t>(send_index)].lamport_standard,
          clocks::MergeRule::MaxThenTick);
      lp_alt[pid].receive(
          exec.events[static_cast<std::size_t>(send_index)].lamport_alt,
          clocks::MergeRule::TickThenMax);
    } else if (n > 1 && rng.chance(0.5)) {
      int dst = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
      if (dst >= pid) ++dst;
      event.kind = OracleEvent::Kind::Send;
      event.peer = dst;
      vcs[pid].local_event();
      lp_standard[pid].tick();
      lp_alt[pid].tick();
      in_flight.push_back({i, dst});
    } else {
      vcs[pid].local_event();
      lp_standard[pid].tick();
      lp_alt[pid].tick();
    }
    event.vector_stamp = vcs[pid].components();
    event.lamport_standard = lp_standard[pid].value();
    event.lamport_alt = lp_alt[pid].value();
    exec.events.push_back(std::move(event));
  }

  // Direct causal edges, then Floyd-Warshall-style transitive closure.
  std::size_t m = exec.events.size();
  exec.happens_before.assign(m, std::vector<bool>(m, false));
  std::map<int, int> last_on_process;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& event = exec.events[i];
    auto it = last_on_process.find(event.pid);
    if (it != last_on_process.end())
      exec.happens_before[static_cast<std::size_t>(it->second)][i] = true;
    last_on_process[event.pid] = static_cast<int>(i);
    if (event.kind == OracleEvent::Kind::Receive)
      exec.happens_before[static_cast<std::size_t>(event.matching)][i] = true;
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t a = 0; a < m; ++a)
      if (exec.happens_before[a][k])
        for (std::size_t b = 0; b < m; ++b)
          if (exec.happens_before[k][b]) exec.happens_before[a][b] = true;
  return exec;
}

/// Naive divergence oracle over two key -> value maps with identical key sets.
inline std::vector<std::string> naive_divergence(
    const std::map<std::string, std::string>& a,
    const std::map<std::string, std::string>& b) {
  std::vector<std::string> keys;
  for (const auto& [key, value] : a) {
    auto it = b.find(key);
    if (it == b.end() || it->second != value) keys.push_back(key);
  }
  return keys;
}

}  // namespace qsim::testing
