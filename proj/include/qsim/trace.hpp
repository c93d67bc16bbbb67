// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qsim::sim {

using ProcessId = int;
using Time = std::int64_t;

enum class TraceKind {
  Send,
  Deliver,
  Drop,
  Duplicate,
  Crash,
  TimerFire,
  Decide,
  StateNote,
};

const char* to_string(TraceKind kind);

/// One simulator event. Records appear in non-decreasing time order and a
/// given (config, protocol, seed) always yields the same byte sequence.
struct TraceRecord {
  Time time = 0;
  TraceKind kind = TraceKind::StateNote;
  ProcessId actor = 0;
  std::string detail;
};

/// Stable line form: "<time>\t<kind>\t<actor>\t<detail>".
std::string to_line(const TraceRecord& rec);

std::string to_bytes(const std::vector<TraceRecord>& trace);

struct Metrics {
  std::uint64_t message_count = 0;       // Send records
  std::uint64_t communication_steps = 0; // longest send->deliver chain
};

/// message_count counts Send records. communication_steps is the length of
/// the longest causal chain of send->deliver links: a Deliver extends the
/// chain that was live at its matching Send by one unit.
Metrics compute_metrics(const std::vector<TraceRecord>& trace);

}  // namespace qsim::sim
