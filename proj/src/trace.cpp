// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/trace.hpp"

#include <algorithm>
#include <unordered_map>

namespace qsim::sim {

const char* to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::Send: return "Send";
    case TraceKind::Deliver: return "Deliver";
    case TraceKind::Drop: return "Drop";
    case TraceKind::Duplicate: return "Duplicate";
    case TraceKind::Crash: return "Crash";
    case TraceKind::TimerFire: return "TimerFire";
    case TraceKind::Decide: return "Decide";
    case TraceKind::StateNote: return "StateNote";
  }
  return "?";
}

std::string to_line(const TraceRecord& rec) {
  std::string out = std::to_string(rec.time);
  out.push_back('\t');
  out += to_string(rec.kind);
  out.push_back('\t');
  out += std::to_string(rec.actor);
  out.push_back('\t');
  out += rec.detail;
  return out;
}

std::string to_bytes(const std::vector<TraceRecord>& trace) {
  std::string out;
  for (const auto& rec : trace) {
    out += to_line(rec);
    out.push_back('\n');
  }
  return out;
}

namespace {

// Send/Deliver/Drop details open with "#<envelope-id> ".
bool parse_envelope_id(const std::string& detail, std::uint64_t& id) {
  if (detail.empty() || detail.front() != '#') return false;
  id = 0;
  std::size_t i = 1;
  if (i >= detail.size() || detail[i] < '0' || detail[i] > '9') return false;
  for (; i < detail.size() && detail[i] >= '0' && detail[i] <= '9'; ++i)
    id = id * 10 + static_cast<std::uint64_t>(detail[i] - '0');
  return true;
}

}  // namespace

Metrics compute_metrics(const std::vector<TraceRecord>& trace) {
  Metrics m;
  // Chain depth live at each process, and the depth each envelope was sent at.
  std::unordered_map<ProcessId, std::uint64_t> depth_at;
  std::unordered_map<std::uint64_t, std::uint64_t> sent_depth;
  for (const auto& rec : trace) {
    std::uint64_t env = 0;
    switch (rec.kind) {
      case TraceKind::Send:
        ++m.message_count;
        if (parse_envelope_id(rec.detail, env))
          sent_depth[env] = depth_at[rec.actor];
        break;
      case TraceKind::Duplicate: {
        // "#<copy> of=#<orig> ...": the copy inherits the original's depth.
        if (!parse_envelope_id(rec.detail, env)) break;
        auto pos = rec.detail.find("of=#");
        if (pos == std::string::npos) break;
        std::uint64_t orig = 0;
        if (parse_envelope_id(rec.detail.substr(pos + 3), orig)) {
          auto it = sent_depth.find(orig);
          if (it != sent_depth.end()) sent_depth[env] = it->second;
        }
        break;
      }
      case TraceKind::Deliver:
        if (parse_envelope_id(rec.detail, env)) {
          auto it = sent_depth.find(env);
          std::uint64_t base = it == sent_depth.end() ? 0 : it->second;
          auto& d = depth_at[rec.actor];
          d = std::max(d, base + 1);
          m.communication_steps = std::max(m.communication_steps, d);
        }
        break;
      default:
        break;
    }
  }
  return m;
}

}  // namespace qsim::sim
