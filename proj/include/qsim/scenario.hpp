// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsim/sim.hpp"

namespace qsim::scenario {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A declarative run description: which protocol, the network, the protocol's
/// parameters, and the invariants to assert afterwards.
struct Scenario {
  std::string name;
  std::string protocol;
  sim::SimConfig sim;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t step_budget = 20000;
  std::vector<std::string> expectations;
};

/// Parses and schema-validates a scenario file. Unknown fields, unknown
/// protocols and malformed values raise ScenarioError naming the offender.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text, const std::string& origin);

struct ExpectationResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunReport {
  std::string scenario;
  std::uint64_t seed = 0;
  sim::HaltCause halted_by = sim::HaltCause::Exhausted;
  std::uint64_t steps = 0;
  std::uint64_t message_count = 0;
  std::uint64_t communication_steps = 0;
  std::vector<std::string> decisions;
  std::vector<ExpectationResult> expectations;
  std::optional<std::size_t> fault_index;

  bool passed() const;
  std::string summary() const;
};

struct RunOutput {
  RunReport report;
  std::string trace_bytes;
};

/// Executes the scenario (deterministic in (scenario bytes, seed)).
RunOutput run_scenario(const Scenario& scenario,
                       std::optional<std::uint64_t> seed_override = std::nullopt);

struct SweepReport {
  std::uint64_t runs = 0;
  double pass_rate = 0.0;
  double mean_messages = 0.0;
  double mean_steps = 0.0;
  std::vector<std::uint64_t> failing_seeds;
};

/// Runs every seed in [first, last] (inclusive); runs share nothing and
/// execute on a small thread pool. Throws ScenarioError on an empty range.
SweepReport sweep(const Scenario& scenario, std::uint64_t first_seed,
                  std::uint64_t last_seed, unsigned threads = 0);

// --- protocol registry -------------------------------------------------------

using Expectation =
    std::function<ExpectationResult(const Scenario&, const sim::Simulator&)>;

struct Protocol {
  std::string name;
  std::string description;
  /// Allowed params with one-line docs; validation rejects anything else.
  std::map<std::string, std::string> params;
  std::map<std::string, std::string> expectation_docs;

  std::function<std::vector<std::unique_ptr<sim::Machine>>(const Scenario&)>
      build;
  /// Optional early-stop condition; the budget applies either way.
  std::function<sim::Simulator::Predicate(const Scenario&)> stop_predicate;
  /// Optional custom execution (e.g. crash the elected leader mid-run).
  /// Defaults to run_until(stop_predicate, step_budget).
  std::function<sim::Simulator::RunResult(const Scenario&, sim::Simulator&)>
      execute;
  std::map<std::string, Expectation> expectations;
};

void register_protocol(Protocol protocol);
const Protocol* find_protocol(const std::string& name);
std::vector<std::string> protocol_names();

/// Human-readable parameter/invariant sheet for `explain <protocol>`.
std::string explain(const std::string& protocol);

}  // namespace qsim::scenario
