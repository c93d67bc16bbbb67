// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "qsim/trace.hpp"

namespace qsim::scenario {

namespace {

std::map<std::string, Protocol>& registry() {
  static std::map<std::string, Protocol> protocols;
  return protocols;
}

// Defined in protocols.cpp; registers the built-in protocol set once.
void ensure_builtins();

[[noreturn]] void fail(const std::string& origin, const std::string& message) {
  throw ScenarioError(origin + ": " + message);
}

void reject_unknown_fields(const nlohmann::json& object,
                           const std::vector<std::string>& allowed,
                           const std::string& origin,
                           const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(origin, "unknown field \"" + key + "\" in " + where);
  }
}

sim::ChannelSpec parse_channel(const nlohmann::json& node,
                               const std::string& origin) {
  reject_unknown_fields(node,
                        {"kind", "drop_probability", "duplicate_probability",
                         "max_delay", "retransmit_interval"},
                        origin, "sim.channel");
  sim::ChannelSpec spec;
  std::string kind = node.value("kind", "perfect");
  if (kind == "perfect")
    spec.kind = sim::ChannelKind::Perfect;
  else if (kind == "fair-loss")
    spec.kind = sim::ChannelKind::FairLoss;
  else if (kind == "stubborn")
    spec.kind = sim::ChannelKind::Stubborn;
  else
    fail(origin, "unknown channel kind \"" + kind + "\"");
  spec.drop_probability = node.value("drop_probability", 0.0);
  spec.duplicate_probability = node.value("duplicate_probability", 0.0);
  spec.max_delay = node.value("max_delay", sim::Time{1});
  spec.retransmit_interval = node.value("retransmit_interval", sim::Time{0});
  return spec;
}

sim::SimConfig parse_sim(const nlohmann::json& node, const std::string& origin) {
  reject_unknown_fields(
      node,
      {"n_processes", "seed", "channel", "crash_schedule", "partition_schedule"},
      origin, "sim");
  sim::SimConfig config;
  if (!node.contains("n_processes"))
    fail(origin, "sim.n_processes is required");
  if (!node["n_processes"].is_number_integer() ||
      node["n_processes"].get<long long>() < 1)
    fail(origin, "sim.n_processes must be a positive integer");
  config.n_processes = node["n_processes"].get<int>();
  config.seed = node.value("seed", std::uint64_t{0});
  if (node.contains("channel"))
    config.channel = parse_channel(node["channel"], origin);
  if (node.contains("crash_schedule")) {
    for (const auto& [pid_text, at] : node["crash_schedule"].items()) {
      int pid = 0;
      try {
        pid = std::stoi(pid_text);
      } catch (...) {
        fail(origin, "crash_schedule key \"" + pid_text +
                         "\" is not a process id");
      }
      config.crash_schedule[pid] = at.get<sim::Time>();
    }
  }
  if (node.contains("partition_schedule")) {
    for (const auto& window : node["partition_schedule"]) {
      reject_unknown_fields(window, {"start", "end", "groups"}, origin,
                            "partition_schedule entry");
      sim::PartitionWindow w;
      w.start = window.at("start").get<sim::Time>();
      w.end = window.at("end").get<sim::Time>();
      for (const auto& group : window.at("groups"))
        w.groups.push_back(group.get<std::vector<sim::ProcessId>>());
      config.partition_schedule.push_back(std::move(w));
    }
  }
  return config;
}

}  // namespace

void register_protocol(Protocol protocol) {
  registry()[protocol.name] = std::move(protocol);
}

namespace detail {
void register_builtins();
}

namespace {
void ensure_builtins() {
  static std::once_flag once;
  std::call_once(once, [] { detail::register_builtins(); });
}
}  // namespace

const Protocol* find_protocol(const std::string& name) {
  ensure_builtins();
  auto it = registry().find(name);
  return it == registry().end() ? nullptr : &it->second;
}

std::vector<std::string> protocol_names() {
  ensure_builtins();
  std::vector<std::string> names;
  for (const auto& [name, protocol] : registry()) names.push_back(name);
  return names;
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  ensure_builtins();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    // The parser reports the byte offset; convert it to a line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < err.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    fail(origin, "parse error at line " + std::to_string(line) + ": " +
                     err.what());
  }
  if (!doc.is_object()) fail(origin, "scenario must be a JSON object");
  reject_unknown_fields(
      doc, {"name", "protocol", "sim", "params", "step_budget", "expectations"},
      origin, "scenario");

  Scenario scenario;
  if (!doc.contains("protocol")) fail(origin, "protocol is required");
  scenario.protocol = doc["protocol"].get<std::string>();
  const Protocol* protocol = find_protocol(scenario.protocol);
  if (!protocol)
    fail(origin, "unknown protocol \"" + scenario.protocol + "\"");

  scenario.name = doc.value("name", scenario.protocol);
  if (!doc.contains("sim")) fail(origin, "sim is required");
  scenario.sim = parse_sim(doc["sim"], origin);
  try {
    scenario.sim.validate();
  } catch (const std::exception& err) {
    fail(origin, err.what());
  }

  scenario.step_budget = doc.value("step_budget", std::uint64_t{20000});
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) fail(origin, "params must be an object");
    for (const auto& [key, value] : doc["params"].items())
      if (!protocol->params.count(key))
        fail(origin, "unknown field \"" + key + "\" in params for protocol " +
                         scenario.protocol);
    scenario.params = doc["params"];
  }
  if (doc.contains("expectations")) {
    for (const auto& name : doc["expectations"]) {
      std::string text_name = name.get<std::string>();
      if (!protocol->expectations.count(text_name))
        fail(origin, "unknown expectation \"" + text_name +
                         "\" for protocol " + scenario.protocol);
      scenario.expectations.push_back(text_name);
    }
  }
  return scenario;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string() + ": cannot open scenario file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path.string());
}

bool RunReport::passed() const {
  if (fault_index) return false;
  return std::all_of(expectations.begin(), expectations.end(),
                     [](const ExpectationResult& r) { return r.passed; });
}

std::string RunReport::summary() const {
  std::string out = scenario + " seed=" + std::to_string(seed) +
                    " halted_by=" + sim::to_string(halted_by) +
                    " steps=" + std::to_string(steps) +
                    " messages=" + std::to_string(message_count) +
                    " communication_steps=" + std::to_string(communication_steps);
  if (fault_index)
    out += " FAULT at trace record " + std::to_string(*fault_index);
  for (const auto& result : expectations) {
    out += "\n  [" + std::string(result.passed ? "pass" : "FAIL") + "] " +
           result.name;
    if (!result.detail.empty()) out += ": " + result.detail;
  }
  return out;
}

RunOutput run_scenario(const Scenario& scenario,
                       std::optional<std::uint64_t> seed_override) {
  const Protocol* protocol = find_protocol(scenario.protocol);
  if (!protocol)
    throw ScenarioError("unknown protocol \"" + scenario.protocol + "\"");

  Scenario effective = scenario;
  if (seed_override) effective.sim.seed = *seed_override;

  sim::Simulator simulator(effective.sim, protocol->build(effective));
  sim::Simulator::RunResult result;
  if (protocol->execute) {
    result = protocol->execute(effective, simulator);
  } else {
    sim::Simulator::Predicate predicate =
        protocol->stop_predicate ? protocol->stop_predicate(effective)
                                 : sim::Simulator::Predicate{};
    result = simulator.run_until(predicate, effective.step_budget);
  }

  RunOutput output;
  output.report.scenario = effective.name;
  output.report.seed = effective.sim.seed;
  output.report.halted_by = result.halted_by;
  output.report.steps = result.steps;
  auto metrics = sim::compute_metrics(simulator.trace());
  output.report.message_count = metrics.message_count;
  output.report.communication_steps = metrics.communication_steps;
  output.report.fault_index = simulator.fault_index();
  for (const auto& record : simulator.trace())
    if (record.kind == sim::TraceKind::Decide)
      output.report.decisions.push_back(record.detail);
  for (const auto& name : effective.expectations) {
    const auto& evaluate = protocol->expectations.at(name);
    output.report.expectations.push_back(evaluate(effective, simulator));
  }
  output.trace_bytes = sim::to_bytes(simulator.trace());
  return output;
}

SweepReport sweep(const Scenario& scenario, std::uint64_t first_seed,
                  std::uint64_t last_seed, unsigned threads) {
  if (last_seed < first_seed)
    throw ScenarioError("sweep: empty seed range");
  std::uint64_t runs = last_seed - first_seed + 1;
  std::vector<RunReport> reports(runs);

  if (threads == 0) threads = std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  threads = std::min<unsigned>(threads, 16);

  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::uint64_t index = next.fetch_add(1);
      if (index >= runs) return;
      reports[index] =
          run_scenario(scenario, first_seed + index).report;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& thread : pool) thread.join();

  SweepReport report;
  report.runs = runs;
  std::uint64_t passed = 0;
  double messages = 0.0, steps = 0.0;
  for (std::uint64_t i = 0; i < runs; ++i) {
    if (reports[i].passed())
      ++passed;
    else
      report.failing_seeds.push_back(first_seed + i);
    messages += static_cast<double>(reports[i].message_count);
    steps += static_cast<double>(reports[i].communication_steps);
  }
  report.pass_rate = static_cast<double>(passed) / static_cast<double>(runs);
  report.mean_messages = messages / static_cast<double>(runs);
  report.mean_steps = steps / static_cast<double>(runs);
  return report;
}

std::string explain(const std::string& name) {
  const Protocol* protocol = find_protocol(name);
  if (!protocol) throw ScenarioError("unknown protocol \"" + name + "\"");
  std::string out = protocol->name + ": " + protocol->description + "\n";
  out += "parameters:\n";
  if (protocol->params.empty()) out += "  (none)\n";
  for (const auto& [param, doc] : protocol->params)
    out += "  " + param + " — " + doc + "\n";
  out += "expectations:\n";
  if (protocol->expectation_docs.empty()) out += "  (none)\n";
  for (const auto& [expectation, doc] : protocol->expectation_docs)
    out += "  " + expectation + " — " + doc + "\n";
  return out;
}

}  // namespace scenario
