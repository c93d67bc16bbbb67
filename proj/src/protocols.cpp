// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
//
// Built-in protocol registrations for the scenario runner: machine builders,
// stop conditions and post-run expectation checks.
#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "qsim/clocks.hpp"
#include "qsim/commit.hpp"
#include "qsim/election.hpp"
#include "qsim/fdetect.hpp"
#include "qsim/gossip.hpp"
#include "qsim/lww.hpp"
#include "qsim/merkle.hpp"
#include "qsim/paxos.hpp"
#include "qsim/scenario.hpp"
#include "qsim/seqlog.hpp"
#include "qsim/wire.hpp"

namespace qsim::scenario {
namespace detail {
namespace {

using nlohmann::json;
using sim::ProcessId;
using sim::Time;

ExpectationResult pass(const std::string& name) { return {name, true, ""}; }
ExpectationResult failed(const std::string& name, std::string detail) {
  return {name, false, std::move(detail)};
}

template <class T>
T param_or(const Scenario& scenario, const char* key, T fallback) {
  if (!scenario.params.contains(key)) return fallback;
  return scenario.params.at(key).get<T>();
}

std::vector<ProcessId> correct_pids(const sim::Simulator& simulator) {
  std::vector<ProcessId> pids;
  for (int p = 0; p < simulator.cluster_size(); ++p)
    if (simulator.correct(p)) pids.push_back(p);
  return pids;
}

// ---------------------------------------------------------------------------
// Clock demos: scripted local events and sends at fixed virtual times, with
// the running stamp recorded after every event.
// ---------------------------------------------------------------------------

struct DemoOp {
  Time at = 0;
  ProcessId dst = -1;  // -1: local event, otherwise a send
};

using DemoScript = std::map<ProcessId, std::vector<DemoOp>>;

DemoScript parse_demo_script(const Scenario& scenario) {
  DemoScript script;
  if (scenario.params.contains("events")) {
    for (const auto& entry : scenario.params.at("events")) {
      DemoOp op;
      op.at = entry.at("at").get<Time>();
      ProcessId pid = entry.at("pid").get<ProcessId>();
      std::string kind = entry.at("op").get<std::string>();
      if (kind == "local")
        op.dst = -1;
      else if (kind.rfind("send:", 0) == 0)
        op.dst = std::stoi(kind.substr(5));
      else
        throw ScenarioError("demo op must be \"local\" or \"send:<pid>\"");
      script[pid].push_back(op);
    }
  } else {
    // Three processes, two messages: the shape used throughout examples of
    // logical-clock behavior.
    script[0] = {{2, -1}, {4, -1}, {6, 1}, {8, -1}};
    script[1] = {{20, -1}, {22, 2}, {24, -1}};
    script[2] = {{3, -1}, {40, -1}, {42, -1}};
  }
  return script;
}

class LamportDemoMachine : public sim::Machine {
 public:
  LamportDemoMachine(std::vector<DemoOp> ops, clocks::MergeRule rule)
      : ops_(std::move(ops)), rule_(rule) {}

  void init(sim::Context& ctx) override {
    clock_.emplace(ctx.self());
    for (std::size_t k = 0; k < ops_.size(); ++k)
      ctx.set_timer("demo.op." + std::to_string(k), ops_[k].at);
  }

  void on_timer(sim::Context& ctx, std::string_view name) override {
    std::size_t k = std::stoul(std::string(name.substr(name.rfind('.') + 1)));
    clock_->tick();
    if (ops_[k].dst >= 0) {
      std::string body;
      wire::put_u64(body, clock_->value());
      ctx.send(ops_[k].dst, {"demo.msg", body});
    }
    ctx.note("lp=" + std::to_string(clock_->value()));
  }

  void on_message(sim::Context& ctx, ProcessId /*from*/,
                  const sim::Payload& payload) override {
    wire::Reader reader(payload.body);
    clock_->receive(reader.u64(), rule_);
    ctx.note("lp=" + std::to_string(clock_->value()));
  }

 private:
  std::vector<DemoOp> ops_;
  clocks::MergeRule rule_;
  std::optional<clocks::LamportClock> clock_;
};

class VectorDemoMachine : public sim::Machine {
 public:
  explicit VectorDemoMachine(std::vector<DemoOp> ops) : ops_(std::move(ops)) {}

  void init(sim::Context& ctx) override {
    clock_.emplace(static_cast<std::size_t>(ctx.cluster_size()), ctx.self());
    for (std::size_t k = 0; k < ops_.size(); ++k)
      ctx.set_timer("demo.op." + std::to_string(k), ops_[k].at);
  }

  void on_timer(sim::Context& ctx, std::string_view name) override {
    std::size_t k = std::stoul(std::string(name.substr(name.rfind('.') + 1)));
    clock_->local_event();
    if (ops_[k].dst >= 0) {
      std::string body;
      for (auto component : clock_->components()) wire::put_u64(body, component);
      ctx.send(ops_[k].dst, {"demo.msg", body});
    }
    ctx.note("vc=" + clock_->to_string());
  }

  void on_message(sim::Context& ctx, ProcessId /*from*/,
                  const sim::Payload& payload) override {
    wire::Reader reader(payload.body);
    std::vector<std::uint64_t> stamp;
    while (!reader.done()) stamp.push_back(reader.u64());
    clock_->receive(stamp);
    ctx.note("vc=" + clock_->to_string());
  }

 private:
  std::vector<DemoOp> ops_;
  std::optional<clocks::VectorClock> clock_;
};

// Stamp sequences per process from "lp=" / "vc=" notes.
std::map<ProcessId, std::vector<std::string>> note_series(
    const sim::Simulator& simulator, const std::string& prefix) {
  std::map<ProcessId, std::vector<std::string>> series;
  for (const auto& rec : simulator.trace())
    if (rec.kind == sim::TraceKind::StateNote &&
        rec.detail.rfind(prefix, 0) == 0)
      series[rec.actor].push_back(rec.detail.substr(prefix.size()));
  return series;
}

std::vector<std::uint64_t> parse_vc(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::uint64_t v = 0;
  bool in_number = false;
  for (char c : text) {
    if (c >= '0' && c <= '9') {
      v = v * 10 + static_cast<std::uint64_t>(c - '0');
      in_number = true;
    } else if (in_number) {
      out.push_back(v);
      v = 0;
      in_number = false;
    }
  }
  return out;
}

ExpectationResult check_lamport_monotone(const Scenario&,
                                         const sim::Simulator& simulator) {
  for (const auto& [pid, stamps] : note_series(simulator, "lp=")) {
    std::uint64_t prev = 0;
    for (const auto& text : stamps) {
      std::uint64_t v = std::stoull(text);
      if (v < prev)
        return failed("stamps-monotone",
                      "p" + std::to_string(pid) + " regressed to " + text);
      prev = v;
    }
  }
  return pass("stamps-monotone");
}

ExpectationResult check_vector_monotone(const Scenario&,
                                        const sim::Simulator& simulator) {
  for (const auto& [pid, stamps] : note_series(simulator, "vc=")) {
    std::vector<std::uint64_t> prev;
    for (const auto& text : stamps) {
      auto v = parse_vc(text);
      if (!prev.empty())
        for (std::size_t i = 0; i < v.size(); ++i)
          if (v[i] < prev[i])
            return failed("stamps-monotone",
                          "p" + std::to_string(pid) + " regressed at " + text);
      prev = v;
    }
  }
  return pass("stamps-monotone");
}

// ---------------------------------------------------------------------------
// LWW replica synchronization by periodic state push.
// ---------------------------------------------------------------------------

sim::Payload encode_map(const crdt::LwwMap& map, const char* tag) {
  std::string body;
  wire::put_u64(body, map.entries().size());
  for (const auto& [key, entry] : map.entries()) {
    wire::put_str(body, key);
    wire::put_u64(body, entry.value ? 1 : 0);
    wire::put_str(body, entry.value ? *entry.value : "");
    wire::put_u64(body, entry.stamp.value);
    wire::put_i64(body, entry.stamp.owner);
  }
  return {tag, body};
}

crdt::LwwMap decode_map(const sim::Payload& payload) {
  wire::Reader reader(payload.body);
  crdt::LwwMap map;
  std::uint64_t count = reader.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string key = reader.str();
    bool has_value = reader.u64() != 0;
    std::string value = reader.str();
    crdt::Stamp stamp{reader.u64(), static_cast<int>(reader.i64())};
    if (has_value)
      map.put(key, value, stamp);
    else
      map.erase(key, stamp);
  }
  return map;
}

struct LwwSyncConfig {
  std::map<ProcessId, std::vector<std::pair<std::string, std::string>>> puts;
  Time put_interval = 3;
  Time sync_interval = 10;
  int sync_rounds = 8;
};

class LwwSyncMachine : public sim::Machine {
 public:
  explicit LwwSyncMachine(LwwSyncConfig config) : config_(std::move(config)) {}

  void init(sim::Context& ctx) override {
    clock_.emplace(ctx.self());
    auto it = config_.puts.find(ctx.self());
    if (it != config_.puts.end())
      for (std::size_t k = 0; k < it->second.size(); ++k)
        ctx.set_timer("lww.put." + std::to_string(k),
                      config_.put_interval * static_cast<Time>(k + 1));
    rounds_left_ = config_.sync_rounds;
    if (config_.sync_rounds > 0 && ctx.cluster_size() > 1)
      ctx.set_timer("lww.sync", config_.sync_interval);
  }

  void on_timer(sim::Context& ctx, std::string_view name) override {
    if (name.rfind("lww.put.", 0) == 0) {
      std::size_t k = std::stoul(std::string(name.substr(8)));
      const auto& [key, value] = config_.puts.at(ctx.self())[k];
      clock_->tick();
      map_.put(key, value, clock_->stamp());
      ctx.note("put " + key + "=" + value);
    } else if (name == "lww.sync") {
      ProcessId peer = static_cast<ProcessId>(
          ctx.random() % static_cast<std::uint64_t>(ctx.cluster_size() - 1));
      if (peer >= ctx.self()) ++peer;
      ctx.send(peer, encode_map(map_, "lww.state"));
      if (--rounds_left_ > 0) ctx.set_timer("lww.sync", config_.sync_interval);
    }
  }

  void on_message(sim::Context& ctx, ProcessId /*from*/,
                  const sim::Payload& payload) override {
    if (payload.tag != "lww.state") return;
    map_.merge(decode_map(payload));
    ctx.note("merged entries=" + std::to_string(map_.entries().size()));
  }

  const crdt::LwwMap& map() const { return map_; }

 private:
  LwwSyncConfig config_;
  crdt::LwwMap map_;
  std::optional<clocks::LamportClock> clock_;
  int rounds_left_ = 0;
};

// ---------------------------------------------------------------------------
// Merkle anti-entropy between two replicas: recursive descent over subtree
// hashes, then exchange of only the diverging entries.
// ---------------------------------------------------------------------------

struct MerkleSyncConfig {
  std::map<std::string, std::string> base;
  std::map<ProcessId, std::map<std::string, std::string>> overrides;
};

class MerkleSyncMachine : public sim::Machine {
 public:
  explicit MerkleSyncMachine(MerkleSyncConfig config)
      : config_(std::move(config)) {}

  void init(sim::Context& ctx) override {
    std::uint64_t stamp = 1;
    for (const auto& [key, value] : config_.base)
      map_.put(key, value, {stamp, -1});
    auto it = config_.overrides.find(ctx.self());
    if (it != config_.overrides.end())
      for (const auto& [key, value] : it->second)
        map_.put(key, value, {stamp + 1, ctx.self()});
    rebuild();
    if (ctx.self() == 0) ctx.set_timer("mk.start", 1);
  }

  void on_timer(sim::Context& ctx, std::string_view name) override {
    if (name != "mk.start") return;
    std::string body;
    append_hash(body, tree_->root());
    ctx.send(1, {"mk.root", body});
  }

  void on_message(sim::Context& ctx, ProcessId from,
                  const sim::Payload& payload) override {
    if (payload.tag == "mk.root") {
      merkle::Hash remote = read_hash(payload.body);
      if (remote == tree_->root()) {
        ctx.note("replicas-in-sync");
        return;
      }
      query_range(ctx, from, 0, tree_->leaf_count());

    } else if (payload.tag == "mk.q") {
      // Peer asks for our hash over [lo, hi).
      wire::Reader reader(payload.body);
      std::size_t lo = reader.u64(), hi = reader.u64();
      std::string body;
      wire::put_u64(body, lo);
      wire::put_u64(body, hi);
      append_hash(body, range_hash(lo, hi));
      ctx.send(from, {"mk.h", body});

    } else if (payload.tag == "mk.h") {
      wire::Reader reader(payload.body);
      std::size_t lo = reader.u64(), hi = reader.u64();
      merkle::Hash remote = read_hash(reader.str());
      --outstanding_;
      if (remote != range_hash(lo, hi)) {
        if (hi - lo == 1) {
          // One diverging leaf: exchange entries in both directions.
          const std::string& key = tree_->leaves()[lo].key;
          diff_keys_.push_back(key);
          std::string body;
          wire::put_str(body, key);
          ctx.send(from, {"mk.get", body});
          ctx.send(from, entry_payload(key));
        } else {
          std::size_t k = 1;
          while (k * 2 < hi - lo) k *= 2;
          query_range(ctx, from, lo, lo + k);
          query_range(ctx, from, lo + k, hi);
        }
      }
      if (outstanding_ == 0) {
        std::string keys;
        for (const auto& key : diff_keys_) keys += keys.empty() ? key : "," + key;
        ctx.note("diff keys=" + keys);
      }

    } else if (payload.tag == "mk.get") {
      wire::Reader reader(payload.body);
      ctx.send(from, entry_payload(reader.str()));

    } else if (payload.tag == "mk.entry") {
      map_.merge(decode_map(payload));
      rebuild();
      ctx.note("merged root=" + merkle::to_hex(tree_->root()).substr(0, 12));
    }
  }

  const crdt::LwwMap& map() const { return map_; }

 private:
  void rebuild() {
    std::vector<merkle::Leaf> leaves;
    for (const auto& [key, entry] : map_.entries()) {
      std::string encoded;
      wire::put_u64(encoded, entry.value ? 1 : 0);
      wire::put_str(encoded, entry.value ? *entry.value : "");
      wire::put_u64(encoded, entry.stamp.value);
      wire::put_i64(encoded, entry.stamp.owner);
      leaves.push_back({key, merkle::hash_value(encoded)});
    }
    tree_ = merkle::Tree::from_leaves(std::move(leaves));
  }

  merkle::Hash range_hash(std::size_t lo, std::size_t hi) const {
    // Tree::from_leaves over the slice reproduces the subtree hash because
    // the shape is a pure function of the leaf count.
    std::vector<merkle::Leaf> slice(tree_->leaves().begin() + lo,
                                    tree_->leaves().begin() + hi);
    return merkle::Tree::from_leaves(std::move(slice)).root();
  }

  void query_range(sim::Context& ctx, ProcessId peer, std::size_t lo,
                   std::size_t hi) {
    std::string body;
    wire::put_u64(body, lo);
    wire::put_u64(body, hi);
    ctx.send(peer, {"mk.q", body});
    ++outstanding_;
  }

  sim::Payload entry_payload(const std::string& key) const {
    crdt::LwwMap one;
    auto it = map_.entries().find(key);
    if (it != map_.entries().end()) {
      if (it->second.value)
        one.put(key, *it->second.value, it->second.stamp);
      else
        one.erase(key, it->second.stamp);
    }
    return encode_map(one, "mk.entry");
  }

  static void append_hash(std::string& body, const merkle::Hash& hash) {
    wire::put_str(body,
                  std::string(reinterpret_cast<const char*>(hash.data()),
                              hash.size()));
  }

  static merkle::Hash read_hash(const std::string& body) {
    wire::Reader reader(body);
    return read_hash_str(reader.str());
  }

  static merkle::Hash read_hash_str(const std::string& raw) {
    merkle::Hash hash{};
    std::copy_n(raw.begin(),
                std::min(raw.size(), hash.size()),
                hash.begin());
    return hash;
  }

  MerkleSyncConfig config_;
  crdt::LwwMap map_;
  std::optional<merkle::Tree> tree_;
  int outstanding_ = 0;
  std::vector<std::string> diff_keys_;
};

// ---------------------------------------------------------------------------
// Shared expectation helpers
// ---------------------------------------------------------------------------

ExpectationResult check_converged_maps(
    const Scenario&, const sim::Simulator& simulator,
    const std::function<const crdt::LwwMap&(const sim::Machine&)>& map_of) {
  std::optional<std::string> reference;
  for (ProcessId pid : correct_pids(simulator)) {
    std::string dump = map_of(simulator.machine(pid)).dump();
    if (!reference) {
      reference = dump;
    } else if (*reference != dump) {
      return failed("converged", "replica " + std::to_string(pid) +
                                     " diverges from the first correct replica");
    }
  }
  return pass("converged");
}

// ---------------------------------------------------------------------------
// Registrations
// ---------------------------------------------------------------------------

void register_clock_demos() {
  Protocol lamport;
  lamport.name = "lamport-demo";
  lamport.description =
      "scripted events across processes stamped by a scalar logical clock";
  lamport.params = {
      {"events", "list of {pid, at, op: local|send:<pid>} (default: built-in)"},
      {"rule", "receive merge rule: max-then-tick (default) | tick-then-max"},
  };
  lamport.expectation_docs = {
      {"stamps-monotone", "per-process stamps never decrease"},
  };
  lamport.build = [](const Scenario& scenario) {
    auto script = parse_demo_script(scenario);
    auto rule = param_or<std::string>(scenario, "rule", "max-then-tick") ==
                        "tick-then-max"
                    ? clocks::MergeRule::TickThenMax
                    : clocks::MergeRule::MaxThenTick;
    std::vector<std::unique_ptr<sim::Machine>> machines;
    for (int p = 0; p < scenario.sim.n_processes; ++p)
      machines.push_back(
          std::make_unique<LamportDemoMachine>(script[p], rule));
    return machines;
  };
  lamport.expectations = {{"stamps-monotone", check_lamport_monotone}};
  register_protocol(std::move(lamport));

  Protocol vector;
  vector.name = "vector-demo";
  vector.description =
      "scripted events across processes stamped by a vector clock";
  vector.params = {
      {"events", "list of {pid, at, op: local|send:<pid>} (default: built-in)"},
  };
  vector.expectation_docs = {
      {"stamps-monotone", "per-process vectors never decrease element-wise"},
  };
  vector.build = [](const Scenario& scenario) {
    auto script = parse_demo_script(scenario);
    std::vector<std::unique_ptr<sim::Machine>> machines;
    for (int p = 0; p < scenario.sim.n_processes; ++p)
      machines.push_back(std::make_unique<VectorDemoMachine>(script[p]));
    return machines;
  };
  vector.expectations = {{"stamps-monotone", check_vector_monotone}};
  register_protocol(std::move(vector));
}

void register_fdetect() {
  Protocol protocol;
  protocol.name = "fdetect";
  protocol.description =
      "heartbeat failure detector with adaptive per-peer timeouts";
  protocol.params = {
      {"heartbeat_interval", "ticks between heartbeat rounds (default 10)"},
      {"initial_timeout", "initial silence tolerance (default 30)"},
      {"timeout_increment", "added after a false suspicion (default 15)"},
  };
  protocol.expectation_docs = {
      {"crashed-suspected",
       "every crashed process is suspected by every correct process"},
      {"no-false-suspicion",
       "no correct process is suspected by a correct process at the end"},
  };
  protocol.build = [](const Scenario& scenario) {
    fdetect::Config config;
    config.heartbeat_interval =
        param_or<Time>(scenario, "heartbeat_interval", 10);
    config.initial_timeout = param_or<Time>(scenario, "initial_timeout", 30);
    config.timeout_increment =
        param_or<Time>(scenario, "timeout_increment", 15);
    std::vector<std::unique_ptr<sim::Machine>> machines;
    for (int p = 0; p < scenario.sim.n_processes; ++p)
      machines.push_back(std::make_unique<fdetect::DetectorMachine>(config));
    return machines;
  };
  protocol.expectations = {
      {"crashed-suspected",
       [](const Scenario& scenario, const sim::Simulator& simulator) {
         for (ProcessId p : correct_pids(simulator)) {
           const auto& detector =
               simulator.machine_as<fdetect::DetectorMachine>(p).detector();
           for (const auto& [crashed, at] : scenario.sim.crash_schedule)
             if (!detector.suspects(crashed))
               return failed("crashed-suspected",
                             "p" + std::to_string(p) + " does not suspect " +
                                 std::to_string(crashed));
         }
         return pass("crashed-suspected");
       }},
      {"no-false-suspicion",
       [](const Scenario&, const sim::Simulator& simulator) {
         auto correct = correct_pids(simulator);
         for (ProcessId p : correct) {
           const auto& detector =
               simulator.machine_as<fdetect::DetectorMachine>(p).detector();
           for (ProcessId q : correct)
             if (q != p && detector.suspects(q))
               return failed("no-false-suspicion",
                             "p" + std::to_string(p) + " still suspects " +
                                 std::to_string(q));
         }
         return pass("no-false-suspicion");
       }},
  };
  register_protocol(std::move(protocol));
}

std::vector<election::Ballot> ballots_broadcast(
    const sim::Simulator& simulator) {
  std::vector<election::Ballot> ballots;
  for (const auto& rec : simulator.trace()) {
    if (rec.kind != sim::TraceKind::Send) continue;
    auto pos = rec.detail.find(" el.ballot ");
    if (pos == std::string::npos) continue;
    wire::Reader reader(
        std::string_view(rec.detail).substr(pos + sizeof(" el.ballot ") - 1));
    election::Ballot b;
    b.round = reader.u64();
    b.pid = static_cast<ProcessId>(reader.i64());
    ballots.push_back(b);
  }
  return ballots;
}

void register_election() {
  Protocol protocol;
  protocol.name = "election";
  protocol.description = "ballot-based leader election (bully variant)";
  protocol.params = {
      {"candidates", "pids whose candidacy timers race first (default [0])"},
      {"candidacy_wait", "delay before the racing candidacies fire (default 5)"},
      {"bystander_wait", "delay for all other processes (default 200)"},
  };
  protocol.expectation_docs = {
      {"agreement", "all correct processes settle on the same leader ballot"},
      {"max-ballot-wins", "the settled ballot is the maximum broadcast"},
      {"settled", "every correct process settles on some leader"},
  };
  protocol.build = [](const Scenario& scenario) {
    auto candidates = param_or<std::vector<ProcessId>>(scenario, "candidates",
                                                       {0});
    Time wait = param_or<Time>(scenario, "candidacy_wait", 5);
    Time bystander = param_or<Time>(scenario, "bystander_wait", 200);
    std::vector<std::unique_ptr<sim::Machine>> machines;
    for (int p = 0; p < scenario.sim.n_processes; ++p) {
      bool racing = std::find(candidates.begin(), candidates.end(), p) !=
                    candidates.end();
      machines.push_back(
          std::make_unique<election::ElectionMachine>(racing ? wait : bystander));
    }
    return machines;
  };
  protocol.expectations = {
      {"settled",
       [](const Scenario&, const sim::Simulator& simulator) {
         for (ProcessId p : correct_pids(simulator))
           if (!simulator.machine_as<election::ElectionMachine>(p)
                    .elector()
                    .leader())
             return failed("settled", "p" + std::to_string(p) + " has no leader");
         return pass("settled");
       }},
      {"agreement",
       [](const Scenario&, const sim::Simulator& simulator) {
         std::optional<election::Ballot> reference;
         for (ProcessId p : correct_pids(simulator)) {
           auto adopted = simulator.machine_as<election::ElectionMachine>(p)
                              .elector()
                              .adopted_ballot();
           if (!adopted)
             return failed("agreement", "p" + std::to_string(p) + " unsettled");
           if (!reference) reference = adopted;
           if (*adopted != *reference)
             return failed("agreement",
                           "p" + std::to_string(p) + " settled on " +
                               adopted->to_string() + " not " +
                               reference->to_string());
         }
         return pass("agreement");
       }},
      {"max-ballot-wins",
       [](const Scenario&, const sim::Simulator& simulator) {
         auto ballots = ballots_broadcast(simulator);
         if (ballots.empty())
           return failed("max-ballot-wins", "no ballots broadcast");
         election::Ballot max = *std::max_element(ballots.begin(), ballots.end());
         for (ProcessId p : correct_pids(simulator)) {
           auto adopted = simulator.machine_as<election::ElectionMachine>(p)
                              .elector()
                              .adopted_ballot();
           if (!adopted || *adopted != max)
             return failed("max-ballot-wins",
                           "p" + std::to_string(p) + " settled on " +
                               (adopted ? adopted->to_string() : "none") +
                               " but the max broadcast was " + max.to_string());
         }
         return pass("max-ballot-wins");
       }},
  };
  register_protocol(std::move(protocol));
}

std::map<ProcessId, paxos::Value> parse_proposals(const Scenario& scenario) {
  std::map<ProcessId, paxos::Value> proposals;
  if (scenario.params.contains("values")) {
    for (const auto& [pid_text, value] : scenario.params.at("values").items())
      proposals[std::stoi(pid_text)] = value.get<std::string>();
  } else {
    proposals[0] = "alpha";
  }
  return proposals;
}

void register_paxos() {
  Protocol protocol;
  protocol.name = "paxos";
  protocol.description =
      "single-value abortable consensus over co-located roles";
  protocol.params = {
      {"values", "object proposer-pid -> proposed value (default {\"0\":\"alpha\"})"},
      {"retry", "proposers retry stalled rounds (default true)"},
      {"retry_base", "retry backoff base ticks (default 60)"},
      {"retry_jitter", "retry backoff jitter ticks (default 40)"},
  };
  protocol.expectation_docs = {
      {"agreement", "no two correct processes decide different values"},
      {"validity", "every decided value was proposed"},
      {"integrity", "each process decides at most once"},
      {"decided", "every correct process decides"},
  };
  protocol.build = [](const Scenario& scenario) {
    paxos::NodeConfig config;
    config.proposals = parse_proposals(scenario);
    config.retry = param_or<bool>(scenario, "retry", true);
    config.retry_base = param_or<Time>(scenario, "retry_base", 60);
    config.retry_jitter = param_or<Time>(scenario, "retry_jitter", 40);
    std::vector<std::unique_ptr<sim::Machine>> machines;
    for (int p = 0; p < scenario.sim.n_processes; ++p)
      machines.push_back(std::make_unique<paxos::Node>(config));
    return machines;
  };
  protocol.stop_predicate = [](const Scenario&) {
    return [](const sim::Simulator& simulator) {
      for (ProcessId p : correct_pids(simulator))
        if (!simulator.machine_as<paxos::Node>(p).decided()) return false;
      return true;
    };
  };
  protocol.expectations = {
      {"agreement",
       [](const Scenario&, const sim::Simulator& simulator) {
         std::set<paxos::Value> decided;
         for (int p = 0; p < simulator.cluster_size(); ++p) {
           const auto& value = simulator.machine_as<paxos::Node>(p).decided();
           if (value) decided.insert(*value);
         }
         if (decided.size() > 1)
           return failed("agreement", "distinct decided values: " +
                                          std::to_string(decided.size()));
         return pass("agreement");
       }},
      {"validity",
       [](const Scenario& scenario, const sim::Simulator& simulator) {
         auto proposals = parse_proposals(scenario);
         std::set<paxos::Value> proposed;
         for (const auto& [pid, value] : proposals) proposed.insert(value);
         for (int p = 0; p < simulator.cluster_size(); ++p) {
           const auto& value = simulator.machine_as<paxos::Node>(p).decided();
           if (value && !proposed.count(*value))
             return failed("validity", "decided \"" + *value +
                                           "\" was never proposed");
         }
         return pass("validity");
       }},
      {"integrity",
       [](const Scenario&, const sim::Simulator& simulator) {
         std::map<ProcessId, int> decide_records;
         for (const auto& rec : simulator.trace())
           if (rec.kind == sim::TraceKind::Decide) ++decide_records[rec.actor];
         for (const auto& [pid, count] : decide_records)
           if (count > 1)
             return failed("integrity", "p" + std::to_string(pid) +
                                            " decided " +
                                            std::to_string(count) + " times");
         return pass("integrity");
       }},
      {"decided",
       [](const Scenario&, const sim::Simulator& simulator) {
         for (ProcessId p : correct_pids(simulator))
           if (!simulator.machine_as<paxos::Node>(p).decided())
             return failed("decided", "p" + std::to_string(p) + " undecided");
         return pass("decided");
       }},
  };
  register_protocol(std::move(protocol));
}

seqlog::ReplicaConfig parse_replica_config(const Scenario& scenario,
                                           bool raft) {
  seqlog::ReplicaConfig config;
  config.raft = raft;
  config.values = param_or<std::vector<std::string>>(scenario, "values",
                                                     {"a", "b", "c"});
  config.fixed_proposer = param_or<ProcessId>(scenario, "proposer", 0);
  std::string grouping = param_or<std::string>(scenario, "grouping", "all");
  if (grouping == "all")
    config.grouping = seqlog::Grouping::AllVoters;
  else if (grouping == "even-acceptors")
    config.grouping = seqlog::Grouping::EvenRankAcceptors;
  else if (grouping == "successor-learner")
    config.grouping = seqlog::Grouping::SuccessorLearner;
  else
    throw ScenarioError("unknown grouping \"" + grouping + "\"");
  config.fd.heartbeat_interval =
      param_or<Time>(scenario, "heartbeat_interval", 10);
  config.fd.initial_timeout = param_or<Time>(scenario, "initial_timeout", 35);
  config.fd.timeout_increment =
      param_or<Time>(scenario, "timeout_increment", 20);
  config.candidacy_wait = param_or<Time>(scenario, "candidacy_wait", 30);
  config.candidacy_jitter = param_or<Time>(scenario, "candidacy_jitter", 20);
  config.progress_timeout = param_or<Time>(scenario, "progress_timeout", 150);
  return config;
}

ExpectationResult check_prefix(const Scenario&,
                               const sim::Simulator& simulator) {
  std::vector<const seqlog::ReplicatedLog*> logs;
  for (int p = 0; p < simulator.cluster_size(); ++p)
    logs.push_back(&simulator.machine_as<seqlog::ReplicaNode>(p).log());
  if (!seqlog::prefix_consistent(logs))
    return failed("prefix", "logs are not prefixes of one another");
  return pass("prefix");
}

ExpectationResult check_complete_logs(const Scenario& scenario,
                                      const sim::Simulator& simulator) {
  auto values =
      param_or<std::vector<std::string>>(scenario, "values", {"a", "b", "c"});
  std::optional<std::vector<std::string>> reference;
  for (ProcessId p : correct_pids(simulator)) {
    const auto& log = simulator.machine_as<seqlog::ReplicaNode>(p).log();
    if (log.decided_upto() != values.size())
      return failed("complete-logs",
                    "p" + std::to_string(p) + " has " +
                        std::to_string(log.decided_upto()) + "/" +
                        std::to_string(values.size()) + " slots");
    for (const auto& value : values)
      if (!log.contains(value))
        return failed("complete-logs", "p" + std::to_string(p) + " misses \"" +
                                           value + "\"");
    if (!reference)
      reference = log.entries();
    else if (*reference != log.entries())
      return failed("complete-logs",
                    "p" + std::to_string(p) + " log differs from reference");
  }
  return pass("complete-logs");
}

ExpectationResult check_no_overwrite(const Scenario&,
                                     const sim::Simulator& simulator) {
  // Decide records carry "slot=<s> value=<v> ballot=...": all decisions for a
  // slot must agree.
  std::map<std::string, std::string> per_slot;
  for (const auto& rec : simulator.trace()) {
    if (rec.kind != sim::TraceKind::Decide) continue;
    auto slot_pos = rec.detail.find("slot=");
    auto value_pos = rec.detail.find(" value=");
    auto ballot_pos = rec.detail.find(" ballot=");
    if (slot_pos == std::string::npos || value_pos == std::string::npos)
      continue;
    std::string slot = rec.detail.substr(slot_pos + 5, value_pos - slot_pos - 5);
    std::string value =
        rec.detail.substr(value_pos + 7, ballot_pos - value_pos - 7);
    auto [it, inserted] = per_slot.emplace(slot, value);
    if (!inserted && it->second != value)
      return failed("no-overwrite", "slot " + slot + " decided as \"" +
                                        it->second + "\" and \"" + value +
                                        "\"");
  }
  return pass("no-overwrite");
}

void register_seq_paxos() {
  Protocol protocol;
  protocol.name = "seq-paxos";
  protocol.description =
      "replicated log built from one consensus instance per slot";
  protocol.params = {
      {"values", "array of values to replicate in order (default [a,b,c])"},
      {"proposer", "fixed proposer pid (default 0)"},
      {"progress_timeout", "proposer retry interval (default 150)"},
  };
  protocol.expectation_docs = {
      {"prefix", "all logs are prefix-comparable at the end"},
      {"complete-logs", "every correct replica holds all submitted values"},
      {"no-overwrite", "no slot is ever decided twice with different values"},
  };
  protocol.build = [](const Scenario& scenario) {
    auto config = parse_replica_config(scenario, false);
    std::vector<std::unique_ptr<sim::Machine>> machines;
    for (int p = 0; p < scenario.sim.n_processes; ++p)
      machines.push_back(std::make_unique<seqlog::ReplicaNode>(config));
    return machines;
  };
  protocol.stop_predicate = [](const Scenario&) {
    return [](const sim::Simulator& simulator) {
      for (ProcessId p : correct_pids(simulator))
        if (!simulator.machine_as<seqlog::ReplicaNode>(p)
                 .replication_complete())
          return false;
      return true;
    };
  };
  protocol.expectations = {
      {"prefix", check_prefix},
      {"complete-logs", check_complete_logs},
      {"no-overwrite", check_no_overwrite},
  };
  register_protocol(std::move(protocol));
}

void register_raft() {
  Protocol protocol;
  protocol.name = "raft";
  protocol.description =
      "election-driven replicated log: failure detector + leader election + "
      "per-slot consensus";
  protocol.params = {
      {"values", "array of values to replicate (default [a,b,c])"},
      {"grouping", "acceptor grouping: all | even-acceptors | successor-learner"},
      {"heartbeat_interval", "failure detector heartbeat period (default 10)"},
      {"initial_timeout", "failure detector initial timeout (default 35)"},
      {"timeout_increment", "failure detector timeout growth (default 20)"},
      {"candidacy_wait", "base candidacy delay (default 30)"},
      {"candidacy_jitter", "seeded extra candidacy delay (default 20)"},
      {"progress_timeout", "leader re-prepare interval (default 150)"},
      {"crash_leader_after_slots",
       "crash the elected leader once this many slots decided (-1: never)"},
  };
  protocol.expectation_docs = {
      {"prefix", "all logs are prefix-comparable at the end"},
      {"complete-logs", "every correct replica holds all submitted values"},
      {"no-overwrite", "no slot is ever decided twice with different values"},
      {"single-leader", "exactly one distinct leader was ever adopted"},
  };
  protocol.build = [](const Scenario& scenario) {
    auto config = parse_replica_config(scenario, true);
    std::vector<std::unique_ptr<sim::Machine>> machines;
    for (int p = 0; p < scenario.sim.n_processes; ++p)
      machines.push_back(std::make_unique<seqlog::ReplicaNode>(config));
    return machines;
  };
  protocol.execute = [](const Scenario& scenario, sim::Simulator& simulator) {
    int crash_after =
        param_or<int>(scenario, "crash_leader_after_slots", -1);
    auto all_complete = [](const sim::Simulator& s) {
      for (ProcessId p : correct_pids(s))
        if (!s.machine_as<seqlog::ReplicaNode>(p).replication_complete())
          return false;
      return true;
    };
    if (crash_after < 0)
      return simulator.run_until(all_complete, scenario.step_budget);

    // Phase 1: wait for a leader with enough replicated slots, then kill it.
    auto progressed = [crash_after](const sim::Simulator& s) {
      for (ProcessId p : correct_pids(s)) {
        const auto& node = s.machine_as<seqlog::ReplicaNode>(p);
        auto leader = node.leader();
        if (leader && s.correct(*leader) &&
            s.machine_as<seqlog::ReplicaNode>(*leader).log().decided_upto() >=
                static_cast<std::uint64_t>(crash_after))
          return true;
      }
      return false;
    };
    auto phase1 = simulator.run_until(progressed, scenario.step_budget);
    if (phase1.halted_by != sim::HaltCause::Predicate) return phase1;

    std::optional<ProcessId> leader;
    for (ProcessId p : correct_pids(simulator)) {
      auto l = simulator.machine_as<seqlog::ReplicaNode>(p).leader();
      if (l && simulator.correct(*l)) leader = *l;
    }
    if (leader) simulator.crash(*leader, simulator.now());

    auto phase2 = simulator.run_until(
        all_complete, scenario.step_budget - phase1.steps);
    phase2.steps += phase1.steps;
    return phase2;
  };
  protocol.expectations = {
      {"prefix", check_prefix},
      {"complete-logs", check_complete_logs},
      {"no-overwrite", check_no_overwrite},
      {"single-leader",
       [](const Scenario&, const sim::Simulator& simulator) {
         std::set<std::string> leaders;
         for (const auto& rec : simulator.trace())
           if (rec.kind == sim::TraceKind::StateNote &&
               rec.detail.rfind("leader=", 0) == 0) {
             auto end = rec.detail.find(' ');
             leaders.insert(rec.detail.substr(7, end - 7));
           }
         if (leaders.size() != 1)
           return failed("single-leader", std::to_string(leaders.size()) +
                                              " distinct leaders adopted");
         return pass("single-leader");
       }},
  };
  register_protocol(std::move(protocol));
}

commit::Config parse_commit_config(const Scenario& scenario, bool three_phase) {
  commit::Config config;
  config.three_phase = three_phase;
  config.tx_id = param_or<int>(scenario, "tx_id", 1);
  config.coordinator = 0;
  for (int p = 1; p < scenario.sim.n_processes; ++p)
    config.participants.push_back(p);
  if (scenario.params.contains("votes"))
    for (const auto& [pid_text, yes] : scenario.params.at("votes").items())
      config.votes[std::stoi(pid_text)] = yes.get<bool>();
  config.vote_timeout = param_or<Time>(scenario, "vote_timeout", 60);
  config.ack_timeout = param_or<Time>(scenario, "ack_timeout", 60);
  config.silence_timeout = param_or<Time>(scenario, "silence_timeout", 150);
  config.report_timeout = param_or<Time>(scenario, "report_timeout", 60);
  return config;
}

std::vector<std::unique_ptr<sim::Machine>> build_commit(
    const Scenario& scenario, bool three_phase) {
  if (scenario.sim.n_processes < 2)
    throw ScenarioError("commit protocols need a coordinator and participants");
  auto config = parse_commit_config(scenario, three_phase);
  std::vector<std::unique_ptr<sim::Machine>> machines;
  machines.push_back(std::make_unique<commit::CoordinatorNode>(config));
  for (int p = 1; p < scenario.sim.n_processes; ++p)
    machines.push_back(std::make_unique<commit::ParticipantNode>(config));
  return machines;
}

std::map<std::string, Expectation> commit_expectations() {
  return {
      {"atomic",
       [](const Scenario&, const sim::Simulator& simulator) {
         bool committed = false, aborted = false;
         for (int p = 1; p < simulator.cluster_size(); ++p) {
           auto phase = simulator.machine_as<commit::ParticipantNode>(p).phase();
           if (phase == commit::Phase::Committed) committed = true;
           if (phase == commit::Phase::Aborted) aborted = true;
         }
         if (committed && aborted)
           return failed("atomic", "mixed terminal outcomes across participants");
         return pass("atomic");
       }},
      {"all-terminal",
       [](const Scenario&, const sim::Simulator& simulator) {
         for (int p = 1; p < simulator.cluster_size(); ++p) {
           if (!simulator.correct(p)) continue;
           auto phase = simulator.machine_as<commit::ParticipantNode>(p).phase();
           if (!commit::terminal(phase))
             return failed("all-terminal",
                           "p" + std::to_string(p) + " ended " +
                               commit::to_string(phase));
         }
         return pass("all-terminal");
       }},
      {"committed",
       [](const Scenario&, const sim::Simulator& simulator) {
         for (int p = 1; p < simulator.cluster_size(); ++p) {
           if (!simulator.correct(p)) continue;
           auto phase = simulator.machine_as<commit::ParticipantNode>(p).phase();
           if (phase != commit::Phase::Committed)
             return failed("committed", "p" + std::to_string(p) + " ended " +
                                            commit::to_string(phase));
         }
         return pass("committed");
       }},
      {"aborted",
       [](const Scenario&, const sim::Simulator& simulator) {
         for (int p = 1; p < simulator.cluster_size(); ++p) {
           if (!simulator.correct(p)) continue;
           auto phase = simulator.machine_as<commit::ParticipantNode>(p).phase();
           if (phase == commit::Phase::Committed)
             return failed("aborted", "p" + std::to_string(p) + " committed");
         }
         return pass("aborted");
       }},
      {"blocked-without-coordinator",
       [](const Scenario&, const sim::Simulator& simulator) {
         // 2PC only: with the coordinator dead before any decision, every
         // yes-voting participant must still be in Prepared.
         bool coordinator_decided = false;
         for (const auto& rec : simulator.trace())
           if (rec.kind == sim::TraceKind::Decide && rec.actor == 0)
             coordinator_decided = true;
         if (simulator.correct(0) || coordinator_decided)
           return pass("blocked-without-coordinator");
         for (int p = 1; p < simulator.cluster_size(); ++p) {
           if (!simulator.correct(p)) continue;
           auto phase = simulator.machine_as<commit::ParticipantNode>(p).phase();
           if (phase == commit::Phase::Committed)
             return failed("blocked-without-coordinator",
                           "p" + std::to_string(p) +
                               " committed without a coordinator command");
         }
         return pass("blocked-without-coordinator");
       }},
  };
}

void register_commit() {
  for (bool three_phase : {false, true}) {
    Protocol protocol;
    protocol.name = three_phase ? "3pc" : "2pc";
    protocol.description =
        three_phase
            ? "three-phase atomic commit (non-blocking under crash-stop)"
            : "two-phase atomic commit (blocks if the coordinator dies)";
    protocol.params = {
        {"votes", "object participant-pid -> true/false (default all yes)"},
        {"tx_id", "transaction identifier (default 1)"},
        {"vote_timeout", "coordinator wait for votes (default 60)"},
        {"ack_timeout", "coordinator wait for pre-commit acks (default 60)"},
        {"silence_timeout",
         "participant wait before the termination protocol (3pc, default 150)"},
        {"report_timeout", "surrogate wait for state reports (default 60)"},
    };
    protocol.expectation_docs = {
        {"atomic", "terminal outcomes never mix"},
        {"all-terminal", "every correct participant reaches a terminal state"},
        {"committed", "every correct participant committed"},
        {"aborted", "no correct participant committed"},
        {"blocked-without-coordinator",
         "a dead coordinator before the decision leaves yes-voters pending"},
    };
    protocol.build = [three_phase](const Scenario& scenario) {
      return build_commit(scenario, three_phase);
    };
    protocol.expectations = commit_expectations();
    register_protocol(std::move(protocol));
  }
}

void register_lww_sync() {
  Protocol protocol;
  protocol.name = "lww-sync";
  protocol.description =
      "last-write-wins map replicas converging by periodic state push";
  protocol.params = {
      {"puts", "object pid -> array of [key, value] writes"},
      {"put_interval", "ticks between a replica's writes (default 3)"},
      {"sync_interval", "ticks between push rounds (default 10)"},
      {"sync_rounds", "push rounds per replica (default 8)"},
  };
  protocol.expectation_docs = {
      {"converged", "all correct replicas hold identical maps"},
  };
  protocol.build = [](const Scenario& scenario) {
    LwwSyncConfig config;
    if (scenario.params.contains("puts")) {
      for (const auto& [pid_text, puts] : scenario.params.at("puts").items())
        for (const auto& put : puts)
          config.puts[std::stoi(pid_text)].emplace_back(
              put.at(0).get<std::string>(), put.at(1).get<std::string>());
    } else {
      config.puts[0] = {{"x", "left"}, {"y", "one"}};
      config.puts[1] = {{"x", "right"}, {"z", "two"}};
    }
    config.put_interval = param_or<Time>(scenario, "put_interval", 3);
    config.sync_interval = param_or<Time>(scenario, "sync_interval", 10);
    config.sync_rounds = param_or<int>(scenario, "sync_rounds", 8);
    std::vector<std::unique_ptr<sim::Machine>> machines;
    for (int p = 0; p < scenario.sim.n_processes; ++p)
      machines.push_back(std::make_unique<LwwSyncMachine>(config));
    return machines;
  };
  protocol.expectations = {
      {"converged",
       [](const Scenario& scenario, const sim::Simulator& simulator) {
         return check_converged_maps(
             scenario, simulator,
             [](const sim::Machine& machine) -> const crdt::LwwMap& {
               return dynamic_cast<const LwwSyncMachine&>(machine).map();
             });
       }},
  };
  register_protocol(std::move(protocol));
}

void register_gossip() {
  Protocol protocol;
  protocol.name = "gossip";
  protocol.description = "push rumor mongering with bounded rounds";
  protocol.params = {
      {"origin", "first infected pid (default 0)"},
      {"fanout", "peers pushed per round (default 2)"},
      {"rounds", "rounds each infected node gossips (default 10)"},
      {"round_interval", "ticks between rounds (default 5)"},
      {"rumor", "rumor payload (default \"rumor\")"},
  };
  protocol.expectation_docs = {
      {"all-infected", "every correct process learned the rumor"},
  };
  protocol.build = [](const Scenario& scenario) {
    gossip::RumorConfig config;
    config.origin = param_or<ProcessId>(scenario, "origin", 0);
    config.fanout = param_or<int>(scenario, "fanout", 2);
    config.rounds = param_or<int>(scenario, "rounds", 10);
    config.round_interval = param_or<Time>(scenario, "round_interval", 5);
    config.rumor = param_or<std::string>(scenario, "rumor", "rumor");
    std::vector<std::unique_ptr<sim::Machine>> machines;
    for (int p = 0; p < scenario.sim.n_processes; ++p)
      machines.push_back(std::make_unique<gossip::RumorMachine>(config));
    return machines;
  };
  protocol.expectations = {
      {"all-infected",
       [](const Scenario&, const sim::Simulator& simulator) {
         for (ProcessId p : correct_pids(simulator))
           if (!simulator.machine_as<gossip::RumorMachine>(p).infected())
             return failed("all-infected",
                           "p" + std::to_string(p) + " never infected");
         return pass("all-infected");
       }},
  };
  register_protocol(std::move(protocol));
}

void register_merkle_diff() {
  Protocol protocol;
  protocol.name = "merkle-diff";
  protocol.description =
      "two replicas reconcile by recursive hash-tree descent, shipping only "
      "diverging entries";
  protocol.params = {
      {"items", "object key -> value shared by both replicas"},
      {"left_overrides", "object key -> value applied on pid 0"},
      {"right_overrides", "object key -> value applied on pid 1"},
  };
  protocol.expectation_docs = {
      {"converged", "both replicas hold identical maps afterwards"},
  };
  protocol.build = [](const Scenario& scenario) {
    if (scenario.sim.n_processes != 2)
      throw ScenarioError("merkle-diff runs on exactly 2 processes");
    MerkleSyncConfig config;
    if (scenario.params.contains("items"))
      for (const auto& [key, value] : scenario.params.at("items").items())
        config.base[key] = value.get<std::string>();
    else
      config.base = {{"a", "1"}, {"b", "2"}, {"c", "3"}, {"d", "4"}};
    if (scenario.params.contains("left_overrides"))
      for (const auto& [key, value] :
           scenario.params.at("left_overrides").items())
        config.overrides[0][key] = value.get<std::string>();
    if (scenario.params.contains("right_overrides"))
      for (const auto& [key, value] :
           scenario.params.at("right_overrides").items())
        config.overrides[1][key] = value.get<std::string>();
    if (config.overrides.empty()) config.overrides[1] = {{"b", "two"}};
    std::vector<std::unique_ptr<sim::Machine>> machines;
    machines.push_back(std::make_unique<MerkleSyncMachine>(config));
    machines.push_back(std::make_unique<MerkleSyncMachine>(config));
    return machines;
  };
  protocol.expectations = {
      {"converged",
       [](const Scenario& scenario, const sim::Simulator& simulator) {
         return check_converged_maps(
             scenario, simulator,
             [](const sim::Machine& machine) -> const crdt::LwwMap& {
               return dynamic_cast<const MerkleSyncMachine&>(machine).map();
             });
       }},
  };
  register_protocol(std::move(protocol));
}

}  // namespace

void register_builtins() {
  register_clock_demos();
  register_fdetect();
  register_election();
  register_paxos();
  register_seq_paxos();
  register_raft();
  register_commit();
  register_lww_sync();
  register_gossip();
  register_merkle_diff();
}

}  // namespace detail
}  // namespace qsim::scenario
