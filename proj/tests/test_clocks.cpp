// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/clocks.hpp"

#include <doctest.h>

#include "oracles.hpp"
#include "qsim/rng.hpp"

using namespace qsim;
using clocks::CausalOrder;
using clocks::LamportClock;
using clocks::MergeRule;
using clocks::VectorClock;

TEST_CASE("lamport tick increments by one") {
  LamportClock clock(0);
  CHECK(clock.tick() == 1);
  clock = LamportClock(0, 2);
  CHECK(clock.tick() == 3);
  clock = LamportClock(0);
  for (int i = 0; i < 7; ++i) clock.tick();
  CHECK(clock.value() == 7);
}

TEST_CASE("lamport receive merge rules") {
  LamportClock clock(1);
  CHECK(clock.receive(3, MergeRule::TickThenMax) == 3);  // max(0+1, 3)

  clock = LamportClock(2, 1);
  CHECK(clock.receive(5, MergeRule::TickThenMax) == 5);  // max(1+1, 5)

  clock = LamportClock(0, 5);
  CHECK(clock.receive(3, MergeRule::MaxThenTick) == 6);  // max(5,3)+1
}

TEST_CASE("lamport receive never decreases") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    std::uint64_t local = rng.below(100);
    std::uint64_t received = rng.below(100);
    for (auto rule : {MergeRule::MaxThenTick, MergeRule::TickThenMax}) {
      LamportClock clock(0, local);
      clock.receive(received, rule);
      CHECK(clock.value() >= local);
      CHECK(clock.value() >= received);
    }
  }
}

TEST_CASE("vector local event touches only the owner slot") {
  VectorClock p0(3, 0);
  p0.local_event();
  CHECK(p0.components() == std::vector<std::uint64_t>{1, 0, 0});

  VectorClock p1({4, 0, 0}, 1);
  p1.local_event();
  CHECK(p1.components() == std::vector<std::uint64_t>{4, 1, 0});

  VectorClock p2({4, 2, 1}, 2);
  p2.local_event();
  CHECK(p2.components() == std::vector<std::uint64_t>{4, 2, 2});
}

TEST_CASE("vector receive is element-wise max then own tick") {
  VectorClock p1(3, 1);
  p1.receive(std::vector<std::uint64_t>{3, 0, 0});
  CHECK(p1.components() == std::vector<std::uint64_t>{3, 1, 0});

  VectorClock p2({0, 0, 1}, 2);
  p2.receive(std::vector<std::uint64_t>{4, 2, 0});
  CHECK(p2.components() == std::vector<std::uint64_t>{4, 2, 2});

  VectorClock p0(3, 0);
  p0.receive(std::vector<std::uint64_t>{0, 0, 0});
  CHECK(p0.components() == std::vector<std::uint64_t>{1, 0, 0});
}

TEST_CASE("vector receive rejects mismatched lengths") {
  VectorClock clock(3, 0);
  CHECK_THROWS_AS(clock.receive(std::vector<std::uint64_t>{1, 2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(clocks::causal_order(std::vector<std::uint64_t>{1},
                                       std::vector<std::uint64_t>{1, 2}),
                  std::invalid_argument);
}

TEST_CASE("causal order basic cases") {
  using V = std::vector<std::uint64_t>;
  CHECK(clocks::causal_order(V{0, 0, 0}, V{0, 0, 0}) == CausalOrder::Equal);
  CHECK(clocks::causal_order(V{3, 0, 0}, V{4, 2, 0}) == CausalOrder::Before);
  CHECK(clocks::causal_order(V{4, 2, 0}, V{3, 0, 0}) == CausalOrder::After);
  CHECK(clocks::causal_order(V{4, 0, 0}, V{0, 0, 1}) ==
        CausalOrder::Concurrent);
}

TEST_CASE("vc_compare agrees with the happens-before closure") {
  Rng rng(2024);
  for (int round = 0; round < 200; ++round) {
    int n = static_cast<int>(rng.between(1, 5));
    auto exec = testing::random_execution(n, 20, rng);
    std::size_t m = exec.events.size();
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        auto order = clocks::causal_order(exec.events[a].vector_stamp,
                                          exec.events[b].vector_stamp);
        if (a == b) {
          CHECK(order == CausalOrder::Equal);
        } else if (exec.happens_before[a][b]) {
          CHECK(order == CausalOrder::Before);
        } else if (exec.happens_before[b][a]) {
          CHECK(order == CausalOrder::After);
        } else {
          CHECK(order == CausalOrder::Concurrent);
        }
      }
    }
  }
}

TEST_CASE("lamport rules are monotone along causal edges") {
  Rng rng(515);
  for (int round = 0; round < 200; ++round) {
    int n = static_cast<int>(rng.between(2, 5));
    auto exec = testing::random_execution(n, 20, rng);
    std::size_t m = exec.events.size();
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        if (!exec.happens_before[a][b]) continue;
        CHECK(exec.events[a].lamport_standard <
              exec.events[b].lamport_standard);
        CHECK(exec.events[a].lamport_alt <= exec.events[b].lamport_alt);
      }
    }
  }
}

TEST_CASE("causal order is antisymmetric and concurrency is symmetric") {
  Rng rng(77);
  for (int round = 0; round < 300; ++round) {
    std::vector<std::uint64_t> a(4), b(4);
    for (std::size_t i = 0; i < 4; ++i) {
      a[i] = rng.below(4);
      b[i] = rng.below(4);
    }
    auto ab = clocks::causal_order(a, b);
    auto ba = clocks::causal_order(b, a);
    switch (ab) {
      case CausalOrder::Before: CHECK(ba == CausalOrder::After); break;
      case CausalOrder::After: CHECK(ba == CausalOrder::Before); break;
      case CausalOrder::Equal: CHECK(ba == CausalOrder::Equal); break;
      case CausalOrder::Concurrent: CHECK(ba == CausalOrder::Concurrent); break;
    }
  }
}

TEST_CASE("vector receive output dominates both inputs") {
  Rng rng(31);
  for (int round = 0; round < 300; ++round) {
    std::vector<std::uint64_t> local(3), received(3);
    for (std::size_t i = 0; i < 3; ++i) {
      local[i] = rng.below(10);
      received[i] = rng.below(10);
    }
    VectorClock clock(local, 1);
    clock.receive(received);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(clock.components()[i] >= local[i]);
      CHECK(clock.components()[i] >= received[i]);
    }
  }
}

TEST_CASE("lamport stamps order totally with owner tie-break") {
  clocks::LamportStamp a{5, 0}, b{5, 2}, c{6, 0};
  CHECK(a < b);
  CHECK(b < c);
  CHECK(a < c);
  CHECK_FALSE(a < a);
}
