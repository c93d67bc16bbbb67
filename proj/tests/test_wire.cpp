// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
#include "qsim/wire.hpp"

#include <doctest.h>

#include <set>

#include "qsim/rng.hpp"

using namespace qsim;

TEST_CASE("wire round-trips mixed fields") {
  std::string body;
  wire::put_u64(body, 42);
  wire::put_str(body, "hello world");
  wire::put_i64(body, -7);
  wire::put_str(body, "");

  wire::Reader reader(body);
  CHECK(reader.u64() == 42);
  CHECK(reader.str() == "hello world");
  CHECK(reader.i64() == -7);
  CHECK(reader.str() == "");
  CHECK(reader.done());
}

TEST_CASE("wire strings may contain spaces, colons and newlines") {
  std::string body;
  wire::put_str(body, "a b:c\nd 12:34");
  wire::Reader reader(body);
  CHECK(reader.str() == "a b:c\nd 12:34");
}

TEST_CASE("wire rejects truncated input") {
  CHECK_THROWS_AS(wire::Reader("5:ab").str(), std::invalid_argument);
  CHECK_THROWS_AS(wire::Reader("x").u64(), std::invalid_argument);
}

TEST_CASE("wire random round-trip") {
  Rng rng(123);
  for (int round = 0; round < 200; ++round) {
    std::string text;
    for (std::uint64_t i = rng.below(20); i > 0; --i)
      text.push_back(static_cast<char>(rng.below(256)));
    std::uint64_t number = rng.next();

    std::string body;
    wire::put_str(body, text);
    wire::put_u64(body, number);
    wire::Reader reader(body);
    CHECK(reader.str() == text);
    CHECK(reader.u64() == number);
  }
}

TEST_CASE("rng chance boundaries are exact") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(rng.chance(0.0));
    CHECK(rng.chance(1.0));
  }
}

TEST_CASE("rng sample returns distinct indices") {
  Rng rng(99);
  auto picks = rng.sample(10, 4);
  CHECK(picks.size() == 4);
  std::set<std::size_t> unique(picks.begin(), picks.end());
  CHECK(unique.size() == 4);
  for (auto index : unique) CHECK(index < 10);

  CHECK(rng.sample(3, 8).size() == 3);  // clamped to the population
}
