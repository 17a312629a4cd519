// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "taxon/embeddings.hpp"
#include "taxon/errors.hpp"

using namespace taxon;

TEST_CASE("table validation") {
  EmbeddingTable t;
  t.add("a", {1.0, 0.0});
  CHECK(t.dim() == 2);
  t.add("near", {0.6, 0.8005});  // within 1e-3, renormalized
  const auto v = t.get("near");
  CHECK(v[0] * v[0] + v[1] * v[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(t.add("b", {1.0, 0.0, 0.0}), Error);
  CHECK_THROWS_AS(t.add("a", {0.0, 1.0}), Error);
  CHECK_THROWS_AS(t.add("far", {0.5, 0.5}), Error);
  CHECK_THROWS_AS(t.get("missing"), Error);
}

TEST_CASE("jsonl round trip") {
  std::istringstream in(R"({"key": "x", "vec": [1, 0, 0]}
{"key": "y", "vec": [0, 1, 0]}
)");
  const EmbeddingTable t = EmbeddingTable::load(in);
  CHECK(t.size() == 2);
  std::ostringstream out;
  t.write(out);
  std::istringstream again(out.str());
  const EmbeddingTable u = EmbeddingTable::load(again);
  CHECK(u.size() == 2);
  CHECK(u.get("y")[1] == 1.0);
}

TEST_CASE("self similarity and orthogonality") {
  EmbeddingTable t;
  t.add("x", {1, 0, 0});
  t.add("y", {0, 1, 0});
  t.add("z", {0, 0, 1});
  const std::vector<std::string> cands{"x", "y", "z"};
  const std::vector<double> q{0, 1, 0};
  const auto top = cosine_topk(t, q, cands, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].key == "y");
  CHECK(top[0].similarity == doctest::Approx(1.0));
  CHECK(top[1].similarity == 0.0);
  // Equal similarity falls back to key order.
  CHECK(top[1].key == "x");
  CHECK(top[2].key == "z");
}

TEST_CASE("cosine_topk errors") {
  EmbeddingTable t;
  t.add("x", {1, 0});
  const std::vector<std::string> cands{"x"};
  const std::vector<std::string> none;
  const std::vector<std::string> unknown{"nope"};
  CHECK_THROWS_AS(cosine_topk(t, std::vector<double>{1, 0, 0}, cands, 1), Error);
  CHECK_THROWS_AS(cosine_topk(t, std::vector<double>{1, 0}, none, 1), Error);
  CHECK_THROWS_AS(cosine_topk(t, std::vector<double>{1, 0}, cands, 0), Error);
  CHECK_THROWS_AS(cosine_topk(t, std::vector<double>{1, 0}, unknown, 1), Error);
}

TEST_CASE("cosine_topk matches a full sort and ignores query scale") {
  testing::Gen g(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = g.range(2, 16);
    const std::size_t n = g.range(1, 30);
    EmbeddingTable t;
    std::vector<std::string> cands;
    for (std::size_t i = 0; i < n; ++i) {
      t.add("k" + std::to_string(i), testing::random_unit(g, dim));
      if (g.coin(0.8)) cands.push_back("k" + std::to_string(i));
    }
    if (cands.empty()) cands.push_back("k0");
    if (g.coin(0.2)) cands.push_back(cands.front());
    auto q = testing::random_unit(g, dim);
    const std::size_t k = g.range(1, n + 2);
    const auto got = cosine_topk(t, q, cands, k);
    const auto want = testing::brute_topk(t, q, cands, k);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].key == want[i].key);
      CHECK(got[i].similarity == doctest::Approx(want[i].similarity).epsilon(1e-12));
    }
    const double scale = g.real(0.01, 100.0);
    for (auto& x : q) x *= scale;
    const auto scaled = cosine_topk(t, q, cands, k);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(scaled[i].key == got[i].key);
  }
}
