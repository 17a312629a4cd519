// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "taxon/errors.hpp"
#include "taxon/taxonomy.hpp"

using namespace taxon;

namespace {

const char* kHeader = "Kingdom,Phylum,Class,Order,Family,Genus,Species\n";
const char* kToyon = "Plantae,Tracheophyta,Magnoliopsida,Rosales,Rosaceae,Heteromeles,Heteromeles arbutifolia\n";

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("seven-level path") {
  const Taxonomy t = Taxonomy::parse(std::string(kHeader) + kToyon);
  CHECK(t.level_count() == 7);
  CHECK(t.leaves() == std::vector<std::string>{"Heteromeles arbutifolia"});
  CHECK(t.ancestor_path("Heteromeles arbutifolia") ==
        std::vector<std::string>{"Plantae", "Tracheophyta", "Magnoliopsida", "Rosales", "Rosaceae", "Heteromeles",
                                 "Heteromeles arbutifolia"});
  CHECK(t.level_label_set(0) == std::vector<std::string>{"Plantae"});
  CHECK(t.depth("Heteromeles arbutifolia") == 7);
}

TEST_CASE("one-level taxonomy") {
  const Taxonomy t = Taxonomy::parse("Root\nLife\n");
  CHECK(t.level_count() == 1);
  CHECK(t.leaves() == std::vector<std::string>{"Life"});
  CHECK(t.ancestor_path("Life") == std::vector<std::string>{"Life"});
}

TEST_CASE("shared prefix merges into one genus") {
  const Taxonomy t = Taxonomy::parse(std::string(kHeader) + kToyon +
                                     "Plantae,Tracheophyta,Magnoliopsida,Rosales,Rosaceae,Heteromeles,Heteromeles other\n" +
                                     kToyon);
  CHECK(t.leaves().size() == 2);
  CHECK(t.level_label_set(5) == std::vector<std::string>{"Heteromeles"});
  const auto genus = t.find(5, "Heteromeles");
  REQUIRE(genus);
  CHECK(t.nodes()[*genus].children.size() == 2);
  CHECK(t.ancestor_path("Plantae") == std::vector<std::string>{"Plantae"});
}

TEST_CASE("labels are trimmed, case preserved") {
  const Taxonomy t = Taxonomy::parse("A,B\n  Plantae , Rosa rubra \n");
  CHECK(t.ancestor_path("Rosa rubra") == std::vector<std::string>{"Plantae", "Rosa rubra"});
  CHECK_FALSE(t.is_leaf("rosa rubra"));
}

TEST_CASE("ragged rows") {
  const Taxonomy t = Taxonomy::parse("A,B,C\nr,x,x1\nr,y\n");
  CHECK(t.depth("x1") == 3);
  CHECK(t.depth("y") == 2);
  CHECK(t.ancestor_path("y") == std::vector<std::string>{"r", "y"});
  CHECK(t.level_label_set(1) == std::vector<std::string>{"x", "y"});
}

TEST_CASE("load errors") {
  CHECK(code_of([] { Taxonomy::parse(""); }) == ErrorCode::kEmptyInput);
  CHECK(code_of([] { Taxonomy::parse("A,B\n"); }) == ErrorCode::kEmptyInput);
  CHECK(code_of([] { Taxonomy::parse("A,B\nr,x,extra\n"); }) == ErrorCode::kRowArityMismatch);
  CHECK(code_of([] { Taxonomy::parse("A,B,C\nr,,z\n"); }) == ErrorCode::kRowArityMismatch);
  CHECK(code_of([] { Taxonomy::parse("A,B,C\nr1,g,s1\nr2,g,s2\n"); }) == ErrorCode::kParentConflict);
  CHECK(code_of([] { Taxonomy::parse("A,B\nr,x\n").ancestor_path("nope"); }) == ErrorCode::kUnknownLeaf);
  CHECK(code_of([] { Taxonomy::parse("A,B\nr,x\n").level_label_set(2); }) == ErrorCode::kLevelOutOfRange);
}

TEST_CASE("parent conflict message names the line") {
  try {
    Taxonomy::parse("A,B,C\nr1,g,s1\nr2,g,s2\n");
    FAIL("expected ParentConflict");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("ancestor_path agrees with a parent walk on random taxonomies") {
  testing::Gen g(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t depth = g.range(1, 6);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < depth; ++j) names.push_back("L" + std::to_string(j));
    std::vector<std::vector<std::string>> paths;
    for (std::size_t r = 0, rows = g.range(1, 30); r < rows; ++r) {
      std::vector<std::string> p;
      std::string code;
      const std::size_t d = g.range(1, depth);
      for (std::size_t j = 0; j < d; ++j) {
        code += static_cast<char>('a' + g.range(0, 2));
        p.push_back(names[j] + "_" + code);
      }
      paths.push_back(p);
    }
    // A prefix of another row is an interior node, not a leaf; drop such rows.
    std::vector<std::vector<std::string>> kept;
    for (const auto& p : paths) {
      bool prefix = false;
      for (const auto& q : paths) {
        if (q.size() > p.size() && std::equal(p.begin(), p.end(), q.begin())) prefix = true;
      }
      if (!prefix) kept.push_back(p);
    }
    const Taxonomy t = Taxonomy::from_paths(names, kept);
    std::set<std::string> seen;
    for (std::size_t n = 0; n < t.nodes().size(); ++n) {
      const auto& node = t.nodes()[n];
      if (!node.children.empty()) continue;
      const auto path = t.ancestor_path(node.label);
      CHECK(path == testing::walk_up(t, n));
      CHECK(path.size() == t.depth(node.label));
      for (std::size_t j = 0; j < path.size(); ++j) {
        const auto set = t.level_label_set(j);
        CHECK(std::binary_search(set.begin(), set.end(), path[j]));
      }
      seen.insert(node.label);
    }
    const auto leaves = t.leaves();
    CHECK(std::set<std::string>(leaves.begin(), leaves.end()) == seen);

    // Level sets partition the nodes by level.
    std::size_t total = 0;
    for (std::size_t j = 0; j < depth; ++j) {
      std::set<std::string> by_enumeration;
      for (const auto& node : t.nodes()) {
        if (node.level == j) by_enumeration.insert(node.label);
      }
      const auto set = t.level_label_set(j);
      CHECK(std::set<std::string>(set.begin(), set.end()) == by_enumeration);
      total += set.size();
    }
    CHECK(total == t.nodes().size());

    // Serialization round trip.
    const Taxonomy again = Taxonomy::parse(t.to_csv());
    CHECK(again.to_csv() == t.to_csv());
    CHECK(again.leaves() == t.leaves());
  }
}

TEST_CASE("deepest level of a ten-leaf taxonomy") {
  std::vector<std::vector<std::string>> paths;
  for (int i = 0; i < 10; ++i) paths.push_back({"Plantae", "Genus" + std::to_string(i / 3), "Species " + std::to_string(i)});
  const Taxonomy ten = Taxonomy::from_paths({"Kingdom", "Genus", "Species"}, paths);
  CHECK(ten.level_label_set(2).size() == 10);
}
