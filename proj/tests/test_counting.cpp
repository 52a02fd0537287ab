#include "catch_amalgamated.hpp"

#include <bitset>
#include <random>

#include "mcilab/counting.hpp"
#include "mcilab/mapping_search.hpp"
#include "mcilab/systems.hpp"

using namespace mcilab;
namespace sys = mcilab::systems;

namespace {

MappingSet wide_switch_set(int n, int switches) {
  std::vector<Value> actual(static_cast<std::size_t>(switches), static_cast<Value>(n));
  auto physics = as_physics(sys::wide_switches(n, switches), FormalState(actual));
  Run r{sys::signed_bit(), FormalState{1}, 1};
  std::vector<std::string> names;
  for (int k = 0; k < switches; ++k) names.push_back(sys::switch_name(k));
  auto found = enumerate_valid_mappings(physics, r, families::band_subsets(names, n, 1));
  return MappingSet{physics, r.cssa, found.mappings, 1};
}

std::size_t count(const MappingSet& s, Mcii tag, Simultaneity mode = Simultaneity::simultaneous) {
  return max_independent_count(s, {tag, mode}).count;
}

}  // namespace

TEST_CASE("wide switch counts collapse under independence", "[counting]") {
  auto set = wide_switch_set(3, 1);
  REQUIRE(set.mappings.size() == 4);
  CHECK(count(set, Mcii::mcii0) == 4);
  CHECK(count(set, Mcii::mcii1) == 1);
  CHECK(count(set, Mcii::mcii2) == 1);

  auto pair = independent_under(set, {Mcii::mcii1}, {0, 1});
  CHECK_FALSE(pair.independent);
  CHECK(pair.violating == std::vector<std::size_t>{0, 1});
  CHECK_FALSE(independent_under(set, {Mcii::mcii2}, {0, 1}).independent);
  CHECK(independent_under(set, {Mcii::mcii0}, {0, 1}).independent);
}

TEST_CASE("counts track the number of physically separate switches", "[counting]") {
  for (int k = 1; k <= 3; ++k) {
    auto set = wide_switch_set(2, k);
    REQUIRE(set.mappings.size() == static_cast<std::size_t>(2 * k));
    CHECK(count(set, Mcii::mcii0) == static_cast<std::size_t>(2 * k));
    CHECK(count(set, Mcii::mcii1) == static_cast<std::size_t>(k));
    CHECK(count(set, Mcii::mcii2) == static_cast<std::size_t>(k));
    CHECK(count(set, Mcii::mcii1, Simultaneity::binary) == static_cast<std::size_t>(k));
  }
  auto wide = wide_switch_set(3, 2);
  CHECK(count(wide, Mcii::mcii0) == 8);
  CHECK(count(wide, Mcii::mcii1) == 2);
  CHECK(count(wide, Mcii::mcii2) == 2);
}

TEST_CASE("mappings on disjoint switches are independent under every criterion", "[counting]") {
  auto physics = as_physics(sys::wide_switches(1, 2), FormalState{1, 1});
  MappingSet set{physics, sys::signed_bit(), {sys::band_mapping("w0", {1}, 1), sys::band_mapping("w1", {1}, 1)}, 1};
  for (auto tag : {Mcii::mcii0, Mcii::mcii1, Mcii::mcii2, Mcii::mcii3})
    for (auto mode : {Simultaneity::simultaneous, Simultaneity::binary}) {
      INFO(to_string(tag) << " " << to_string(mode));
      CHECK(independent_under(set, {tag, mode}).independent);
    }
}

TEST_CASE("constrained variables are pairwise but not jointly independent", "[counting]") {
  auto physics = as_physics(sys::constraint_triple(), FormalState{1, -1, 0});
  MappingSet set{physics, sys::signed_trit(), {}, 1};
  for (int k = 1; k <= 3; ++k) {
    set.mappings.push_back(sys::constraint_mapping(k, 1));
    Run r{set.computation, FormalState{physics.actual->values()[static_cast<std::size_t>(k - 1)]}, 1};
    CHECK(check_implementation(physics, r, set.mappings.back()).ok());
  }
  CHECK(independent_under(set, {Mcii::mcii1, Simultaneity::binary}).independent);
  auto joint = independent_under(set, {Mcii::mcii1, Simultaneity::simultaneous});
  CHECK_FALSE(joint.independent);
  CHECK(count(set, Mcii::mcii1, Simultaneity::binary) == 3);
  CHECK(count(set, Mcii::mcii1, Simultaneity::simultaneous) == 2);
}

TEST_CASE("branching final ranges count separately only under the range criterion", "[counting]") {
  auto physics = as_physics(sys::branching_copies(), FormalState{1, 1, 1});
  Run r{sys::signed_bit(), FormalState{1}, 1};
  MappingSet set{physics, r.cssa, {sys::branch_mapping("c1"), sys::branch_mapping("c2")}, 1};
  for (auto& m : set.mappings) CHECK(check_implementation(physics, r, m).ok());
  CHECK(count(set, Mcii::mcii1) == 1);
  CHECK(count(set, Mcii::mcii2) == 1);
  auto res = independent_under(set, {Mcii::mcii3});
  CHECK(res.independent);
  CHECK(res.conjectural);
  CHECK(count(set, Mcii::mcii3) == 2);
  // the same final variable twice overlaps
  MappingSet same{physics, r.cssa, {sys::branch_mapping("c1"), sys::branch_mapping("c1")}, 1};
  CHECK_FALSE(independent_under(same, {Mcii::mcii3}).independent);
}

TEST_CASE("max independent subset matches brute force on a six node graph", "[counting]") {
  // compatibility graph: an edge joins two mappings that conflict
  const std::vector<std::pair<int, int>> edges = {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}, {4, 5}, {1, 5}};
  auto conflict = [&](std::size_t a, std::size_t b) {
    for (auto [x, y] : edges)
      if ((static_cast<std::size_t>(x) == a && static_cast<std::size_t>(y) == b) ||
          (static_cast<std::size_t>(x) == b && static_cast<std::size_t>(y) == a))
        return true;
    return false;
  };
  std::size_t oracle = 0;
  for (unsigned mask = 0; mask < 64; ++mask) {
    bool ok = true;
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = a + 1; b < 6; ++b)
        if ((mask >> a & 1) && (mask >> b & 1) && conflict(a, b)) ok = false;
    if (ok) oracle = std::max<std::size_t>(oracle, std::bitset<6>(mask).count());
  }
  auto pred = [&](const std::vector<std::size_t>& s) {
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = a + 1; b < s.size(); ++b)
        if (conflict(s[a], s[b])) return false;
    return true;
  };
  auto res = max_independent_subset(6, pred);
  CHECK(oracle == 3);
  CHECK(res.count == oracle);
  CHECK(res.exact);
  CHECK(pred(res.witness));
}

TEST_CASE("property: exact search agrees with brute force and bounds greedy", "[counting][property]") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) adj[a][b] = adj[b][a] = std::bernoulli_distribution(0.4)(rng);
    auto pred = [&](const std::vector<std::size_t>& s) {
      for (std::size_t a = 0; a < s.size(); ++a)
        for (std::size_t b = a + 1; b < s.size(); ++b)
          if (adj[s[a]][s[b]]) return false;
      return true;
    };
    std::size_t oracle = 0;
    for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
      std::vector<std::size_t> s;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1) s.push_back(i);
      if (pred(s)) oracle = std::max(oracle, s.size());
    }
    auto exact = max_independent_subset(n, pred);
    CHECK(exact.count == oracle);
    CHECK(pred(exact.witness));
    auto greedy = max_independent_subset(n, pred, 200'000, 0);
    CHECK(greedy.lower_bound);
    CHECK(greedy.count <= oracle);
    CHECK(pred(greedy.witness));
  }
}

TEST_CASE("budget exhaustion yields a flagged lower bound", "[counting]") {
  auto pred = [](const std::vector<std::size_t>& s) { return s.size() <= 2; };
  auto res = max_independent_subset(12, pred, 5);
  CHECK(res.lower_bound);
  CHECK_FALSE(res.exact);
  CHECK(res.count == 2);
}

TEST_CASE("witnesses and monotonicity on switch scenarios", "[counting][property]") {
  for (auto [n, k] : {std::pair{2, 1}, std::pair{3, 1}, std::pair{2, 2}, std::pair{1, 3}}) {
    auto set = wide_switch_set(n, k);
    std::size_t c0 = count(set, Mcii::mcii0);
    CHECK(c0 == static_cast<std::size_t>((1 << (n - 1)) * k));
    for (auto tag : {Mcii::mcii1, Mcii::mcii2}) {
      auto res = max_independent_count(set, {tag});
      CHECK(res.count == static_cast<std::size_t>(k));
      CHECK(c0 >= res.count);
      CHECK(res.exact);
      if (res.witness.size() > 1) CHECK(independent_under(set, {tag}, res.witness).independent);
      auto greedy = max_independent_count(set, {tag}, CountOptions{kDefaultStateCap, 0, 200'000, 0});
      CHECK(greedy.count == res.count);
    }
  }
}

TEST_CASE("regularized ratio of constant stages", "[counting][ratio]") {
  auto rep = regularized_ratio({{5, 10}, {5, 10}, {5, 10}});
  CHECK(rep.ratio == Catch::Approx(0.5));
  CHECK(rep.share == Catch::Approx(1.0 / 3.0));
  CHECK(rep.converged);
  CHECK(rep.stages.size() == 3);
  CHECK_THROWS_AS(regularized_ratio({{1, 1}, {2, 2}}), Error);
  CHECK_THROWS_MATCHES(regularized_ratio({{3, 3}, {2, 4}, {5, 5}}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::non_monotone; }));
  auto drifting = regularized_ratio({{1, 10}, {4, 20}, {9, 30}});
  CHECK_FALSE(drifting.converged);
}

TEST_CASE("finite-box stages on a tiled system keep a constant ratio", "[counting][ratio]") {
  // each tile holds one switch running computation A and two running B
  std::vector<std::pair<double, double>> stages;
  for (int tiles = 1; tiles <= 3; ++tiles) {
    auto physics = as_physics(sys::wide_switches(1, 3 * tiles), FormalState(std::vector<Value>(3 * static_cast<std::size_t>(tiles), 1)));
    std::vector<Mapping> a, b;
    for (int t = 0; t < tiles; ++t) {
      a.push_back(sys::band_mapping(sys::switch_name(3 * t), {1}, 1));
      b.push_back(sys::band_mapping(sys::switch_name(3 * t + 1), {1}, 1));
      b.push_back(sys::band_mapping(sys::switch_name(3 * t + 2), {1}, 1));
    }
    auto ca = max_independent_count(MappingSet{physics, sys::signed_bit(), a, 1}, {Mcii::mcii1}).count;
    auto cb = max_independent_count(MappingSet{physics, sys::signed_bit(), b, 1}, {Mcii::mcii1}).count;
    CHECK(ca == static_cast<std::size_t>(tiles));
    CHECK(cb == static_cast<std::size_t>(2 * tiles));
    stages.push_back({static_cast<double>(ca), static_cast<double>(cb)});
  }
  auto rep = regularized_ratio(stages);
  for (auto& s : rep.stages) CHECK(s.ratio == Catch::Approx(0.5));
  CHECK(rep.converged);
}

TEST_CASE("cycle policy", "[counting]") {
  CHECK(cycle_policy(1, CyclePolicy::once) == 1);
  CHECK(cycle_policy(1, CyclePolicy::linear) == 1);
  CHECK(cycle_policy(2, CyclePolicy::linear) == 2);
  CHECK(cycle_policy(2, CyclePolicy::once) == 1);
  CHECK_THROWS_AS(cycle_policy(0, CyclePolicy::once), Error);
}

TEST_CASE("property: measure report shares are normalized", "[counting][property]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<std::string, double>> counts;
    int k = std::uniform_int_distribution<int>(1, 6)(rng);
    for (int i = 0; i < k; ++i)
      counts.push_back({"c" + std::to_string(i), std::uniform_real_distribution<double>(0.1, 1e6)(rng)});
    auto rep = measure_report(counts, {Mcii::mcii2});
    double sum = 0;
    for (auto& [n, r] : rep.ratios) {
      CHECK(r >= 0);
      CHECK(r <= 1);
      sum += r;
    }
    CHECK(std::fabs(sum - 1) <= 1e-12);
  }
  CHECK(measure_report({{"a", 1}}, {Mcii::mcii3}).conjectural);
}
