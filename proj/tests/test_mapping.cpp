#include "catch_amalgamated.hpp"

#include <map>
#include <numeric>
#include <random>
#include <set>

#include "mcilab/mapping.hpp"
#include "mcilab/mapping_search.hpp"
#include "mcilab/systems.hpp"

using namespace mcilab;
namespace sys = mcilab::systems;

namespace {

FormalState one_hot(const Cssa& c, const std::string& name) {
  std::vector<Value> v(c.size(), 0);
  v[c.index_of(name)] = 1;
  return FormalState(v);
}

// A table rule embeds into an N-bit counter read every s ticks exactly when it is a
// permutation whose cycles share one power-of-two length L with (#cycles * L) <= 2^N.
bool clock_embeds(const std::vector<int>& succ, int bits) {
  const int n = static_cast<int>(succ.size());
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (int v : succ) {
    if (seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = 1;
  }
  std::vector<int> visited(static_cast<std::size_t>(n), 0);
  int length = -1, cycles = 0;
  for (int s = 0; s < n; ++s) {
    if (visited[static_cast<std::size_t>(s)]) continue;
    int len = 0;
    for (int x = s; !visited[static_cast<std::size_t>(x)]; x = succ[static_cast<std::size_t>(x)]) {
      visited[static_cast<std::size_t>(x)] = 1;
      ++len;
    }
    if (length >= 0 && len != length) return false;
    length = len;
    ++cycles;
  }
  if ((length & (length - 1)) != 0) return false;
  return cycles * length <= (1 << bits);
}

}  // namespace

TEST_CASE("map_state reads the occupied cell of a grid", "[mapping]") {
  auto grid = sys::shifting_grid(6, 7);
  auto pos = sys::grid_position(6, 7, false);
  auto m = sys::grid_position_mapping(grid, 3);
  auto physics = as_physics(grid);
  auto f = map_state(m, physics, pos, one_hot(grid, "b_3_5"), 0);
  REQUIRE(f);
  CHECK(*f == FormalState{3, 5});

  auto two = one_hot(grid, "b_3_5");
  two.mutable_values()[grid.index_of("b_1_2")] = 1;
  CHECK_FALSE(map_state(m, physics, pos, two, 0));
  CHECK_FALSE(map_state(m, physics, pos, FormalState(std::vector<Value>(grid.size(), 0)), 0));
}

TEST_CASE("identity mapping returns the same state", "[mapping]") {
  auto c = sys::binary_clock(3);
  auto m = sys::identity_mapping(c, c, 2);
  for (auto& s : enumerate_states(c)) CHECK(*map_state(m, as_physics(c), c, s, 1) == s);
}

TEST_CASE("conflicting duplicate specs are a multiple assignment", "[mapping]") {
  auto c = sys::single_bit(true);
  auto phys = sys::xor_automaton();
  Mapping m;
  m.schedule = uniform_schedule(1, 1);
  m.specs = {{{"x", {"b1"}, {}, Lookup{"b1", {}}}, {"x", {"b2"}, {}, Lookup{"b2", {}}}}};
  CHECK(map_state(m, as_physics(phys), c, FormalState{1, 1}, 0) == FormalState{1});
  CHECK_THROWS_MATCHES(map_state(m, as_physics(phys), c, FormalState{1, 0}, 0), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == Errc::multiple_assignment; }));
  auto r = check_implementation(as_physics(phys, FormalState{0, 0}), Run{c, FormalState{0}, 1}, m);
  CHECK(r.failed(1));
}

TEST_CASE("mapping definitions are validated", "[mapping]") {
  auto c = sys::single_bit(true);
  auto phys = as_physics(sys::xor_automaton());
  Mapping m;
  m.schedule = {{0, 0}, {0, 0}};
  m.specs = {{{"x", {"b1"}, {}, Lookup{"b1", {}}}}};
  CHECK_THROWS_AS(map_state(m, phys, c, FormalState{0, 0}, 0), Error);
  m.schedule = uniform_schedule(1, 1);
  m.specs = {{{"x", {"b1"}, {}, Lookup{"b2", {}}}}};
  CHECK_THROWS_AS(map_state(m, phys, c, FormalState{0, 0}, 0), Error);
  m.specs = {{{"x", {"b1"}, {"k"}, Lookup{"b1", {}}}}};
  CHECK_THROWS_AS(map_state(m, phys, c, FormalState{0, 0}, 0), Error);
  m.specs = {{{"x", {"b1"}, {}, Lookup{"b1", {}}}}};
  CHECK_THROWS_AS(map_state(m, phys, c, FormalState{0, 0}, 5), Error);
}

TEST_CASE("clock cannot carry a computation that halts in D", "[mapping][counterfactual]") {
  auto c_then_d = sys::table_cssa("c_then_d", {1, 1});
  auto clock = as_physics(sys::binary_clock(1), FormalState{0});
  auto m = sys::copy_mapping("copy", {{"s", "b0"}}, 2);
  auto rep = check_counterfactuals(m, clock, c_then_d, 2);
  CHECK_FALSE(rep.passed);
  REQUIRE(rep.counterexample);
  CHECK(rep.counterexample->reason == "transition rule violated");

  auto found = enumerate_valid_mappings(as_physics(sys::binary_clock(3), sys::clock_state(3, 0)),
                                        Run{c_then_d, FormalState{0}, 2},
                                        families::injective_relabelings(as_physics(sys::binary_clock(3), sys::clock_state(3, 0)),
                                                                        Run{c_then_d, FormalState{0}, 2}, 8, 2));
  CHECK(found.mappings.empty());
  CHECK(found.candidates == 7 * 8);
}

TEST_CASE("stepwise lookup table machine implements its source", "[mapping][counterfactual]") {
  std::vector<int> f = {2, 0, 3, 1};
  auto machine = sys::lookup_table_machine(4);
  auto source = sys::table_cssa("source", f);
  auto m = sys::lookup_table_mapping(f, 3);
  auto rep = check_counterfactuals(m, as_physics(machine), source, 3);
  CHECK(rep.passed);
  CHECK(rep.coverage == 4 * 3);

  std::vector<int> skip(4);
  for (int k = 0; k < 4; ++k) skip[static_cast<std::size_t>(k)] = f[static_cast<std::size_t>(f[static_cast<std::size_t>(k)])];
  auto skipping = sys::lookup_table_mapping(skip, 3);
  CHECK_FALSE(check_counterfactuals(skipping, as_physics(machine), source, 3).passed);
}

TEST_CASE("replayed movie fails the counterfactuals", "[mapping][counterfactual]") {
  auto player = sys::movie_player({0, 1, 2, 3}, 4);
  auto recorded = sys::counter_cssa(4);
  auto m = sys::copy_mapping("display", {{"s", "d"}}, 3);
  auto physics = as_physics(player, FormalState{0, 0});
  // the actual trajectory agrees with the recorded computation
  auto t = run(Run{player, FormalState{0, 0}, 3});
  for (std::size_t k = 0; k < t.states.size(); ++k) CHECK(t.states[k][1] == static_cast<Value>(k));
  auto rep = check_counterfactuals(m, physics, recorded, 3);
  CHECK_FALSE(rep.passed);
  auto r = check_implementation(physics, Run{recorded, FormalState{0}, 3}, m);
  CHECK(r.failed(2));
  CHECK_FALSE(r.failed(3));
}

TEST_CASE("counterfactual coverage equals the domain size", "[mapping][counterfactual]") {
  auto grid = sys::shifting_grid(3, 4);
  auto m = sys::grid_position_mapping(grid, 2);
  BoundMapping bm(m, grid, sys::grid_position(3, 4, false));
  auto rep = check_counterfactuals(bm, 2);
  CHECK(rep.passed);
  REQUIRE(rep.coverage_per_step.size() == 2);
  CHECK(rep.coverage_per_step[0] == 12);
  CHECK(rep.coverage_per_step[1] == 12);
  CHECK(bm.domain_states(0).size() == 12);
}

TEST_CASE("windows require a constant formal state", "[mapping][counterfactual]") {
  // A counter ticking every physical step read every 4 steps with a window of 1 changes
  // inside the window; the slow counter read the same way does not.
  auto fast = sys::counter_cssa(8);
  auto target = sys::counter_cssa(2);
  Mapping m;
  m.schedule = uniform_schedule(4, 2, 1);
  StateTable parity{{"s"}, {}};
  for (int v = 0; v < 8; ++v) parity.table[{static_cast<Value>(v)}] = (v / 4) % 2;
  m.specs = {{{"s", {"s"}, {}, parity}}};
  auto rep = check_counterfactuals(m, as_physics(fast), target, 2);
  CHECK_FALSE(rep.passed);
  m.schedule = uniform_schedule(4, 2, 0);
  m.domains = {DomainSpec{{{"s", {0, 4}}}, {}, {}, {}, ""}};
  CHECK(check_counterfactuals(m, as_physics(fast), target, 2).passed);
}

TEST_CASE("ssi accepts the grid position mapping", "[mapping][ssi]") {
  auto grid = sys::shifting_grid(3, 4);
  auto m = sys::grid_position_mapping(grid, 1);
  auto rep = check_ssi(m, as_physics(grid), sys::grid_position(3, 4, false), 0);
  CHECK(rep.passed);
  REQUIRE(rep.units.size() == 2);
  CHECK(rep.units[0].permutations == 6);
  CHECK(rep.units[1].permutations == 24);
  CHECK(rep.units[0].exhaustive);
}

TEST_CASE("ssi rejects the same extraction on a chain", "[mapping][ssi]") {
  auto chain = sys::grid_as_chain(2, 3);
  auto pos = sys::grid_position(2, 3, false);
  auto m = sys::chain_position_mapping(chain, 3, 1);
  CHECK(check_counterfactuals(m, as_physics(chain), pos, 1).passed);
  auto rep = check_ssi(m, as_physics(chain), pos, 0);
  CHECK_FALSE(rep.passed);

  // without inheritance the chain reveals each value outright
  for (auto& s : m.specs[0]) s.inherits.clear();
  auto bare = check_ssi(m, as_physics(chain), pos, 0);
  CHECK_FALSE(bare.passed);
  CHECK(bare.units[0].reveals_value);

  // read as one composite substate the pair is a single unit and passes
  auto pair = sys::grid_position(2, 3, true);
  CHECK(check_ssi(m, as_physics(chain), pair, 0).passed);
}

TEST_CASE("recorder registers fail substate independence", "[mapping][ssi]") {
  auto rec = sys::recorder_system();
  auto m = sys::recorder_mapping(3);
  auto physics = as_physics(rec, FormalState{0, 2, 2});
  auto x = sys::xor_automaton();
  CHECK(check_counterfactuals(m, physics, x, 3).passed);
  auto rep = check_ssi(m, physics, x, 0);
  CHECK_FALSE(rep.passed);
  CHECK(rep.units[0].reveals_value);
  auto r = check_implementation(physics, Run{x, FormalState{1, 0}, 3}, m);
  REQUIRE_FALSE(r.ok());
  CHECK(r.failure().requirements == std::vector<int>{5});
}

TEST_CASE("property: inherited permutations leave the other substates fixed", "[mapping][ssi][property]") {
  auto check_invariance = [](const Cssa& physics, const Cssa& formal, const Mapping& m) {
    BoundMapping bm(m, physics, formal);
    auto units = formal_units(bm, 0, 99);
    std::size_t compared = 0;
    for (auto& p : bm.domain_states(0)) {
      auto f = bm.map(p, 0);
      REQUIRE(f);
      for (std::size_t u = 0; u < units.size(); ++u)
        for (auto& perm : units[u].group.elements) {
          auto q = apply_permutation(perm, p);
          auto g = bm.map(q, 0);
          if (!g) continue;
          for (std::size_t v = 0; v < units.size(); ++v) {
            if (v == u) continue;
            for (auto i : formal.units()[v]) CHECK((*g)[i] == (*f)[i]);
            ++compared;
          }
        }
    }
    CHECK(compared > 0);
  };
  auto grid = sys::shifting_grid(3, 4);
  check_invariance(grid, sys::grid_position(3, 4, false), sys::grid_position_mapping(grid, 1));
  auto song = sys::bitfield_song(2, 2);
  check_invariance(song, sys::shifting_grid(2, 2, "bit_field"), sys::bitfield_mapping(song, 2, 2, 1));
}

TEST_CASE("relabeling a chain as an N-dimensional grid is rejected", "[mapping][relabel]") {
  auto chain = sys::counting_chain(8);
  auto song = sys::song_grid(3);
  auto m = sys::song_relabel_mapping(3, 2);
  auto physics = as_physics(chain, one_hot(chain, "b_0"));
  CHECK(check_counterfactuals(m, physics, song, 2).passed);
  CHECK(check_ssi(m, physics, song, 0).passed);
  auto rel = check_relabeling(m, physics, song);
  CHECK_FALSE(rel.passed);
  auto r = check_implementation(physics, Run{song, one_hot(song, "s_000"), 2}, m);
  REQUIRE_FALSE(r.ok());
  CHECK(r.failure().requirements == std::vector<int>{5});

  m.label_sources.clear();
  CHECK_FALSE(check_relabeling(m, physics, song).passed);
}

TEST_CASE("bit field read from a function on configurations inherits its labels", "[mapping][relabel]") {
  for (auto [rows, cols] : {std::pair{2, 2}, std::pair{2, 3}}) {
    auto song = sys::bitfield_song(rows, cols);
    auto field = sys::shifting_grid(rows, cols, "bit_field");
    auto m = sys::bitfield_mapping(song, rows, cols, 2);
    std::string start(static_cast<std::size_t>(rows * cols), '0');
    start[0] = '1';
    start[static_cast<std::size_t>(cols + 1)] = '1';
    auto physics = as_physics(song, one_hot(song, "g_" + start));
    CHECK(check_relabeling(m, physics, field).passed);
    std::vector<Value> init(static_cast<std::size_t>(rows * cols), 0);
    init[0] = 1;
    init[static_cast<std::size_t>(cols + 1)] = 1;
    auto r = check_implementation(physics, Run{field, FormalState(init), 2}, m);
    INFO((r.ok() ? std::string("ok") : r.failure().reason));
    CHECK(r.ok());
  }
}

TEST_CASE("identity mapping passes relabeling", "[mapping][relabel]") {
  auto grid = sys::shifting_grid(2, 3);
  CHECK(check_relabeling(sys::identity_mapping(grid, grid, 1), as_physics(grid), grid).passed);
}

TEST_CASE("coordinate registers transfer to grid labels", "[mapping][transference]") {
  auto machine = sys::transference_machine(2, 2, false, true);
  auto g = sys::toggling_grid(2, 2);
  auto m = sys::transference_mapping(2, 2, 2);
  FormalState start{1, 1, 0, 0, 0, 0};
  auto physics = as_physics(machine, start);
  auto tr = check_transference(m, physics, g, 2);
  CHECK(tr.passed);
  CHECK(tr.states_checked == 2 * 16);
  CHECK(tr.writes_checked == 2 * 16 * 4);
  auto r = check_implementation(physics, Run{g, FormalState{0, 0, 0, 0}, 2}, m);
  INFO((r.ok() ? std::string("ok") : r.failure().reason));
  CHECK(r.ok());
}

TEST_CASE("unstructured bits carry g(x,y) by transference but not f(i)", "[mapping][transference]") {
  auto bare = sys::transference_machine(2, 2, false, false);
  FormalState start{1, 1, 0, 0, 0, 0};
  auto physics = as_physics(bare, start);
  auto g = sys::toggling_grid(2, 2);
  CHECK(check_implementation(physics, Run{g, FormalState{0, 0, 0, 0}, 2}, sys::transference_mapping(2, 2, 2)).ok());

  auto f = sys::transference_machine(2, 2, false, true);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (auto& s : f.substates()) pairs.push_back({s.name, s.name});
  auto copy = sys::copy_mapping("copy", pairs, 3);
  CHECK(check_counterfactuals(copy, physics, f, 3).passed);
  CHECK_FALSE(check_relabeling(copy, physics, f).passed);
  auto r = check_implementation(physics, Run{f, start, 3}, copy);
  CHECK(r.failed(5));
  CHECK_FALSE(r.failed(2));
}

TEST_CASE("stale coordinate register fails transference", "[mapping][transference]") {
  auto stale = sys::transference_machine(3, 1, true, true);
  auto g = sys::toggling_grid(3, 1);
  auto m = sys::transference_mapping(3, 1, 2);
  FormalState start{1, 1, 0, 0, 0};
  auto physics = as_physics(stale, start);
  // every cell is still toggled once per sweep, so the formal rule holds
  CHECK(check_counterfactuals(m, physics, g, 2).passed);
  auto tr = check_transference(m, physics, g, 2);
  CHECK_FALSE(tr.passed);
  auto r = check_implementation(physics, Run{g, FormalState{0, 0, 0}, 2}, m);
  CHECK(r.failed(5));
  CHECK(r.failure().requirements.size() == 1);
}

TEST_CASE("check_implementation witnesses the clock for any run length", "[mapping][implementation]") {
  auto clock = sys::binary_clock(3);
  for (int T : {1, 2, 5, 9}) {
    auto r = check_implementation(as_physics(clock, sys::clock_state(3, 0)), Run{clock, sys::clock_state(3, 0), T},
                                  sys::identity_mapping(clock, clock, static_cast<std::size_t>(T)));
    REQUIRE(r.ok());
    CHECK(r.witness().record.counterfactuals->coverage == 8u * static_cast<std::size_t>(T));
    CHECK(r.witness().record.ssi.size() == static_cast<std::size_t>(T) + 1);
  }
}

TEST_CASE("grid position system is an implementation", "[mapping][implementation]") {
  auto grid = sys::shifting_grid(3, 4);
  auto pos = sys::grid_position(3, 4, false);
  auto physics = as_physics(grid, one_hot(grid, "b_1_2"));
  auto r = check_implementation(physics, Run{pos, FormalState{1, 2}, 3}, sys::grid_position_mapping(grid, 3));
  CHECK(r.ok());
  auto wrong = check_implementation(physics, Run{pos, FormalState{0, 0}, 3}, sys::grid_position_mapping(grid, 3));
  CHECK(wrong.failed(3));
}

TEST_CASE("derailed machine implements only the reduced computation", "[mapping][implementation]") {
  auto derailed = sys::derailable_counter(6, 3);
  auto original = sys::counter_cssa(6);
  auto physics = as_physics(derailed, FormalState{0});
  auto m = sys::copy_mapping("copy", {{"s", "s"}}, 2);
  auto r = check_implementation(physics, Run{original, FormalState{0}, 2}, m);
  REQUIRE_FALSE(r.ok());
  CHECK(r.failure().requirements == std::vector<int>{2});
  auto reduced = sys::derailable_counter(6, 3);
  CHECK(check_implementation(physics, Run{reduced, FormalState{0}, 2}, m).ok());
}

TEST_CASE("requirement 4 catches a rule that escapes its domain", "[mapping][implementation]") {
  CssaSpec s;
  s.name = "leaky";
  s.substates = {{"x", Domain::integers(0, 2), {}}};
  s.rule = [](std::span<const Value> x) { return std::vector<Value>{x[0] + 1}; };
  Cssa leaky(std::move(s));
  auto target = sys::counter_cssa(3);
  auto m = sys::copy_mapping("copy", {{"s", "x"}}, 1);
  auto r = check_implementation(as_physics(leaky, FormalState{0}), Run{target, FormalState{0}, 1}, m);
  CHECK(r.failed(4));
}

TEST_CASE("wide switch band family yields the sets containing the actual magnitude", "[mapping][search]") {
  auto physics = as_physics(sys::wide_switches(3, 1), FormalState{2});
  Run r{sys::signed_bit(), FormalState{1}, 2};
  auto res = enumerate_valid_mappings(physics, r, families::band_subsets({"w0"}, 3, 2));
  CHECK(res.candidates == 7);
  CHECK_FALSE(res.partial);
  REQUIRE(res.mappings.size() == 4);
  std::vector<std::string> names;
  for (auto& m : res.mappings) names.push_back(m.description);
  CHECK(names == std::vector<std::string>{"band:w0:{1,2,3}", "band:w0:{1,2}", "band:w0:{2,3}", "band:w0:{2}"});
  for (auto& m : res.mappings) CHECK(check_implementation(physics, r, m).ok());

  auto capped = enumerate_valid_mappings(physics, r, families::band_subsets({"w0"}, 3, 2), {3});
  CHECK(capped.partial);
  CHECK(capped.candidates == 3);
}

TEST_CASE("single bit lookups agree with a brute-force oracle", "[mapping][search]") {
  for (bool negate_rule : {true, false}) {
    auto bit = sys::single_bit(negate_rule);
    auto physics = as_physics(sys::single_bit(true, "wire"), FormalState{0});
    // oracle: table f works iff f(next(x)) == rule(f(x)) for both x
    std::set<std::string> expected;
    for (int f0 = 0; f0 < 2; ++f0)
      for (int f1 = 0; f1 < 2; ++f1) {
        int f[2] = {f0, f1};
        bool ok = true;
        for (int x = 0; x < 2; ++x) {
          int formal_next = negate_rule ? 1 - f[x] : f[x];
          ok = ok && f[1 - x] == formal_next;
        }
        if (ok) expected.insert("lookup:x:0->" + std::to_string(f0) + ",1->" + std::to_string(f1));
      }
    auto fam = families::unary_lookups("x", {0, 1}, "x", {0, 1}, 2);
    auto res = enumerate_valid_mappings(physics, Run{bit, FormalState{0}, 2}, fam, {1'000'000, kDefaultStateCap, false});
    std::set<std::string> got;
    for (auto& m : res.mappings) got.insert(m.description);
    CHECK(got == expected);
    CHECK(res.candidates == 4);
    if (negate_rule) {
      CHECK(got.size() == 2);
      auto with_initial = enumerate_valid_mappings(physics, Run{bit, FormalState{0}, 2}, fam);
      REQUIRE(with_initial.mappings.size() == 1);
      CHECK(with_initial.mappings[0].description == "lookup:x:0->0,1->1");
    }
  }
}

TEST_CASE("frozen physics implements no changing computation", "[mapping][search]") {
  auto frozen = as_physics(sys::single_bit(false, "frozen"), FormalState{0});
  auto res = enumerate_valid_mappings(frozen, Run{sys::single_bit(true), FormalState{0}, 1},
                                      families::unary_lookups("x", {0, 1}, "x", {0, 1}, 1), {1'000'000, kDefaultStateCap, false});
  CHECK(res.mappings.empty());
  auto block = sys::identity_cssa("block", {{"a", Domain::bits(), {}}, {"b", Domain::bits(), {}}});
  auto physics = as_physics(block, FormalState{0, 0});
  Run run3{sys::counter_cssa(3), FormalState{0}, 2};
  CHECK(enumerate_valid_mappings(physics, run3, families::injective_relabelings(physics, run3, 4, 2)).mappings.empty());
}

TEST_CASE("property: clock relabelings match the cycle-structure oracle", "[mapping][search][property]") {
  std::mt19937_64 rng(2024);
  int embedded = 0, excluded = 0;
  for (int trial = 0; trial < 40; ++trial) {
    int bits = std::uniform_int_distribution<int>(1, 3)(rng);
    int states = std::uniform_int_distribution<int>(2, std::min(4, 1 << bits))(rng);
    std::vector<int> succ(static_cast<std::size_t>(states));
    if (trial % 2 == 0) {
      std::iota(succ.begin(), succ.end(), 0);
      std::shuffle(succ.begin(), succ.end(), rng);
    } else {
      for (auto& v : succ) v = std::uniform_int_distribution<int>(0, states - 1)(rng);
    }
    auto c = sys::table_cssa("t", succ);
    auto physics = as_physics(sys::binary_clock(bits), sys::clock_state(bits, 0));
    Run r{c, FormalState{0}, 2};
    auto res = enumerate_valid_mappings(physics, r, families::injective_relabelings(physics, r, 1L << bits, 2));
    bool expect = clock_embeds(succ, bits);
    INFO("bits=" << bits << " rule=" << c.rule_description());
    CHECK(!res.mappings.empty() == expect);
    (expect ? embedded : excluded)++;
    for (auto& m : res.mappings) CHECK(check_implementation(physics, r, m).ok());
  }
  CHECK(embedded > 0);
  CHECK(excluded > 0);
}

TEST_CASE("clock excludes non-counting computations at four bits", "[mapping][search]") {
  auto physics = as_physics(sys::binary_clock(4), sys::clock_state(4, 0));
  for (auto succ : std::vector<std::vector<int>>{{1, 1}, {0, 2, 1}, {1, 2, 0}}) {
    Run r{sys::table_cssa("t", succ), FormalState{0}, 2};
    auto res = enumerate_valid_mappings(physics, r, families::injective_relabelings(physics, r, 16, 2));
    CHECK(res.mappings.empty());
  }
  Run ok{sys::counter_cssa(4), FormalState{0}, 2};
  CHECK_FALSE(enumerate_valid_mappings(physics, ok, families::injective_relabelings(physics, ok, 16, 2)).mappings.empty());
}

TEST_CASE("property: pruned relabeling search keeps exactly the valid mappings", "[mapping][search][property]") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    int bits = std::uniform_int_distribution<int>(1, 3)(rng);
    int states = std::uniform_int_distribution<int>(1, std::min(4, 1 << bits))(rng);
    std::vector<int> succ(static_cast<std::size_t>(states));
    if (trial % 3 == 0) {
      std::iota(succ.begin(), succ.end(), 0);
      std::shuffle(succ.begin(), succ.end(), rng);
    } else {
      for (auto& v : succ) v = std::uniform_int_distribution<int>(0, states - 1)(rng);
    }
    auto physics = as_physics(sys::binary_clock(bits), sys::clock_state(bits, 0));
    Run r{sys::table_cssa("t", succ), FormalState{0}, 2};
    const long stride = 1L << bits;
    auto full = enumerate_valid_mappings(physics, r, families::injective_relabelings(physics, r, stride, 2));
    auto pruned = enumerate_valid_mappings(physics, r, families::injective_relabelings(physics, r, stride, 2, 4096, true));
    std::vector<std::string> a, b;
    for (auto& m : full.mappings) a.push_back(m.description);
    for (auto& m : pruned.mappings) b.push_back(m.description);
    CHECK(a == b);
    CHECK(pruned.candidates <= full.candidates);
  }
  // pruning makes the 16-state counter tractable on a 4-bit clock
  auto physics = as_physics(sys::binary_clock(4), sys::clock_state(4, 0));
  Run own{sys::counter_cssa(16), FormalState{0}, 2};
  auto res = enumerate_valid_mappings(physics, own, families::injective_relabelings(physics, own, 16, 2, 4096, true));
  CHECK_FALSE(res.partial);
  CHECK_FALSE(res.mappings.empty());
  for (auto& m : res.mappings) CHECK(check_implementation(physics, own, m).ok());
}
