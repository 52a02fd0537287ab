#pragma once

#include <map>
#include <string>
#include <vector>

#include "mcilab/cssa.hpp"
#include "mcilab/mapping.hpp"

// Built-in physical systems, computations and mappings used by scenarios and tests.
namespace mcilab::systems {

inline Cssa binary_clock(int bits) {
  if (bits < 1 || bits > 20) throw Error(Errc::invalid_argument, "clock width must be 1..20");
  CssaSpec s;
  s.name = "clock" + std::to_string(bits);
  for (int k = 0; k < bits; ++k) s.substates.push_back({"b" + std::to_string(k), Domain::bits(), {k}});
  s.structure = LabelStructure::vector("k", bits);
  s.rule = [](std::span<const Value> x) {
    std::vector<Value> y(x.begin(), x.end());
    for (auto& b : y) {
      if (b == 0) {
        b = 1;
        return y;
      }
      b = 0;
    }
    return y;
  };
  s.rule_description = "count +1 mod 2^N";
  return Cssa(std::move(s));
}

inline long clock_value(const FormalState& s) {
  long v = 0;
  for (std::size_t k = s.size(); k-- > 0;) v = 2 * v + static_cast<long>(s[k]);
  return v;
}

inline FormalState clock_state(int bits, long value) {
  std::vector<Value> v(static_cast<std::size_t>(bits));
  for (int k = 0; k < bits; ++k) v[static_cast<std::size_t>(k)] = static_cast<Value>((value >> k) & 1);
  return FormalState(std::move(v));
}

inline Cssa identity_cssa(std::string name, std::vector<Substate> substates,
                          LabelStructure structure = LabelStructure::unstructured()) {
  CssaSpec s;
  s.name = std::move(name);
  s.substates = std::move(substates);
  s.structure = std::move(structure);
  s.rule = [](std::span<const Value> x) { return std::vector<Value>(x.begin(), x.end()); };
  s.rule_description = "identity";
  return Cssa(std::move(s));
}

inline Cssa xor_automaton() {
  CssaSpec s;
  s.name = "xor2";
  s.substates = {{"b1", Domain::bits(), {}}, {"b2", Domain::bits(), {}}};
  s.rule = [](std::span<const Value> x) {
    return std::vector<Value>{x[1], static_cast<Value>(static_cast<int>(x[0]) ^ static_cast<int>(x[1]))};
  };
  s.rule_description = "(b1,b2) -> (b2, b1 xor b2)";
  return Cssa(std::move(s));
}

// One substate s in 0..n-1 with s -> successor[s].
inline Cssa table_cssa(std::string name, std::vector<int> successor) {
  const int n = static_cast<int>(successor.size());
  for (int v : successor)
    if (v < 0 || v >= n) throw Error(Errc::invalid_definition, name + ": table successor out of range");
  CssaSpec s;
  s.name = std::move(name);
  s.substates = {{"s", Domain::integers(0, n - 1), {}}};
  s.rule = [successor](std::span<const Value> x) {
    return std::vector<Value>{static_cast<Value>(successor[static_cast<std::size_t>(x[0])])};
  };
  std::string d = "table";
  for (int v : successor) d += " " + std::to_string(v);
  s.rule_description = d;
  return Cssa(std::move(s));
}

inline Cssa counter_cssa(int modulus, int increment = 1) {
  std::vector<int> succ(static_cast<std::size_t>(modulus));
  for (int v = 0; v < modulus; ++v) succ[static_cast<std::size_t>(v)] = ((v + increment) % modulus + modulus) % modulus;
  return table_cssa("counter" + std::to_string(modulus), std::move(succ));
}

inline Cssa single_bit(bool negate, std::string name = "") {
  CssaSpec s;
  s.name = name.empty() ? (negate ? "not_bit" : "frozen_bit") : std::move(name);
  s.substates = {{"x", Domain::bits(), {}}};
  if (negate)
    s.rule = [](std::span<const Value> x) { return std::vector<Value>{1 - x[0]}; };
  else
    s.rule = [](std::span<const Value> x) { return std::vector<Value>{x[0]}; };
  s.rule_description = negate ? "x -> not x" : "identity";
  return Cssa(std::move(s));
}

inline Cssa signed_bit() {
  CssaSpec s;
  s.name = "signed_bit";
  s.substates = {{"s", Domain::digital({-1, 1}), {}}};
  s.rule = [](std::span<const Value> x) { return std::vector<Value>{-x[0]}; };
  s.rule_description = "s -> -s";
  return Cssa(std::move(s));
}

inline Cssa signed_trit() {
  CssaSpec s;
  s.name = "signed_trit";
  s.substates = {{"x", Domain::integers(-1, 1), {}}};
  s.rule = [](std::span<const Value> x) { return std::vector<Value>{-x[0]}; };
  s.rule_description = "x -> -x";
  return Cssa(std::move(s));
}

inline std::string switch_name(int k) { return "w" + std::to_string(k); }

// count switches with values -n..n flipping sign each step.
inline Cssa wide_switches(int n, int count) {
  if (n < 1 || count < 1) throw Error(Errc::invalid_argument, "wide switches need n >= 1 and count >= 1");
  CssaSpec s;
  s.name = "wide_switches";
  for (int k = 0; k < count; ++k) s.substates.push_back({switch_name(k), Domain::integers(-n, n), {}});
  s.rule = [](std::span<const Value> x) {
    std::vector<Value> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = -x[i];
    return y;
  };
  s.rule_description = "w -> -w";
  return Cssa(std::move(s));
}

inline std::string cell_name(const std::string& prefix, int i, int j) {
  return prefix + "_" + std::to_string(i) + "_" + std::to_string(j);
}

// Bits b(i,j) on a rows x cols grid; every bit moves one column forward (wrapping).
inline Cssa shifting_grid(int rows, int cols, std::string name = "grid_bits") {
  CssaSpec s;
  s.name = std::move(name);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) s.substates.push_back({cell_name("b", i, j), Domain::bits(), {i, j}});
  s.structure = LabelStructure::grid({{"i", rows}, {"j", cols}});
  s.rule = [rows, cols](std::span<const Value> x) {
    std::vector<Value> y(x.size());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        y[static_cast<std::size_t>(i * cols + (j + 1) % cols)] = x[static_cast<std::size_t>(i * cols + j)];
    return y;
  };
  s.rule_description = "b(i,j) -> b(i,j+1 mod cols)";
  return Cssa(std::move(s));
}

// Bits b(k) on a chain; the bit at k moves to successor[k].
inline Cssa permuting_chain(std::vector<int> successor, std::string name = "chain_bits") {
  const int n = static_cast<int>(successor.size());
  CssaSpec s;
  s.name = std::move(name);
  for (int k = 0; k < n; ++k) s.substates.push_back({"b_" + std::to_string(k), Domain::bits(), {k}});
  s.structure = LabelStructure::vector("k", n);
  s.rule = [successor](std::span<const Value> x) {
    std::vector<Value> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[static_cast<std::size_t>(successor[k])] = x[k];
    return y;
  };
  s.rule_description = "chain permutation";
  return Cssa(std::move(s));
}

// Chain of rows*cols cells whose dynamics mirror shifting_grid under k = i*cols + j.
inline Cssa grid_as_chain(int rows, int cols) {
  std::vector<int> succ(static_cast<std::size_t>(rows * cols));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) succ[static_cast<std::size_t>(i * cols + j)] = i * cols + (j + 1) % cols;
  return permuting_chain(std::move(succ), "grid_chain");
}

// Integers (i,j); j advances mod cols, i is fixed.
inline Cssa grid_position(int rows, int cols, bool composite) {
  CssaSpec s;
  s.name = composite ? "position_pair" : "position";
  s.substates = {{"i", Domain::integers(0, rows - 1), {}}, {"j", Domain::integers(0, cols - 1), {}}};
  if (composite) s.structure = LabelStructure::composite({{"i", "j"}});
  s.rule = [cols](std::span<const Value> x) {
    return std::vector<Value>{x[0], static_cast<Value>((static_cast<int>(x[1]) + 1) % cols)};
  };
  s.rule_description = "(i,j) -> (i, j+1 mod cols)";
  return Cssa(std::move(s));
}

inline std::string bits_string(long value, int width) {
  std::string s;
  for (int k = width - 1; k >= 0; --k) s += ((value >> k) & 1) ? '1' : '0';
  return s;
}

// Cells s(B1..BN) on a binary N-dimensional grid, B1 most significant; each occupied cell
// moves to the binary successor of its label.
inline Cssa song_grid(int dims) {
  const int cells = 1 << dims;
  CssaSpec s;
  s.name = "song" + std::to_string(dims);
  std::vector<LabelIndex> idx;
  for (int d = 1; d <= dims; ++d) idx.push_back({"B" + std::to_string(d), 2});
  for (int k = 0; k < cells; ++k) {
    std::vector<int> pos;
    for (int d = dims - 1; d >= 0; --d) pos.push_back((k >> d) & 1);
    s.substates.push_back({"s_" + bits_string(k, dims), Domain::bits(), pos});
  }
  s.structure = LabelStructure::grid(std::move(idx));
  s.rule = [cells](std::span<const Value> x) {
    std::vector<Value> y(x.size());
    for (int k = 0; k < cells; ++k) y[static_cast<std::size_t>((k + 1) % cells)] = x[static_cast<std::size_t>(k)];
    return y;
  };
  s.rule_description = "occupied label advances in binary";
  return Cssa(std::move(s));
}

inline Cssa counting_chain(int cells) {
  std::vector<int> succ(static_cast<std::size_t>(cells));
  for (int k = 0; k < cells; ++k) succ[static_cast<std::size_t>(k)] = (k + 1) % cells;
  return permuting_chain(std::move(succ), "counting_chain");
}

// Function g over configurations of a rows x cols bit field. Label index B_a_b is the value of
// bit (a,b) in the configuration; argument axes i and j give each label index its place on
// the field. Dynamics: every configuration shifts one column forward.
inline Cssa bitfield_song(int rows, int cols) {
  const int bits = rows * cols;
  if (bits > 8) throw Error(Errc::invalid_argument, "bit field too large");
  const long configs = 1L << bits;
  CssaSpec s;
  s.name = "bitfield_song";
  std::vector<LabelIndex> idx;
  std::vector<std::vector<int>> coords;
  for (int a = 0; a < rows; ++a)
    for (int b = 0; b < cols; ++b) {
      idx.push_back({cell_name("B", a, b), 2});
      coords.push_back({a, b});
    }
  for (long c = 0; c < configs; ++c) {
    std::vector<int> pos;
    for (int k = 0; k < bits; ++k) pos.push_back(static_cast<int>((c >> (bits - 1 - k)) & 1));
    s.substates.push_back({"g_" + bits_string(c, bits), Domain::bits(), pos});
  }
  s.structure = LabelStructure::grid(std::move(idx)).with_argument_axes({{"i", rows}, {"j", cols}}, coords);
  auto shift = [rows, cols, bits](long c) {
    long out = 0;
    for (int a = 0; a < rows; ++a)
      for (int b = 0; b < cols; ++b) {
        long bit = (c >> (bits - 1 - (a * cols + b))) & 1;
        int nb = (b + 1) % cols;
        out |= bit << (bits - 1 - (a * cols + nb));
      }
    return out;
  };
  s.rule = [configs, shift](std::span<const Value> x) {
    std::vector<Value> y(x.size());
    for (long c = 0; c < configs; ++c) y[static_cast<std::size_t>(shift(c))] = x[static_cast<std::size_t>(c)];
    return y;
  };
  s.rule_description = "configurations shift one column";
  return Cssa(std::move(s));
}

// Coordinate registers x (f_0), y (f_1) and cells f_2.. for cell (x,y) at 2 + (x-1) + xmax*(y-1).
// Each step toggles the addressed cell and advances the registers. The stale variant toggles
// the cell one address ahead of the register.
inline Cssa transference_machine(int xmax, int ymax, bool stale, bool structured) {
  const int n = 2 + xmax * ymax;
  CssaSpec s;
  s.name = std::string(stale ? "stale_" : "") + (structured ? "register_machine" : "unstructured_machine");
  for (int i = 0; i < n; ++i) {
    Domain d = i == 0 ? Domain::integers(1, xmax) : i == 1 ? Domain::integers(1, ymax) : Domain::bits();
    s.substates.push_back({"f_" + std::to_string(i), d, structured ? std::vector<int>{i} : std::vector<int>{}});
  }
  if (structured) s.structure = LabelStructure::vector("i", n);
  s.rule = [xmax, ymax, stale](std::span<const Value> f) {
    std::vector<Value> g(f.begin(), f.end());
    int x = static_cast<int>(f[0]), y = static_cast<int>(f[1]);
    auto advance = [&](int& ax, int& ay) {
      if (++ax > xmax) {
        ax = 1;
        if (++ay > ymax) ay = 1;
      }
    };
    int nx = x, ny = y;
    advance(nx, ny);
    int cx = stale ? nx : x, cy = stale ? ny : y;
    auto cell = static_cast<std::size_t>(2 + (cx - 1) + xmax * (cy - 1));
    g[cell] = 1 - g[cell];
    g[0] = nx;
    g[1] = ny;
    return g;
  };
  s.rule_description = stale ? "toggle next cell, advance registers" : "toggle addressed cell, advance registers";
  return Cssa(std::move(s));
}

// Bits g(x,y) all toggling each step.
inline Cssa toggling_grid(int xmax, int ymax) {
  CssaSpec s;
  s.name = "toggling_grid";
  for (int x = 0; x < xmax; ++x)
    for (int y = 0; y < ymax; ++y) s.substates.push_back({cell_name("g", x, y), Domain::bits(), {x, y}});
  s.structure = LabelStructure::grid({{"x", xmax}, {"y", ymax}});
  s.rule = [](std::span<const Value> v) {
    std::vector<Value> y(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) y[i] = 1 - v[i];
    return y;
  };
  s.rule_description = "toggle all";
  return Cssa(std::move(s));
}

// Register r follows table cells t_k: r -> t_r; table cells never change.
inline Cssa lookup_table_machine(int size) {
  CssaSpec s;
  s.name = "lookup_table_machine";
  s.substates.push_back({"r", Domain::integers(0, size - 1), {}});
  for (int k = 0; k < size; ++k) s.substates.push_back({"t_" + std::to_string(k), Domain::integers(0, size - 1), {}});
  s.rule = [](std::span<const Value> x) {
    std::vector<Value> y(x.begin(), x.end());
    y[0] = x[1 + static_cast<std::size_t>(x[0])];
    return y;
  };
  s.rule_description = "r -> t[r]";
  return Cssa(std::move(s));
}

// Counter c and display d; the display shows frames[c+1] regardless of its own state.
inline Cssa movie_player(std::vector<int> frames, int display_values) {
  const int n = static_cast<int>(frames.size());
  CssaSpec s;
  s.name = "movie_player";
  s.substates = {{"c", Domain::integers(0, n - 1), {}}, {"d", Domain::integers(0, display_values - 1), {}}};
  s.rule = [frames, n](std::span<const Value> x) {
    int c = (static_cast<int>(x[0]) + 1) % n;
    return std::vector<Value>{static_cast<Value>(c), static_cast<Value>(frames[static_cast<std::size_t>(c)])};
  };
  s.rule_description = "c -> c+1, d -> frame[c+1]";
  return Cssa(std::move(s));
}

// States 0..path_len-1 advance by one; every other state stays put.
inline Cssa derailable_counter(int modulus, int path_len) {
  std::vector<int> succ(static_cast<std::size_t>(modulus));
  for (int v = 0; v < modulus; ++v) succ[static_cast<std::size_t>(v)] = v < path_len ? (v + 1) % modulus : v;
  return table_cssa("derailable", std::move(succ));
}

// Clock c plus two registers that each record the full state of the xor automaton as 2*b1+b2.
inline Cssa recorder_system() {
  CssaSpec s;
  s.name = "recorder";
  s.substates = {{"c", Domain::integers(0, 3), {}}, {"r1", Domain::integers(0, 3), {}}, {"r2", Domain::integers(0, 3), {}}};
  auto next = [](int r) {
    int b1 = r >> 1, b2 = r & 1;
    return 2 * b2 + (b1 ^ b2);
  };
  s.rule = [next](std::span<const Value> x) {
    return std::vector<Value>{static_cast<Value>((static_cast<int>(x[0]) + 1) % 4),
                              static_cast<Value>(next(static_cast<int>(x[1]))),
                              static_cast<Value>(next(static_cast<int>(x[2])))};
  };
  s.rule_description = "clock ticks; each register advances the recorded xor state";
  return Cssa(std::move(s));
}

inline Cssa constraint_triple() {
  CssaSpec s;
  s.name = "constraint_triple";
  for (int k = 1; k <= 3; ++k) s.substates.push_back({"v" + std::to_string(k), Domain::integers(-1, 1), {}});
  s.rule = [](std::span<const Value> x) { return std::vector<Value>{-x[0], -x[1], -x[2]}; };
  s.rule_description = "v -> -v";
  return Cssa(std::move(s));
}

// v flips; c1 and c2 copy the flipped v.
inline Cssa branching_copies() {
  CssaSpec s;
  s.name = "branching_copies";
  s.substates = {{"v", Domain::digital({-1, 1}), {}}, {"c1", Domain::digital({-1, 1}), {}}, {"c2", Domain::digital({-1, 1}), {}}};
  s.rule = [](std::span<const Value> x) { return std::vector<Value>{-x[0], -x[0], -x[0]}; };
  s.rule_description = "v -> -v; c1, c2 <- -v";
  return Cssa(std::move(s));
}

// ---- mappings ----

inline std::vector<LabelSource> same_named_sources(const Cssa& physics, const Cssa& formal) {
  std::vector<LabelSource> out;
  for (auto& d : formal.structure().indices())
    if (physics.structure().index_position(d.name)) out.push_back({d.name, SourceKind::inherited, d.name});
  return out;
}

inline Mapping identity_mapping(const Cssa& physics, const Cssa& formal, std::size_t steps) {
  Mapping m;
  m.description = "identity";
  m.schedule = uniform_schedule(1, steps);
  std::vector<DependencySpec> specs;
  for (auto& s : formal.substates()) {
    physics.index_of(s.name);
    specs.push_back({s.name, {s.name}, {}, Lookup{s.name, {}}});
  }
  m.specs = {std::move(specs)};
  m.label_sources = same_named_sources(physics, formal);
  return m;
}

inline Mapping copy_mapping(std::string description, const std::vector<std::pair<std::string, std::string>>& pairs,
                            std::size_t steps, long stride = 1) {
  Mapping m;
  m.description = std::move(description);
  m.schedule = uniform_schedule(stride, steps);
  std::vector<DependencySpec> specs;
  for (auto& [formal, physical] : pairs) specs.push_back({formal, {physical}, {}, Lookup{physical, {}}});
  m.specs = {std::move(specs)};
  return m;
}

// Position (i,j) of the single occupied cell of a grid.
inline Mapping grid_position_mapping(const Cssa& grid, std::size_t steps) {
  std::vector<std::string> cells;
  for (auto& s : grid.substates()) cells.push_back(s.name);
  Mapping m;
  m.description = "grid-position";
  m.schedule = uniform_schedule(1, steps);
  m.specs = {{{"i", cells, {"i"}, IndexedSum{{}, "i"}}, {"j", cells, {"j"}, IndexedSum{{}, "j"}}}};
  m.domains = {DomainSpec{{}, cells, {}, {}, "one occupied cell"}};
  return m;
}

// Same extraction on the chain layout k = i*cols + j.
inline Mapping chain_position_mapping(const Cssa& chain, int cols, std::size_t steps) {
  std::vector<std::string> cells;
  for (auto& s : chain.substates()) cells.push_back(s.name);
  Mapping m;
  m.description = "chain-position";
  m.schedule = uniform_schedule(1, steps);
  m.specs = {{{"i", cells, {"k"}, IndexedSum{{}, "k", cols, 0}}, {"j", cells, {"k"}, IndexedSum{{}, "k", 1, cols}}}};
  m.domains = {DomainSpec{{}, cells, {}, {}, "one occupied cell"}};
  return m;
}

// Chain cell k read as SONG cell labelled by the binary digits of k.
inline Mapping song_relabel_mapping(int dims, std::size_t steps) {
  Mapping m;
  m.description = "song-relabel";
  m.schedule = uniform_schedule(1, steps);
  std::vector<DependencySpec> specs;
  for (int k = 0; k < (1 << dims); ++k) {
    std::string src = "b_" + std::to_string(k);
    specs.push_back({"s_" + bits_string(k, dims), {src}, {}, Lookup{src, {}}});
  }
  m.specs = {std::move(specs)};
  for (int d = 1; d <= dims; ++d) m.label_sources.push_back({"B" + std::to_string(d), SourceKind::inherited, "k"});
  return m;
}

// b(i,j) = sum over configurations of config(i,j) * g(config).
inline Mapping bitfield_mapping(const Cssa& song, int rows, int cols, std::size_t steps) {
  std::vector<std::string> cells;
  for (auto& s : song.substates()) cells.push_back(s.name);
  Mapping m;
  m.description = "bitfield-from-song";
  m.schedule = uniform_schedule(1, steps);
  std::vector<DependencySpec> specs;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      auto label = cell_name("B", i, j);
      specs.push_back({cell_name("b", i, j), cells, {label}, IndexedSum{{}, label}});
    }
  m.specs = {std::move(specs)};
  m.domains = {DomainSpec{{}, cells, {}, {}, "one occupied configuration"}};
  m.label_sources = {{"i", SourceKind::inherited, "i"}, {"j", SourceKind::inherited, "j"}};
  return m;
}

// Cells of the register machine read as g(x,y) once per full sweep.
inline Mapping transference_mapping(int xmax, int ymax, std::size_t steps, bool declare_transference = true) {
  Mapping m;
  m.description = "register-transference";
  m.schedule = uniform_schedule(xmax * ymax, steps);
  std::vector<DependencySpec> specs;
  for (int x = 0; x < xmax; ++x)
    for (int y = 0; y < ymax; ++y) {
      std::string src = "f_" + std::to_string(2 + x + xmax * y);
      specs.push_back({cell_name("g", x, y), {src}, {}, Lookup{src, {}}});
    }
  m.specs = {std::move(specs)};
  m.domains = {DomainSpec{{{"f_0", {1}}, {"f_1", {1}}}, {}, {}, {}, "registers at origin"}};
  if (declare_transference) {
    m.transference = Transference{{{"x", "f_0", 1}, {"y", "f_1", 1}}};
    m.label_sources = {{"x", SourceKind::transferred, ""}, {"y", SourceKind::transferred, ""}};
  }
  return m;
}

inline Mapping lookup_table_mapping(const std::vector<int>& table, std::size_t steps) {
  Mapping m;
  m.description = "lookup-table-register";
  m.schedule = uniform_schedule(1, steps);
  m.specs = {{{"s", {"r"}, {}, Lookup{"r", {}}}}};
  DomainSpec d;
  for (std::size_t k = 0; k < table.size(); ++k) d.pins["t_" + std::to_string(k)] = {static_cast<Value>(table[k])};
  d.description = "table cells hold the program";
  m.domains = {std::move(d)};
  return m;
}

inline Mapping recorder_mapping(std::size_t steps) {
  Mapping m;
  m.description = "recorder";
  m.schedule = uniform_schedule(1, steps);
  StateTable hi{{"r1"}, {}}, lo{{"r2"}, {}};
  for (int r = 0; r < 4; ++r) {
    hi.table[{static_cast<Value>(r)}] = r >> 1;
    lo.table[{static_cast<Value>(r)}] = r & 1;
  }
  m.specs = {{{"b1", {"r1"}, {}, hi}, {"b2", {"r2"}, {}, lo}}};
  DomainSpec d;
  d.predicate = [](const FormalState& p) { return p[1] == p[2]; };
  d.description = "registers agree";
  m.domains = {std::move(d)};
  return m;
}

inline Mapping constraint_mapping(int k, std::size_t steps) {
  std::string v = "v" + std::to_string(k);
  Mapping m;
  m.description = "constraint-" + v;
  m.schedule = uniform_schedule(1, steps);
  m.specs = {{{"x", {v}, {}, Lookup{v, {}}}}};
  DomainSpec d;
  d.predicate = [](const FormalState& p) { return p[0] + p[1] + p[2] == 0; };
  d.description = "v1+v2+v3=0";
  m.domains = {std::move(d)};
  return m;
}

// Reads v initially and the named copy afterwards.
inline Mapping branch_mapping(const std::string& copy) {
  Mapping m;
  m.description = "branch-" + copy;
  m.schedule = uniform_schedule(1, 1);
  m.specs = {{{"s", {"v"}, {}, Lookup{"v", {}}}}, {{"s", {copy}, {}, Lookup{copy, {}}}}};
  return m;
}

inline Mapping band_mapping(const std::string& sw, const std::vector<int>& magnitudes, std::size_t steps) {
  std::vector<Value> pos, neg, pins;
  for (int a : magnitudes) {
    pos.push_back(a);
    neg.push_back(-a);
  }
  pins = pos;
  pins.insert(pins.end(), neg.begin(), neg.end());
  std::string desc = "band:" + sw + ":{";
  for (std::size_t i = 0; i < magnitudes.size(); ++i) desc += (i ? "," : "") + std::to_string(magnitudes[i]);
  desc += "}";
  Mapping m;
  m.description = desc;
  m.schedule = uniform_schedule(1, steps);
  m.specs = {{{"s", {sw}, {}, Band{sw, {{1, pos}, {-1, neg}}}}}};
  m.domains = {DomainSpec{{{sw, pins}}, {}, {}, {}, "switch inside the band"}};
  return m;
}

}  // namespace mcilab::systems
