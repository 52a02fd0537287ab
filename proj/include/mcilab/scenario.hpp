#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mcilab/cssa.hpp"
#include "mcilab/error.hpp"
#include "mcilab/mangled.hpp"
#include "mcilab/quantum.hpp"
#include "mcilab/ssi.hpp"
#include "mcilab/systems.hpp"

namespace mcilab::lab {

inline constexpr int kSchemaVersion = 1;

inline int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

inline Error at(const YAML::Node& n, Errc code, const std::string& msg) {
  return Error(code, "line " + std::to_string(line_of(n)) + ": " + msg);
}

template <class T>
T get(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw at(n, Errc::schema_error, "'" + what + "' has the wrong type");
  }
}

inline YAML::Node need(const YAML::Node& parent, const std::string& key) {
  auto n = parent[key];
  if (!n) throw at(parent, Errc::schema_error, "missing '" + key + "'");
  return n;
}

template <class T>
T need_as(const YAML::Node& parent, const std::string& key) {
  return get<T>(need(parent, key), key);
}

template <class T>
T opt(const YAML::Node& parent, const std::string& key, T fallback) {
  auto n = parent[key];
  return n ? get<T>(n, key) : fallback;
}

// A number or a [re, im] pair.
inline quantum::Complex complex_of(const YAML::Node& n, const std::string& what) {
  if (n.IsSequence()) {
    if (n.size() != 2) throw at(n, Errc::schema_error, "'" + what + "' must be a number or [re, im]");
    return {get<double>(n[0], what), get<double>(n[1], what)};
  }
  return {get<double>(n, what), 0.0};
}

inline quantum::CMatrix matrix_of(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() == 0) throw at(n, Errc::schema_error, "'" + what + "' must be a list of rows");
  const auto rows = static_cast<Eigen::Index>(n.size());
  const auto cols = static_cast<Eigen::Index>(n[0].size());
  quantum::CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    auto row = n[static_cast<std::size_t>(i)];
    if (!row.IsSequence() || static_cast<Eigen::Index>(row.size()) != cols)
      throw at(row, Errc::schema_error, "'" + what + "' rows differ in length");
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = complex_of(row[static_cast<std::size_t>(j)], what);
  }
  return m;
}

struct ExperimentDef {
  std::string name;
  std::string kind;
  YAML::Node node;
  int line = 0;
};

struct Scenario {
  std::string file;     // base name, for the report
  std::string digest;   // of the file bytes
  int schema = kSchemaVersion;
  std::uint64_t seed = 0;
  YAML::Node systems;
  std::vector<ExperimentDef> experiments;
};

inline const std::set<std::string>& experiment_kinds() {
  static const std::set<std::string> k = {"check", "count", "rules", "quantum", "noise", "mangled"};
  return k;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline std::string system_kind(const YAML::Node& def) { return def["kind"] ? def["kind"].as<std::string>() : "cssa"; }

// Checks that `key` (when present) names a system of the given kind.
inline void check_ref(const Scenario& s, const YAML::Node& node, const std::string& key, const std::string& kind,
                      std::vector<std::string>& problems) {
  auto ref = node[key];
  if (!ref) return;
  const auto name = ref.as<std::string>();
  auto def = s.systems ? s.systems[name] : YAML::Node();
  if (!def) {
    problems.push_back("line " + std::to_string(line_of(ref)) + ": dangling reference '" + name + "' (no such system)");
    return;
  }
  if (system_kind(def) != kind)
    problems.push_back("line " + std::to_string(line_of(ref)) + ": '" + name + "' is a " + system_kind(def) +
                       " system, expected " + kind);
}

}  // namespace detail

// Parses and validates a scenario; every problem found is reported with its line.
inline Scenario parse_scenario(const std::string& text, const std::string& file = "<memory>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(Errc::parse_error, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw Error(Errc::schema_error, "line 1: scenario must be a mapping");
  Scenario s;
  s.file = file;
  s.digest = "fnv1a64:" + hex64(fnv1a(text));
  auto schema = root["schema"];
  if (!schema) throw Error(Errc::schema_error, "line 1: missing 'schema'");
  s.schema = get<int>(schema, "schema");
  if (s.schema != kSchemaVersion)
    throw at(schema, Errc::schema_error, "unknown schema version " + std::to_string(s.schema));
  s.seed = opt<std::uint64_t>(root, "seed", 0);
  s.systems = root["systems"];
  if (s.systems && !s.systems.IsMap()) throw at(s.systems, Errc::schema_error, "'systems' must be a mapping");

  std::vector<std::string> problems;
  Errc first = Errc::schema_error;
  auto note = [&](Errc code, std::string msg) {
    if (problems.empty()) first = code;
    problems.push_back(std::move(msg));
  };
  if (s.systems)
    for (auto it = s.systems.begin(); it != s.systems.end(); ++it) {
      const auto kind = detail::system_kind(it->second);
      if (kind != "cssa" && kind != "wave" && kind != "blocks")
        note(Errc::schema_error, "line " + std::to_string(line_of(it->second)) + ": unknown system kind '" + kind + "'");
    }

  auto exps = root["experiments"];
  if (!exps || !exps.IsSequence() || exps.size() == 0) throw Error(Errc::schema_error, "line 1: 'experiments' must be a nonempty list");
  std::set<std::string> names;
  for (std::size_t i = 0; i < exps.size(); ++i) {
    auto e = exps[i];
    ExperimentDef d;
    d.node = e;
    d.line = line_of(e);
    const std::string where = "line " + std::to_string(d.line) + ": ";
    if (!e.IsMap() || !e["kind"]) {
      note(Errc::schema_error, where + "experiment needs a 'kind'");
      continue;
    }
    d.kind = e["kind"].as<std::string>();
    d.name = e["name"] ? e["name"].as<std::string>() : d.kind + "-" + std::to_string(i + 1);
    if (!experiment_kinds().count(d.kind)) note(Errc::schema_error, where + "unknown experiment kind '" + d.kind + "'");
    if (!names.insert(d.name).second) note(Errc::schema_error, where + "duplicate experiment name '" + d.name + "'");

    std::vector<std::string> refs;
    if (d.kind == "check" || d.kind == "count") {
      for (auto key : {"physics", "computation"})
        if (!e[key]) note(Errc::schema_error, where + d.kind + " needs '" + key + "'");
      detail::check_ref(s, e, "physics", "cssa", refs);
      detail::check_ref(s, e, "computation", "cssa", refs);
    } else if (d.kind == "rules") {
      if (!e["branches"] && !e["state"]) note(Errc::schema_error, where + "rules needs 'branches' or 'state'");
      detail::check_ref(s, e, "state", "wave", refs);
    } else if (d.kind == "quantum") {
      if (!e["task"]) note(Errc::schema_error, where + "quantum needs a 'task'");
      detail::check_ref(s, e, "state", "wave", refs);
    } else if (d.kind == "mangled") {
      if (!e["dynamics"] && !e["walk"]) note(Errc::schema_error, where + "mangled needs 'dynamics' or 'walk'");
      if (e["dynamics"]) detail::check_ref(s, e["dynamics"], "blocks", "blocks", refs);
    }
    for (auto& r : refs) note(r.find("dangling") != std::string::npos ? Errc::dangling_reference : Errc::schema_error, r);
    s.experiments.push_back(std::move(d));
  }
  if (!problems.empty()) {
    std::string msg;
    for (auto& p : problems) msg += (msg.empty() ? "" : "\n") + p;
    throw Error(first, msg);
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read scenario '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  auto slash = path.find_last_of('/');
  return parse_scenario(buf.str(), slash == std::string::npos ? path : path.substr(slash + 1));
}

// ---- system builders ----

inline YAML::Node system_def(const Scenario& s, const std::string& name) {
  auto def = s.systems ? s.systems[name] : YAML::Node();
  if (!def) throw Error(Errc::dangling_reference, "no system named '" + name + "'");
  return def;
}

inline std::vector<Value> values_of(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence()) throw at(n, Errc::schema_error, "'" + what + "' must be a list");
  std::vector<Value> v;
  for (auto x : n) v.push_back(get<double>(x, what));
  return v;
}

inline Cssa build_cssa(const YAML::Node& def) {
  const auto builtin = need_as<std::string>(def, "builtin");
  if (builtin == "binary_clock") return systems::binary_clock(need_as<int>(def, "bits"));
  if (builtin == "counter") return systems::counter_cssa(need_as<int>(def, "modulus"), opt<int>(def, "increment", 1));
  if (builtin == "table") return systems::table_cssa(opt<std::string>(def, "label", "table"), need_as<std::vector<int>>(def, "successor"));
  if (builtin == "signed_bit") return systems::signed_bit();
  if (builtin == "signed_trit") return systems::signed_trit();
  if (builtin == "single_bit") return systems::single_bit(opt<bool>(def, "negate", false));
  if (builtin == "xor") return systems::xor_automaton();
  if (builtin == "wide_switches") return systems::wide_switches(need_as<int>(def, "n"), opt<int>(def, "count", 1));
  if (builtin == "shifting_grid") return systems::shifting_grid(need_as<int>(def, "rows"), need_as<int>(def, "cols"));
  if (builtin == "grid_position")
    return systems::grid_position(need_as<int>(def, "rows"), need_as<int>(def, "cols"), opt<bool>(def, "composite", false));
  throw at(def["builtin"], Errc::schema_error, "unknown builtin CSSA '" + builtin + "'");
}

inline PhysicalSystem build_physics(const Scenario& s, const std::string& name) {
  auto def = system_def(s, name);
  Cssa c = build_cssa(def);
  std::optional<FormalState> actual;
  if (def["actual"]) actual = FormalState(values_of(def["actual"], "actual"));
  try {
    return as_physics(std::move(c), std::move(actual));
  } catch (const Error& e) {
    throw at(def, e.code(), e.message());
  }
}

inline quantum::WaveState build_wave(const Scenario& s, const std::string& name) {
  auto def = system_def(s, name);
  std::vector<quantum::Factor> fs;
  for (auto f : need(def, "factors")) fs.push_back({need_as<std::string>(f, "name"), need_as<std::vector<std::string>>(f, "basis")});
  quantum::CVector amps = quantum::CVector::Zero(static_cast<Eigen::Index>(quantum::WaveState::product(fs)));
  quantum::WaveState shape(fs, amps);
  for (auto a : need(def, "amplitudes")) {
    auto labels = need_as<std::vector<std::string>>(a, "at");
    if (labels.size() != fs.size()) throw at(a, Errc::dimension_mismatch, "'at' needs one label per factor");
    std::vector<std::size_t> idx;
    try {
      for (std::size_t k = 0; k < fs.size(); ++k) idx.push_back(shape.label_index(k, labels[k]));
    } catch (const Error& e) {
      throw at(a, e.code(), e.message());
    }
    amps(static_cast<Eigen::Index>(shape.flat_index(idx))) += complex_of(need(a, "value"), "value");
  }
  quantum::WaveState psi(fs, amps);
  return opt<bool>(def, "normalize", false) ? psi.normalized() : psi;
}

struct BlockSystem {
  mangled::TwoWorldState state;
  mangled::BlockHamiltonian hamiltonian;
  std::optional<double> threshold;  // pure states: dominance threshold on trace(SS)/trace(LL)
};

inline quantum::CMatrix random_hermitian(std::size_t n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0, scale);
  quantum::CMatrix m(n, n);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = quantum::Complex(g(rng), g(rng));
  return 0.5 * (m + m.adjoint());
}

inline Eigen::VectorXcd random_unit(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0, 1);
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = quantum::Complex(g(rng), g(rng));
  return v.normalized();
}

// Block systems are explicit matrices or seeded random draws; `coupling` rescales the LS/SL blocks.
inline BlockSystem build_blocks(const Scenario& s, const std::string& name, std::uint64_t seed) {
  auto def = system_def(s, name);
  const auto l = need_as<std::size_t>(def, "dim_l"), sd = need_as<std::size_t>(def, "dim_s");
  std::mt19937_64 rng(derive_seed(seed, "blocks/" + name));
  BlockSystem b;
  auto h = need(def, "hamiltonian");
  quantum::CMatrix H = h["matrix"] ? matrix_of(h["matrix"], "hamiltonian")
                                   : random_hermitian(l + sd, rng, opt<double>(h, "scale", 1.0));
  if (static_cast<std::size_t>(H.rows()) != l + sd || H.cols() != H.rows())
    throw at(h, Errc::dimension_mismatch, "hamiltonian must be (dim_l + dim_s) square");
  b.hamiltonian = mangled::BlockHamiltonian::from(H, l);
  if (h["coupling"]) {
    const double c = get<double>(h["coupling"], "coupling");
    b.hamiltonian.LS *= c;
    b.hamiltonian.SL *= c;
  }
  auto st = need(def, "state");
  if (st["matrix"]) {
    auto rho = matrix_of(st["matrix"], "state");
    if (rho.rows() != H.rows() || rho.cols() != H.cols()) throw at(st, Errc::dimension_mismatch, "state must match the hamiltonian");
    b.state = mangled::TwoWorldState::split(rho, l);
  } else if (st["pure"]) {
    auto p = st["pure"];
    auto lv = random_unit(l, rng), sv = random_unit(sd, rng);
    b.state = mangled::TwoWorldState::pure(lv, sv, complex_of(need(p, "alpha"), "alpha"), complex_of(need(p, "beta"), "beta"));
    b.threshold = mangled::dominance_threshold(lv, sv, b.hamiltonian);
  } else {
    const double tr = opt<double>(st, "trace", 1.0);
    std::normal_distribution<double> g(0, 1);
    quantum::CMatrix a(l + sd, l + sd);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = quantum::Complex(g(rng), g(rng));
    quantum::CMatrix rho = a * a.adjoint();
    rho *= tr / rho.trace().real();
    b.state = mangled::TwoWorldState::split(0.5 * (rho + rho.adjoint()), l);
  }
  return b;
}

}  // namespace mcilab::lab
