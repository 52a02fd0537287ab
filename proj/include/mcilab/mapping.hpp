#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mcilab/cssa.hpp"
#include "mcilab/error.hpp"
#include "mcilab/ssi.hpp"

namespace mcilab {

// Unary table on one physical substate; an empty table copies the value.
struct Lookup {
  std::string source;
  std::vector<std::pair<Value, Value>> table;
};

// Sum over sources of weight * value where the weight is the source's coordinate along a
// label, optionally transformed as (coord / divisor) % modulus + offset. Defined only when
// exactly one source is nonzero.
struct IndexedSum {
  std::vector<std::string> sources;  // empty: all of depends_on
  std::string label;
  int divisor = 1;
  int modulus = 0;
  Value offset = 0;
};

// Each formal value owns a set of physical values; anything else is undefined.
struct Band {
  std::string source;
  std::vector<std::pair<Value, std::vector<Value>>> bands;
};

// Tuple of source values to formal value; absent tuples are undefined.
struct StateTable {
  std::vector<std::string> sources;
  std::map<std::vector<Value>, Value> table;
};

struct Functional {
  std::vector<std::string> sources;
  std::function<std::optional<Value>(std::span<const Value>)> fn;
  std::string description;
};

using Extraction = std::variant<Lookup, IndexedSum, Band, StateTable, Functional>;

struct DependencySpec {
  std::string target;
  std::vector<std::string> depends_on;
  std::vector<std::string> inherits;
  Extraction extraction;
};

struct DomainSpec {
  std::map<std::string, std::vector<Value>> pins;
  std::vector<std::string> one_hot;       // exactly one of these is nonzero
  std::vector<FormalState> states;         // explicit list; overrides generation when nonempty
  std::function<bool(const FormalState&)> predicate;
  std::string description;
};

struct Window {
  long start = 0;
  long end = 0;  // inclusive; the formal state must be constant on [start, end]
};

enum class SourceKind { inherited, transferred };

struct LabelSource {
  std::string formal_index;
  SourceKind kind = SourceKind::inherited;
  std::string physical_label;  // physical index or argument axis when inherited
};

struct CoordinateRegister {
  std::string formal_index;
  std::string physical_substate;
  Value origin = 0;  // formal coordinate = register value - origin
};

struct Transference {
  std::vector<CoordinateRegister> registers;
};

struct Mapping {
  std::string description;
  std::vector<Window> schedule;
  std::vector<std::vector<DependencySpec>> specs;  // one entry (shared) or one per schedule entry
  std::vector<DomainSpec> domains;                 // one entry (shared) or one per schedule entry
  std::vector<LabelSource> label_sources;
  std::optional<Transference> transference;

  std::size_t formal_steps() const { return schedule.empty() ? 0 : schedule.size() - 1; }

  const std::vector<DependencySpec>& specs_at(std::size_t t) const {
    if (specs.empty()) throw Error(Errc::invalid_definition, "mapping has no dependency specs");
    return specs.size() == 1 ? specs[0] : specs.at(t);
  }

  const DomainSpec& domain_at(std::size_t t) const {
    static const DomainSpec everything{};
    if (domains.empty()) return everything;
    return domains.size() == 1 ? domains[0] : domains.at(t);
  }
};

inline std::vector<Window> uniform_schedule(long stride, std::size_t steps, long window = 0) {
  if (stride <= 0 || window < 0 || window >= stride)
    throw Error(Errc::invalid_argument, "schedule needs stride > window >= 0");
  std::vector<Window> s;
  for (std::size_t t = 0; t <= steps; ++t) s.push_back({static_cast<long>(t) * stride, static_cast<long>(t) * stride + window});
  return s;
}

inline std::vector<std::string> extraction_sources(const DependencySpec& d) {
  return std::visit(
      [&](const auto& e) -> std::vector<std::string> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Lookup> || std::is_same_v<T, Band>) {
          return {e.source};
        } else if constexpr (std::is_same_v<T, IndexedSum>) {
          return e.sources.empty() ? d.depends_on : e.sources;
        } else {
          return e.sources;
        }
      },
      d.extraction);
}

inline std::string describe_extraction(const Extraction& ex) {
  std::ostringstream os;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Lookup>) {
          os << "lookup(" << e.source;
          for (auto& [a, b] : e.table) os << "," << format_value(a) << "->" << format_value(b);
          os << ")";
        } else if constexpr (std::is_same_v<T, IndexedSum>) {
          os << "sum(" << e.label << "/" << e.divisor << "%" << e.modulus << "+" << format_value(e.offset) << ")";
        } else if constexpr (std::is_same_v<T, Band>) {
          os << "band(" << e.source;
          for (auto& [v, vs] : e.bands) {
            os << "," << format_value(v) << ":{";
            for (std::size_t i = 0; i < vs.size(); ++i) os << (i ? " " : "") << format_value(vs[i]);
            os << "}";
          }
          os << ")";
        } else if constexpr (std::is_same_v<T, StateTable>) {
          os << "table(" << e.table.size() << ")";
        } else {
          os << "fn(" << e.description << ")";
        }
      },
      ex);
  return os.str();
}

namespace detail {

struct BoundSpec {
  std::size_t target = 0;
  std::vector<std::size_t> deps;
  std::vector<std::size_t> sources;
  std::vector<double> weights;
  std::vector<Value> scratch;
  const Extraction* extraction = nullptr;
};

struct BoundDomain {
  std::map<std::size_t, std::vector<Value>> pins;
  std::vector<std::size_t> one_hot;
  const DomainSpec* spec = nullptr;
};

}  // namespace detail

// A mapping resolved against concrete physics and formal CSSAs.
class BoundMapping {
 public:
  BoundMapping(const Mapping& m, const Cssa& physics, const Cssa& formal)
      : mapping_(std::make_shared<const Mapping>(m)), physics_(physics), formal_(formal) {
    const Mapping& mm = *mapping_;
    if (mm.schedule.empty()) throw Error(Errc::invalid_definition, "mapping schedule is empty");
    for (std::size_t t = 0; t < mm.schedule.size(); ++t) {
      const auto& w = mm.schedule[t];
      if (w.end < w.start) throw Error(Errc::invalid_definition, "schedule window ends before it starts");
      if (t > 0 && w.start <= mm.schedule[t - 1].end)
        throw Error(Errc::invalid_definition, "schedule must be strictly increasing");
    }
    if (mm.specs.size() != 1 && mm.specs.size() != mm.schedule.size())
      throw Error(Errc::invalid_definition, "specs must be shared or given per step");
    if (mm.domains.size() > 1 && mm.domains.size() != mm.schedule.size())
      throw Error(Errc::invalid_definition, "domains must be shared or given per step");
    steps_.resize(mm.schedule.size());
    domains_.resize(mm.schedule.size());
    for (std::size_t t = 0; t < mm.schedule.size(); ++t) {
      if (t > 0 && mm.specs.size() == 1) {
        steps_[t] = steps_[0];
      } else {
        bind_specs(mm.specs_at(t), steps_[t]);
      }
      bind_domain(mm.domain_at(t), domains_[t]);
    }
  }

  const Mapping& mapping() const { return *mapping_; }
  const Cssa& physics() const { return physics_; }
  const Cssa& formal() const { return formal_; }
  std::size_t schedule_size() const { return mapping_->schedule.size(); }
  const std::vector<detail::BoundSpec>& specs(std::size_t t) const { return steps_.at(t); }

  bool in_domain(const FormalState& p, std::size_t t) const {
    const auto& d = domains_.at(t);
    if (!d.spec) return true;
    if (!d.spec->states.empty() && !std::binary_search(sorted_states(t).begin(), sorted_states(t).end(), p))
      return false;
    for (auto& [i, vals] : d.pins)
      if (std::find(vals.begin(), vals.end(), p[i]) == vals.end()) return false;
    if (!d.one_hot.empty()) {
      int hot = 0;
      for (auto i : d.one_hot) hot += p[i] != 0;
      if (hot != 1) return false;
    }
    if (d.spec->predicate && !d.spec->predicate(p)) return false;
    return true;
  }

  // Formal state at step t, or nullopt outside the domain or where an extraction is undefined.
  std::optional<FormalState> map(const FormalState& p, std::size_t t) const {
    if (t >= steps_.size()) throw Error(Errc::invalid_argument, "step outside the mapping schedule");
    if (p.size() != physics_.size()) throw Error(Errc::invalid_state, "physical state has the wrong arity");
    if (!in_domain(p, t)) return std::nullopt;
    return extract(p, t);
  }

  // Extraction without the domain predicate.
  std::optional<FormalState> extract(const FormalState& p, std::size_t t) const {
    std::vector<Value> out(formal_.size(), 0);
    std::vector<char> set(formal_.size(), 0);
    for (auto& bs : steps_[t]) {
      auto v = evaluate(bs, p);
      if (!v) return std::nullopt;
      if (set[bs.target]) {
        if (out[bs.target] != *v)
          throw Error(Errc::multiple_assignment, "two specs assign different values to '" +
                                                     formal_.substate(bs.target).name + "'");
        continue;
      }
      if (!formal_.substate(bs.target).domain.contains(*v)) return std::nullopt;
      out[bs.target] = *v;
      set[bs.target] = 1;
    }
    return FormalState(std::move(out));
  }

  // Visits the domain states of step t in deterministic order.
  template <class F>
  void for_each_domain_state(std::size_t t, std::size_t bound, F&& f) const {
    const auto& d = domains_.at(t);
    if (d.spec && !d.spec->states.empty()) {
      if (d.spec->states.size() > bound) throw Error(Errc::state_space_too_large, "explicit domain exceeds bound");
      for (auto& s : sorted_states(t))
        if (in_domain(s, t)) f(s);
      return;
    }
    if (d.one_hot.empty()) {
      auto space = restricted_space(physics_, d.pins, bound);
      for (auto& s : space)
        if (in_domain(s, t)) f(s);
      return;
    }
    std::vector<std::size_t> hot = d.one_hot;
    std::sort(hot.begin(), hot.end(),
              [&](std::size_t a, std::size_t b) { return physics_.substate(a).name < physics_.substate(b).name; });
    std::size_t visited = 0;
    for (auto h : hot) {
      for (Value v : physics_.substate(h).domain.values()) {
        if (v == 0) continue;
        auto pins = d.pins;
        for (auto g : hot) {
          std::vector<Value> allowed = {g == h ? v : 0.0};
          auto it = d.pins.find(g);
          if (it != d.pins.end() && std::find(it->second.begin(), it->second.end(), allowed[0]) == it->second.end())
            allowed.clear();
          pins[g] = allowed;
        }
        auto space = restricted_space(physics_, pins, bound);
        visited += space.size();
        if (visited > bound) throw Error(Errc::state_space_too_large, "one-hot domain exceeds bound");
        for (auto& s : space)
          if (in_domain(s, t)) f(s);
      }
    }
  }

  std::vector<FormalState> domain_states(std::size_t t, std::size_t bound = kDefaultStateCap) const {
    std::vector<FormalState> out;
    for_each_domain_state(t, bound, [&](const FormalState& s) { out.push_back(s); });
    return out;
  }

 private:
  const std::vector<FormalState>& sorted_states(std::size_t t) const {
    auto it = sorted_cache_.find(t);
    if (it == sorted_cache_.end()) {
      auto v = domains_[t].spec->states;
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      it = sorted_cache_.emplace(t, std::move(v)).first;
    }
    return it->second;
  }

  void bind_specs(const std::vector<DependencySpec>& specs, std::vector<detail::BoundSpec>& out) {
    std::vector<bool> covered(formal_.size(), false);
    std::set<std::string> physical_labels;
    for (auto& d : physics_.structure().indices()) physical_labels.insert(d.name);
    for (auto& a : physics_.structure().argument_axes()) physical_labels.insert(a.name);
    for (auto& spec : specs) {
      detail::BoundSpec bs;
      bs.target = formal_.index_of(spec.target);
      covered[bs.target] = true;
      for (auto& n : spec.depends_on) bs.deps.push_back(physics_.index_of(n));
      for (auto& n : extraction_sources(spec)) {
        if (std::find(spec.depends_on.begin(), spec.depends_on.end(), n) == spec.depends_on.end())
          throw Error(Errc::invalid_definition,
                      "extraction for '" + spec.target + "' reads '" + n + "' outside its dependency set");
        bs.sources.push_back(physics_.index_of(n));
      }
      for (auto& n : spec.inherits) {
        if (!physical_labels.count(n) || spec.depends_on.empty())
          throw Error(Errc::invalid_definition,
                      "'" + spec.target + "' inherits label '" + n + "' absent from its dependency set");
      }
      if (auto* is = std::get_if<IndexedSum>(&spec.extraction)) {
        const auto& st = physics_.structure();
        auto d = st.index_position(is->label);
        if (!d) throw Error(Errc::dangling_reference, "indexed sum over unknown label '" + is->label + "'");
        if (is->divisor <= 0 || is->modulus < 0) throw Error(Errc::invalid_definition, "bad indexed-sum transform");
        for (auto s : bs.sources) {
          int c = physics_.substate(s).position.at(*d) / is->divisor;
          if (is->modulus > 0) c %= is->modulus;
          bs.weights.push_back(static_cast<double>(c) + is->offset);
        }
      }
      bs.scratch.resize(bs.sources.size());
      bs.extraction = &spec.extraction;
      out.push_back(std::move(bs));
    }
    for (std::size_t i = 0; i < formal_.size(); ++i)
      if (!covered[i])
        throw Error(Errc::invalid_definition, "mapping leaves formal substate '" + formal_.substate(i).name + "' unassigned");
  }

  void bind_domain(const DomainSpec& spec, detail::BoundDomain& out) {
    out.spec = &spec;
    for (auto& [name, vals] : spec.pins) out.pins[physics_.index_of(name)] = vals;
    for (auto& n : spec.one_hot) out.one_hot.push_back(physics_.index_of(n));
  }

  std::optional<Value> evaluate(const detail::BoundSpec& bs, const FormalState& p) const {
    return std::visit(
        [&](const auto& e) -> std::optional<Value> {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, Lookup>) {
            Value v = p[bs.sources[0]];
            if (e.table.empty()) return v;
            for (auto& [a, b] : e.table)
              if (a == v) return b;
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, IndexedSum>) {
            int nonzero = 0;
            Value sum = 0;
            for (std::size_t k = 0; k < bs.sources.size(); ++k) {
              Value v = p[bs.sources[k]];
              if (v != 0) {
                ++nonzero;
                sum += bs.weights[k] * v;
              }
            }
            if (nonzero != 1) return std::nullopt;
            return sum;
          } else if constexpr (std::is_same_v<T, Band>) {
            Value v = p[bs.sources[0]];
            for (auto& [formal, vals] : e.bands)
              if (std::find(vals.begin(), vals.end(), v) != vals.end()) return formal;
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, StateTable>) {
            std::vector<Value> key(bs.sources.size());
            for (std::size_t k = 0; k < key.size(); ++k) key[k] = p[bs.sources[k]];
            auto it = e.table.find(key);
            if (it == e.table.end()) return std::nullopt;
            return it->second;
          } else {
            std::vector<Value> args(bs.sources.size());
            for (std::size_t k = 0; k < args.size(); ++k) args[k] = p[bs.sources[k]];
            return e.fn(args);
          }
        },
        *bs.extraction);
  }

  std::shared_ptr<const Mapping> mapping_;
  Cssa physics_;
  Cssa formal_;
  std::vector<std::vector<detail::BoundSpec>> steps_;
  std::vector<detail::BoundDomain> domains_;
  mutable std::map<std::size_t, std::vector<FormalState>> sorted_cache_;
};

inline std::optional<FormalState> map_state(const Mapping& m, const PhysicalSystem& physics, const Cssa& formal,
                                            const FormalState& p, std::size_t t) {
  BoundMapping b(m, physics.model, formal);
  return b.map(p, t);
}

struct Counterexample {
  std::size_t step = 0;
  FormalState physical;
  std::optional<FormalState> formal;
  std::optional<FormalState> expected;
  std::optional<FormalState> observed;
  std::string reason;
};

struct CounterfactualReport {
  bool passed = true;
  std::size_t coverage = 0;
  std::vector<std::size_t> coverage_per_step;
  std::optional<Counterexample> counterexample;
};

namespace detail {

inline bool same_formal(const Cssa& c, const FormalState& a, const FormalState& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (c.is_input(i)) continue;
    if (c.substate(i).domain.is_digital()) {
      if (a[i] != b[i]) return false;
    } else if (std::fabs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::fabs(a[i]))) {
      return false;
    }
  }
  return true;
}

// Depth-first over physical input choices from start (at physical time t0) for n steps.
template <class F>
void evolve_paths(const Cssa& physics, const FormalState& start, long n, const std::vector<InputAssignment>& inputs,
                  F&& at_time) {
  std::function<bool(const FormalState&, long)> go = [&](const FormalState& q, long k) -> bool {
    if (!at_time(q, k)) return false;
    if (k == n) return true;
    for (auto& in : inputs)
      if (!go(step(physics, q, in), k + 1)) return false;
    return true;
  };
  go(start, 0);
}

}  // namespace detail

inline CounterfactualReport check_counterfactuals(const BoundMapping& bm, std::size_t steps,
                                                  std::size_t bound = kDefaultStateCap) {
  const auto& physics = bm.physics();
  const auto& formal = bm.formal();
  const auto& sched = bm.mapping().schedule;
  if (steps + 1 > sched.size()) throw Error(Errc::invalid_argument, "run is longer than the mapping schedule");
  CounterfactualReport rep;
  const auto phys_inputs = input_assignments(physics);
  for (std::size_t t = 0; t < steps && rep.passed; ++t) {
    std::size_t covered = 0;
    const long n = sched[t + 1].start - sched[t].start;
    const long window = sched[t].end - sched[t].start;
    bm.for_each_domain_state(t, bound, [&](const FormalState& p) {
      if (!rep.passed) return;
      auto f = bm.map(p, t);
      if (!f) return;
      ++covered;
      detail::evolve_paths(physics, p, n, phys_inputs, [&](const FormalState& q, long k) {
        if (k > 0 && k <= window) {
          auto g = bm.extract(q, t);
          if (!g || !(*g == *f)) {
            rep.passed = false;
            rep.counterexample = Counterexample{t, p, f, f, g, "formal state changes inside its window"};
            return false;
          }
        }
        if (k == n) {
          auto next = bm.map(q, t + 1);
          if (!next) {
            rep.passed = false;
            rep.counterexample = Counterexample{t, p, f, std::nullopt, std::nullopt,
                                                "successor falls outside the mapping at the next step"};
            return false;
          }
          InputAssignment in;
          for (auto i : formal.input_slots()) in[formal.substate(i).name] = (*next)[i];
          auto expected = step(formal, *f, in);
          if (!detail::same_formal(formal, expected, *next)) {
            rep.passed = false;
            rep.counterexample = Counterexample{t, p, f, expected, next, "transition rule violated"};
            return false;
          }
        }
        return true;
      });
    });
    rep.coverage += covered;
    rep.coverage_per_step.push_back(covered);
  }
  return rep;
}

inline CounterfactualReport check_counterfactuals(const Mapping& m, const PhysicalSystem& physics, const Cssa& cssa,
                                                  std::size_t steps, std::size_t bound = kDefaultStateCap) {
  return check_counterfactuals(BoundMapping(m, physics.model, cssa), steps, bound);
}

inline std::vector<SsiUnit> formal_units(const BoundMapping& bm, std::size_t t, std::uint64_t seed) {
  const auto& formal = bm.formal();
  LabelPermuter permuter(bm.physics());
  const auto& specs = bm.mapping().specs_at(t);
  std::vector<SsiUnit> units;
  for (std::size_t u = 0; u < formal.units().size(); ++u) {
    SsiUnit unit;
    unit.name = formal.unit_name(u);
    std::vector<std::string> inherits;
    for (auto& spec : specs) {
      if (formal.unit_of(formal.index_of(spec.target)) != u) continue;
      for (auto& n : spec.depends_on) unit.deps.push_back(bm.physics().index_of(n));
      inherits.insert(inherits.end(), spec.inherits.begin(), spec.inherits.end());
    }
    std::sort(unit.deps.begin(), unit.deps.end());
    unit.deps.erase(std::unique(unit.deps.begin(), unit.deps.end()), unit.deps.end());
    unit.group = inheritance_group(permuter, bm.physics().size(), inherits, derive_seed(seed, unit.name));
    units.push_back(std::move(unit));
  }
  return units;
}

inline SsiReport check_ssi(const BoundMapping& bm, std::size_t t, std::uint64_t seed = 0,
                           std::size_t bound = kDefaultStateCap) {
  SsiReport rep;
  rep.step = t;
  std::vector<FormalState> domain;
  std::vector<FormalState> mapped;
  bm.for_each_domain_state(t, bound, [&](const FormalState& p) {
    auto f = bm.map(p, t);
    if (!f) return;
    domain.push_back(p);
    mapped.push_back(std::move(*f));
  });
  rep.domain_size = domain.size();
  auto units = formal_units(bm, t, seed);
  const auto& formal = bm.formal();
  std::vector<std::vector<std::vector<Value>>> values(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    values[u].reserve(mapped.size());
    for (auto& f : mapped) {
      std::vector<Value> v;
      for (auto i : formal.units()[u]) v.push_back(f[i]);
      values[u].push_back(std::move(v));
    }
  }
  rep.units = ssi_core(domain, values, units);
  for (auto& r : rep.units) rep.passed = rep.passed && r.passed;
  return rep;
}

inline SsiReport check_ssi(const Mapping& m, const PhysicalSystem& physics, const Cssa& cssa, std::size_t t,
                           std::uint64_t seed = 0) {
  return check_ssi(BoundMapping(m, physics.model, cssa), t, seed);
}

struct RelabelReport {
  bool passed = true;
  std::vector<std::string> reasons;
};

inline RelabelReport check_relabeling(const Mapping& m, const PhysicalSystem& physics, const Cssa& cssa) {
  RelabelReport rep;
  auto fail = [&](std::string why) {
    rep.passed = false;
    rep.reasons.push_back(std::move(why));
  };
  const auto& pst = physics.model.structure();
  std::map<std::string, int> physical;
  for (auto& d : pst.indices()) physical[d.name] = d.extent;
  for (auto& a : pst.argument_axes()) physical[a.name] = a.extent;
  std::map<std::string, int> formal;
  for (auto& d : cssa.structure().indices()) formal[d.name] = d.extent;

  std::map<std::string, int> sourced;
  std::map<std::string, std::string> used;
  for (auto& src : m.label_sources) {
    if (!formal.count(src.formal_index)) {
      fail("label source names unknown formal index '" + src.formal_index + "'");
      continue;
    }
    if (++sourced[src.formal_index] > 1) fail("formal index '" + src.formal_index + "' has several sources");
    if (src.kind == SourceKind::inherited) {
      auto it = physical.find(src.physical_label);
      if (it == physical.end()) {
        fail("formal index '" + src.formal_index + "' claims physical label '" + src.physical_label +
             "' which the physics does not have");
        continue;
      }
      if (it->second != formal[src.formal_index])
        fail("formal index '" + src.formal_index + "' (extent " + std::to_string(formal[src.formal_index]) +
             ") re-labels physical label '" + src.physical_label + "' (extent " + std::to_string(it->second) + ")");
      auto [u, fresh] = used.emplace(src.physical_label, src.formal_index);
      if (!fresh)
        fail("physical label '" + src.physical_label + "' is split into formal indices '" + u->second + "' and '" +
             src.formal_index + "'");
    } else {
      bool has_register = false;
      if (m.transference)
        for (auto& r : m.transference->registers)
          if (r.formal_index == src.formal_index) {
            has_register = physics.model.find(r.physical_substate).has_value();
            break;
          }
      if (!has_register) fail("formal index '" + src.formal_index + "' claims transference without a coordinate register");
    }
  }
  for (auto& [name, extent] : formal)
    if (!sourced.count(name))
      fail("formal index '" + name + "' has no inherited or transferred physical source");
  return rep;
}

struct TransferenceReport {
  bool passed = true;
  std::size_t states_checked = 0;
  std::size_t writes_checked = 0;
  std::string reason;
  std::optional<FormalState> witness;
};

inline TransferenceReport check_transference(const BoundMapping& bm, std::size_t steps,
                                             std::size_t bound = kDefaultStateCap) {
  const auto& m = bm.mapping();
  if (!m.transference) throw Error(Errc::invalid_argument, "mapping declares no transference");
  const auto& physics = bm.physics();
  const auto& formal = bm.formal();
  TransferenceReport rep;
  struct Reg {
    std::size_t substate;
    std::size_t formal_dim;
    Value origin;
  };
  std::vector<Reg> regs;
  for (auto& r : m.transference->registers) {
    auto d = formal.structure().index_position(r.formal_index);
    if (!d) throw Error(Errc::dangling_reference, "transference register for unknown formal index '" + r.formal_index + "'");
    regs.push_back({physics.index_of(r.physical_substate), *d, r.origin});
  }
  const auto phys_inputs = input_assignments(physics);
  const auto& sched = m.schedule;
  std::size_t last = std::min(steps, bm.schedule_size() - 1);
  for (std::size_t t = 0; t < last && rep.passed; ++t) {
    struct Cell {
      std::vector<std::size_t> sources;
      std::vector<int> coords;
      std::string name;
    };
    std::vector<Cell> cells;
    for (auto& bs : bm.specs(t + 1)) {
      const auto& sub = formal.substate(bs.target);
      if (sub.position.empty()) continue;
      cells.push_back({bs.sources, sub.position, sub.name});
    }
    const long n = sched[t + 1].start - sched[t].start;
    bm.for_each_domain_state(t, bound, [&](const FormalState& p) {
      if (!rep.passed || !bm.map(p, t)) return;
      ++rep.states_checked;
      std::optional<FormalState> prev;
      detail::evolve_paths(physics, p, n, phys_inputs, [&](const FormalState& q, long k) {
        if (k > 0 && prev) {
          for (auto& c : cells) {
            bool written = false;
            for (auto s : c.sources) written = written || (*prev)[s] != q[s];
            if (!written) continue;
            ++rep.writes_checked;
            for (auto& r : regs) {
              if ((*prev)[r.substate] - r.origin != c.coords[r.formal_dim]) {
                rep.passed = false;
                rep.witness = *prev;
                rep.reason = "cell '" + c.name + "' written while register '" + physics.substate(r.substate).name +
                             "' holds " + format_value((*prev)[r.substate]);
                return false;
              }
            }
          }
        }
        prev = q;
        return true;
      });
    });
  }
  return rep;
}

inline TransferenceReport check_transference(const Mapping& m, const PhysicalSystem& physics, const Cssa& cssa,
                                             std::size_t steps) {
  return check_transference(BoundMapping(m, physics.model, cssa), steps);
}

struct PhysicsReport {
  bool passed = true;
  std::size_t states_checked = 0;
  std::string reason;
};

// Totality and determinism of the physical description over the given states.
inline PhysicsReport validate_physics(const Cssa& physics, const std::vector<FormalState>& states) {
  PhysicsReport rep;
  const auto inputs = input_assignments(physics);
  for (auto& s : states) {
    ++rep.states_checked;
    for (auto& in : inputs) {
      try {
        auto a = step(physics, s, in);
        auto b = step(physics, s, in);
        if (!(a == b)) {
          rep.passed = false;
          rep.reason = "nondeterministic successor of " + describe_state(physics, s);
          return rep;
        }
      } catch (const Error& e) {
        rep.passed = false;
        rep.reason = e.what();
        return rep;
      }
    }
  }
  return rep;
}

struct VerificationRecord {
  bool single_valued = false;
  std::string single_valued_reason;
  std::optional<CounterfactualReport> counterfactuals;
  bool initial_matches = false;
  std::string initial_reason;
  std::optional<PhysicsReport> physics;
  std::vector<SsiReport> ssi;
  std::optional<RelabelReport> relabeling;
  std::optional<TransferenceReport> transference;
  std::vector<int> failed;  // requirement numbers
};

struct ImplementationWitness {
  Mapping mapping;
  Run run;
  VerificationRecord record;
};

struct ImplementationFailure {
  std::vector<int> requirements;
  std::string reason;
  VerificationRecord record;
};

class ImplementationResult {
 public:
  explicit ImplementationResult(ImplementationWitness w) : value_(std::move(w)) {}
  explicit ImplementationResult(ImplementationFailure f) : value_(std::move(f)) {}

  bool ok() const { return std::holds_alternative<ImplementationWitness>(value_); }
  explicit operator bool() const { return ok(); }
  const ImplementationWitness& witness() const { return std::get<ImplementationWitness>(value_); }
  const ImplementationFailure& failure() const { return std::get<ImplementationFailure>(value_); }
  const VerificationRecord& record() const {
    return ok() ? witness().record : failure().record;
  }
  bool failed(int requirement) const {
    if (ok()) return false;
    const auto& r = failure().requirements;
    return std::find(r.begin(), r.end(), requirement) != r.end();
  }

 private:
  std::variant<ImplementationWitness, ImplementationFailure> value_;
};

struct CheckOptions {
  std::size_t bound = kDefaultStateCap;
  std::uint64_t seed = 0;
  bool stop_at_first_failure = false;
  bool check_initial = true;
};

// Requirements: 1 mapping exists and is single-valued, 2 counterfactuals, 3 actual initial
// state maps to the run's initial state, 4 physics is a valid CSSA description, 5 SSI,
// relabeling and transference.
inline ImplementationResult check_implementation(const PhysicalSystem& physics, const Run& run, const Mapping& m,
                                                 const CheckOptions& opt = {}) {
  VerificationRecord rec;
  std::vector<std::string> reasons;
  auto failure = [&](int req, std::string why) {
    rec.failed.push_back(req);
    reasons.push_back("requirement " + std::to_string(req) + ": " + why);
  };
  auto finish = [&]() {
    std::sort(rec.failed.begin(), rec.failed.end());
    if (rec.failed.empty()) return ImplementationResult(ImplementationWitness{m, run, std::move(rec)});
    std::string why;
    for (auto& r : reasons) why += (why.empty() ? "" : "; ") + r;
    auto reqs = rec.failed;
    return ImplementationResult(ImplementationFailure{std::move(reqs), std::move(why), std::move(rec)});
  };

  validate_run(run);
  const auto T = static_cast<std::size_t>(run.steps);
  std::optional<BoundMapping> bm;
  try {
    bm.emplace(m, physics.model, run.cssa);
    if (bm->schedule_size() < T + 1) throw Error(Errc::invalid_definition, "schedule shorter than the run");
    for (std::size_t t = 0; t <= T; ++t)
      bm->for_each_domain_state(t, opt.bound, [&](const FormalState& p) { (void)bm->map(p, t); });
    rec.single_valued = true;
  } catch (const Error& e) {
    rec.single_valued_reason = e.what();
    failure(1, e.what());
    return finish();
  }

  if (opt.check_initial) {
    if (!physics.actual) {
      rec.initial_reason = "physics has no actual initial state";
    } else {
      auto f = bm->map(*physics.actual, 0);
      rec.initial_matches = f && *f == run.initial;
      if (!rec.initial_matches) rec.initial_reason = f ? "actual state maps to " + describe_state(run.cssa, *f)
                                                        : "actual state is outside the mapping";
    }
    if (!rec.initial_matches) {
      failure(3, rec.initial_reason);
      if (opt.stop_at_first_failure) return finish();
    }
  } else {
    rec.initial_matches = true;
    rec.initial_reason = "not checked";
  }

  try {
    rec.counterfactuals = check_counterfactuals(*bm, T, opt.bound);
    if (!rec.counterfactuals->passed) {
      const auto& c = *rec.counterfactuals->counterexample;
      failure(2, c.reason + " at step " + std::to_string(c.step) + " from " + describe_state(physics.model, c.physical));
    }
  } catch (const Error& e) {
    failure(e.code() == Errc::multiple_assignment ? 1 : 2, e.what());
  }
  if (opt.stop_at_first_failure && !rec.failed.empty()) return finish();

  {
    std::vector<FormalState> states;
    for (std::size_t t = 0; t <= T; ++t) {
      auto d = bm->domain_states(t, opt.bound);
      states.insert(states.end(), d.begin(), d.end());
    }
    if (physics.actual) states.push_back(*physics.actual);
    rec.physics = validate_physics(physics.model, states);
    if (!rec.physics->passed) failure(4, rec.physics->reason);
  }
  if (opt.stop_at_first_failure && !rec.failed.empty()) return finish();

  bool valid = true;
  std::string why;
  for (std::size_t t = 0; t <= T; ++t) {
    rec.ssi.push_back(check_ssi(*bm, t, opt.seed, opt.bound));
    if (!rec.ssi.back().passed && valid) {
      valid = false;
      for (auto& u : rec.ssi.back().units)
        if (!u.passed) {
          why = "SSI at step " + std::to_string(t) + ": " + u.reason;
          break;
        }
    }
  }
  rec.relabeling = check_relabeling(m, physics, run.cssa);
  if (!rec.relabeling->passed) {
    if (valid) why = "relabeling: " + rec.relabeling->reasons.front();
    valid = false;
  }
  if (m.transference) {
    rec.transference = check_transference(*bm, T, opt.bound);
    if (!rec.transference->passed) {
      if (valid) why = "transference: " + rec.transference->reason;
      valid = false;
    }
  }
  if (!valid) failure(5, why);
  return finish();
}

}  // namespace mcilab
