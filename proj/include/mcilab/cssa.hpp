#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mcilab/error.hpp"

namespace mcilab {

using Value = double;

inline constexpr std::size_t kDefaultStateCap = std::size_t{1} << 20;

inline std::string format_value(Value v) {
  std::ostringstream os;
  if (std::nearbyint(v) == v && std::fabs(v) < 1e15)
    os << static_cast<long long>(v);
  else
    os << v;
  return os.str();
}

class Domain {
 public:
  static Domain digital(std::vector<Value> alphabet) {
    if (alphabet.empty()) throw Error(Errc::invalid_definition, "digital domain must be nonempty");
    std::sort(alphabet.begin(), alphabet.end());
    alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
    Domain d;
    d.digital_ = true;
    d.values_ = std::move(alphabet);
    d.lower_ = d.values_.front();
    d.upper_ = d.values_.back();
    return d;
  }

  static Domain bits() { return digital({0, 1}); }

  static Domain integers(long lo, long hi) {
    if (hi < lo) throw Error(Errc::invalid_definition, "empty integer range");
    std::vector<Value> v;
    for (long x = lo; x <= hi; ++x) v.push_back(static_cast<Value>(x));
    return digital(std::move(v));
  }

  static Domain analog(double lower, double upper, double resolution) {
    if (!(lower < upper)) throw Error(Errc::invalid_definition, "analog domain needs lower < upper");
    if (!(resolution > 0)) throw Error(Errc::invalid_definition, "analog resolution must be positive");
    Domain d;
    d.digital_ = false;
    d.lower_ = lower;
    d.upper_ = upper;
    d.resolution_ = resolution;
    auto n = static_cast<std::size_t>(std::floor((upper - lower) / resolution + 1e-9)) + 1;
    d.values_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) d.values_.push_back(lower + static_cast<double>(i) * resolution);
    return d;
  }

  bool is_digital() const { return digital_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double resolution() const { return resolution_; }

  // Enumerated points; analog domains are sampled at their resolution.
  const std::vector<Value>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  bool contains(Value v) const {
    if (!std::isfinite(v)) return false;
    if (!digital_) {
      double slack = 1e-9 * std::max(1.0, upper_ - lower_);
      return v >= lower_ - slack && v <= upper_ + slack;
    }
    return std::binary_search(values_.begin(), values_.end(), v);
  }

  std::string describe() const {
    std::ostringstream os;
    if (digital_) {
      os << "{";
      for (std::size_t i = 0; i < values_.size(); ++i) os << (i ? "," : "") << format_value(values_[i]);
      os << "}";
    } else {
      os << "[" << lower_ << "," << upper_ << "]@" << resolution_;
    }
    return os.str();
  }

 private:
  Domain() = default;
  bool digital_ = true;
  std::vector<Value> values_;
  double lower_ = 0, upper_ = 0, resolution_ = 0;
};

struct LabelIndex {
  std::string name;
  int extent = 0;
};

enum class LabelKind { unstructured, vector, grid, composite };

inline const char* to_string(LabelKind k) {
  switch (k) {
    case LabelKind::unstructured: return "unstructured";
    case LabelKind::vector: return "vector";
    case LabelKind::grid: return "grid";
    case LabelKind::composite: return "composite";
  }
  return "?";
}

class LabelStructure {
 public:
  static LabelStructure unstructured() { return LabelStructure(LabelKind::unstructured, {}); }

  static LabelStructure vector(std::string index, int extent) {
    return LabelStructure(LabelKind::vector, {{std::move(index), extent}});
  }

  static LabelStructure grid(std::vector<LabelIndex> dims) {
    if (dims.empty()) throw Error(Errc::invalid_definition, "grid needs at least one dimension");
    return LabelStructure(LabelKind::grid, std::move(dims));
  }

  // Each group is one composite substate made of the named parts.
  static LabelStructure composite(std::vector<std::vector<std::string>> groups) {
    LabelStructure s(LabelKind::composite, {});
    s.groups_ = std::move(groups);
    return s;
  }

  // Argument axes label the cells of a function over configurations; coords[k] are the
  // axis coordinates of the k-th configuration index.
  LabelStructure with_argument_axes(std::vector<LabelIndex> axes, std::vector<std::vector<int>> coords) const {
    LabelStructure s = *this;
    for (auto& a : axes)
      if (a.extent <= 0) throw Error(Errc::invalid_definition, "argument axis extent must be positive");
    for (auto& c : coords)
      if (c.size() != axes.size()) throw Error(Errc::invalid_definition, "argument coordinate arity mismatch");
    if (coords.size() != indices_.size())
      throw Error(Errc::invalid_definition, "one argument coordinate per label index required");
    s.argument_axes_ = std::move(axes);
    s.argument_coords_ = std::move(coords);
    return s;
  }

  LabelKind kind() const { return kind_; }
  const std::vector<LabelIndex>& indices() const { return indices_; }
  const std::vector<std::vector<std::string>>& groups() const { return groups_; }
  const std::vector<LabelIndex>& argument_axes() const { return argument_axes_; }
  const std::vector<std::vector<int>>& argument_coords() const { return argument_coords_; }

  std::optional<std::size_t> index_position(const std::string& name) const {
    for (std::size_t i = 0; i < indices_.size(); ++i)
      if (indices_[i].name == name) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> argument_position(const std::string& name) const {
    for (std::size_t i = 0; i < argument_axes_.size(); ++i)
      if (argument_axes_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t cell_count() const {
    std::size_t n = 1;
    for (auto& d : indices_) n *= static_cast<std::size_t>(d.extent);
    return n;
  }

  std::string describe() const {
    std::ostringstream os;
    os << to_string(kind_);
    if (!indices_.empty()) {
      os << "(";
      for (std::size_t i = 0; i < indices_.size(); ++i)
        os << (i ? "," : "") << indices_[i].name << ":" << indices_[i].extent;
      os << ")";
    }
    if (!argument_axes_.empty()) {
      os << " args(";
      for (std::size_t i = 0; i < argument_axes_.size(); ++i)
        os << (i ? "," : "") << argument_axes_[i].name << ":" << argument_axes_[i].extent;
      os << ")";
    }
    return os.str();
  }

 private:
  LabelStructure(LabelKind k, std::vector<LabelIndex> dims) : kind_(k), indices_(std::move(dims)) {
    for (auto& d : indices_)
      if (d.extent <= 0) throw Error(Errc::invalid_definition, "label extents must be positive");
  }

  LabelKind kind_;
  std::vector<LabelIndex> indices_;
  std::vector<std::vector<std::string>> groups_;
  std::vector<LabelIndex> argument_axes_;
  std::vector<std::vector<int>> argument_coords_;
};

struct Substate {
  std::string name;
  Domain domain = Domain::bits();
  std::vector<int> position;  // coordinates along the structure's label indices
};

class FormalState {
 public:
  FormalState() = default;
  explicit FormalState(std::vector<Value> values) : values_(std::move(values)) {}
  FormalState(std::initializer_list<Value> values) : values_(values) {}

  const std::vector<Value>& values() const { return values_; }
  std::vector<Value>& mutable_values() { return values_; }
  std::size_t size() const { return values_.size(); }
  Value operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const FormalState&, const FormalState&) = default;
  friend auto operator<=>(const FormalState& a, const FormalState& b) {
    return std::lexicographical_compare_three_way(a.values_.begin(), a.values_.end(), b.values_.begin(),
                                                  b.values_.end(), std::compare_weak_order_fallback);
  }

 private:
  std::vector<Value> values_;
};

struct ValuesHash {
  std::size_t operator()(const std::vector<Value>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (Value x : v) {
      if (x == 0) x = 0;  // fold -0.0
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      h ^= bits;
      h *= 1099511628211ull;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

struct FormalStateHash {
  std::size_t operator()(const FormalState& s) const noexcept { return ValuesHash{}(s.values()); }
};

using TransitionRule = std::function<std::vector<Value>(std::span<const Value>)>;
using InputAssignment = std::map<std::string, Value>;

struct CssaSpec {
  std::string name;
  std::vector<Substate> substates;
  LabelStructure structure = LabelStructure::unstructured();
  TransitionRule rule;
  std::string rule_description;
  bool differential = false;  // rule returns d/dt of the state
  double step_size = 0;
  std::vector<std::string> input_slots;
};

class Cssa {
 public:
  explicit Cssa(CssaSpec spec) {
    auto impl = std::make_shared<Impl>(std::move(spec));
    impl->validate();
    impl_ = std::move(impl);
  }

  const std::string& name() const { return impl_->spec.name; }
  const std::vector<Substate>& substates() const { return impl_->spec.substates; }
  const Substate& substate(std::size_t i) const { return impl_->spec.substates[i]; }
  const LabelStructure& structure() const { return impl_->spec.structure; }
  const std::string& rule_description() const { return impl_->spec.rule_description; }
  bool differential() const { return impl_->spec.differential; }
  double step_size() const { return impl_->spec.step_size; }
  std::size_t size() const { return impl_->spec.substates.size(); }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = impl_->by_name.find(name);
    if (it == impl_->by_name.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(const std::string& name) const {
    auto i = find(name);
    if (!i) throw Error(Errc::dangling_reference, "no substate named '" + name + "' in " + this->name());
    return *i;
  }

  const std::vector<std::size_t>& input_slots() const { return impl_->inputs; }
  bool is_input(std::size_t i) const { return impl_->is_input[i]; }

  // Units are the independently valued substates: each composite group is one unit.
  const std::vector<std::vector<std::size_t>>& units() const { return impl_->units; }
  std::string unit_name(std::size_t u) const {
    std::string s;
    for (auto i : impl_->units[u]) s += (s.empty() ? "" : "+") + substate(i).name;
    return impl_->units[u].size() > 1 ? "(" + s + ")" : s;
  }
  std::size_t unit_of(std::size_t substate) const { return impl_->unit_of[substate]; }

  std::vector<Value> apply_rule(std::span<const Value> state) const { return impl_->spec.rule(state); }

  // Product of enumerated domain sizes, saturating at SIZE_MAX.
  std::size_t state_space_size() const {
    std::size_t n = 1;
    for (auto& s : substates()) {
      if (n > std::numeric_limits<std::size_t>::max() / s.domain.size()) return std::numeric_limits<std::size_t>::max();
      n *= s.domain.size();
    }
    return n;
  }

  friend bool same_cssa(const Cssa& a, const Cssa& b) { return a.impl_ == b.impl_; }

 private:
  struct Impl {
    explicit Impl(CssaSpec s) : spec(std::move(s)) {}
    CssaSpec spec;
    std::unordered_map<std::string, std::size_t> by_name;
    std::vector<std::size_t> inputs;
    std::vector<bool> is_input;
    std::vector<std::vector<std::size_t>> units;
    std::vector<std::size_t> unit_of;

    void validate() {
      auto& ss = spec.substates;
      if (ss.empty()) throw Error(Errc::invalid_definition, spec.name + ": no substates");
      if (!spec.rule) throw Error(Errc::invalid_definition, spec.name + ": missing transition rule");
      if (spec.differential && !(spec.step_size > 0))
        throw Error(Errc::invalid_definition, spec.name + ": differential rule needs a positive step size");
      for (std::size_t i = 0; i < ss.size(); ++i) {
        if (ss[i].name.empty()) throw Error(Errc::invalid_definition, spec.name + ": unnamed substate");
        if (!by_name.emplace(ss[i].name, i).second)
          throw Error(Errc::invalid_definition, spec.name + ": duplicate substate '" + ss[i].name + "'");
      }
      auto& st = spec.structure;
      const auto& dims = st.indices();
      if (st.kind() == LabelKind::vector || st.kind() == LabelKind::grid) {
        std::vector<bool> seen(st.cell_count(), false);
        for (auto& s : ss) {
          if (s.position.size() != dims.size())
            throw Error(Errc::invalid_definition, spec.name + ": substate '" + s.name + "' lacks a label position");
          std::size_t flat = 0;
          for (std::size_t d = 0; d < dims.size(); ++d) {
            if (s.position[d] < 0 || s.position[d] >= dims[d].extent)
              throw Error(Errc::invalid_definition, spec.name + ": position of '" + s.name + "' out of range");
            flat = flat * static_cast<std::size_t>(dims[d].extent) + static_cast<std::size_t>(s.position[d]);
          }
          if (seen[flat]) throw Error(Errc::invalid_definition, spec.name + ": two substates share a label position");
          seen[flat] = true;
        }
        if (ss.size() != st.cell_count())
          throw Error(Errc::invalid_definition, spec.name + ": substate count must equal the product of extents");
      } else {
        for (auto& s : ss)
          if (!s.position.empty())
            throw Error(Errc::invalid_definition, spec.name + ": positions require a vector or grid structure");
      }
      is_input.assign(ss.size(), false);
      for (auto& n : spec.input_slots) {
        auto it = by_name.find(n);
        if (it == by_name.end()) throw Error(Errc::invalid_definition, spec.name + ": unknown input slot '" + n + "'");
        if (is_input[it->second]) throw Error(Errc::invalid_definition, spec.name + ": duplicate input slot");
        is_input[it->second] = true;
        inputs.push_back(it->second);
      }
      std::sort(inputs.begin(), inputs.end());
      unit_of.assign(ss.size(), std::numeric_limits<std::size_t>::max());
      for (auto& g : st.groups()) {
        if (g.empty()) throw Error(Errc::invalid_definition, spec.name + ": empty composite group");
        std::vector<std::size_t> unit;
        for (auto& n : g) {
          auto it = by_name.find(n);
          if (it == by_name.end())
            throw Error(Errc::invalid_definition, spec.name + ": composite group names unknown substate '" + n + "'");
          if (unit_of[it->second] != std::numeric_limits<std::size_t>::max())
            throw Error(Errc::invalid_definition, spec.name + ": substate '" + n + "' in two composite groups");
          unit_of[it->second] = units.size();
          unit.push_back(it->second);
        }
        std::sort(unit.begin(), unit.end());
        units.push_back(std::move(unit));
      }
      for (std::size_t i = 0; i < ss.size(); ++i) {
        if (unit_of[i] != std::numeric_limits<std::size_t>::max()) continue;
        if (st.kind() == LabelKind::composite)
          throw Error(Errc::invalid_definition, spec.name + ": composite groups must cover '" + ss[i].name + "'");
        unit_of[i] = units.size();
        units.push_back({i});
      }
    }
  };

  std::shared_ptr<const Impl> impl_;
};

inline void validate_state(const Cssa& c, const FormalState& s) {
  if (s.size() != c.size())
    throw Error(Errc::invalid_state, c.name() + ": state has " + std::to_string(s.size()) + " values, expected " +
                                         std::to_string(c.size()));
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!c.substate(i).domain.contains(s[i]))
      throw Error(Errc::invalid_state, c.name() + ": value " + format_value(s[i]) + " outside domain of '" +
                                           c.substate(i).name + "'");
}

inline FormalState make_state(const Cssa& c, const std::map<std::string, Value>& assignment) {
  std::vector<Value> v(c.size(), 0);
  std::vector<bool> set(c.size(), false);
  for (auto& [name, value] : assignment) {
    auto i = c.index_of(name);
    v[i] = value;
    set[i] = true;
  }
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!set[i]) throw Error(Errc::invalid_state, c.name() + ": substate '" + c.substate(i).name + "' unassigned");
  FormalState s(std::move(v));
  validate_state(c, s);
  return s;
}

namespace detail {

inline std::vector<Value> rk4(const Cssa& c, std::vector<Value> x) {
  const double h = c.step_size();
  auto axpy = [](const std::vector<Value>& a, const std::vector<Value>& b, double k) {
    std::vector<Value> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + k * b[i];
    return r;
  };
  auto f = [&](const std::vector<Value>& s) {
    auto d = c.apply_rule(s);
    if (d.size() != s.size()) throw Error(Errc::invalid_definition, c.name() + ": derivative has wrong arity");
    return d;
  };
  auto k1 = f(x);
  auto k2 = f(axpy(x, k1, h / 2));
  auto k3 = f(axpy(x, k2, h / 2));
  auto k4 = f(axpy(x, k3, h));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return x;
}

}  // namespace detail

// Advances one step. Input slots in the successor take the supplied input values.
inline FormalState step(const Cssa& c, const FormalState& state, const InputAssignment& inputs = {}) {
  validate_state(c, state);
  for (auto& [name, value] : inputs) {
    auto i = c.find(name);
    if (!i || !c.is_input(*i)) throw Error(Errc::invalid_input, c.name() + ": '" + name + "' is not an input slot");
    if (!c.substate(*i).domain.contains(value))
      throw Error(Errc::invalid_input, c.name() + ": input value out of domain for '" + name + "'");
  }
  if (inputs.size() != c.input_slots().size())
    throw Error(Errc::invalid_input, c.name() + ": inputs must cover exactly the input slots");

  std::vector<Value> next;
  if (c.differential()) {
    next = detail::rk4(c, state.values());
  } else {
    next = c.apply_rule(state.values());
    if (next.size() != c.size()) throw Error(Errc::invalid_definition, c.name() + ": rule returned wrong arity");
  }
  for (auto& [name, value] : inputs) next[c.index_of(name)] = value;
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (c.is_input(i)) continue;
    if (!c.substate(i).domain.contains(next[i]))
      throw Error(Errc::invalid_definition, c.name() + ": rule leaves the domain of '" + c.substate(i).name +
                                                "' (value " + format_value(next[i]) + ")");
  }
  return FormalState(std::move(next));
}

struct Run {
  Cssa cssa;
  FormalState initial;
  int steps = 1;
};

struct Trace {
  std::vector<FormalState> states;
  std::vector<InputAssignment> inputs;
};

inline void validate_run(const Run& r) {
  if (r.steps < 0) throw Error(Errc::invalid_argument, "run steps must be nonnegative");
  validate_state(r.cssa, r.initial);
}

inline Trace run(const Run& r, const std::vector<InputAssignment>& schedule = {}) {
  validate_run(r);
  if (!schedule.empty() && schedule.size() != static_cast<std::size_t>(r.steps))
    throw Error(Errc::invalid_argument, "input schedule length must equal the step count");
  if (schedule.empty() && !r.cssa.input_slots().empty() && r.steps > 0)
    throw Error(Errc::invalid_input, r.cssa.name() + ": an input schedule is required");
  Trace t;
  t.states.reserve(static_cast<std::size_t>(r.steps) + 1);
  t.states.push_back(r.initial);
  for (int k = 0; k < r.steps; ++k) {
    InputAssignment in = schedule.empty() ? InputAssignment{} : schedule[static_cast<std::size_t>(k)];
    t.states.push_back(step(r.cssa, t.states.back(), in));
    t.inputs.push_back(std::move(in));
  }
  return t;
}

inline bool trace_consistent(const Cssa& c, const Trace& t) {
  if (t.states.empty() || t.inputs.size() + 1 != t.states.size()) return false;
  for (std::size_t k = 0; k + 1 < t.states.size(); ++k)
    if (!(step(c, t.states[k], t.inputs[k]) == t.states[k + 1])) return false;
  return true;
}

// Odometer over per-substate choice lists. The substate with the smallest name is the
// most significant digit, so iteration is lexicographic over names then values.
class ProductSpace {
 public:
  ProductSpace(std::vector<std::vector<Value>> choices, std::vector<std::size_t> significance)
      : choices_(std::move(choices)), order_(std::move(significance)) {
    count_ = 1;
    for (auto& c : choices_) {
      if (c.empty()) {
        count_ = 0;
        break;
      }
      if (count_ > std::numeric_limits<std::size_t>::max() / c.size()) {
        count_ = std::numeric_limits<std::size_t>::max();
        break;
      }
      count_ *= c.size();
    }
  }

  std::size_t size() const { return count_; }

  class iterator {
   public:
    using value_type = FormalState;
    using difference_type = std::ptrdiff_t;
    iterator() = default;
    iterator(const ProductSpace* s, bool end) : space_(s), done_(end || s->count_ == 0) {
      if (!done_) {
        digits_.assign(s->choices_.size(), 0);
        std::vector<Value> v(s->choices_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = s->choices_[i][0];
        current_ = FormalState(std::move(v));
      }
    }
    const FormalState& operator*() const { return current_; }
    const FormalState* operator->() const { return &current_; }
    iterator& operator++() {
      auto& vals = current_.mutable_values();
      for (auto it = space_->order_.rbegin(); it != space_->order_.rend(); ++it) {
        std::size_t i = *it;
        if (++digits_[i] < space_->choices_[i].size()) {
          vals[i] = space_->choices_[i][digits_[i]];
          return *this;
        }
        digits_[i] = 0;
        vals[i] = space_->choices_[i][0];
      }
      done_ = true;
      return *this;
    }
    void operator++(int) { ++*this; }
    friend bool operator==(const iterator& a, const iterator& b) { return a.done_ == b.done_; }

   private:
    const ProductSpace* space_ = nullptr;
    bool done_ = true;
    std::vector<std::size_t> digits_;
    FormalState current_;
  };

  iterator begin() const { return iterator(this, false); }
  iterator end() const { return iterator(this, true); }

 private:
  std::vector<std::vector<Value>> choices_;
  std::vector<std::size_t> order_;
  std::size_t count_ = 0;
};

inline std::vector<std::size_t> name_order(const Cssa& c) {
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return c.substate(a).name < c.substate(b).name; });
  return order;
}

// Product space with some substates restricted to the given value lists.
inline ProductSpace restricted_space(const Cssa& c, const std::map<std::size_t, std::vector<Value>>& pins,
                                     std::size_t bound = kDefaultStateCap) {
  std::vector<std::vector<Value>> choices(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto it = pins.find(i);
    if (it == pins.end()) {
      choices[i] = c.substate(i).domain.values();
    } else {
      for (Value v : it->second)
        if (c.substate(i).domain.contains(v)) choices[i].push_back(v);
      std::sort(choices[i].begin(), choices[i].end());
      choices[i].erase(std::unique(choices[i].begin(), choices[i].end()), choices[i].end());
    }
  }
  ProductSpace space(std::move(choices), name_order(c));
  if (space.size() > bound)
    throw Error(Errc::state_space_too_large, c.name() + ": " + std::to_string(space.size()) +
                                                 " states exceed the bound of " + std::to_string(bound));
  return space;
}

inline ProductSpace enumerate_states(const Cssa& c, std::size_t bound = kDefaultStateCap) {
  if (c.state_space_size() > bound)
    throw Error(Errc::state_space_too_large,
                c.name() + ": state space exceeds the bound of " + std::to_string(bound));
  return restricted_space(c, {}, bound);
}

// Every assignment of the input slots, in name order.
inline std::vector<InputAssignment> input_assignments(const Cssa& c, std::size_t bound = kDefaultStateCap) {
  std::vector<InputAssignment> out;
  const auto& slots = c.input_slots();
  if (slots.empty()) return {InputAssignment{}};
  std::vector<std::vector<Value>> choices;
  std::vector<std::size_t> order(slots.size());
  for (auto i : slots) choices.push_back(c.substate(i).domain.values());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return c.substate(slots[a]).name < c.substate(slots[b]).name; });
  ProductSpace space(std::move(choices), order);
  if (space.size() > bound) throw Error(Errc::state_space_too_large, c.name() + ": too many input assignments");
  for (auto& s : space) {
    InputAssignment a;
    for (std::size_t k = 0; k < slots.size(); ++k) a[c.substate(slots[k]).name] = s[k];
    out.push_back(std::move(a));
  }
  return out;
}

struct PhysicalSystem {
  Cssa model;
  std::optional<FormalState> actual;  // the physical initial state actually realized

  const LabelStructure& labels() const { return model.structure(); }
};

inline PhysicalSystem as_physics(Cssa c, std::optional<FormalState> actual = std::nullopt) {
  if (actual) validate_state(c, *actual);
  return PhysicalSystem{std::move(c), std::move(actual)};
}

inline std::string describe_state(const Cssa& c, const FormalState& s) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < s.size() && i < c.size(); ++i)
    os << (i ? ", " : "") << c.substate(i).name << "=" << format_value(s[i]);
  os << "}";
  return os.str();
}

}  // namespace mcilab
