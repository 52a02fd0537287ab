#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcilab/cssa.hpp"
#include "mcilab/error.hpp"

namespace mcilab {

// perm[i] is where substate i's value lands: out[perm[i]] = in[i].
using SubstatePermutation = std::vector<std::size_t>;

inline FormalState apply_permutation(const SubstatePermutation& perm, const FormalState& s) {
  std::vector<Value> out(s.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[perm[i]] = s[i];
  return FormalState(std::move(out));
}

inline SubstatePermutation compose(const SubstatePermutation& outer, const SubstatePermutation& inner) {
  SubstatePermutation r(inner.size());
  for (std::size_t i = 0; i < inner.size(); ++i) r[i] = outer[inner[i]];
  return r;
}

inline SubstatePermutation invert(const SubstatePermutation& p) {
  SubstatePermutation r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r[p[i]] = i;
  return r;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view section) {
  return splitmix64(seed ^ fnv1a(section));
}

// Turns permutations of label values into permutations of substates.
class LabelPermuter {
 public:
  explicit LabelPermuter(const Cssa& physics) : physics_(physics) {
    const auto& st = physics.structure();
    const auto& dims = st.indices();
    strides_.assign(dims.size(), 1);
    for (std::size_t d = dims.size(); d-- > 1;) strides_[d - 1] = strides_[d] * static_cast<std::size_t>(dims[d].extent);
    if (!dims.empty()) {
      by_flat_.assign(st.cell_count(), 0);
      for (std::size_t i = 0; i < physics.size(); ++i) by_flat_[flat(physics.substate(i).position)] = i;
    }
    for (std::size_t k = 0; k < st.argument_coords().size(); ++k) by_argument_[st.argument_coords()[k]] = k;
  }

  bool knows(const std::string& name) const {
    const auto& st = physics_.structure();
    return st.index_position(name).has_value() || st.argument_position(name).has_value();
  }

  int extent(const std::string& name) const {
    const auto& st = physics_.structure();
    if (auto d = st.index_position(name)) return st.indices()[*d].extent;
    if (auto a = st.argument_position(name)) return st.argument_axes()[*a].extent;
    throw Error(Errc::dangling_reference, physics_.name() + ": no label '" + name + "'");
  }

  SubstatePermutation induced(const std::string& name, const std::vector<int>& sigma) const {
    const auto& st = physics_.structure();
    SubstatePermutation perm(physics_.size());
    if (auto d = st.index_position(name)) {
      for (std::size_t i = 0; i < physics_.size(); ++i) {
        auto c = physics_.substate(i).position;
        c[*d] = sigma[static_cast<std::size_t>(c[*d])];
        perm[i] = by_flat_[flat(c)];
      }
      return perm;
    }
    auto a = st.argument_position(name);
    if (!a) throw Error(Errc::dangling_reference, physics_.name() + ": no label '" + name + "'");
    const auto& args = st.argument_coords();
    std::vector<std::size_t> dim_map(args.size());
    for (std::size_t k = 0; k < args.size(); ++k) {
      auto target = args[k];
      target[*a] = sigma[static_cast<std::size_t>(target[*a])];
      auto it = by_argument_.find(target);
      if (it == by_argument_.end()) throw Error(Errc::invalid_definition, "argument coordinates are not closed under permutation");
      if (st.indices()[it->second].extent != st.indices()[k].extent)
        throw Error(Errc::invalid_definition, "argument permutation maps between indices of different extent");
      dim_map[k] = it->second;
    }
    for (std::size_t i = 0; i < physics_.size(); ++i) {
      const auto& c = physics_.substate(i).position;
      std::vector<int> t(c.size());
      for (std::size_t k = 0; k < c.size(); ++k) t[dim_map[k]] = c[k];
      perm[i] = by_flat_[flat(t)];
    }
    return perm;
  }

 private:
  std::size_t flat(const std::vector<int>& c) const {
    std::size_t f = 0;
    for (std::size_t d = 0; d < c.size(); ++d) f += strides_[d] * static_cast<std::size_t>(c[d]);
    return f;
  }

  Cssa physics_;
  std::vector<std::size_t> strides_;
  std::vector<std::size_t> by_flat_;
  std::map<std::vector<int>, std::size_t> by_argument_;
};

struct PermutationSample {
  std::vector<SubstatePermutation> elements;  // identity first
  bool exhaustive = true;
  double group_order = 1;
};

inline constexpr std::size_t kExhaustivePermutationLimit = 40320;
inline constexpr std::size_t kRandomPermutationSamples = 1000;

// All (or a seeded sample of) permutations in the product of symmetric groups on the named labels.
inline PermutationSample inheritance_group(const LabelPermuter& permuter, std::size_t substates,
                                           std::vector<std::string> names, std::uint64_t seed,
                                           std::size_t exhaustive_limit = kExhaustivePermutationLimit,
                                           std::size_t samples = kRandomPermutationSamples) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  PermutationSample out;
  SubstatePermutation identity(substates);
  std::iota(identity.begin(), identity.end(), 0);
  std::vector<int> extents;
  for (auto& n : names) {
    extents.push_back(permuter.extent(n));
    for (int k = 2; k <= extents.back(); ++k) out.group_order *= k;
  }
  if (names.empty()) {
    out.elements.push_back(identity);
    return out;
  }
  if (out.group_order <= static_cast<double>(exhaustive_limit)) {
    std::vector<std::vector<int>> current(names.size());
    for (std::size_t k = 0; k < names.size(); ++k) {
      current[k].resize(static_cast<std::size_t>(extents[k]));
      std::iota(current[k].begin(), current[k].end(), 0);
    }
    while (true) {
      SubstatePermutation p = identity;
      for (std::size_t k = 0; k < names.size(); ++k) p = compose(permuter.induced(names[k], current[k]), p);
      out.elements.push_back(std::move(p));
      std::size_t k = names.size();
      while (k > 0) {
        --k;
        if (std::next_permutation(current[k].begin(), current[k].end())) break;
        if (k == 0) return out;
      }
    }
  }
  out.exhaustive = false;
  out.elements.push_back(identity);
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    SubstatePermutation p = identity;
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::vector<int> sigma(static_cast<std::size_t>(extents[k]));
      std::iota(sigma.begin(), sigma.end(), 0);
      for (std::size_t i = sigma.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(sigma[i - 1], sigma[pick(rng)]);
      }
      p = compose(permuter.induced(names[k], sigma), p);
    }
    out.elements.push_back(std::move(p));
  }
  return out;
}

struct SsiUnit {
  std::string name;
  std::vector<std::size_t> deps;  // physical substates the unit's value is read from
  PermutationSample group;        // permutations of the labels this unit inherits
};

struct SsiUnitResult {
  std::string unit;
  bool passed = true;
  bool reveals_value = false;
  bool disturbs_others = false;
  std::size_t permutations = 1;
  bool exhaustive = true;
  std::optional<FormalState> witness;
  std::string reason;
};

struct SsiReport {
  bool passed = true;
  std::size_t step = 0;
  std::size_t domain_size = 0;
  std::vector<SsiUnitResult> units;
};

// domain: physical states; values[u][k]: unit u's formal value tuple at domain state k.
// A unit passes when, for every state, the states consistent with knowing the other units'
// physical variables up to this unit's label permutations leave the others fixed and this
// unit's value open.
inline std::vector<SsiUnitResult> ssi_core(const std::vector<FormalState>& domain,
                                           const std::vector<std::vector<std::vector<Value>>>& values,
                                           const std::vector<SsiUnit>& units) {
  std::vector<SsiUnitResult> results;
  const std::size_t n = domain.size();
  for (std::size_t x = 0; x < units.size(); ++x) {
    SsiUnitResult r;
    r.unit = units[x].name;
    r.permutations = units[x].group.elements.size();
    r.exhaustive = units[x].group.exhaustive;
    bool x_constant = true;
    for (std::size_t k = 1; k < n; ++k)
      if (values[x][k] != values[x][0]) {
        x_constant = false;
        break;
      }
    if (units.size() == 1 || n == 0) {
      results.push_back(std::move(r));
      continue;
    }
    std::vector<std::size_t> others;
    for (std::size_t u = 0; u < units.size(); ++u)
      if (u != x) others.insert(others.end(), units[u].deps.begin(), units[u].deps.end());
    std::sort(others.begin(), others.end());
    others.erase(std::unique(others.begin(), others.end()), others.end());

    auto other_values = [&](std::size_t k) {
      std::vector<Value> v;
      for (std::size_t u = 0; u < units.size(); ++u)
        if (u != x) v.insert(v.end(), values[u][k].begin(), values[u][k].end());
      return v;
    };
    struct Bucket {
      std::size_t rep;
      bool x_mixed = false;
    };
    std::unordered_map<std::vector<Value>, Bucket, ValuesHash> buckets;
    std::vector<Value> key(others.size());
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < others.size(); ++j) key[j] = domain[k][others[j]];
      auto [it, fresh] = buckets.try_emplace(key, Bucket{k});
      if (!fresh && values[x][k] != values[x][it->second.rep]) it->second.x_mixed = true;
    }
    std::vector<SubstatePermutation> inverses;
    for (auto& p : units[x].group.elements) inverses.push_back(invert(p));

    for (std::size_t k = 0; k < n && r.passed; ++k) {
      const auto mine = other_values(k);
      bool varies = false;
      for (auto& inv : inverses) {
        for (std::size_t j = 0; j < others.size(); ++j) key[j] = domain[k][inv[others[j]]];
        auto it = buckets.find(key);
        if (it == buckets.end()) continue;
        if (other_values(it->second.rep) != mine) {
          r.passed = false;
          r.disturbs_others = true;
          r.witness = domain[k];
          r.reason = "permuting labels inherited by " + r.unit + " changes another substate";
          break;
        }
        if (it->second.x_mixed || values[x][it->second.rep] != values[x][k]) varies = true;
      }
      if (r.passed && !varies && !x_constant) {
        r.passed = false;
        r.reveals_value = true;
        r.witness = domain[k];
        r.reason = "the variables behind the other substates reveal " + r.unit;
      }
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace mcilab
