#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcilab/mapping.hpp"

namespace mcilab {

enum class Mcii { mcii0, mcii1, mcii2, mcii3 };
enum class Simultaneity { simultaneous, binary };

struct MciiVariant {
  Mcii tag = Mcii::mcii1;
  Simultaneity mode = Simultaneity::simultaneous;
};

inline std::string to_string(Mcii t) {
  switch (t) {
    case Mcii::mcii0: return "MCII0";
    case Mcii::mcii1: return "MCII1";
    case Mcii::mcii2: return "MCII2";
    case Mcii::mcii3: return "MCII3";
  }
  return "?";
}

inline std::string to_string(Simultaneity m) { return m == Simultaneity::binary ? "binary" : "simultaneous"; }

inline Mcii parse_mcii(const std::string& s) {
  if (s == "MCII0") return Mcii::mcii0;
  if (s == "MCII1") return Mcii::mcii1;
  if (s == "MCII2") return Mcii::mcii2;
  if (s == "MCII3") return Mcii::mcii3;
  throw Error(Errc::invalid_argument, "unknown independence criterion '" + s + "'");
}

inline Simultaneity parse_simultaneity(const std::string& s) {
  if (s == "simultaneous") return Simultaneity::simultaneous;
  if (s == "binary") return Simultaneity::binary;
  throw Error(Errc::invalid_argument, "unknown simultaneity mode '" + s + "'");
}

struct MappingSet {
  PhysicalSystem physics;
  Cssa computation;
  std::vector<Mapping> mappings;
  std::size_t steps = 1;
};

struct IndependenceResult {
  bool independent = true;
  std::vector<std::size_t> violating;
  std::string reason;
  bool conjectural = false;
};

struct CountOptions {
  std::size_t bound = kDefaultStateCap;
  std::uint64_t seed = 0;
  std::size_t budget = 200'000;  // independence checks
  std::size_t exact_limit = 20;
};

namespace detail {

struct Joint {
  std::vector<FormalState> domain;
  std::vector<std::vector<FormalState>> mapped;  // [mapping][state]
};

inline Joint joint_domain(const std::vector<const BoundMapping*>& bms, std::size_t t, std::size_t bound) {
  Joint j;
  j.mapped.resize(bms.size());
  bms[0]->for_each_domain_state(t, bound, [&](const FormalState& p) {
    std::vector<FormalState> fs;
    for (auto* bm : bms) {
      auto f = bm->map(p, t);
      if (!f) return;
      fs.push_back(std::move(*f));
    }
    j.domain.push_back(p);
    for (std::size_t k = 0; k < bms.size(); ++k) j.mapped[k].push_back(std::move(fs[k]));
  });
  return j;
}

inline IndependenceResult mcii1(const std::vector<const BoundMapping*>& bms, const std::vector<std::size_t>& ids,
                                std::size_t steps, std::size_t first_step, const CountOptions& opt) {
  IndependenceResult r;
  for (std::size_t t = first_step; t <= steps; ++t) {
    auto j = joint_domain(bms, t, opt.bound);
    std::vector<SsiUnit> units;
    std::vector<std::size_t> owner;
    std::vector<std::vector<std::vector<Value>>> values;
    for (std::size_t k = 0; k < bms.size(); ++k) {
      auto us = formal_units(*bms[k], t, derive_seed(opt.seed, std::to_string(ids[k])));
      const auto& formal = bms[k]->formal();
      for (std::size_t u = 0; u < us.size(); ++u) {
        us[u].name = "#" + std::to_string(ids[k]) + "." + us[u].name;
        std::vector<std::vector<Value>> v;
        for (auto& f : j.mapped[k]) {
          std::vector<Value> x;
          for (auto i : formal.units()[u]) x.push_back(f[i]);
          v.push_back(std::move(x));
        }
        values.push_back(std::move(v));
        units.push_back(std::move(us[u]));
        owner.push_back(ids[k]);
      }
    }
    auto res = ssi_core(j.domain, values, units);
    for (std::size_t u = 0; u < res.size(); ++u)
      if (!res[u].passed) {
        r.independent = false;
        if (std::find(r.violating.begin(), r.violating.end(), owner[u]) == r.violating.end())
          r.violating.push_back(owner[u]);
        if (r.reason.empty()) r.reason = "step " + std::to_string(t) + ": " + res[u].reason;
      }
    if (!r.independent) break;
  }
  std::sort(r.violating.begin(), r.violating.end());
  return r;
}

inline IndependenceResult mcii2(const std::vector<const BoundMapping*>& bms, const std::vector<std::size_t>& ids,
                                const CountOptions& opt) {
  IndependenceResult r;
  auto j = joint_domain(bms, 0, opt.bound);
  std::set<std::vector<FormalState>> tuples;
  for (std::size_t s = 0; s < j.domain.size(); ++s) {
    std::vector<FormalState> tup;
    for (std::size_t k = 0; k < bms.size(); ++k) tup.push_back(j.mapped[k][s]);
    tuples.insert(std::move(tup));
  }
  double required = 1;
  for (auto* bm : bms) required *= static_cast<double>(bm->formal().state_space_size());
  if (static_cast<double>(tuples.size()) < required) {
    r.independent = false;
    r.violating = ids;
    r.reason = "only " + std::to_string(tuples.size()) + " of " + format_value(required) +
               " joint initial formal states are realizable";
  }
  return r;
}

// Values of the dependency variables, sorted so that permuting the variables does not change it.
inline std::set<std::pair<std::string, std::vector<Value>>> physical_range(const BoundMapping& bm, std::size_t t,
                                                                           std::size_t bound) {
  std::set<std::pair<std::string, std::vector<Value>>> out;
  std::vector<std::size_t> deps;
  for (auto& bs : bm.specs(t)) deps.insert(deps.end(), bs.deps.begin(), bs.deps.end());
  std::sort(deps.begin(), deps.end());
  deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
  std::vector<std::string> names;
  for (auto d : deps) names.push_back(bm.physics().substate(d).name);
  std::sort(names.begin(), names.end());
  std::string key;
  for (auto& n : names) key += n + ",";
  bm.for_each_domain_state(t, bound, [&](const FormalState& p) {
    if (!bm.map(p, t)) return;
    std::vector<Value> v;
    for (auto d : deps) v.push_back(p[d]);
    std::sort(v.begin(), v.end());
    out.insert({key, std::move(v)});
  });
  return out;
}

inline std::string initial_signature(const Mapping& m) {
  std::string s;
  for (auto& spec : m.specs_at(0)) {
    s += spec.target + "<-";
    for (auto& d : spec.depends_on) s += d + ",";
    s += describe_extraction(spec.extraction) + ";";
  }
  return s;
}

}  // namespace detail

// Independence of the mappings selected by `subset` (all mappings when empty).
inline IndependenceResult independent_under(const MappingSet& set, MciiVariant variant,
                                            std::vector<std::size_t> subset = {}, const CountOptions& opt = {}) {
  if (set.mappings.empty()) throw Error(Errc::invalid_argument, "mapping set is empty");
  if (subset.empty()) {
    subset.resize(set.mappings.size());
    std::iota(subset.begin(), subset.end(), 0);
  }
  IndependenceResult r;
  r.conjectural = variant.tag == Mcii::mcii3;
  if (variant.tag == Mcii::mcii0 || subset.size() < 2) return r;

  std::vector<BoundMapping> bound;
  bound.reserve(subset.size());
  for (auto i : subset) bound.emplace_back(set.mappings.at(i), set.physics.model, set.computation);

  auto check_group = [&](const std::vector<std::size_t>& members) -> IndependenceResult {
    std::vector<const BoundMapping*> bms;
    std::vector<std::size_t> ids;
    for (auto k : members) {
      bms.push_back(&bound[k]);
      ids.push_back(subset[k]);
    }
    switch (variant.tag) {
      case Mcii::mcii1: return detail::mcii1(bms, ids, set.steps, 0, opt);
      case Mcii::mcii2: return detail::mcii2(bms, ids, opt);
      case Mcii::mcii3: {
        IndependenceResult g;
        g.conjectural = true;
        // one representative per shared initial mapping must be MCII1-independent at the start
        std::map<std::string, std::size_t> reps;
        for (std::size_t k = 0; k < members.size(); ++k)
          reps.emplace(detail::initial_signature(set.mappings[ids[k]]), k);
        if (reps.size() > 1) {
          std::vector<const BoundMapping*> rb;
          std::vector<std::size_t> rid;
          for (auto& [sig, k] : reps) {
            rb.push_back(bms[k]);
            rid.push_back(ids[k]);
          }
          auto initial = detail::mcii1(rb, rid, 0, 0, opt);
          if (!initial.independent) {
            initial.conjectural = true;
            return initial;
          }
        }
        std::vector<std::set<std::pair<std::string, std::vector<Value>>>> ranges;
        for (auto* bm : bms) ranges.push_back(detail::physical_range(*bm, set.steps, opt.bound));
        for (std::size_t a = 0; a < bms.size(); ++a)
          for (std::size_t b = a + 1; b < bms.size(); ++b) {
            bool overlap = std::any_of(ranges[a].begin(), ranges[a].end(),
                                       [&](const auto& e) { return ranges[b].count(e) > 0; });
            if (overlap) {
              g.independent = false;
              g.violating = {ids[a], ids[b]};
              g.reason = "final physical ranges of #" + std::to_string(ids[a]) + " and #" + std::to_string(ids[b]) + " overlap";
              return g;
            }
          }
        return g;
      }
      case Mcii::mcii0: break;
    }
    return {};
  };

  if (variant.mode == Simultaneity::simultaneous) {
    std::vector<std::size_t> all(subset.size());
    std::iota(all.begin(), all.end(), 0);
    auto g = check_group(all);
    g.conjectural = r.conjectural;
    return g;
  }
  for (std::size_t a = 0; a < subset.size(); ++a)
    for (std::size_t b = a + 1; b < subset.size(); ++b) {
      auto g = check_group({a, b});
      if (!g.independent) {
        g.conjectural = r.conjectural;
        return g;
      }
    }
  return r;
}

struct CountResult {
  std::size_t count = 0;
  std::vector<std::size_t> witness;  // indices into the candidate list
  bool exact = true;
  bool lower_bound = false;
  std::size_t checks = 0;
};

// Largest subset of {0..n-1} accepted by `independent`. Exhaustive (largest size first) up to
// exact_limit elements and within the budget; otherwise greedy in index order, flagged as a
// lower bound.
template <class Pred>
CountResult max_independent_subset(std::size_t n, Pred&& independent, std::size_t budget = 200'000,
                                   std::size_t exact_limit = 20) {
  CountResult res;
  if (n == 0) return res;
  auto greedy = [&]() {
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < n; ++i) {
      chosen.push_back(i);
      ++res.checks;
      if (chosen.size() > 1 && !independent(chosen)) chosen.pop_back();
    }
    return chosen;
  };
  if (n <= exact_limit) {
    for (std::size_t k = n; k >= 1; --k) {
      std::vector<std::size_t> idx(k);
      std::iota(idx.begin(), idx.end(), 0);
      while (true) {
        if (k == 1) {
          res.count = 1;
          res.witness = {0};
          return res;
        }
        if (res.checks >= budget) {
          auto g = greedy();
          res.exact = false;
          res.lower_bound = true;
          res.count = g.size();
          res.witness = g;
          return res;
        }
        ++res.checks;
        if (independent(idx)) {
          res.count = k;
          res.witness = idx;
          return res;
        }
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
      }
    }
    return res;
  }
  auto g = greedy();
  res.exact = false;
  res.lower_bound = true;
  res.count = g.size();
  res.witness = g;
  return res;
}

// Mappings are taken in the order given (callers sort by description).
inline CountResult max_independent_count(const MappingSet& set, MciiVariant variant, const CountOptions& opt = {}) {
  const std::size_t n = set.mappings.size();
  if (variant.tag == Mcii::mcii0) {
    CountResult r;
    r.count = n;
    r.witness.resize(n);
    std::iota(r.witness.begin(), r.witness.end(), 0);
    return r;
  }
  std::map<std::pair<std::size_t, std::size_t>, bool> pair_cache;
  auto pair_ok = [&](std::size_t a, std::size_t b) {
    auto key = std::make_pair(a, b);
    auto it = pair_cache.find(key);
    if (it != pair_cache.end()) return it->second;
    MciiVariant v{variant.tag, Simultaneity::simultaneous};
    bool ok = independent_under(set, v, {a, b}, opt).independent;
    pair_cache.emplace(key, ok);
    return ok;
  };
  auto pred = [&](const std::vector<std::size_t>& s) {
    if (variant.mode == Simultaneity::simultaneous) return independent_under(set, variant, s, opt).independent;
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = a + 1; b < s.size(); ++b)
        if (!pair_ok(s[a], s[b])) return false;
    return true;
  };
  return max_independent_subset(n, pred, opt.budget, opt.exact_limit);
}

struct StageRatio {
  double a = 0;
  double b = 0;
  double ratio = 0;  // a / b
  double share = 0;  // a / (a + b)
};

struct RatioReport {
  std::vector<StageRatio> stages;
  double ratio = 0;
  double share = 0;
  double relative_change = 0;
  bool converged = false;
  double tolerance = 1e-3;
};

inline RatioReport regularized_ratio(const std::vector<std::pair<double, double>>& stages, double tolerance = 1e-3) {
  if (stages.size() < 3) throw Error(Errc::invalid_argument, "regularization needs at least three stages");
  RatioReport rep;
  rep.tolerance = tolerance;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    auto [a, b] = stages[k];
    if (a < 0 || b < 0 || a + b <= 0) throw Error(Errc::invalid_argument, "stage counts must be nonnegative and not both zero");
    if (k > 0 && (a < stages[k - 1].first || b < stages[k - 1].second))
      throw Error(Errc::non_monotone, "stage " + std::to_string(k) + " shrinks a count");
    rep.stages.push_back({a, b, b > 0 ? a / b : INFINITY, a / (a + b)});
  }
  const auto& last = rep.stages.back();
  const auto& prev = rep.stages[rep.stages.size() - 2];
  rep.ratio = last.ratio;
  rep.share = last.share;
  rep.relative_change = std::fabs(last.share - prev.share) / std::max(std::fabs(last.share), 1e-300);
  rep.converged = rep.relative_change < tolerance;
  return rep;
}

enum class CyclePolicy { once, linear };

inline CyclePolicy parse_cycle_policy(const std::string& s) {
  if (s == "once") return CyclePolicy::once;
  if (s == "linear") return CyclePolicy::linear;
  throw Error(Errc::invalid_argument, "unknown cycle policy '" + s + "'");
}

inline std::size_t cycle_policy(std::size_t repetitions, CyclePolicy policy) {
  if (repetitions < 1) throw Error(Errc::invalid_argument, "repetition count must be at least 1");
  return policy == CyclePolicy::once ? 1 : repetitions;
}

struct MeasureReport {
  std::string variant;
  bool conjectural = false;
  std::vector<std::pair<std::string, double>> counts;
  std::vector<std::pair<std::string, double>> ratios;  // shares of the reference class
  std::optional<RatioReport> regularization;
};

inline MeasureReport measure_report(const std::vector<std::pair<std::string, double>>& counts, MciiVariant variant) {
  MeasureReport rep;
  rep.variant = to_string(variant.tag) + "/" + to_string(variant.mode);
  rep.conjectural = variant.tag == Mcii::mcii3;
  rep.counts = counts;
  double total = 0;
  for (auto& [n, c] : counts) {
    if (c < 0) throw Error(Errc::invalid_argument, "negative count for " + n);
    total += c;
  }
  for (auto& [n, c] : counts) rep.ratios.push_back({n, total > 0 ? c / total : 0.0});
  return rep;
}

}  // namespace mcilab
