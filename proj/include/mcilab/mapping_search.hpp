#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "mcilab/cssa.hpp"
#include "mcilab/mapping.hpp"
#include "mcilab/systems.hpp"

namespace mcilab {

// A finite family of candidate mappings. generate calls yield for each candidate and stops
// early when yield returns false.
struct TemplateFamily {
  std::string name;
  std::function<void(const std::function<bool(Mapping)>&)> generate;
};

struct SearchBounds {
  std::size_t max_candidates = 1'000'000;
  std::size_t state_bound = kDefaultStateCap;
  bool check_initial = true;  // false: keep every counterfactually valid mapping regardless of the actual state
  std::uint64_t seed = 0;
};

struct MappingSearchResult {
  std::vector<Mapping> mappings;  // sorted by description
  std::size_t candidates = 0;
  bool partial = false;
};

inline MappingSearchResult enumerate_valid_mappings(const PhysicalSystem& physics, const Run& run,
                                                    const TemplateFamily& family, const SearchBounds& bounds = {}) {
  MappingSearchResult out;
  CheckOptions opt;
  opt.bound = bounds.state_bound;
  opt.seed = bounds.seed;
  opt.stop_at_first_failure = true;
  opt.check_initial = bounds.check_initial;
  family.generate([&](Mapping m) {
    if (out.candidates >= bounds.max_candidates) {
      out.partial = true;
      return false;
    }
    ++out.candidates;
    try {
      if (check_implementation(physics, run, m, opt)) out.mappings.push_back(std::move(m));
    } catch (const Error& e) {
      if (e.code() == Errc::state_space_too_large) throw;
    }
    return true;
  });
  std::stable_sort(out.mappings.begin(), out.mappings.end(),
                   [](const Mapping& a, const Mapping& b) { return a.description < b.description; });
  return out;
}

namespace families {

// All nonempty magnitude sets per switch: formal +1 reads w in L, -1 reads w in -L.
inline TemplateFamily band_subsets(std::vector<std::string> switches, int n, std::size_t steps) {
  return {"band_subsets", [=](const std::function<bool(Mapping)>& yield) {
            for (auto& sw : switches)
              for (unsigned mask = 1; mask < (1u << n); ++mask) {
                std::vector<int> mags;
                for (int a = 1; a <= n; ++a)
                  if (mask & (1u << (a - 1))) mags.push_back(a);
                if (!yield(systems::band_mapping(sw, mags, steps))) return;
              }
          }};
}

// Every total table from the source's values to the target's values.
inline TemplateFamily unary_lookups(std::string source, std::vector<Value> physical, std::string target,
                                    std::vector<Value> formal, std::size_t steps) {
  return {"unary_lookups", [=](const std::function<bool(Mapping)>& yield) {
            std::vector<std::size_t> digit(physical.size(), 0);
            while (true) {
              Lookup l{source, {}};
              std::string desc = "lookup:" + source + ":";
              for (std::size_t k = 0; k < physical.size(); ++k) {
                l.table.push_back({physical[k], formal[digit[k]]});
                desc += (k ? "," : "") + format_value(physical[k]) + "->" + format_value(formal[digit[k]]);
              }
              Mapping m;
              m.description = desc;
              m.schedule = uniform_schedule(1, steps);
              m.specs = {{{target, {source}, {}, l}}};
              if (!yield(std::move(m))) return;
              std::size_t k = physical.size();
              while (k > 0) {
                --k;
                if (++digit[k] < formal.size()) break;
                digit[k] = 0;
                if (k == 0) return;
              }
              if (physical.empty()) return;
            }
          }};
}

// Bijections from a set of physical states onto all formal states, read once every `stride`
// physical steps, for every stride up to max_stride. The actual physical state must carry
// the run's initial formal state. With `prune`, partial bijections whose assigned states
// already break the formal transition rule are dropped; those candidates can never pass the
// counterfactual requirement, so the valid mappings are the same.
inline TemplateFamily injective_relabelings(const PhysicalSystem& physics, const Run& run, long max_stride,
                                            std::size_t steps, std::size_t bound = 4096, bool prune = false) {
  Cssa pm = physics.model;
  Cssa fm = run.cssa;
  FormalState actual = physics.actual.value_or(FormalState{});
  FormalState initial = run.initial;
  return {"injective_relabelings", [=](const std::function<bool(Mapping)>& yield) {
            std::vector<FormalState> pstates, fstates;
            for (auto& s : enumerate_states(pm, bound)) pstates.push_back(s);
            for (auto& s : enumerate_states(fm, bound)) fstates.push_back(s);
            if (fstates.size() > pstates.size()) return;
            auto first = std::find(fstates.begin(), fstates.end(), initial);
            if (first == fstates.end() || actual.size() != pm.size()) return;
            std::rotate(fstates.begin(), first, first + 1);
            std::vector<std::size_t> image(fstates.size());
            std::vector<bool> used(pstates.size(), false);
            auto actual_it = std::find(pstates.begin(), pstates.end(), actual);
            if (actual_it == pstates.end()) return;
            image[0] = static_cast<std::size_t>(actual_it - pstates.begin());
            used[image[0]] = true;
            std::vector<std::string> sources;
            for (auto& s : pm.substates()) sources.push_back(s.name);
            constexpr std::size_t none = static_cast<std::size_t>(-1);
            std::vector<std::size_t> succ(fstates.size(), none), ahead(pstates.size(), none);
            std::vector<std::vector<std::size_t>> preds(fstates.size());
            if (prune)
              for (std::size_t f = 0; f < fstates.size(); ++f) {
                auto it = std::find(fstates.begin(), fstates.end(), step(fm, fstates[f]));
                if (it == fstates.end()) continue;
                succ[f] = static_cast<std::size_t>(it - fstates.begin());
                preds[succ[f]].push_back(f);
              }
            auto consistent = [&](std::size_t k) {
              if (!prune) return true;
              if (succ[k] != none && succ[k] <= k && ahead[image[k]] != image[succ[k]]) return false;
              for (auto j : preds[k])
                if (j < k && ahead[image[j]] != image[k]) return false;
              return true;
            };
            bool go_on = true;
            std::function<void(std::size_t, long)> place = [&](std::size_t k, long stride) {
              if (!go_on) return;
              if (k == fstates.size()) {
                Mapping m;
                std::string desc = "relabel:stride=" + std::string(stride < 10 ? "0" : "") + std::to_string(stride) + ":";
                std::vector<DependencySpec> specs;
                std::vector<StateTable> tables(fm.size(), StateTable{sources, {}});
                DomainSpec d;
                for (std::size_t f = 0; f < fstates.size(); ++f) {
                  const auto& p = pstates[image[f]];
                  d.states.push_back(p);
                  for (std::size_t i = 0; i < fm.size(); ++i) tables[i].table[p.values()] = fstates[f][i];
                  desc += (f ? "," : "") + std::to_string(image[f]);
                }
                for (std::size_t i = 0; i < fm.size(); ++i)
                  specs.push_back({fm.substate(i).name, sources, {}, tables[i]});
                m.description = desc;
                m.schedule = uniform_schedule(stride, steps);
                m.specs = {std::move(specs)};
                m.domains = {std::move(d)};
                go_on = yield(std::move(m));
                return;
              }
              for (std::size_t p = 0; p < pstates.size() && go_on; ++p) {
                if (used[p]) continue;
                image[k] = p;
                if (!consistent(k)) continue;
                used[p] = true;
                place(k + 1, stride);
                used[p] = false;
              }
            };
            for (long stride = 1; stride <= max_stride && go_on; ++stride) {
              if (prune)
                for (std::size_t p = 0; p < pstates.size(); ++p) {
                  FormalState x = pstates[p];
                  for (long t = 0; t < stride; ++t) x = step(pm, x);
                  auto it = std::find(pstates.begin(), pstates.end(), x);
                  ahead[p] = it == pstates.end() ? none : static_cast<std::size_t>(it - pstates.begin());
                }
              if (consistent(0)) place(1, stride);
            }
          }};
}

inline TemplateFamily single(Mapping m) {
  return {"single", [m](const std::function<bool(Mapping)>& yield) { yield(m); }};
}

}  // namespace families

}  // namespace mcilab
