#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "mcilab/counting.hpp"
#include "mcilab/mangled.hpp"
#include "mcilab/mapping.hpp"
#include "mcilab/mapping_search.hpp"
#include "mcilab/noise.hpp"
#include "mcilab/quantum.hpp"
#include "mcilab/scenario.hpp"

namespace mcilab::lab {

inline constexpr const char* kToolName = "mci-lab";
inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// Plot-ready rows; the first three columns are always engine, variant and seed.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentOutcome {
  Json record;
  std::vector<Table> tables;
  bool failed = false;
};

struct Report {
  Json json;
  std::vector<Table> tables;
  int exit_code = 0;
};

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline Json finite(double v) { return std::isfinite(v) ? Json(v) : Json(num(v)); }

namespace detail {

struct Ctx {
  const Scenario& scenario;
  const ExperimentDef& def;
  std::uint64_t seed;  // derived for this experiment
  std::string engine;
};

inline Table table(const Ctx& c, std::string suffix, std::vector<std::string> cols) {
  Table t;
  t.name = c.def.name + suffix;
  t.columns = {"engine", "variant", "seed"};
  t.columns.insert(t.columns.end(), cols.begin(), cols.end());
  return t;
}

inline void row(Table& t, const Ctx& c, const std::string& variant, std::vector<std::string> cells) {
  std::vector<std::string> r = {c.engine, variant, std::to_string(c.seed)};
  r.insert(r.end(), cells.begin(), cells.end());
  t.rows.push_back(std::move(r));
}

inline Run run_of(const Ctx& c, const Cssa& computation) {
  const auto& e = c.def.node;
  return Run{computation, FormalState(values_of(need(e, "initial"), "initial")), opt<int>(e, "steps", 1)};
}

inline TemplateFamily family_of(const Ctx& c, const PhysicalSystem& physics, const Run& run) {
  const auto& e = c.def.node;
  auto m = e["mapping"];
  auto f = e["family"];
  const auto steps = static_cast<std::size_t>(run.steps);
  if (m && !f) {
    const auto kind = get<std::string>(m, "mapping");
    if (kind == "identity") return families::single(systems::identity_mapping(physics.model, run.cssa, steps));
    throw at(m, Errc::schema_error, "unknown mapping '" + kind + "'");
  }
  if (!f) throw at(e, Errc::schema_error, "needs 'mapping' or 'family'");
  const auto name = need_as<std::string>(f, "name");
  if (name == "injective_relabelings")
    return families::injective_relabelings(physics, run, opt<long>(f, "max_stride", 1), steps, opt<std::size_t>(f, "bound", 4096),
                                           opt<bool>(f, "prune", false));
  if (name == "band_subsets")
    return families::band_subsets(need_as<std::vector<std::string>>(f, "switches"), need_as<int>(f, "n"), steps);
  throw at(f, Errc::schema_error, "unknown mapping family '" + name + "'");
}

inline SearchBounds bounds_of(const Ctx& c) {
  SearchBounds b;
  b.max_candidates = opt<std::size_t>(c.def.node, "max_candidates", b.max_candidates);
  b.check_initial = opt<bool>(c.def.node, "check_initial", true);
  b.seed = c.seed;
  return b;
}

inline Json verification_json(const VerificationRecord& r) {
  Json j;
  j["single_valued"] = r.single_valued;
  if (r.counterfactuals) {
    j["counterfactuals"] = {{"passed", r.counterfactuals->passed}, {"coverage", r.counterfactuals->coverage}};
    if (r.counterfactuals->counterexample) j["counterfactuals"]["counterexample"] = r.counterfactuals->counterexample->reason;
  }
  j["initial_matches"] = r.initial_matches;
  if (r.physics) j["physics_valid"] = r.physics->passed;
  Json ssi = Json::array();
  for (auto& s : r.ssi) ssi.push_back(s.passed);
  j["ssi_per_step"] = ssi;
  if (r.relabeling) j["relabeling"] = r.relabeling->passed;
  if (r.transference) j["transference"] = r.transference->passed;
  j["failed_requirements"] = r.failed;
  return j;
}

inline ExperimentOutcome run_check(const Ctx& c) {
  const auto& e = c.def.node;
  auto physics = build_physics(c.scenario, need_as<std::string>(e, "physics"));
  auto computation = build_physics(c.scenario, need_as<std::string>(e, "computation")).model;
  Run run = run_of(c, computation);
  const auto required = opt<std::size_t>(e, "require_mappings", 1);
  ExperimentOutcome out;
  auto t = table(c, "", {"candidate", "description", "valid"});
  if (e["mapping"]) {
    auto fam = family_of(c, physics, run);
    Mapping m;
    fam.generate([&](Mapping x) {
      m = std::move(x);
      return false;
    });
    CheckOptions opt_;
    opt_.seed = c.seed;
    opt_.check_initial = bounds_of(c).check_initial;
    auto r = check_implementation(physics, run, m, opt_);
    out.record["mapping"] = m.description;
    out.record["implements"] = r.ok();
    if (!r.ok()) out.record["reason"] = r.failure().reason;
    out.record["witness"] = verification_json(r.record());
    out.record["valid_mappings"] = r.ok() ? 1 : 0;
    row(t, c, "single", {"0", m.description, r.ok() ? "1" : "0"});
    out.failed = (r.ok() ? 1u : 0u) < required;
  } else {
    auto fam = family_of(c, physics, run);
    auto res = enumerate_valid_mappings(physics, run, fam, bounds_of(c));
    out.record["family"] = fam.name;
    out.record["candidates"] = res.candidates;
    out.record["partial"] = res.partial;
    out.record["valid_mappings"] = res.mappings.size();
    Json list = Json::array();
    for (std::size_t i = 0; i < res.mappings.size(); ++i) {
      list.push_back(res.mappings[i].description);
      row(t, c, fam.name, {std::to_string(i), res.mappings[i].description, "1"});
    }
    out.record["mappings"] = list;
    out.failed = res.mappings.size() < required;
  }
  out.record["require_mappings"] = required;
  if (e["expect_mappings"]) {
    const auto want = get<std::size_t>(e["expect_mappings"], "expect_mappings");
    out.record["expect_mappings"] = want;
    if (out.record["valid_mappings"].get<std::size_t>() != want) out.failed = true;
  }
  out.tables.push_back(std::move(t));
  return out;
}

inline ExperimentOutcome run_count(const Ctx& c) {
  const auto& e = c.def.node;
  auto physics = build_physics(c.scenario, need_as<std::string>(e, "physics"));
  auto computation = build_physics(c.scenario, need_as<std::string>(e, "computation")).model;
  Run run = run_of(c, computation);
  auto fam = family_of(c, physics, run);
  auto res = enumerate_valid_mappings(physics, run, fam, bounds_of(c));
  MappingSet set{physics, computation, res.mappings, static_cast<std::size_t>(run.steps)};
  CountOptions co;
  co.seed = c.seed;
  co.budget = opt<std::size_t>(e, "budget", co.budget);
  co.exact_limit = opt<std::size_t>(e, "exact_limit", co.exact_limit);
  const auto mode = parse_simultaneity(opt<std::string>(e, "mode", "simultaneous"));
  const auto variants = opt<std::vector<std::string>>(e, "variants", {"MCII0", "MCII1", "MCII2"});
  ExperimentOutcome out;
  out.record["family"] = fam.name;
  out.record["candidates"] = res.candidates;
  Json maps = Json::array();
  for (auto& m : res.mappings) maps.push_back(m.description);
  out.record["mappings"] = maps;
  out.record["mode"] = to_string(mode);
  auto t = table(c, "", {"mappings", "count", "exact", "witness"});
  Json counts = Json::object();
  for (auto& v : variants) {
    const MciiVariant var{parse_mcii(v), mode};
    auto r = max_independent_count(set, var, co);
    Json w = Json::array();
    std::string ws;
    for (auto i : r.witness) {
      w.push_back(set.mappings[i].description);
      ws += (ws.empty() ? "" : " ") + std::to_string(i);
    }
    counts[v] = {{"count", r.count}, {"exact", r.exact}, {"lower_bound", r.lower_bound}, {"witness", w}};
    if (var.tag == Mcii::mcii3) counts[v]["conjectural"] = true;
    row(t, c, v + "/" + to_string(mode), {std::to_string(set.mappings.size()), std::to_string(r.count), r.exact ? "1" : "0", ws});
  }
  out.record["counts"] = counts;
  if (auto ex = e["expect"]) {
    Json mism = Json::array();
    for (auto it = ex.begin(); it != ex.end(); ++it) {
      const auto v = it->first.as<std::string>();
      const auto want = get<std::size_t>(it->second, v);
      if (!counts.contains(v) || counts[v]["count"].get<std::size_t>() != want) mism.push_back(v);
    }
    out.record["expectation_mismatches"] = mism;
    out.failed = !mism.empty();
  }
  if (res.mappings.empty() && opt<std::size_t>(e, "require_mappings", 1) > 0) out.failed = true;
  out.tables.push_back(std::move(t));
  return out;
}

inline quantum::BranchDecomposition branches_of(const Ctx& c) {
  const auto& e = c.def.node;
  quantum::BranchDecomposition dec;
  if (e["state"]) {
    auto psi = build_wave(c.scenario, e["state"].as<std::string>());
    return quantum::decompose(psi, need_as<std::string>(e, "observer"), need_as<std::map<std::string, std::string>>(e, "labels"));
  }
  for (auto b : need(e, "branches")) {
    quantum::Branch br;
    br.amplitude = complex_of(need(b, "amplitude"), "amplitude");
    br.observations = need_as<std::vector<std::string>>(b, "observations");
    if (b["l_factor"]) br.l_factor = get<double>(b["l_factor"], "l_factor");
    if (b["lives"]) br.lives = get<double>(b["lives"], "lives");
    if (b["relative_count"]) br.relative_count = get<double>(b["relative_count"], "relative_count");
    dec.branches.push_back(std::move(br));
  }
  return dec;
}

inline ExperimentOutcome run_rules(const Ctx& c) {
  const auto& e = c.def.node;
  auto dec = branches_of(c);
  const auto intrinsic = opt<std::map<std::string, double>>(e, "intrinsic", {});
  const auto rules = opt<std::vector<std::string>>(e, "rules", {"born", "app", "gapp", "mapp"});
  const double tol = opt<double>(e, "tolerance", 1e-12);
  ExperimentOutcome out;
  out.record["branches"] = dec.branches.size();
  auto t = table(c, "", {"observation", "measure", "probability"});
  Json res = Json::object();
  for (auto& name : rules) {
    const auto rule = quantum::parse_rule(name);
    const auto key = quantum::to_string(rule);
    try {
      auto r = quantum::probability_rule(dec, rule, intrinsic);
      Json obs = Json::object();
      for (std::size_t i = 0; i < r.observations.size(); ++i) {
        obs[r.observations[i]] = {{"measure", r.measures[i]}, {"probability", r.probabilities[i]}};
        row(t, c, key, {r.observations[i], num(r.measures[i]), num(r.probabilities[i])});
      }
      res[key] = {{"applicable", true}, {"total", r.total}, {"observations", obs}};
    } catch (const Error& err) {
      if (err.code() != Errc::invalid_argument) throw;
      res[key] = {{"applicable", false}, {"reason", err.what()}};
    }
  }
  out.record["rules"] = res;
  if (auto ex = e["expect"]) {
    Json mism = Json::array();
    for (auto it = ex.begin(); it != ex.end(); ++it) {
      const auto key = quantum::to_string(quantum::parse_rule(it->first.as<std::string>()));
      for (auto o = it->second.begin(); o != it->second.end(); ++o) {
        const auto obs = o->first.as<std::string>();
        const double want = get<double>(o->second, obs);
        const bool ok = res.contains(key) && res[key]["applicable"].get<bool>() && res[key]["observations"].contains(obs) &&
                        std::fabs(res[key]["observations"][obs]["probability"].get<double>() - want) <= tol;
        if (!ok) mism.push_back(key + ":" + obs);
      }
    }
    out.record["expectation_mismatches"] = mism;
    out.failed = !mism.empty();
  }
  out.tables.push_back(std::move(t));
  return out;
}

inline ExperimentOutcome run_quantum(const Ctx& c) {
  using namespace quantum;
  const auto& e = c.def.node;
  const auto task = need_as<std::string>(e, "task");
  ExperimentOutcome out;
  out.record["task"] = task;
  if (task == "enrc") {
    auto rep = enrc_ratio(complex_of(need(e, "a"), "a"), complex_of(need(e, "b"), "b"), need_as<std::vector<double>>(e, "schedule"));
    auto t = table(c, "", {"eps", "count_a", "count_b", "ratio", "error", "bound", "rounding_bound", "within"});
    Json stages = Json::array();
    for (auto& s : rep.stages) {
      stages.push_back({{"eps", s.eps}, {"count_a", s.count_a}, {"count_b", s.count_b}, {"ratio", s.ratio}, {"error", s.error},
                        {"bound", s.bound}, {"rounding_bound", s.rounding_bound}, {"within", s.within}});
      row(t, c, "round_half_even", {num(s.eps), std::to_string(s.count_a), std::to_string(s.count_b), num(s.ratio), num(s.error),
                                    num(s.bound), num(s.rounding_bound), s.within ? "1" : "0"});
    }
    out.record["limit"] = rep.limit;
    out.record["within_bound"] = rep.within_bound;
    out.record["stages"] = stages;
    out.tables.push_back(std::move(t));
    if (opt<bool>(e, "require_within_bound", false)) out.failed = !rep.within_bound;
  } else if (task == "oscillator") {
    HarmonicWell w;
    if (auto g = e["grid"]) w.grid = Grid1d{need_as<std::size_t>(g, "n"), need_as<double>(g, "lo"), need_as<double>(g, "hi")};
    const double x0 = opt<double>(e, "x0", 2.0);
    const auto steps = opt<std::size_t>(e, "steps", 400);
    const double period = 2 * M_PI / w.omega();
    WaveState packet({w.grid.as_factor("x")}, coherent_packet(w, x0));
    auto tr = bracket_trajectory(w, packet, opt<double>(e, "periods", 1.0) * period / static_cast<double>(steps), steps);
    auto chk = oscillator_rule_check(tr, w, x0, opt<double>(e, "tolerance", 0.01));
    out.record["rate_error"] = chk.rate_error;
    out.record["force_error"] = chk.force_error;
    out.record["closed_form_error"] = chk.closed_form_error;
    out.record["holds"] = chk.holds;
    auto t = table(c, "", {"t", "X", "V"});
    for (auto& s : tr) row(t, c, "exact_propagator", {num(s.t), num(s.X), num(s.V)});
    out.tables.push_back(std::move(t));
    out.failed = !chk.holds;
  } else if (task == "evolve_oracle") {
    std::mt19937_64 rng(c.seed);
    const double t_end = opt<double>(e, "time", 1.0);
    auto t = table(c, "", {"dim", "max_error"});
    double worst = 0;
    for (auto d : opt<std::vector<std::size_t>>(e, "dims", {2, 8, 32, 64})) {
      CMatrix h = random_hermitian(d, rng, 1.0);
      CVector v = random_unit(d, rng);
      WaveState psi({factor("q", d)}, v);
      auto got = evolve(psi, Hamiltonian(h), t_end / 10, 10).amplitudes();
      CVector want = (Complex(0, -t_end) * h).exp() * v;
      const double err = (got - want).cwiseAbs().maxCoeff();
      worst = std::max(worst, err);
      row(t, c, "eigendecomposition", {std::to_string(d), num(err)});
    }
    out.record["max_error"] = worst;
    out.tables.push_back(std::move(t));
    out.failed = worst > opt<double>(e, "tolerance", 1e-8);
  } else if (task == "locality") {
    auto psi = build_wave(c.scenario, need_as<std::string>(e, "state"));
    auto hn = need(e, "hamiltonian");
    const auto f = psi.factor_index(need_as<std::string>(hn, "factor"));
    Hamiltonian h(lift(psi.factors(), f, matrix_of(need(hn, "matrix"), "matrix")));
    const auto observer = need_as<std::string>(e, "observer");
    const auto labels = need_as<std::map<std::string, std::string>>(e, "labels");
    const auto target = need_as<std::string>(e, "target");
    const double dt = need_as<double>(e, "dt");
    const auto steps = need_as<std::size_t>(e, "steps");
    const auto limits = opt<std::map<std::string, double>>(e, "max_drift", {});
    auto t = table(c, "", {"step", "time", "measure"});
    Json drifts = Json::object();
    for (auto& name : opt<std::vector<std::string>>(e, "rules", {"born", "app", "mapp"})) {
      const auto rule = parse_rule(name);
      auto rep = locality_check(psi, observer, labels, target, h, dt, steps, rule);
      drifts[to_string(rule)] = rep.drift;
      for (std::size_t k = 0; k < rep.measure.size(); ++k) row(t, c, to_string(rule), {std::to_string(k), num(rep.times[k]), num(rep.measure[k])});
      for (auto& [key, lim] : limits)
        if (to_string(parse_rule(key)) == to_string(rule) && rep.drift > lim) out.failed = true;
    }
    out.record["drift"] = drifts;
    out.tables.push_back(std::move(t));
  } else if (task == "noncontextuality") {
    auto w = e["weights"];
    auto d = noncontextuality_demo(lives_weighted(w ? opt<double>(w, "dead", 0) : 0, w ? opt<double>(w, "alive", 1) : 1,
                                                  w ? opt<double>(w, "dead2", 0) : 0));
    out.record["m3"] = d.m3;
    out.record["m4"] = d.m4;
    out.record["conditions_met"] = d.conditions_met;
    out.record["counterexample_holds"] = d.holds;
  } else if (task == "ansatz") {
    auto r = measure_ansatz(need_as<std::vector<double>>(e, "amplitudes"), need_as<std::vector<double>>(e, "C"),
                            need_as<std::vector<std::vector<double>>>(e, "eps"), opt<double>(e, "tolerance", 0.1));
    auto t = table(c, "", {"branch", "measure", "ratio", "flagged", "direction"});
    for (std::size_t i = 0; i < r.measure.size(); ++i)
      row(t, c, "ansatz", {std::to_string(i), num(r.measure[i]), num(r.ratio[i]), r.flagged[i] ? "1" : "0", std::to_string(r.direction[i])});
    out.record["measure"] = r.measure;
    out.record["ratio"] = r.ratio;
    out.record["mean_ratio"] = r.mean_ratio;
    out.record["flagged"] = r.flagged;
    out.record["direction"] = r.direction;
    out.tables.push_back(std::move(t));
  } else {
    throw at(e["task"], Errc::schema_error, "unknown quantum task '" + task + "'");
  }
  return out;
}

inline ExperimentOutcome run_noise(const Ctx& c) {
  const auto& e = c.def.node;
  noise::Experiment x;
  const auto sweep = opt<std::string>(e, "sweep", "amplitude");
  if (sweep != "amplitude" && sweep != "noise") throw at(e["sweep"], Errc::schema_error, "sweep must be amplitude or noise");
  x.sweep = sweep == "amplitude" ? noise::Sweep::amplitude : noise::Sweep::noise;
  x.amplitudes = opt<std::vector<double>>(e, "amplitudes", x.amplitudes);
  x.noise_levels = opt<std::vector<double>>(e, "noise_levels", x.noise_levels);
  x.trials = opt<std::size_t>(e, "trials", x.trials);
  x.correlation = opt<std::size_t>(e, "correlation", x.correlation);
  x.count.thresholds = opt<std::vector<double>>(e, "thresholds", {5});
  if (auto p = e["packet"]) {
    x.packet.cells = opt<std::size_t>(p, "cells", x.packet.cells);
    x.packet.half_width = opt<double>(p, "half_width", x.packet.half_width);
    x.packet.order = opt<int>(p, "order", x.packet.order);
    x.packet.wavelength = opt<double>(p, "wavelength", x.packet.wavelength);
    x.packet.travel_time = opt<double>(p, "travel_time", x.packet.travel_time);
    x.packet.flat_level = opt<double>(p, "flat_level", x.packet.flat_level);
  }
  x.seed = c.seed;
  auto rep = noise::run_experiment(x);
  ExperimentOutcome out;
  out.record["sweep"] = sweep;
  out.record["trials"] = x.trials;
  out.record["discarded"] = rep.discarded;
  out.record["cap"] = rep.cap;
  Json fits = Json::array();
  auto t = table(c, "", {"A", "n", "trial", "count", "fitted_slope"});
  const double want = opt<double>(e, "expect_slope", std::nan(""));
  const double tol = opt<double>(e, "slope_tolerance", 0.2);
  for (std::size_t k = 0; k < rep.fits.size(); ++k) {
    auto& f = rep.fits[k];
    fits.push_back({{"threshold", f.threshold}, {"slope", f.fit.slope}, {"std_error", f.fit.std_error}, {"ci_low", f.fit.ci_low},
                    {"ci_high", f.fit.ci_high}, {"points", f.fit.points}, {"mean_count", f.mean_count}, {"saturated", f.saturated}});
    if (f.fit.points < 3) out.failed = true;
    if (!std::isnan(want) && std::fabs(f.fit.slope - want) > tol) out.failed = true;
    const std::string variant = "snr>=" + num(f.threshold);
    for (auto& tr : rep.trials)
      row(t, c, variant, {num(tr.amplitude), num(tr.noise), std::to_string(tr.trial), tr.discarded ? "discarded" : num(tr.count[k]),
                          num(f.fit.slope)});
  }
  out.record["fits"] = fits;
  out.tables.push_back(std::move(t));
  return out;
}

inline ExperimentOutcome run_mangled(const Ctx& c) {
  const auto& e = c.def.node;
  ExperimentOutcome out;
  if (auto d = e["dynamics"]) {
    const auto name = need_as<std::string>(d, "blocks");
    auto b = build_blocks(c.scenario, name, c.scenario.seed);
    auto tr = mangled::integrate_two_world(b.state, b.hamiltonian, need_as<double>(d, "dt"), need_as<std::size_t>(d, "steps"),
                                           opt<std::size_t>(d, "record_every", 1));
    auto dom = mangled::coupling_dominance(tr, b.hamiltonian);
    auto t = table(c, "_dynamics", {"step", "time", "trace", "ss_population", "ratio", "dominant"});
    std::size_t dominant = 0;
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      dominant += dom[k].dominant;
      row(t, c, "rk4", {std::to_string(k * tr.every), num(tr.time(k)), num(tr.states[k].trace()),
                        num(tr.states[k].SS.trace().real()), num(dom[k].ratio), dom[k].dominant ? "1" : "0"});
    }
    Json j = {{"blocks", name}, {"max_trace_drift", tr.max_trace_drift}, {"max_hermitian_defect", tr.max_hermitian_defect},
              {"initial_ratio", finite(dom.front().ratio)}, {"final_ratio", finite(dom.back().ratio)}, {"dominant_samples", dominant}};
    if (b.threshold) j["dominance_threshold"] = finite(*b.threshold);
    out.record["dynamics"] = j;
    if (!b.hamiltonian.has_source() && tr.max_trace_drift > opt<double>(d, "trace_tolerance", 1e-8)) out.failed = true;
    out.tables.push_back(std::move(t));
  }
  if (auto w = e["walk"]) {
    mangled::WalkParams p;
    p.a0 = need_as<std::vector<double>>(w, "a0");
    p.branches = opt<std::size_t>(w, "branches", p.branches);
    p.events = opt<std::size_t>(w, "events", p.events);
    if (auto s = w["split"]) {
      const auto kind = opt<std::string>(s, "kind", "beta");
      p.split.kind = kind == "identity" ? mangled::SplitDistribution::identity
                     : kind == "fixed"  ? mangled::SplitDistribution::fixed
                     : kind == "beta"   ? mangled::SplitDistribution::beta
                                        : throw at(s, Errc::schema_error, "unknown split kind '" + kind + "'");
      p.split.p = opt<double>(s, "p", p.split.p);
      p.split.concentration = opt<double>(s, "concentration", p.split.concentration);
    }
    p.seed = c.seed;
    auto ens = mangled::random_walk_ensemble(p);
    Json macros = Json::array();
    for (auto& m : ens.macros)
      macros.push_back({{"a0", m.a0}, {"log_mean", m.fit.mean}, {"log_stddev", m.fit.stddev}, {"ks_deviation", m.fit.ks_deviation},
                        {"fit_skipped", m.fit.skipped}});
    Json wj = {{"branches", p.branches}, {"events", p.events}, {"split", mangled::to_string(p.split.kind)},
               {"degenerate", ens.degenerate}, {"macro_branches", macros}};
    if (!ens.degenerate) {
      auto sw = w["sweep"];
      const double mu = ens.macros[0].fit.mean, sd = ens.macros[0].fit.stddev;
      auto cutoffs = mangled::linear_sweep(mu + opt<double>(sw, "from_sigma", -6) * sd, mu + opt<double>(sw, "to_sigma", 6) * sd,
                                           opt<std::size_t>(sw, "points", 241));
      std::optional<double> mangling;
      if (w["mangling_threshold"]) {
        const double a_max = *std::max_element(p.a0.begin(), p.a0.end());
        // measured against a typical fine branch of the largest macro-branch
        mangling = mangled::mangling_log_cutoff(a_max, get<double>(w["mangling_threshold"], "mangling_threshold")) + mu;
        cutoffs.insert(std::upper_bound(cutoffs.begin(), cutoffs.end(), *mangling), *mangling);
      }
      auto rep = mangled::cutoff_count(ens, cutoffs, 0, opt<double>(w, "tolerance", 0.1));
      auto t = table(c, "", {"cutoff", "branch_id", "survivors", "ratio", "within_window"});
      std::size_t excluded = 0;
      for (auto& r : rep.rows) {
        excluded += r.empty;
        for (std::size_t m = 0; m < r.survivors.size(); ++m)
          row(t, c, "a0=" + num(ens.macros[m].a0), {num(r.log_cutoff), std::to_string(m), std::to_string(r.survivors[m]),
                                                    r.ratio[m] ? num(*r.ratio[m]) : "excluded", r.all_within ? "1" : "0"});
      }
      Json windows = Json::array(), failures = Json::array();
      for (auto& x : rep.windows) windows.push_back({{"lo", x.lo}, {"hi", x.hi}, {"cutoffs", x.rows}});
      for (auto& x : rep.failures) failures.push_back({{"lo", x.lo}, {"hi", x.hi}, {"cutoffs", x.rows}});
      wj["windows"] = windows;
      wj["failures"] = failures;
      wj["excluded_cutoffs"] = excluded;
      wj["window_found"] = !rep.windows.empty();
      if (mangling) {
        for (auto& r : rep.rows)
          if (r.log_cutoff == *mangling) {
            Json surv = Json::array();
            for (auto s : r.survivors) surv.push_back(s);
            wj["mangling"] = {{"log_cutoff", *mangling}, {"survivors", surv}, {"within", r.all_within}};
          }
      }
      out.tables.push_back(std::move(t));
      if (rep.windows.empty() && opt<bool>(w, "require_window", true)) out.failed = true;
    }
    out.record["walk"] = wj;
  }
  return out;
}

inline std::string engine_of(const std::string& kind) {
  if (kind == "check") return "mapping-engine";
  if (kind == "count") return "impl-counter";
  if (kind == "mangled") return "mangled-worlds";
  return "quantum-toy";
}

}  // namespace detail

// Runs the experiments selected by command ("all" runs every one).
inline Report execute(const Scenario& s, const std::string& command, std::optional<std::uint64_t> seed_override = std::nullopt) {
  if (command != "all" && !experiment_kinds().count(command)) throw Error(Errc::invalid_argument, "unknown command '" + command + "'");
  Scenario sc = s;
  if (seed_override) sc.seed = *seed_override;
  Report rep;
  Json exps = Json::array();
  std::size_t selected = 0;
  for (auto& def : sc.experiments) {
    if (command != "all" && def.kind != command) continue;
    ++selected;
    detail::Ctx ctx{sc, def, derive_seed(sc.seed, "experiment/" + def.name), detail::engine_of(def.kind)};
    ExperimentOutcome out;
    try {
      if (def.kind == "check") out = detail::run_check(ctx);
      else if (def.kind == "count") out = detail::run_count(ctx);
      else if (def.kind == "rules") out = detail::run_rules(ctx);
      else if (def.kind == "quantum") out = detail::run_quantum(ctx);
      else if (def.kind == "noise") out = detail::run_noise(ctx);
      else out = detail::run_mangled(ctx);
    } catch (const Error& e) {
      throw Error(e.code(), ctx.engine + " in experiment '" + def.name + "' (line " + std::to_string(def.line) + "): " + e.message());
    }
    Json j;
    j["name"] = def.name;
    j["kind"] = def.kind;
    j["engine"] = ctx.engine;
    j["seed"] = ctx.seed;
    j["status"] = out.failed ? "failed" : "ok";
    j["result"] = std::move(out.record);
    exps.push_back(std::move(j));
    if (out.failed) rep.exit_code = 2;
    for (auto& t : out.tables) rep.tables.push_back(std::move(t));
  }
  if (selected == 0) throw Error(Errc::schema_error, "scenario has no '" + command + "' experiment");
  rep.json["tool"] = kToolName;
  rep.json["version"] = kToolVersion;
  rep.json["command"] = command;
  rep.json["scenario"] = {{"file", sc.file}, {"digest", sc.digest}, {"schema", sc.schema}};
  rep.json["seed"] = sc.seed;
  rep.json["experiments"] = std::move(exps);
  rep.json["exit_code"] = rep.exit_code;
  return rep;
}

inline std::string csv_cell(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string q = "\"";
  for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

inline std::string to_csv(const Table& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_cell(cells[i]);
    out += "\n";
  };
  line(t.columns);
  for (auto& r : t.rows) line(r);
  return out;
}

// Timing fields are the only nondeterministic part of a report.
inline void stamp(Report& r, double elapsed_seconds) {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  r.json["generated_at"] = buf;
  r.json["elapsed_seconds"] = elapsed_seconds;
}

inline std::vector<std::string> emit(const Report& r, const std::string& dir, bool json, bool csv) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  auto write = [&](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw Error(Errc::io_error, "cannot write '" + p.string() + "'");
    written.push_back(p.string());
  };
  if (json) write(fs::path(dir) / "report.json", r.json.dump(2) + "\n");
  if (csv)
    for (auto& t : r.tables) write(fs::path(dir) / (t.name + ".csv"), to_csv(t));
  return written;
}

}  // namespace mcilab::lab
