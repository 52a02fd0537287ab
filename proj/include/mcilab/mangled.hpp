#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mcilab/error.hpp"
#include "mcilab/parallel.hpp"
#include "mcilab/ssi.hpp"

namespace mcilab::mangled {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

// Density matrix split into a large world L and a small world S.
struct TwoWorldState {
  CMatrix LL, LS, SL, SS;

  std::size_t dim_l() const { return static_cast<std::size_t>(LL.rows()); }
  std::size_t dim_s() const { return static_cast<std::size_t>(SS.rows()); }

  CMatrix assemble() const {
    const auto l = LL.rows(), s = SS.rows();
    CMatrix rho(l + s, l + s);
    rho << LL, LS, SL, SS;
    return rho;
  }

  static TwoWorldState split(const CMatrix& rho, std::size_t dim_l) {
    const auto l = static_cast<Eigen::Index>(dim_l), s = rho.rows() - l;
    return {rho.topLeftCorner(l, l), rho.topRightCorner(l, s), rho.bottomLeftCorner(s, l), rho.bottomRightCorner(s, s)};
  }

  double trace() const { return (LL.trace() + SS.trace()).real(); }
  double hermitian_defect() const {
    const CMatrix r = assemble();
    return (r - r.adjoint()).cwiseAbs().maxCoeff();
  }
  double norm() const { return std::sqrt(LL.squaredNorm() + LS.squaredNorm() + SL.squaredNorm() + SS.squaredNorm()); }

  // Pure state (alpha l, beta s) with l and s normalized by the caller.
  static TwoWorldState pure(const Eigen::VectorXcd& l, const Eigen::VectorXcd& s, Complex alpha, Complex beta) {
    Eigen::VectorXcd a = alpha * l, b = beta * s;
    return {a * a.adjoint(), a * b.adjoint(), b * a.adjoint(), b * b.adjoint()};
  }
};

inline void check_shapes(const TwoWorldState& r) {
  const auto l = r.LL.rows(), s = r.SS.rows();
  if (l == 0 || s == 0 || r.LL.cols() != l || r.SS.cols() != s || r.LS.rows() != l || r.LS.cols() != s ||
      r.SL.rows() != s || r.SL.cols() != l)
    throw Error(Errc::dimension_mismatch, "inconsistent block shapes");
}

inline void validate(const TwoWorldState& r) {
  check_shapes(r);
  if ((r.SL - r.LS.adjoint()).cwiseAbs().maxCoeff() > 1e-12 || r.hermitian_defect() > 1e-12)
    throw Error(Errc::non_hermitian, "density matrix is not Hermitian");
  const double tr = r.trace();
  if (!(tr > 0 && tr <= 1 + 1e-12)) throw Error(Errc::invalid_state, "trace outside (0, 1]");
}

struct BlockHamiltonian {
  CMatrix LL, LS, SL, SS;
  // source blocks; empty means zero
  CMatrix S_LL, S_LS, S_SL, S_SS;

  CMatrix assemble() const { return TwoWorldState{LL, LS, SL, SS}.assemble(); }

  static BlockHamiltonian from(const CMatrix& h, std::size_t dim_l) {
    auto b = TwoWorldState::split(h, dim_l);
    return {b.LL, b.LS, b.SL, b.SS, {}, {}, {}, {}};
  }

  bool has_source() const { return S_LL.size() || S_LS.size() || S_SL.size() || S_SS.size(); }
};

inline void validate(const BlockHamiltonian& h, const TwoWorldState& r) {
  check_shapes(TwoWorldState{h.LL, h.LS, h.SL, h.SS});
  if (h.LL.rows() != r.LL.rows() || h.SS.rows() != r.SS.rows())
    throw Error(Errc::dimension_mismatch, "Hamiltonian and state block sizes differ");
  const CMatrix full = h.assemble();
  if ((full - full.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw Error(Errc::non_hermitian, "Hamiltonian is not Hermitian");
  auto check = [](const CMatrix& m, const CMatrix& like, const char* name) {
    if (m.size() && (m.rows() != like.rows() || m.cols() != like.cols()))
      throw Error(Errc::dimension_mismatch, std::string("source block ") + name + " has the wrong shape");
  };
  check(h.S_LL, r.LL, "LL");
  check(h.S_LS, r.LS, "LS");
  check(h.S_SL, r.SL, "SL");
  check(h.S_SS, r.SS, "SS");
}

// Effect of world L on world S in the SS equation.
inline CMatrix ss_coupling(const TwoWorldState& r, const BlockHamiltonian& h) { return h.SL * r.LS - r.SL * h.LS; }
inline CMatrix ss_commutator(const TwoWorldState& r, const BlockHamiltonian& h) { return h.SS * r.SS - r.SS * h.SS; }

// d/dt of each block with hbar = 1: i d(rho)/dt = H rho - rho H + S.
inline TwoWorldState derivative(const TwoWorldState& r, const BlockHamiltonian& h) {
  const Complex mi(0, -1);
  auto src = [](const CMatrix& s, const CMatrix& like) { return s.size() ? s : CMatrix::Zero(like.rows(), like.cols()); };
  TwoWorldState d;
  d.LL = mi * (h.LL * r.LL - r.LL * h.LL + (h.LS * r.SL - r.LS * h.SL) + src(h.S_LL, r.LL));
  d.SS = mi * (ss_commutator(r, h) + ss_coupling(r, h) + src(h.S_SS, r.SS));
  d.LS = mi * (h.LL * r.LS - r.LL * h.LS + h.LS * r.SS - r.LS * h.SS + src(h.S_LS, r.LS));
  d.SL = mi * (h.SL * r.LL - r.SL * h.LL + h.SS * r.SL - r.SS * h.SL + src(h.S_SL, r.SL));
  return d;
}

namespace detail {
inline TwoWorldState axpy(const TwoWorldState& r, double a, const TwoWorldState& d) {
  return {r.LL + a * d.LL, r.LS + a * d.LS, r.SL + a * d.SL, r.SS + a * d.SS};
}
}  // namespace detail

inline TwoWorldState rk4_step(const TwoWorldState& r, const BlockHamiltonian& h, double dt) {
  const auto k1 = derivative(r, h);
  const auto k2 = derivative(detail::axpy(r, dt / 2, k1), h);
  const auto k3 = derivative(detail::axpy(r, dt / 2, k2), h);
  const auto k4 = derivative(detail::axpy(r, dt, k3), h);
  TwoWorldState out = r;
  out.LL += dt / 6 * (k1.LL + 2 * k2.LL + 2 * k3.LL + k4.LL);
  out.LS += dt / 6 * (k1.LS + 2 * k2.LS + 2 * k3.LS + k4.LS);
  out.SL += dt / 6 * (k1.SL + 2 * k2.SL + 2 * k3.SL + k4.SL);
  out.SS += dt / 6 * (k1.SS + 2 * k2.SS + 2 * k3.SS + k4.SS);
  return out;
}

struct Trajectory {
  double dt = 0;
  std::size_t every = 1;
  std::vector<TwoWorldState> states;  // states[k] is at time k * every * dt
  double max_trace_drift = 0;
  double max_hermitian_defect = 0;

  double time(std::size_t k) const { return static_cast<double>(k * every) * dt; }
};

// Fixed-step RK4; norm growth, trace and Hermiticity are checked every step.
inline Trajectory integrate_two_world(const TwoWorldState& initial, const BlockHamiltonian& h, double dt,
                                      std::size_t steps, std::size_t record_every = 1) {
  validate(initial);
  validate(h, initial);
  if (!(dt > 0)) throw Error(Errc::invalid_argument, "step size must be positive");
  if (record_every == 0) throw Error(Errc::invalid_argument, "record interval must be positive");
  Trajectory tr;
  tr.dt = dt;
  tr.every = record_every;
  tr.states.push_back(initial);
  const double n0 = initial.norm(), t0 = initial.trace();
  TwoWorldState r = initial;
  for (std::size_t k = 1; k <= steps; ++k) {
    r = rk4_step(r, h, dt);
    const double n = r.norm();
    if (!std::isfinite(n) || n > 1.1 * n0)
      throw Error(Errc::unstable, "norm grew by more than 10% at step " + std::to_string(k));
    tr.max_trace_drift = std::max(tr.max_trace_drift, std::fabs(r.trace() - t0));
    tr.max_hermitian_defect = std::max(tr.max_hermitian_defect, r.hermitian_defect());
    if (k % record_every == 0) tr.states.push_back(r);
  }
  return tr;
}

struct Dominance {
  double ratio = 0;
  double coupling = 0;
  double commutator = 0;
  bool dominant = false;
  bool degenerate = false;
};

inline Dominance coupling_dominance(const TwoWorldState& r, const BlockHamiltonian& h) {
  Dominance d;
  d.coupling = ss_coupling(r, h).norm();
  d.commutator = ss_commutator(r, h).norm();
  if (d.commutator > 0) {
    d.ratio = d.coupling / d.commutator;
    d.dominant = d.ratio > 1;
  } else if (d.coupling > 0) {
    d.ratio = std::numeric_limits<double>::infinity();
    d.dominant = true;
    d.degenerate = true;
  }
  return d;
}

inline std::vector<Dominance> coupling_dominance(const Trajectory& tr, const BlockHamiltonian& h) {
  std::vector<Dominance> out;
  for (auto& r : tr.states) out.push_back(coupling_dominance(r, h));
  return out;
}

// For the pure state (alpha l, beta s) the coupling term dominates exactly when
// trace(SS)/trace(LL) = |beta/alpha|^2 falls below the returned value.
inline double dominance_threshold(const Eigen::VectorXcd& l, const Eigen::VectorXcd& s, const BlockHamiltonian& h) {
  const auto unit = TwoWorldState::pure(l, s, 1.0, 1.0);
  const double k1 = ss_coupling(unit, h).norm(), k2 = ss_commutator(unit, h).norm();
  if (k2 == 0) return k1 > 0 ? std::numeric_limits<double>::infinity() : 0;
  return (k1 / k2) * (k1 / k2);
}

// Splits per event, as amplitude-squared shares (p, 1 - p).
struct SplitDistribution {
  enum Kind { identity, fixed, beta } kind = beta;
  double p = 0.5;              // fixed share
  double concentration = 25;   // p ~ Beta(c, c)

  void validate() const {
    if (kind == fixed && !(p > 0 && p < 1)) throw Error(Errc::invalid_argument, "split share must lie in (0, 1)");
    if (kind == beta && !(concentration > 0)) throw Error(Errc::invalid_argument, "concentration must be positive");
  }
  bool degenerate() const { return kind == identity || (kind == fixed && p == 0.5); }
};

inline const char* to_string(SplitDistribution::Kind k) {
  switch (k) {
    case SplitDistribution::identity: return "identity";
    case SplitDistribution::fixed: return "fixed";
    case SplitDistribution::beta: return "beta";
  }
  return "unknown";
}

struct NormalFit {
  double mean = 0;
  double stddev = 0;
  double ks_deviation = 0;  // max |empirical CDF - fitted normal CDF|
  bool skipped = false;
};

struct MacroBranch {
  double a0 = 1;
  std::size_t events = 0;
  std::vector<double> log_amplitudes;          // one per fine branch (random-walk leaf)
  std::vector<std::vector<double>> factors;    // per leaf per event; kept on request
  NormalFit fit;
};

struct BranchEnsemble {
  std::vector<MacroBranch> macros;
  std::uint64_t seed = 0;
  SplitDistribution split;
  bool degenerate = false;
};

inline NormalFit fit_normal(std::vector<double> x) {
  NormalFit f;
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) {
    f.skipped = true;
    return f;
  }
  for (double v : x) f.mean += v;
  f.mean /= n;
  for (double v : x) f.stddev += (v - f.mean) * (v - f.mean);
  f.stddev = std::sqrt(f.stddev / (n - 1));
  if (!(f.stddev > 1e-12 * std::max(1.0, std::fabs(f.mean)))) {
    f.skipped = true;
    return f;
  }
  std::sort(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = 0.5 * std::erfc(-(x[i] - f.mean) / (f.stddev * std::sqrt(2.0)));
    f.ks_deviation = std::max({f.ks_deviation, std::fabs(F - static_cast<double>(i) / n),
                               std::fabs(static_cast<double>(i + 1) / n - F)});
  }
  return f;
}

struct WalkParams {
  std::vector<double> a0 = {1};
  std::size_t branches = 10000;  // fine branches sampled per macro-branch
  std::size_t events = 200;
  SplitDistribution split;
  bool keep_factors = false;
  std::uint64_t seed = 0;
};

// Each leaf follows one path down the binary splitting tree, taking either side with equal
// probability, so leaves are sampled uniformly from the fine-grained branches.
inline BranchEnsemble random_walk_ensemble(const WalkParams& w) {
  if (w.events < 1) throw Error(Errc::invalid_argument, "at least one event is required");
  if (w.branches < 1 || w.a0.empty()) throw Error(Errc::invalid_argument, "empty ensemble");
  for (double a : w.a0)
    if (!(a > 0)) throw Error(Errc::invalid_argument, "initial amplitudes must be positive");
  w.split.validate();
  BranchEnsemble e;
  e.seed = w.seed;
  e.split = w.split;
  e.degenerate = w.split.degenerate();
  e.macros.resize(w.a0.size());
  for (std::size_t m = 0; m < w.a0.size(); ++m) {
    auto& mb = e.macros[m];
    mb.a0 = w.a0[m];
    mb.events = w.events;
    mb.log_amplitudes.resize(w.branches);
    if (w.keep_factors) mb.factors.resize(w.branches);
    const std::string base = "walk/" + std::to_string(m) + "/";
    parallel_for(w.branches, [&](std::size_t i) {
      std::mt19937_64 rng(derive_seed(w.seed, base + std::to_string(i)));
      std::bernoulli_distribution side(0.5);
      std::gamma_distribution<double> gam(w.split.concentration, 1.0);
      double la = std::log(mb.a0);
      std::vector<double> fs;
      if (w.keep_factors) fs.reserve(w.events);
      for (std::size_t k = 0; k < w.events; ++k) {
        double f = 1;
        if (w.split.kind != SplitDistribution::identity) {
          double p = w.split.p;
          if (w.split.kind == SplitDistribution::beta) {
            const double x = gam(rng), y = gam(rng);
            p = x / (x + y);
          }
          f = std::sqrt(side(rng) ? p : 1 - p);
        }
        la += std::log(f);
        if (w.keep_factors) fs.push_back(f);
      }
      mb.log_amplitudes[i] = la;
      if (w.keep_factors) mb.factors[i] = std::move(fs);
    });
    if (e.degenerate) mb.fit.skipped = true;
    else mb.fit = fit_normal(mb.log_amplitudes);
  }
  return e;
}

struct CutoffRow {
  double log_cutoff = 0;
  std::vector<std::size_t> survivors;          // per macro-branch
  std::vector<std::optional<double>> ratio;    // survivors / reference survivors; empty if excluded
  std::vector<double> target;                  // (a0 / a0_ref)^2
  std::vector<bool> within;                    // per macro-branch
  bool empty = false;                          // some macro-branch has no survivors
  bool all_within = false;
};

struct Window {
  double lo = 0, hi = 0;  // log-cutoff bounds, inclusive
  std::size_t rows = 0;
};

struct CutoffReport {
  std::size_t reference = 0;
  std::vector<CutoffRow> rows;
  std::vector<Window> windows;   // runs of cutoffs where every ratio is within tolerance
  std::vector<Window> failures;  // the complementary runs
  double tolerance = 0.1;
};

// Survivor counts are scaled by the number of sampled leaves per macro-branch.
inline CutoffReport cutoff_count(const BranchEnsemble& e, const std::vector<double>& log_cutoffs, std::size_t reference = 0,
                                 double tolerance = 0.1) {
  if (e.macros.size() < 2) throw Error(Errc::invalid_argument, "at least two macro-branches are required");
  if (reference >= e.macros.size()) throw Error(Errc::invalid_argument, "reference macro-branch out of range");
  if (std::all_of(e.macros.begin(), e.macros.end(), [&](const MacroBranch& m) { return m.a0 == e.macros[0].a0; }))
    throw Error(Errc::invalid_argument, "at least two distinct macro-branch amplitudes are required");
  if (log_cutoffs.empty()) throw Error(Errc::invalid_argument, "empty cutoff sweep");
  if (!std::is_sorted(log_cutoffs.begin(), log_cutoffs.end())) throw Error(Errc::non_monotone, "cutoffs must be increasing");

  std::vector<std::vector<double>> sorted;
  for (auto& m : e.macros) {
    sorted.push_back(m.log_amplitudes);
    std::sort(sorted.back().begin(), sorted.back().end());
  }
  CutoffReport rep;
  rep.reference = reference;
  rep.tolerance = tolerance;
  const auto& ref = e.macros[reference];
  for (double c : log_cutoffs) {
    CutoffRow row;
    row.log_cutoff = c;
    for (auto& s : sorted)
      row.survivors.push_back(static_cast<std::size_t>(s.end() - std::upper_bound(s.begin(), s.end(), c)));
    row.empty = std::find(row.survivors.begin(), row.survivors.end(), 0) != row.survivors.end();
    row.all_within = !row.empty;
    const double nref = static_cast<double>(ref.log_amplitudes.size());
    for (std::size_t m = 0; m < e.macros.size(); ++m) {
      const double t = std::pow(e.macros[m].a0 / ref.a0, 2);
      row.target.push_back(t);
      if (row.empty) {
        row.ratio.emplace_back();
        row.within.push_back(false);
        continue;
      }
      const double r = (static_cast<double>(row.survivors[m]) / static_cast<double>(e.macros[m].log_amplitudes.size())) /
                       (static_cast<double>(row.survivors[reference]) / nref);
      row.ratio.emplace_back(r);
      row.within.push_back(std::fabs(r / t - 1) < tolerance);
      row.all_within = row.all_within && row.within.back();
    }
    rep.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < rep.rows.size();) {
    const bool ok = rep.rows[i].all_within;
    std::size_t j = i;
    while (j + 1 < rep.rows.size() && rep.rows[j + 1].all_within == ok) ++j;
    (ok ? rep.windows : rep.failures).push_back({rep.rows[i].log_cutoff, rep.rows[j].log_cutoff, j - i + 1});
    i = j + 1;
  }
  return rep;
}

inline std::vector<double> linear_sweep(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw Error(Errc::invalid_argument, "sweep needs lo < hi and at least two points");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

// Log-amplitude below which a branch is treated as mangled by a world of amplitude a_large,
// given the trace-ratio threshold from dominance_threshold.
inline double mangling_log_cutoff(double a_large, double threshold) {
  if (!(a_large > 0) || !(threshold > 0)) throw Error(Errc::invalid_argument, "mangling cutoff needs positive inputs");
  return std::log(a_large) + 0.5 * std::log(threshold);
}

}  // namespace mcilab::mangled
