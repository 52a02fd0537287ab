#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mcilab/error.hpp"
#include "mcilab/ssi.hpp"

namespace mcilab::quantum {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kProjectorTol = 1e-10;

// One tensor factor with its declared position-type basis labels.
struct Factor {
  std::string name;
  std::vector<std::string> basis;
  std::size_t dim() const { return basis.size(); }
};

inline Factor factor(std::string name, std::size_t dim, const std::string& prefix = "") {
  Factor f{std::move(name), {}};
  for (std::size_t k = 0; k < dim; ++k) f.basis.push_back(prefix + std::to_string(k));
  return f;
}

// Amplitudes over the product basis; the first factor is the most significant index.
class WaveState {
 public:
  WaveState() = default;
  WaveState(std::vector<Factor> factors, CVector amps) : factors_(std::move(factors)), amps_(std::move(amps)) {
    if (factors_.empty()) throw Error(Errc::invalid_argument, "wave state needs at least one factor");
    std::size_t d = 1;
    std::set<std::string> names;
    for (auto& f : factors_) {
      if (f.dim() == 0) throw Error(Errc::invalid_argument, "factor '" + f.name + "' has no basis");
      if (!names.insert(f.name).second) throw Error(Errc::invalid_argument, "duplicate factor '" + f.name + "'");
      d *= f.dim();
    }
    if (static_cast<std::size_t>(amps_.size()) != d)
      throw Error(Errc::dimension_mismatch, "amplitudes have size " + std::to_string(amps_.size()) +
                                                 " but factors multiply to " + std::to_string(d));
    if (!std::isfinite(norm2())) throw Error(Errc::invalid_state, "wave state norm is not finite");
  }

  static WaveState basis_state(std::vector<Factor> factors, const std::vector<std::size_t>& index) {
    WaveState w(factors, CVector::Zero(static_cast<Eigen::Index>(product(factors))));
    w.amps_(static_cast<Eigen::Index>(w.flat_index(index))) = 1.0;
    return w;
  }

  const std::vector<Factor>& factors() const { return factors_; }
  const CVector& amplitudes() const { return amps_; }
  std::size_t dimension() const { return static_cast<std::size_t>(amps_.size()); }
  double norm2() const { return amps_.squaredNorm(); }

  WaveState normalized() const {
    double n = std::sqrt(norm2());
    if (n == 0) throw Error(Errc::zero_overlap, "cannot normalize the zero state");
    return WaveState(factors_, amps_ / n);
  }
  WaveState with_amplitudes(CVector a) const { return WaveState(factors_, std::move(a)); }

  std::size_t factor_index(const std::string& name) const {
    for (std::size_t k = 0; k < factors_.size(); ++k)
      if (factors_[k].name == name) return k;
    throw Error(Errc::invalid_argument, "no factor named '" + name + "'");
  }
  std::size_t label_index(std::size_t f, const std::string& label) const {
    auto& b = factors_[f].basis;
    auto it = std::find(b.begin(), b.end(), label);
    if (it == b.end()) throw Error(Errc::invalid_argument, "factor '" + factors_[f].name + "' has no label '" + label + "'");
    return static_cast<std::size_t>(it - b.begin());
  }

  std::size_t flat_index(const std::vector<std::size_t>& multi) const {
    if (multi.size() != factors_.size()) throw Error(Errc::dimension_mismatch, "multi-index has the wrong rank");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      if (multi[k] >= factors_[k].dim()) throw Error(Errc::invalid_argument, "index out of range for '" + factors_[k].name + "'");
      flat = flat * factors_[k].dim() + multi[k];
    }
    return flat;
  }
  std::vector<std::size_t> multi_index(std::size_t flat) const {
    std::vector<std::size_t> m(factors_.size());
    for (std::size_t k = factors_.size(); k-- > 0;) {
      m[k] = flat % factors_[k].dim();
      flat /= factors_[k].dim();
    }
    return m;
  }

  static std::size_t product(const std::vector<Factor>& fs) {
    std::size_t d = 1;
    for (auto& f : fs) d *= f.dim();
    return d;
  }

 private:
  std::vector<Factor> factors_;
  CVector amps_;
};

inline bool same_structure(const WaveState& a, const WaveState& b) {
  if (a.factors().size() != b.factors().size()) return false;
  for (std::size_t k = 0; k < a.factors().size(); ++k)
    if (a.factors()[k].name != b.factors()[k].name || a.factors()[k].basis != b.factors()[k].basis) return false;
  return true;
}

inline WaveState operator+(const WaveState& a, const WaveState& b) {
  if (!same_structure(a, b)) throw Error(Errc::dimension_mismatch, "adding wave states with different factors");
  return a.with_amplitudes(a.amplitudes() + b.amplitudes());
}
inline WaveState operator*(Complex c, const WaveState& a) { return a.with_amplitudes(c * a.amplitudes()); }

inline Complex inner(const WaveState& a, const WaveState& b) {
  if (!same_structure(a, b)) throw Error(Errc::dimension_mismatch, "inner product of wave states with different factors");
  return a.amplitudes().dot(b.amplitudes());
}

inline WaveState tensor(const WaveState& a, const WaveState& b) {
  auto fs = a.factors();
  fs.insert(fs.end(), b.factors().begin(), b.factors().end());
  CVector v(static_cast<Eigen::Index>(a.dimension() * b.dimension()));
  for (std::size_t i = 0; i < a.dimension(); ++i)
    v.segment(static_cast<Eigen::Index>(i * b.dimension()), static_cast<Eigen::Index>(b.dimension())) =
        a.amplitudes()(static_cast<Eigen::Index>(i)) * b.amplitudes();
  return WaveState(std::move(fs), std::move(v));
}

// ---- operators ----

inline double hermitian_defect(const CMatrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline void require_hermitian(const CMatrix& m, const std::string& what, double tol = kHermitianTol) {
  if (m.rows() != m.cols()) throw Error(Errc::dimension_mismatch, what + " is not square");
  double d = hermitian_defect(m);
  if (d >= tol) throw Error(Errc::non_hermitian, what + " is not Hermitian (defect " + std::to_string(d) + ")");
}

struct Hamiltonian {
  CMatrix matrix;
  explicit Hamiltonian(CMatrix m) : matrix(std::move(m)) { require_hermitian(matrix, "Hamiltonian"); }
  std::size_t dimension() const { return static_cast<std::size_t>(matrix.rows()); }
};

// Operator acting as `op` on one factor and as the identity elsewhere.
inline CMatrix lift(const std::vector<Factor>& factors, std::size_t which, const CMatrix& op) {
  if (which >= factors.size()) throw Error(Errc::invalid_argument, "factor index out of range");
  if (static_cast<std::size_t>(op.rows()) != factors[which].dim() || op.rows() != op.cols())
    throw Error(Errc::dimension_mismatch, "operator does not match factor '" + factors[which].name + "'");
  CMatrix out = CMatrix::Identity(1, 1);
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const auto d = static_cast<Eigen::Index>(factors[k].dim());
    CMatrix f = k == which ? op : CMatrix::Identity(d, d);
    CMatrix next(out.rows() * d, out.cols() * d);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j) next.block(i * d, j * d, d, d) = out(i, j) * f;
    out = std::move(next);
  }
  return out;
}

inline WaveState apply(const CMatrix& op, const WaveState& psi) {
  if (static_cast<std::size_t>(op.cols()) != psi.dimension() || op.rows() != op.cols())
    throw Error(Errc::dimension_mismatch, "operator dimension " + std::to_string(op.cols()) + " vs state " +
                                              std::to_string(psi.dimension()));
  return psi.with_amplitudes(op * psi.amplitudes());
}

// Exact propagator exp(-i H t) from the spectral decomposition.
inline CMatrix propagator(const Hamiltonian& h, double t) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix);
  if (es.info() != Eigen::Success) throw Error(Errc::unstable, "eigendecomposition failed");
  CVector phase = (es.eigenvalues().cast<Complex>() * Complex(0, -t)).array().exp();
  return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

inline WaveState evolve(const WaveState& psi, const Hamiltonian& h, double dt, std::size_t steps) {
  if (h.dimension() != psi.dimension())
    throw Error(Errc::dimension_mismatch, "Hamiltonian dimension " + std::to_string(h.dimension()) + " vs state " +
                                              std::to_string(psi.dimension()));
  CMatrix u = propagator(h, dt);
  CVector v = psi.amplitudes();
  for (std::size_t s = 0; s < steps; ++s) v = u * v;
  return psi.with_amplitudes(std::move(v));
}

// Raw bracket <psi|O|psi>; imaginary residue is returned for inspection.
struct Bracket {
  double value = 0;
  double imaginary = 0;
};

inline Bracket expectation(const WaveState& psi, const CMatrix& observable) {
  require_hermitian(observable, "observable");
  if (static_cast<std::size_t>(observable.rows()) != psi.dimension())
    throw Error(Errc::dimension_mismatch, "observable does not match the state");
  Complex z = psi.amplitudes().dot(observable * psi.amplitudes());
  return {z.real(), z.imag()};
}

// ---- projectors and relative states ----

struct ProjectorSpec {
  std::string factor;
  std::vector<std::string> labels;  // basis labels spanning the subspace
  std::vector<CVector> span;        // or an explicit orthonormal spanning set
};

inline void require_projector(const CMatrix& p, const std::string& what) {
  require_hermitian(p, what, kProjectorTol);
  double idem = (p * p - p).cwiseAbs().maxCoeff();
  if (idem >= kProjectorTol) throw Error(Errc::invalid_argument, what + " is not idempotent (defect " + std::to_string(idem) + ")");
}

inline CMatrix factor_projector(const Factor& f, const ProjectorSpec& spec) {
  const auto d = static_cast<Eigen::Index>(f.dim());
  CMatrix p = CMatrix::Zero(d, d);
  for (auto& l : spec.labels) {
    auto it = std::find(f.basis.begin(), f.basis.end(), l);
    if (it == f.basis.end()) throw Error(Errc::invalid_argument, "factor '" + f.name + "' has no label '" + l + "'");
    auto k = static_cast<Eigen::Index>(it - f.basis.begin());
    p(k, k) = 1.0;
  }
  for (auto& v : spec.span) {
    if (v.size() != d) throw Error(Errc::dimension_mismatch, "spanning vector does not match factor '" + f.name + "'");
    p += v * v.adjoint();
  }
  require_projector(p, "projector on '" + f.name + "'");
  return p;
}

inline CMatrix projector(const std::vector<Factor>& factors, const ProjectorSpec& spec) {
  for (std::size_t k = 0; k < factors.size(); ++k)
    if (factors[k].name == spec.factor) return lift(factors, k, factor_projector(factors[k], spec));
  throw Error(Errc::invalid_argument, "no factor named '" + spec.factor + "'");
}

struct RelativeState {
  WaveState state;  // conditioned and renormalized
  double weight = 0;
};

inline RelativeState relative_state(const WaveState& psi, const ProjectorSpec& condition) {
  WaveState projected = quantum::apply(projector(psi.factors(), condition), psi);
  double w = projected.norm2();
  if (w < 1e-14) throw Error(Errc::zero_overlap, "condition on '" + condition.factor + "' has no overlap with the state");
  return {projected.normalized(), w};
}

// ---- position grids and the harmonic well ----

struct Grid1d {
  std::size_t n = 64;
  double lo = -8, hi = 8;
  double h() const { return (hi - lo) / static_cast<double>(n - 1); }
  double x(std::size_t k) const { return lo + h() * static_cast<double>(k); }
  Factor as_factor(const std::string& name) const { return factor(name, n, name); }
};

inline CMatrix position_operator(const Grid1d& g) {
  CMatrix x = CMatrix::Zero(static_cast<Eigen::Index>(g.n), static_cast<Eigen::Index>(g.n));
  for (std::size_t k = 0; k < g.n; ++k) x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = g.x(k);
  return x;
}

// Central difference -i d/dx; for the three-point kinetic term i[H, x] equals this over m exactly.
inline CMatrix momentum_operator(const Grid1d& g) {
  const auto n = static_cast<Eigen::Index>(g.n);
  CMatrix p = CMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    p(k, k + 1) = Complex(0, -1.0 / (2 * g.h()));
    p(k + 1, k) = Complex(0, 1.0 / (2 * g.h()));
  }
  return p;
}

inline CMatrix kinetic_operator(const Grid1d& g, double mass) {
  const auto n = static_cast<Eigen::Index>(g.n);
  const double c = 1.0 / (2 * mass * g.h() * g.h());
  CMatrix t = CMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    t(k, k) = 2 * c;
    if (k + 1 < n) t(k, k + 1) = t(k + 1, k) = -c;
  }
  return t;
}

struct HarmonicWell {
  Grid1d grid{384, -9, 9};
  double mass = 1;
  double k = 1;
  double omega() const { return std::sqrt(k / mass); }
};

inline Hamiltonian harmonic_hamiltonian(const HarmonicWell& w) {
  CMatrix h = kinetic_operator(w.grid, w.mass);
  for (std::size_t i = 0; i < w.grid.n; ++i) {
    const double x = w.grid.x(i);
    h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += 0.5 * w.k * x * x;
  }
  return Hamiltonian(std::move(h));
}

// Ground-state-width Gaussian centred at x0 with mean momentum p0, normalized on the grid.
inline CVector coherent_packet(const HarmonicWell& w, double x0, double p0 = 0) {
  const double s2 = 1.0 / (w.mass * w.omega());
  CVector v(static_cast<Eigen::Index>(w.grid.n));
  for (std::size_t i = 0; i < w.grid.n; ++i) {
    const double x = w.grid.x(i);
    v(static_cast<Eigen::Index>(i)) = std::exp(-(x - x0) * (x - x0) / (2 * s2)) * std::exp(Complex(0, p0 * x));
  }
  return v / v.norm();
}

struct BracketSample {
  double t = 0;
  double X = 0;
  double V = 0;
};

// X = <x>, V = <p>/m along an exact evolution.
inline std::vector<BracketSample> bracket_trajectory(const HarmonicWell& w, const WaveState& psi0, double dt,
                                                     std::size_t steps) {
  Hamiltonian h = harmonic_hamiltonian(w);
  CMatrix u = propagator(h, dt);
  CMatrix x = position_operator(w.grid), p = momentum_operator(w.grid);
  std::vector<BracketSample> out;
  CVector v = psi0.amplitudes();
  for (std::size_t s = 0; s <= steps; ++s) {
    WaveState cur = psi0.with_amplitudes(v);
    out.push_back({dt * static_cast<double>(s), expectation(cur, x).value, expectation(cur, p).value / w.mass});
    v = u * v;
  }
  return out;
}

struct OscillatorCheck {
  double rate_error = 0;        // max |dX/dt - V| / (X0 w)
  double force_error = 0;       // max |dV/dt + (k/m) X| / (X0 w^2)
  double closed_form_error = 0; // max |X - X0 cos(w t)| / X0
  bool holds = false;
};

// Classical oscillator rule dX/dt = V, dV/dt = -(k/m) X checked by central differences.
inline OscillatorCheck oscillator_rule_check(const std::vector<BracketSample>& tr, const HarmonicWell& w, double x0,
                                             double tol = 0.01) {
  if (tr.size() < 3) throw Error(Errc::invalid_argument, "trajectory too short for the oscillator check");
  OscillatorCheck c;
  const double om = w.omega();
  for (std::size_t s = 1; s + 1 < tr.size(); ++s) {
    const double dt = tr[s + 1].t - tr[s - 1].t;
    const double dx = (tr[s + 1].X - tr[s - 1].X) / dt;
    const double dv = (tr[s + 1].V - tr[s - 1].V) / dt;
    c.rate_error = std::max(c.rate_error, std::fabs(dx - tr[s].V) / (std::fabs(x0) * om));
    c.force_error = std::max(c.force_error, std::fabs(dv + om * om * tr[s].X) / (std::fabs(x0) * om * om));
  }
  for (auto& s : tr) c.closed_form_error = std::max(c.closed_form_error, std::fabs(s.X - x0 * std::cos(om * s.t)) / std::fabs(x0));
  c.holds = c.rate_error <= tol && c.force_error <= tol && c.closed_form_error <= tol;
  return c;
}

// ---- SSI for bracket mappings ----

using BracketFn = std::function<double(const WaveState&)>;

struct BracketUnit {
  std::string name;
  std::vector<BracketFn> brackets;     // one per formal substate of the unit
  std::vector<std::string> inherits;   // factors whose position labels the unit inherits
};

inline BracketFn bracket_of(CMatrix op) {
  return [op = std::move(op)](const WaveState& s) { return expectation(s, op).value; };
}

namespace detail {

// Permutation of amplitude slots induced by relabeling one factor's basis.
inline std::vector<std::size_t> factor_relabel(const WaveState& shape, std::size_t f, const std::vector<std::size_t>& sigma) {
  std::vector<std::size_t> perm(shape.dimension());
  for (std::size_t i = 0; i < shape.dimension(); ++i) {
    auto m = shape.multi_index(i);
    m[f] = sigma[m[f]];
    perm[i] = shape.flat_index(m);
  }
  return perm;
}

inline std::vector<std::size_t> compose_slots(const std::vector<std::size_t>& outer, const std::vector<std::size_t>& inner) {
  std::vector<std::size_t> out(inner.size());
  for (std::size_t i = 0; i < inner.size(); ++i) out[i] = outer[inner[i]];
  return out;
}

inline WaveState permute_slots(const WaveState& psi, const std::vector<std::size_t>& perm) {
  CVector v(psi.amplitudes().size());
  for (std::size_t i = 0; i < perm.size(); ++i) v(static_cast<Eigen::Index>(perm[i])) = psi.amplitudes()(static_cast<Eigen::Index>(i));
  return psi.with_amplitudes(std::move(v));
}

// Encodes amplitudes as interleaved real/imaginary values so the finite-domain SSI core applies.
inline FormalState encode(const WaveState& psi) {
  std::vector<Value> v;
  v.reserve(2 * psi.dimension());
  for (auto a : psi.amplitudes()) {
    v.push_back(a.real());
    v.push_back(a.imag());
  }
  return FormalState(std::move(v));
}

inline SubstatePermutation encode_perm(const std::vector<std::size_t>& slots) {
  SubstatePermutation p(2 * slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    p[2 * i] = 2 * slots[i];
    p[2 * i + 1] = 2 * slots[i] + 1;
  }
  return p;
}

inline Value quantize(double v) { return std::nearbyint(v * 1e9) / 1e9; }

}  // namespace detail

// Relabels a factor's basis by sigma (label k moves to sigma[k]).
inline WaveState permute_factor(const WaveState& psi, const std::string& f, const std::vector<std::size_t>& sigma) {
  auto k = psi.factor_index(f);
  if (sigma.size() != psi.factors()[k].dim()) throw Error(Errc::dimension_mismatch, "permutation size does not match factor");
  return detail::permute_slots(psi, detail::factor_relabel(psi, k, sigma));
}

// SSI over the closure of sample states under every unit's inherited relabelings.
inline SsiReport bracket_ssi(const std::vector<WaveState>& samples, const std::vector<BracketUnit>& units,
                             std::uint64_t seed = 0) {
  if (samples.empty()) throw Error(Errc::invalid_argument, "bracket SSI needs sample states");
  const WaveState& shape = samples.front();
  std::vector<SsiUnit> su;
  std::vector<std::vector<std::vector<std::size_t>>> slot_groups;
  std::vector<std::size_t> all(2 * shape.dimension());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (auto& u : units) {
    std::vector<std::vector<std::size_t>> group;
    std::vector<std::size_t> id(shape.dimension());
    std::iota(id.begin(), id.end(), std::size_t{0});
    group.push_back(id);
    std::size_t order = 1;
    for (auto& f : u.inherits) {
      auto k = shape.factor_index(f);
      for (std::size_t m = 2; m <= shape.factors()[k].dim(); ++m) order *= m;
    }
    bool exhaustive = order <= kExhaustivePermutationLimit;
    std::mt19937_64 rng(derive_seed(seed, "bracket-ssi/" + u.name));
    auto extend = [&](std::size_t k, const std::vector<std::size_t>& sigma) {
      auto rel = detail::factor_relabel(shape, k, sigma);
      std::vector<std::vector<std::size_t>> next;
      for (auto& g : group) next.push_back(detail::compose_slots(rel, g));
      return next;
    };
    if (exhaustive) {
      for (auto& f : u.inherits) {
        auto k = shape.factor_index(f);
        std::vector<std::size_t> sigma(shape.factors()[k].dim());
        std::iota(sigma.begin(), sigma.end(), std::size_t{0});
        std::vector<std::vector<std::size_t>> grown;
        do {
          auto part = extend(k, sigma);
          grown.insert(grown.end(), part.begin(), part.end());
        } while (std::next_permutation(sigma.begin(), sigma.end()));
        group = std::move(grown);
      }
    } else {
      for (std::size_t s = 0; s < kRandomPermutationSamples; ++s) {
        auto g = id;
        for (auto& f : u.inherits) {
          auto k = shape.factor_index(f);
          std::vector<std::size_t> sigma(shape.factors()[k].dim());
          std::iota(sigma.begin(), sigma.end(), std::size_t{0});
          std::shuffle(sigma.begin(), sigma.end(), rng);
          g = detail::compose_slots(detail::factor_relabel(shape, k, sigma), g);
        }
        group.push_back(std::move(g));
      }
    }
    PermutationSample ps;
    ps.exhaustive = exhaustive;
    ps.group_order = order;
    for (auto& g : group) ps.elements.push_back(detail::encode_perm(g));
    su.push_back({u.name, all, std::move(ps)});
    slot_groups.push_back(std::move(group));
  }

  std::vector<WaveState> domain_states;
  std::set<std::vector<Value>> seen;
  auto add = [&](const WaveState& w) {
    auto e = detail::encode(w);
    if (seen.insert(e.values()).second) domain_states.push_back(w);
  };
  for (auto& s : samples) {
    if (!same_structure(s, shape)) throw Error(Errc::dimension_mismatch, "bracket SSI samples differ in structure");
    std::vector<WaveState> frontier{s};
    for (auto& group : slot_groups) {
      std::vector<WaveState> grown;
      for (auto& w : frontier)
        for (auto& g : group) grown.push_back(detail::permute_slots(w, g));
      frontier = std::move(grown);
    }
    for (auto& w : frontier) add(w);
  }
  std::vector<FormalState> domain;
  std::vector<std::vector<std::vector<Value>>> values(units.size());
  for (auto& w : domain_states) {
    domain.push_back(detail::encode(w));
    for (std::size_t u = 0; u < units.size(); ++u) {
      std::vector<Value> v;
      for (auto& b : units[u].brackets) v.push_back(detail::quantize(b(w)));
      values[u].push_back(std::move(v));
    }
  }
  SsiReport rep;
  rep.domain_size = domain.size();
  rep.units = ssi_core(domain, values, su);
  for (auto& r : rep.units) rep.passed = rep.passed && r.passed;
  return rep;
}

// ---- schematic brain/environment mapping ----

struct SchematicMapping {
  std::vector<CMatrix> brain;        // P_b_i on the full space
  std::vector<CMatrix> environment;  // P_s_j on the full space
  double delta = 0.1;
  std::optional<CMatrix> safety;     // defaults to the complement of all declared b x s subspaces
};

struct SchematicReading {
  std::optional<std::size_t> state;  // index into the brain projectors
  std::vector<double> F;             // F(i, env) for every brain index
  double safety = 0;
  double delta = 0;
  std::string reason;
};

inline CMatrix default_safety(const SchematicMapping& m) {
  if (m.brain.empty() || m.environment.empty()) throw Error(Errc::invalid_argument, "schematic mapping needs projectors");
  const auto d = m.brain.front().rows();
  CMatrix covered = CMatrix::Zero(d, d);
  for (auto& b : m.brain)
    for (auto& s : m.environment) covered += b * s;
  CMatrix c = CMatrix::Identity(d, d) - covered;
  require_projector(c, "safety operator");
  return c;
}

inline SchematicReading formal_state_schematic(const WaveState& psi, const SchematicMapping& m, bool initial_step,
                                               std::size_t env = 0) {
  if (m.delta < 0) throw Error(Errc::invalid_argument, "delta must be nonnegative");
  if (env >= m.environment.size()) throw Error(Errc::invalid_argument, "environment index out of range");
  for (auto& p : m.brain) require_projector(p, "brain projector");
  for (auto& p : m.environment) require_projector(p, "environment projector");
  SchematicReading r;
  r.delta = m.delta;
  const CVector& v = psi.amplitudes();
  for (auto& b : m.brain) r.F.push_back(v.dot(b * (m.environment[env] * v)).real());
  CMatrix c = m.safety ? *m.safety : default_safety(m);
  r.safety = v.dot(c * v).real();
  const double total = std::accumulate(r.F.begin(), r.F.end(), 0.0);
  const double factor = initial_step ? 1 + m.delta : 1.0;
  for (std::size_t i = 0; i < r.F.size(); ++i) {
    if (r.F[i] > factor * (total - r.F[i])) {
      if (r.safety >= r.F[i]) {
        r.reason = "safety bracket is not below F";
        return r;
      }
      r.state = i;
      return r;
    }
  }
  r.reason = "no brain index dominates";
  return r;
}

// The four-term example wavefunction with a rest term; factors b, e, s, g.
// Brain and near-environment label 0 and environment label 0 are the undeclared rest.
inline WaveState schematic_example(Complex a, Complex b, Complex c, Complex d, Complex e, bool later) {
  std::vector<Factor> fs = {factor("b", 7, "b"), factor("e", 7, "e"), factor("s", 3, "s"), factor("g", 1, "g")};
  auto term = [&](std::size_t bi, std::size_t ei, std::size_t si) { return WaveState::basis_state(fs, {bi, ei, si, 0}); };
  WaveState psi = later ? a * term(3, 1, 1) + b * term(4, 2, 1) + c * term(5, 3, 2) + d * term(6, 6, 2)
                        : a * term(1, 1, 1) + b * term(2, 2, 1) + c * term(3, 3, 2) + d * term(4, 4, 2);
  return psi + e * term(0, 0, 0);
}

inline SchematicMapping schematic_mapping(const WaveState& shape, double delta = 0.1) {
  SchematicMapping m;
  m.delta = delta;
  for (std::size_t i = 1; i <= 6; ++i) m.brain.push_back(projector(shape.factors(), {"b", {"b" + std::to_string(i)}, {}}));
  for (std::size_t j = 1; j <= 2; ++j) m.environment.push_back(projector(shape.factors(), {"s", {"s" + std::to_string(j)}, {}}));
  return m;
}

// ---- the bit rule and interference ----

// 0 when |<0|s>| > |<1|s>|, 1 when smaller, undefined when equal.
inline std::optional<int> bit_reading(const CVector& s, double tol = 1e-12) {
  if (s.size() != 2) throw Error(Errc::dimension_mismatch, "bit reading needs a two-level state");
  const double a0 = std::abs(s(0)), a1 = std::abs(s(1));
  if (std::fabs(a0 - a1) <= tol * std::max(1.0, std::max(a0, a1))) return std::nullopt;
  return a0 > a1 ? 0 : 1;
}

struct InterferenceDemo {
  std::optional<int> before;
  std::optional<int> after;
};

inline InterferenceDemo interference_demo(const CVector& base, const CVector& added) {
  return {bit_reading(base), bit_reading(base + added)};
}

// ---- ENRC counting ----

// Round-half-even count of equal-norm components of norm eps.
inline long long enrc_count(Complex a, double eps) {
  if (!(eps > 0)) throw Error(Errc::invalid_argument, "epsilon must be positive");
  return static_cast<long long>(std::nearbyint(std::norm(a) / (eps * eps)));
}

struct EnrcStage {
  double eps = 0;
  long long count_a = 0;
  long long count_b = 0;
  double ratio = 0;
  double error = 0;
  double bound = 0;           // eps^2 / min(|a|^2, |b|^2)
  double rounding_bound = 0;  // worst case of half-unit rounding in both counts
  bool within = false;
};

struct EnrcReport {
  std::vector<EnrcStage> stages;
  double limit = 0;
  bool within_bound = true;
};

inline EnrcReport enrc_ratio(Complex a, Complex b, const std::vector<double>& schedule) {
  if (std::norm(b) == 0) throw Error(Errc::invalid_argument, "reference amplitude must be nonzero");
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (!(schedule[k] > 0)) throw Error(Errc::invalid_argument, "epsilon schedule must be positive");
    if (k && !(schedule[k] < schedule[k - 1])) throw Error(Errc::non_monotone, "epsilon schedule must strictly decrease");
  }
  EnrcReport rep;
  rep.limit = std::norm(a) / std::norm(b);
  const double mn = std::min(std::norm(a), std::norm(b));
  for (double eps : schedule) {
    EnrcStage s;
    s.eps = eps;
    s.count_a = enrc_count(a, eps);
    s.count_b = enrc_count(b, eps);
    if (s.count_b == 0) throw Error(Errc::invalid_argument, "epsilon too coarse: reference count is zero");
    s.ratio = static_cast<double>(s.count_a) / static_cast<double>(s.count_b);
    s.error = std::fabs(s.ratio - rep.limit);
    s.bound = mn > 0 ? eps * eps / mn : std::numeric_limits<double>::infinity();
    const double A = std::norm(a) / (eps * eps), B = std::norm(b) / (eps * eps);
    s.rounding_bound = B > 0.5 ? 0.5 * (A + B) / (B * (B - 0.5)) : std::numeric_limits<double>::infinity();
    s.within = s.error <= s.bound;
    rep.within_bound = rep.within_bound && s.within;
    rep.stages.push_back(s);
  }
  return rep;
}

// ---- probability rules ----

enum class Rule { born, app, gapp, intrinsic, gbr, abr, mapp };

inline std::string to_string(Rule r) {
  switch (r) {
    case Rule::born: return "BORN";
    case Rule::app: return "APP";
    case Rule::gapp: return "GAPP";
    case Rule::intrinsic: return "INTRINSIC";
    case Rule::gbr: return "GBR";
    case Rule::abr: return "ABR";
    case Rule::mapp: return "MAPP";
  }
  return "?";
}

inline Rule parse_rule(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto r : {Rule::born, Rule::app, Rule::gapp, Rule::intrinsic, Rule::gbr, Rule::abr, Rule::mapp})
    if (to_string(r) == s) return r;
  throw Error(Errc::invalid_argument, "unknown probability rule '" + s + "'");
}

struct Branch {
  Complex amplitude;
  CVector component;                       // unit vector; empty means its own basis direction
  std::vector<std::string> observations;   // observers present in the branch
  std::optional<double> l_factor;
  std::optional<double> lives;
  std::optional<double> relative_count;    // orthogonal relative states in the preferred basis
};

struct BranchDecomposition {
  std::vector<Branch> branches;

  void validate() const {
    double total = 0;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      auto& b = branches[i];
      total += std::norm(b.amplitude);
      if (b.observations.empty()) throw Error(Errc::invalid_argument, "branch " + std::to_string(i) + " has no observation");
      if (b.component.size() == 0) continue;
      if (std::fabs(b.component.norm() - 1) > 1e-10)
        throw Error(Errc::invalid_argument, "branch " + std::to_string(i) + " component is not a unit vector");
      for (std::size_t j = 0; j < i; ++j) {
        auto& c = branches[j].component;
        if (c.size() == 0) continue;
        if (c.size() != b.component.size()) throw Error(Errc::dimension_mismatch, "branch components differ in dimension");
        if (std::abs(c.dot(b.component)) >= 1e-10)
          throw Error(Errc::invalid_argument, "branches " + std::to_string(j) + " and " + std::to_string(i) + " are not orthogonal");
      }
    }
    if (total > 1 + 1e-10) throw Error(Errc::invalid_argument, "branch weights exceed one");
  }
  double rest_weight() const {
    double total = 0;
    for (auto& b : branches) total += std::norm(b.amplitude);
    return std::max(0.0, 1 - total);
  }
};

struct RuleResult {
  Rule rule = Rule::born;
  std::vector<std::string> observations;  // sorted
  std::vector<double> measures;
  std::vector<double> probabilities;
  double total = 0;

  double probability(const std::string& o) const {
    for (std::size_t k = 0; k < observations.size(); ++k)
      if (observations[k] == o) return probabilities[k];
    return 0;
  }
  double measure(const std::string& o) const {
    for (std::size_t k = 0; k < observations.size(); ++k)
      if (observations[k] == o) return measures[k];
    return 0;
  }
};

inline RuleResult probability_rule(const BranchDecomposition& dec, Rule rule,
                                   const std::map<std::string, double>& intrinsic = {}) {
  dec.validate();
  std::map<std::string, double> m;
  std::set<std::string> present;
  for (auto& b : dec.branches) {
    if (rule == Rule::app && b.observations.size() > 1)
      throw Error(Errc::invalid_argument, "APP takes one observation per branch; use GAPP for overlapping observers");
    const double w = std::norm(b.amplitude);
    for (auto& o : b.observations) {
      m.try_emplace(o, 0.0);
      if (w > 0) present.insert(o);
      switch (rule) {
        case Rule::born: m[o] += w; break;
        case Rule::gbr:
          if (!b.l_factor) throw Error(Errc::invalid_argument, "GBR needs an L-factor on every branch");
          m[o] += *b.l_factor * w;
          break;
        case Rule::abr:
          if (!b.lives) throw Error(Errc::invalid_argument, "ABR needs a life count on every branch");
          m[o] += *b.lives * w;
          break;
        case Rule::mapp:
          if (!b.relative_count) throw Error(Errc::invalid_argument, "MAPP needs relative-state counts on every branch");
          if (w > 0) m[o] += *b.relative_count;
          break;
        default: break;
      }
    }
  }
  if (rule == Rule::app || rule == Rule::gapp || rule == Rule::intrinsic) {
    for (auto& [o, v] : m) {
      if (!present.count(o)) continue;
      if (rule == Rule::intrinsic) {
        auto it = intrinsic.find(o);
        if (it == intrinsic.end()) throw Error(Errc::invalid_argument, "no intrinsic measure for '" + o + "'");
        v = it->second;
      } else {
        v = 1;
      }
    }
  }
  RuleResult r;
  r.rule = rule;
  for (auto& [o, v] : m) {
    r.observations.push_back(o);
    r.measures.push_back(v);
    r.total += v;
  }
  if (!(r.total > 0)) throw Error(Errc::invalid_argument, "total measure is zero under " + to_string(rule));
  for (double v : r.measures) r.probabilities.push_back(v / r.total);
  return r;
}

// Branches per labeled observer basis state; the preferred basis is the product basis of the other factors.
inline BranchDecomposition decompose(const WaveState& psi, const std::string& observer,
                                     const std::map<std::string, std::string>& labels, double tol = 1e-9) {
  const auto f = psi.factor_index(observer);
  BranchDecomposition dec;
  const double norm = std::sqrt(psi.norm2());
  if (norm == 0) throw Error(Errc::zero_overlap, "cannot decompose the zero state");
  for (std::size_t o = 0; o < psi.factors()[f].dim(); ++o) {
    auto it = labels.find(psi.factors()[f].basis[o]);
    if (it == labels.end()) continue;
    CVector comp = CVector::Zero(psi.amplitudes().size());
    double count = 0;
    for (std::size_t i = 0; i < psi.dimension(); ++i) {
      if (psi.multi_index(i)[f] != o) continue;
      Complex a = psi.amplitudes()(static_cast<Eigen::Index>(i)) / norm;
      comp(static_cast<Eigen::Index>(i)) = a;
      if (std::abs(a) > tol) count += 1;
    }
    const double w = comp.norm();
    Branch b;
    b.amplitude = w;
    b.component = w > 0 ? CVector(comp / w) : CVector::Zero(0);
    b.observations = {it->second};
    b.relative_count = count;
    dec.branches.push_back(std::move(b));
  }
  return dec;
}

// ---- noncontextuality of measure ----

using MeasureFn = std::function<double(const CVector&)>;  // over the basis (Dead, Alive, Dead2)

inline MeasureFn lives_weighted(double dead, double alive, double dead2) {
  return [=](const CVector& v) { return dead * std::norm(v(0)) + alive * std::norm(v(1)) + dead2 * std::norm(v(2)); };
}

struct NoncontextualityDemo {
  double m3 = 0;
  double m4 = 0;
  double inner12 = 0;
  bool conditions_met = false;
  bool holds = false;
};

inline NoncontextualityDemo noncontextuality_demo(const MeasureFn& m) {
  const CVector dead = CVector::Unit(3, 0), alive = CVector::Unit(3, 1), dead2 = CVector::Unit(3, 2);
  const double r2 = std::sqrt(2.0);
  CVector psi1 = (dead + alive) / r2, psi2 = (dead - alive) / r2;
  CVector psi3 = (psi1 + dead2) / r2, psi4 = (psi1 + psi2) / r2;
  NoncontextualityDemo d;
  d.inner12 = std::abs(psi1.dot(psi2));
  d.m3 = m(psi3);
  d.m4 = m(psi4);
  constexpr double zero = 1e-24;
  d.conditions_met = true;
  for (Complex a : {Complex(1), Complex(0.5), Complex(0, 0.3), Complex(-2)})
    d.conditions_met = d.conditions_met && std::fabs(m(a * dead)) <= zero && std::fabs(m(a * dead2)) <= zero;
  d.conditions_met = d.conditions_met && m(0.5 * alive) > 0;
  d.holds = d.conditions_met && std::fabs(d.m4) <= zero && d.m3 > 0 && d.inner12 < 1e-15;
  return d;
}

// ---- locality of measure ----

struct LocalityReport {
  std::vector<double> times;
  std::vector<double> measure;
  double drift = 0;
};

inline void require_environment_only(const WaveState& shape, std::size_t f, const CMatrix& h) {
  const auto n = shape.dimension();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      auto mi = shape.multi_index(i), mj = shape.multi_index(j);
      const Complex hij = h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (mi[f] != mj[f]) {
        if (std::abs(hij) > kHermitianTol) throw Error(Errc::invalid_argument, "Hamiltonian touches the observer factor");
        continue;
      }
      mi[f] = mj[f] = 0;
      const Complex ref = h(static_cast<Eigen::Index>(shape.flat_index(mi)), static_cast<Eigen::Index>(shape.flat_index(mj)));
      if (std::abs(hij - ref) > kHermitianTol) throw Error(Errc::invalid_argument, "Hamiltonian touches the observer factor");
    }
}

inline LocalityReport locality_check(const WaveState& psi, const std::string& observer,
                                     const std::map<std::string, std::string>& labels, const std::string& target,
                                     const Hamiltonian& h, double dt, std::size_t steps, Rule rule) {
  if (h.dimension() != psi.dimension()) throw Error(Errc::dimension_mismatch, "Hamiltonian does not match the state");
  require_environment_only(psi, psi.factor_index(observer), h.matrix);
  CMatrix u = propagator(h, dt);
  LocalityReport rep;
  CVector v = psi.amplitudes();
  for (std::size_t s = 0; s <= steps; ++s) {
    auto res = probability_rule(decompose(psi.with_amplitudes(v), observer, labels), rule);
    rep.times.push_back(dt * static_cast<double>(s));
    rep.measure.push_back(res.measure(target));
    rep.drift = std::max(rep.drift, std::fabs(rep.measure.back() - rep.measure.front()));
    v = u * v;
  }
  return rep;
}

// ---- measure ansatz ----

struct AnsatzReport {
  std::vector<double> measure;
  std::vector<double> ratio;  // M_i / A_i^2
  double mean_ratio = 0;
  std::vector<bool> flagged;  // deviation from the mean ratio above 10%
  std::vector<int> direction; // +1 elevated, -1 depressed, 0 within tolerance
};

inline AnsatzReport measure_ansatz(const std::vector<double>& A, const std::vector<double>& C,
                                   const std::vector<std::vector<double>>& eps, double tolerance = 0.1) {
  const std::size_t n = A.size();
  if (n == 0 || C.size() != n || eps.size() != n) throw Error(Errc::dimension_mismatch, "ansatz inputs differ in size");
  for (std::size_t i = 0; i < n; ++i) {
    if (eps[i].size() != n) throw Error(Errc::dimension_mismatch, "noise matrix is not square");
    if (!(A[i] > 0)) throw Error(Errc::invalid_argument, "amplitudes must be positive");
    for (double e : eps[i])
      if (!(e > 0)) throw Error(Errc::invalid_argument, "noise parameters must be positive");
  }
  AnsatzReport r;
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0;
    for (std::size_t j = 0; j < n; ++j) m += C[i] * A[i] * A[i] / (eps[i][j] * A[j] * A[j]);
    r.measure.push_back(m);
    r.ratio.push_back(m / (A[i] * A[i]));
  }
  r.mean_ratio = std::accumulate(r.ratio.begin(), r.ratio.end(), 0.0) / static_cast<double>(n);
  for (double q : r.ratio) {
    const double dev = (q - r.mean_ratio) / r.mean_ratio;
    r.flagged.push_back(std::fabs(dev) > tolerance);
    r.direction.push_back(std::fabs(dev) > tolerance ? (dev > 0 ? 1 : -1) : 0);
  }
  return r;
}

}  // namespace mcilab::quantum
