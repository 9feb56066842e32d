#ifndef PQLAB_SPECTRUM_HPP
#define PQLAB_SPECTRUM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "pqlab/discrete.hpp"
#include "pqlab/linalg.hpp"

namespace pqlab {

struct EigenPair {
  double lambda = 0.0;
  GridFunction phi;  // ‖φ‖_r = 1
  double r = 2.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Thrown when the eigensolver runs out of iterations; carries the last
/// iterate.
class eigen_convergence_error : public convergence_error {
 public:
  eigen_convergence_error(const std::string& what, EigenPair last)
      : convergence_error(what), last_(std::move(last)) {}
  const EigenPair& last() const { return last_; }

 private:
  EigenPair last_;
};

struct EigenOptions {
  int max_iter = 500;
  double tol_quotient = 1e-12;
  double tol_residual = 1e-8;
  double eps_reg = 1e-10;
  std::optional<GridFunction> initial;
};

/// Weak residual of -Δ_r φ = λ|φ|^{r-2}φ as a nodal vector.
inline Vec eigen_residual(const GridFunction& phi, double r, double lambda, double eps = 1e-10) {
  return terms_gradient(phi, {{Term::Kind::grad, r, 1.0}, {Term::Kind::mass, r, -lambda}}, eps);
}

namespace detail {

/// Newton's method with backtracking for the convex problem
/// min (1/r)‖∇v‖_r^r - b·v, i.e. -Δ_r v = b weakly, at a fixed
/// regularization. Converged when the dual residual drops below
/// 1e-11‖b‖, or stagnates below `loose`‖b‖ (the rounding floor of the flux
/// sums).
inline bool newton_r_poisson(GridFunction& v, const Vec& b, double r, double eps, double loose, int max_newton) {
  const Terms terms{{Term::Kind::grad, r, 1.0}};
  const double vol = v.mesh->node_volume();
  const double bn = dual_norm(b, vol);
  auto phi = [&](const GridFunction& w) { return terms_value(w, terms, eps) - b.dot(as_vec(w)); };
  double f = phi(v);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_newton; ++it) {
    const Vec g = terms_gradient(v, terms, eps) - b;
    const double gn = dual_norm(g, vol);
    if (gn <= 1e-11 * bn || (gn <= loose * bn && gn > 0.5 * prev)) return true;
    prev = gn;
    const SpMat hm = terms_hessian(v, terms, eps);
    auto step = sparse_solve(hm, -g);
    Vec d = step ? *step : Vec(-g);
    if (d.dot(g) >= 0.0) d = -g;
    // Armijo on the energy, or plain residual decrease: near the solution
    // the energy decrease drowns in rounding.
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60 && !accepted; ++ls, t *= 0.5) {
      GridFunction trial = v;
      as_vec(trial) += t * d;
      const double ft = phi(trial);
      if (ft <= f + 1e-4 * t * d.dot(g) ||
          dual_norm(terms_gradient(trial, terms, eps) - b, vol) < (1.0 - 1e-4 * t) * gn) {
        v = std::move(trial);
        f = ft;
        accepted = true;
      }
    }
    if (!accepted) return gn <= loose * bn;
  }
  return dual_norm(terms_gradient(v, terms, eps) - b, vol) <= loose * bn;
}

/// Mean of |∇u|^2 over the elements; sets the scale of the regularization.
inline double mean_grad2(const GridFunction& u) {
  const double inv_h = 1.0 / u.mesh->h();
  double s = 0.0, w = 0.0;
  for (const auto& e : u.mesh->elements()) {
    s += e.vol * element_gradient(e, u.values, inv_h).norm2;
    w += e.vol;
  }
  return w > 0.0 ? s / w : 0.0;
}

/// For r < 2 the Hessian blows up where ∇v is small and plain Newton
/// crawls; continuation from a large regularization down to `eps` fixes it.
inline bool solve_r_poisson(GridFunction& v, const Vec& b, double r, double eps, int max_newton = 200) {
  if (r < 2.0) {
    double e = std::max(eps, 1e-2 * mean_grad2(v));
    while (e > eps * 1.000001) {
      newton_r_poisson(v, b, r, e, 1e-6, 30);
      e = std::max(eps, e * 1e-2);
    }
  }
  return newton_r_poisson(v, b, r, eps, 1e-7, max_newton);
}

/// Solution of -Δv = 1 (discrete torsion function); positive, used as the
/// default start of the eigensolver.
inline GridFunction torsion_function(const MeshPtr& mesh) {
  const Vec b = Vec::Constant(mesh->size(), mesh->node_volume());
  auto x = sparse_solve(laplacian(mesh), b);
  if (!x) throw convergence_error("torsion_function: Laplacian solve failed");
  return to_grid(mesh, *x);
}

/// Newton on the bordered system -Δ_r u = λ|u|^{r-2}u, ‖u‖_r^r = 1 with the
/// regularized flux. Keeps the input when no step improves the residual.
inline void polish_eigenpair(GridFunction& u, double& lambda, double r, double eps, int max_newton = 20) {
  const double vol = u.mesh->node_volume();
  const int n = u.size();
  auto residual = [&](const GridFunction& w, double lam) {
    Vec f(n + 1);
    f.head(n) = eigen_residual(w, r, lam, eps);
    f[n] = lr_norm(w, r) - 1.0;
    return f;
  };
  auto merit = [&](const Vec& f) { return std::sqrt(f.head(n).squaredNorm() / vol + f[n] * f[n]); };
  Vec f = residual(u, lambda);
  double m = merit(f);
  for (int it = 0; it < max_newton && m > 1e-13; ++it) {
    const SpMat k = terms_hessian(u, {{Term::Kind::grad, r, 1.0}, {Term::Kind::mass, r, -lambda}}, eps);
    Eigen::MatrixXd col(n, 1), row(1, n), corner = Eigen::MatrixXd::Zero(1, 1);
    for (int i = 0; i < n; ++i) {
      const double mi = vol * odd_pow(u.values[i], r - 1.0);
      col(i, 0) = -mi;
      row(0, i) = r * mi;
    }
    auto d = sparse_solve(bordered(k, col, row, corner), -f, false);
    if (!d) return;
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      GridFunction trial = u;
      as_vec(trial) += t * d->head(n);
      const double lt = lambda + t * (*d)[n];
      const Vec ft = residual(trial, lt);
      const double mt = merit(ft);
      if (mt < m) {
        u = std::move(trial);
        lambda = lt;
        f = ft;
        improved = mt < 0.9 * m;
        m = mt;
        break;
      }
    }
    if (!improved) return;
  }
}

inline GridFunction normalize_lr(GridFunction u, double r) {
  const double n = lr_norm(u, r);
  if (n == 0.0) throw invalid_input("normalize: zero function");
  return u * std::pow(n, -1.0 / r);
}

}  // namespace detail

/// First eigenpair of -Δ_r by nonlinear inverse iteration: v solves
/// -Δ_r v = |u|^{r-2}u, then u ← v/‖v‖_r. Each step decreases the Rayleigh
/// quotient; the iterates stay positive when the start is positive.
inline EigenPair first_eigenpair(double r, const MeshPtr& mesh, const EigenOptions& opt = {}) {
  detail::require_exponent(r, 1.0, "first_eigenpair");
  GridFunction u = opt.initial ? *opt.initial : detail::torsion_function(mesh);
  if (u.mesh != mesh) throw invalid_input("first_eigenpair: initial guess lives on another mesh");
  u.require_finite();
  u = detail::normalize_lr(u, r);
  const double vol = mesh->node_volume();
  double lambda = rayleigh_quotient(u, r);
  GridFunction v = u;
  EigenPair out;
  out.r = r;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Vec b(u.size());
    for (int i = 0; i < u.size(); ++i) b[i] = lambda * vol * odd_pow(u.values[i], r - 1.0);
    if (!detail::solve_r_poisson(v, b, r, opt.eps_reg)) {
      out.lambda = lambda;
      out.phi = u;
      out.iterations = it;
      out.residual = dual_norm(eigen_residual(u, r, lambda, opt.eps_reg), vol);
      throw eigen_convergence_error("first_eigenpair: inner Newton solve failed", out);
    }
    GridFunction next = detail::normalize_lr(v, r);
    const double next_lambda = rayleigh_quotient(next, r);
    double change = 0.0;
    for (int i = 0; i < u.size(); ++i) change = std::max(change, std::abs(next.values[i] - u.values[i]));
    const double rel = std::abs(next_lambda - lambda) / next_lambda;
    u = std::move(next);
    lambda = next_lambda;
    v = u;
    const double res = dual_norm(eigen_residual(u, r, lambda, opt.eps_reg), vol);
    out.iterations = it;
    if ((rel < opt.tol_quotient && change < 1e-9 * u.sup_norm()) || res < opt.tol_residual) {
      out.residual = res;
      break;
    }
    if (it == opt.max_iter) {
      out.lambda = lambda;
      out.phi = u;
      out.residual = res;
      throw eigen_convergence_error(detail::concat("first_eigenpair: no convergence after ", it, " iterations"), out);
    }
  }
  detail::polish_eigenpair(u, lambda, r, opt.eps_reg);
  out.residual = dual_norm(eigen_residual(u, r, lambda, opt.eps_reg), vol);
  double s = 0.0;
  for (double x : u.values) s += x;
  if (s < 0.0) u *= -1.0;
  out.lambda = lambda;
  out.phi = std::move(u);
  return out;
}

inline EigenPair first_eigenpair(double r, const Domain& domain, int n_interior = 2048, const EigenOptions& opt = {}) {
  return first_eigenpair(r, Mesh::build(domain, n_interior), opt);
}

// ---------------------------------------------------------------------------
// 1D oracles

/// π_r = 2π (r-1)^{1/r} / (r sin(π/r)).
inline double pi_r(double r) {
  detail::require_exponent(r, 1.0, "pi_r");
  return 2.0 * std::numbers::pi * std::pow(r - 1.0, 1.0 / r) / (r * std::sin(std::numbers::pi / r));
}

/// (kπ_r/L)^r = (r-1)(2kπ/(L r sin(π/r)))^r. With the (r-1)^{1/r} factor
/// inside π_r there is no extra (r-1) prefactor; the sine quotient
/// ‖∇sin πx‖_r^r/‖sin πx‖_r^r bounds λ_1 from above and rules that one out
/// (31.0 < 56.6 at r = 3).
inline double closed_form_1d_eigenvalue(double r, int k, double L) {
  if (k < 1) throw invalid_input("closed_form_1d_eigenvalue: k must be >= 1");
  if (!(L > 0.0)) throw invalid_input("closed_form_1d_eigenvalue: L must be > 0");
  return std::pow(k * pi_r(r) / L, r);
}

namespace detail {

/// Sign changes of u on (0, L] for the shooting problem
/// u' = |w|^{1/(r-1)} sgn w, w' = -λ|u|^{r-1} sgn u, u(0) = 0, w(0) = 1.
inline int shooting_sign_changes(double r, double lambda, double L) {
  using State = std::array<double, 2>;
  namespace ode = boost::numeric::odeint;
  const double e = 1.0 / (r - 1.0);
  auto rhs = [&](const State& s, State& ds, double) {
    ds[0] = odd_pow(s[1], e);
    ds[1] = -lambda * odd_pow(s[0], r - 1.0);
  };
  State s{0.0, 1.0};
  int changes = 0;
  double last = 0.0;
  auto observe = [&](const State& st, double) {
    const double u = st[0];
    if (u != 0.0) {
      if (last != 0.0 && (u > 0.0) != (last > 0.0)) ++changes;
      last = u;
    }
  };
  // Natural time scale of one half-oscillation; keeps the first step sane.
  const double scale = L / (1.0 + std::pow(std::max(lambda, 1e-300), 1.0 / r));
  auto stepper = ode::make_dense_output(1e-13, 1e-13, ode::runge_kutta_dopri5<State>());
  ode::integrate_adaptive(stepper, rhs, s, 0.0, L, 1e-3 * scale, observe);
  if (s[0] == 0.0) ++changes;
  return changes;
}

}  // namespace detail

/// k-th Dirichlet eigenvalue of the 1D r-Laplacian on (0, L) by shooting
/// from x = 0 and bisecting on λ until the k-th zero of u reaches x = L.
inline double exact_1d_eigenvalue(double r, int k, double L) {
  detail::require_exponent(r, 1.0, "exact_1d_eigenvalue");
  if (k < 1) throw invalid_input("exact_1d_eigenvalue: k must be >= 1");
  if (!(L > 0.0) || !std::isfinite(L)) throw invalid_input("exact_1d_eigenvalue: L must be > 0");
  auto enough = [&](double lam) { return detail::shooting_sign_changes(r, lam, L) >= k; };
  double lo = 0.0;
  double hi = 1.0;
  int grow = 0;
  while (!enough(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++grow > 400) throw bracket_error(detail::concat("exact_1d_eigenvalue: no bracket for r=", r, ", k=", k));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (enough(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Spectral tables

enum class EigMethod { exact1d, flow, bump_upper };

inline const char* to_string(EigMethod m) {
  switch (m) {
    case EigMethod::exact1d:
      return "exact1d";
    case EigMethod::flow:
      return "flow";
    case EigMethod::bump_upper:
      return "bump_upper";
  }
  return "?";
}

struct SpectralEntry {
  double r = 2.0;
  int k = 1;
  double value = 0.0;
  EigMethod method = EigMethod::flow;
  std::string domain_id;
};

class SpectralTable {
 public:
  void add(SpectralEntry e) { entries_.push_back(std::move(e)); }
  void merge(const SpectralTable& o) { entries_.insert(entries_.end(), o.entries_.begin(), o.entries_.end()); }
  const std::vector<SpectralEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  std::optional<double> find(double r, int k, const std::string& domain, EigMethod m) const {
    for (const auto& e : entries_)
      if (e.r == r && e.k == k && e.method == m && e.domain_id == domain) return e.value;
    return std::nullopt;
  }

  /// Values of one method for (r, domain), sorted by k.
  std::vector<SpectralEntry> series(double r, const std::string& domain, EigMethod m) const {
    std::vector<SpectralEntry> out;
    for (const auto& e : entries_)
      if (e.r == r && e.method == m && e.domain_id == domain) out.push_back(e);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.k < b.k; });
    return out;
  }

  /// Values nondecreasing in k within each (r, domain, method) series.
  bool is_monotone() const {
    for (const auto& e : entries_) {
      auto s = series(e.r, e.domain_id, e.method);
      for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i].value < s[i - 1].value) return false;
    }
    return true;
  }

  void write_csv(std::ostream& os) const {
    os << "r,k,value,method,domain_id\n";
    os.precision(15);
    for (const auto& e : entries_) os << e.r << ',' << e.k << ',' << e.value << ',' << to_string(e.method) << ',' << e.domain_id << '\n';
  }

 private:
  std::vector<SpectralEntry> entries_;
};

/// Shooting values λ_1..λ_kmax(r) on (0, L) plus the flow λ_1 on `mesh`.
inline SpectralTable spectral_table_1d(double r, int kmax, const MeshPtr& mesh) {
  if (mesh->dim() != 1) throw invalid_input("spectral_table_1d: interval mesh required");
  SpectralTable t;
  const double L = mesh->domain().length;
  for (int k = 1; k <= kmax; ++k) t.add({r, k, exact_1d_eigenvalue(r, k, L), EigMethod::exact1d, mesh->id()});
  if (kmax >= 1) t.add({r, 1, first_eigenpair(r, mesh).lambda, EigMethod::flow, mesh->id()});
  return t;
}

// ---------------------------------------------------------------------------
// Disjoint-bump bounds

struct BumpBound {
  double value = 0.0;
  bool certified = false;
  std::vector<double> piece_values;  // λ_1(r; piece_j), or R_q(bump_j)
  std::vector<GridFunction> bumps;   // zero-extended, ‖·‖_r = 1
  std::string certificate;
};

namespace detail {

/// True when no gradient element sees two different bumps, so the
/// functionals split over the bumps.
inline bool supports_decouple(const Mesh& mesh, const std::vector<GridFunction>& bumps) {
  std::vector<int> owner(mesh.size(), -1);
  for (std::size_t j = 0; j < bumps.size(); ++j)
    for (int i = 0; i < mesh.size(); ++i)
      if (bumps[j].values[i] != 0.0) {
        if (owner[i] >= 0 && owner[i] != static_cast<int>(j)) return false;
        owner[i] = static_cast<int>(j);
      }
  for (const auto& e : mesh.elements()) {
    int seen = -1;
    for (int c = 0; c < e.ncomp; ++c)
      for (int x : e.comp[c]) {
        if (x < 0 || owner[x] < 0) continue;
        if (seen >= 0 && seen != owner[x]) return false;
        seen = owner[x];
      }
  }
  return true;
}

}  // namespace detail

/// First r-eigenfunctions of the given disjoint sub-masks, zero-extended.
/// On the sphere {Σ a_j φ_j : Σ|a_j|^r = 1} the r-quotient is a weighted
/// mean of the piece eigenvalues, so its maximum is max_j λ_1(r; piece_j),
/// an upper bound for λ_k(r) when the k bumps decouple.
inline BumpBound bump_upper_bound(double r, const MeshPtr& mesh, const std::vector<std::vector<std::uint8_t>>& pieces,
                                  const EigenOptions& opt = {}) {
  if (pieces.empty()) throw construction_error("bump_upper_bound: no subdomains");
  BumpBound out;
  out.value = 0.0;
  std::string cert;
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    MeshPtr sub;
    try {
      sub = mesh->restrict_to(pieces[j], detail::concat(mesh->id(), "/piece", j));
    } catch (const invalid_input& e) {
      throw construction_error(detail::concat("bump_upper_bound: piece ", j, ": ", e.what()));
    }
    EigenOptions o = opt;
    o.initial.reset();
    const auto ep = first_eigenpair(r, sub, o);
    out.piece_values.push_back(ep.lambda);
    out.bumps.push_back(embed(ep.phi, mesh));
    out.value = std::max(out.value, ep.lambda);
    cert += detail::concat(j ? "; " : "", "piece", j, ": nodes=", sub->size(), " lambda1=", ep.lambda);
  }
  out.certified = detail::supports_decouple(*mesh, out.bumps);
  out.certificate = detail::concat(pieces.size(), " disjoint pieces", out.certified ? "" : " (overlapping elements)",
                                   ": ", cert);
  return out;
}

/// Interval version: (0, L) split into k equal pieces.
inline BumpBound bump_upper_bound(double r, int k, const MeshPtr& mesh, const EigenOptions& opt = {}) {
  if (k < 1) throw invalid_input("bump_upper_bound: k must be >= 1");
  return bump_upper_bound(r, mesh, split_interval(*mesh, k), opt);
}

/// max over the sphere {Σ a_j b_j : Σ|a_j|^q = 1} of the q-Rayleigh
/// quotient, for bumps built with any exponent. Exact (certified) when the
/// bumps decouple; otherwise a sampled maximum.
inline BumpBound cross_quotient_bound(double q, const std::vector<GridFunction>& bumps, std::uint64_t seed = 1,
                                      int samples = 4000) {
  detail::require_exponent(q, 1.0, "cross_quotient_bound");
  if (bumps.empty()) throw construction_error("cross_quotient_bound: no bumps");
  BumpBound out;
  out.bumps = bumps;
  for (const auto& b : bumps) out.piece_values.push_back(rayleigh_quotient(b, q));
  const MeshPtr& mesh = bumps.front().mesh;
  if (detail::supports_decouple(*mesh, bumps)) {
    out.value = *std::max_element(out.piece_values.begin(), out.piece_values.end());
    out.certified = true;
    out.certificate = detail::concat(bumps.size(), " decoupled bumps: max of single-bump quotients");
    return out;
  }
  const int k = static_cast<int>(bumps.size());
  auto quotient = [&](const std::vector<double>& a) {
    GridFunction u(mesh);
    for (int j = 0; j < k; ++j) u += a[j] * bumps[j];
    return u.is_zero() ? 0.0 : rayleigh_quotient(u, q);
  };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> best(k, 0.0);
  double best_v = -1.0;
  for (int j = 0; j < k; ++j) {
    std::vector<double> a(k, 0.0);
    a[j] = 1.0;
    const double v = quotient(a);
    if (v > best_v) best_v = v, best = a;
  }
  for (int s = 0; s < samples; ++s) {
    std::vector<double> a(k);
    for (auto& x : a) x = normal(rng);
    const double v = quotient(a);
    if (v > best_v) best_v = v, best = a;
  }
  for (double step = 0.1; step > 1e-6; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int j = 0; j < k; ++j)
        for (double dir : {1.0, -1.0}) {
          auto a = best;
          a[j] += dir * step;
          const double v = quotient(a);
          if (v > best_v) best_v = v, best = a, improved = true;
        }
    }
  }
  out.value = best_v;
  out.certified = false;
  out.certificate = detail::concat(k, " overlapping bumps: sampled maximum (not certified)");
  return out;
}

// ---------------------------------------------------------------------------
// Resonance

enum class Tri { no, yes, unknown };

inline const char* to_string(Tri t) { return t == Tri::no ? "NO" : (t == Tri::yes ? "YES" : "UNKNOWN"); }

/// Whether α is (numerically) an eigenvalue of -Δ_p on the domain, using
/// the certified 1D values of the table when present.
inline Tri is_resonant(double alpha, double p, const SpectralTable& table, const std::string& domain_id,
                       double tol_res = 1e-6) {
  auto exact = table.series(p, domain_id, EigMethod::exact1d);
  auto flow = table.series(p, domain_id, EigMethod::flow);
  std::optional<double> l1;
  if (!exact.empty() && exact.front().k == 1) l1 = exact.front().value;
  else if (!flow.empty() && flow.front().k == 1) l1 = flow.front().value;
  if (!l1) return alpha <= 0.0 ? Tri::no : Tri::unknown;
  for (const auto& e : exact)
    if (std::abs(alpha - e.value) < tol_res * e.value) return Tri::yes;
  for (const auto& e : flow)
    if (e.k == 1 && std::abs(alpha - e.value) < tol_res * e.value) return Tri::yes;
  if (alpha < *l1 * (1.0 - tol_res)) return Tri::no;
  for (std::size_t i = 0; i + 1 < exact.size(); ++i)
    if (exact[i + 1].k == exact[i].k + 1 && alpha > exact[i].value * (1.0 + tol_res) &&
        alpha < exact[i + 1].value * (1.0 - tol_res))
      return Tri::no;
  return Tri::unknown;
}

}  // namespace pqlab

#endif
