#ifndef PQLAB_CURVES_HPP
#define PQLAB_CURVES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pqlab/linalg.hpp"
#include "pqlab/spectrum.hpp"

namespace pqlab {

/// A real number or the tagged value +∞. Never converts silently.
class Extended {
 public:
  static Extended inf() { return Extended(true, 0.0); }
  static Extended of(double v) {
    if (!std::isfinite(v)) throw invalid_input("Extended::of: non-finite value");
    return Extended(false, v);
  }
  bool is_inf() const { return inf_; }
  double value() const {
    if (inf_) throw not_applicable("Extended: value of +inf requested");
    return v_;
  }
  std::string str() const { return inf_ ? "+inf" : detail::concat(v_); }
  /// x < this, with +∞ above every real.
  bool above(double x) const { return inf_ || x < v_; }

 private:
  Extended(bool i, double v) : inf_(i), v_(v) {}
  bool inf_;
  double v_;
};

/// λ_1(p), λ_1(q), α* = R_p(φ_q), β* = R_q(φ_p) on one mesh.
struct CurveConstants {
  EigenPair phi_p;
  EigenPair phi_q;
  double lambda1p = 0.0;
  double lambda1q = 0.0;
  double alpha_star = 0.0;
  double beta_star = 0.0;
};

/// β* = ‖∇φ_p‖_q^q / ‖φ_p‖_q^q.
inline double beta_star_const(const EigenPair& phi_p, double q) { return rayleigh_quotient(phi_p.phi, q); }
inline double beta_star_const(const MeshPtr& mesh, const ProblemParams& prm) {
  prm.validate();
  return beta_star_const(first_eigenpair(prm.p, mesh), prm.q);
}
/// α* = ‖∇φ_q‖_p^p / ‖φ_q‖_p^p.
inline double alpha_star_const(const EigenPair& phi_q, double p) { return rayleigh_quotient(phi_q.phi, p); }
inline double alpha_star_const(const MeshPtr& mesh, const ProblemParams& prm) {
  prm.validate();
  return alpha_star_const(first_eigenpair(prm.q, mesh), prm.p);
}

inline CurveConstants curve_constants(const MeshPtr& mesh, const ProblemParams& prm, const EigenOptions& opt = {}) {
  prm.validate();
  CurveConstants c;
  c.phi_p = first_eigenpair(prm.p, mesh, opt);
  c.phi_q = first_eigenpair(prm.q, mesh, opt);
  c.lambda1p = c.phi_p.lambda;
  c.lambda1q = c.phi_q.lambda;
  c.alpha_star = alpha_star_const(c.phi_q, prm.p);
  c.beta_star = beta_star_const(c.phi_p, prm.q);
  return c;
}

struct CurvePoint {
  double parameter = 0.0;  // α for β*(α), β for α*(β)
  Extended value = Extended::inf();
  std::optional<GridFunction> minimizer;
  std::string method;  // sentinel | eigen | endpoint | kkt
  double residual = 0.0;
  double constraint = 0.0;    // constraint quotient at the minimizer
  double multiplier = 0.0;    // ν ∈ [0, 1)
  Extended oracle = Extended::inf();  // two-dimensional subspace upper bound
};

struct CurveOptions {
  /// Band around λ_1 in which the endpoint formula is used. The curve
  /// leaves the endpoint like a square root, so the band must stay narrow.
  double tol_end = 1e-7;
  double tol_kkt = 1e-8;
  int max_newton = 40;
  int max_steps = 400;
  int oracle_samples = 1440;
};

/// Thrown by the continuation when it cannot reach the target; carries the
/// last converged point.
class curve_convergence_error : public convergence_error {
 public:
  curve_convergence_error(const std::string& what, CurvePoint best) : convergence_error(what), best_(std::move(best)) {}
  const CurvePoint& best() const { return best_; }

 private:
  CurvePoint best_;
};

/// Solves min R_a(u) s.t. R_b(u) ≤ c for (a, b) = (q, p) [β*(α)] and
/// (p, q) [α*(β)] by Newton continuation on the KKT system
///   (1-ν)(∇A_a - λ∇B_a) + ν(∇A_b - c∇B_b) = 0,  A_b - cB_b = 0,  B_a = 1
/// starting from (φ_a, λ_1(a), ν = 0) at c = R_b(φ_a). Here A_r = ‖∇u‖_r^r
/// and B_r = ‖u‖_r^r. Warm starts come from the nearest point already solved.
class CurveSolver {
 public:
  CurveSolver(MeshPtr mesh, const ProblemParams& prm, CurveOptions opt = {}, const EigenOptions& eig = {})
      : mesh_(std::move(mesh)), prm_(prm), opt_(opt) {
    prm_.validate();
    c_ = curve_constants(mesh_, prm_, eig);
  }

  const CurveConstants& constants() const { return c_; }
  const MeshPtr& mesh() const { return mesh_; }
  const ProblemParams& params() const { return prm_; }

  CurvePoint beta_star_of_alpha(double alpha) { return solve(Kind::beta_of_alpha, alpha); }
  CurvePoint alpha_star_of_beta(double beta) { return solve(Kind::alpha_of_beta, beta); }

  /// min R_a over span{φ_p, φ_q} subject to R_b ≤ c (an upper bound).
  Extended subspace_oracle(bool beta_of_alpha, double c) const {
    const double a = beta_of_alpha ? prm_.q : prm_.p;
    const double b = beta_of_alpha ? prm_.p : prm_.q;
    auto at = [&](double th) { return std::cos(th) * c_.phi_p.phi + std::sin(th) * c_.phi_q.phi; };
    auto feasible = [&](const GridFunction& u) { return rayleigh_quotient(u, b) <= c; };
    const int n = opt_.oracle_samples;
    double best = std::numeric_limits<double>::infinity();
    double best_th = 0.0;
    for (int i = 0; i < n; ++i) {
      const double th = std::numbers::pi * i / n;
      const auto u = at(th);
      if (u.is_zero() || !feasible(u)) continue;
      const double v = rayleigh_quotient(u, a);
      if (v < best) best = v, best_th = th;
    }
    if (!std::isfinite(best)) return Extended::inf();
    // local refinement on a shrinking stencil, feasibility kept
    for (double step = std::numbers::pi / n; step > 1e-12; step *= 0.5) {
      for (double th : {best_th - step, best_th + step}) {
        const auto u = at(th);
        if (u.is_zero() || !feasible(u)) continue;
        const double v = rayleigh_quotient(u, a);
        if (v < best) best = v, best_th = th;
      }
    }
    return Extended::of(best);
  }

 private:
  enum class Kind { beta_of_alpha, alpha_of_beta };

  struct State {
    double c = 0.0;
    GridFunction u;
    double lambda = 0.0;
    double nu = 0.0;
  };

  double a_exp(Kind k) const { return k == Kind::beta_of_alpha ? prm_.q : prm_.p; }
  double b_exp(Kind k) const { return k == Kind::beta_of_alpha ? prm_.p : prm_.q; }
  const EigenPair& phi_a(Kind k) const { return k == Kind::beta_of_alpha ? c_.phi_q : c_.phi_p; }
  const EigenPair& phi_b(Kind k) const { return k == Kind::beta_of_alpha ? c_.phi_p : c_.phi_q; }

  CurvePoint solve(Kind kind, double c) {
    if (!std::isfinite(c)) throw invalid_input("curve: parameter must be finite");
    const double a = a_exp(kind), b = b_exp(kind);
    const double l1a = phi_a(kind).lambda, l1b = phi_b(kind).lambda;
    const double c_end = rayleigh_quotient(phi_a(kind).phi, b);
    CurvePoint pt;
    pt.parameter = c;
    if (c < l1b * (1.0 - opt_.tol_end)) {
      pt.method = "sentinel";
      return pt;
    }
    if (c >= c_end) {
      pt.value = Extended::of(l1a);
      pt.minimizer = phi_a(kind).phi;
      pt.method = "eigen";
      pt.residual = phi_a(kind).residual;
      pt.constraint = c_end;
      pt.oracle = subspace_oracle(kind == Kind::beta_of_alpha, c);
      return pt;
    }
    if (c <= l1b * (1.0 + opt_.tol_end)) {
      pt.value = Extended::of(rayleigh_quotient(phi_b(kind).phi, a));
      pt.minimizer = phi_b(kind).phi;
      pt.method = "endpoint";
      pt.residual = phi_b(kind).residual;
      pt.constraint = l1b;
      pt.multiplier = 1.0;
      pt.oracle = subspace_oracle(kind == Kind::beta_of_alpha, c);
      // above λ_1 the subspace bound may already be lower
      if (c > l1b && !pt.oracle.is_inf() && pt.value.above(pt.oracle.value())) pt.value = pt.oracle;
      return pt;
    }
    auto& cache = kind == Kind::beta_of_alpha ? cache_ba_ : cache_ab_;
    State start{c_end, detail::normalize_lr(phi_a(kind).phi, a), l1a, 0.0};
    for (const auto& s : cache)
      if (std::abs(s.c - c) < std::abs(start.c - c)) start = s;
    State cur = start;
    double step = (c - cur.c) / 8.0;
    int steps = 0;
    double res = 0.0;
    while (cur.c != c) {
      if (++steps > opt_.max_steps) break;
      State trial = cur;
      trial.c = std::abs(c - cur.c) <= std::abs(step) ? c : cur.c + step;
      if (newton(kind, trial, res)) {
        cur = std::move(trial);
        step *= 1.5;
      } else {
        step *= 0.5;
        if (std::abs(step) < 1e-12 * std::abs(c)) break;
      }
    }
    if (cur.c != c) {
      CurvePoint best;
      best.parameter = cur.c;
      best.value = Extended::of(rayleigh_quotient(cur.u, a));
      best.minimizer = cur.u;
      best.method = "kkt";
      throw curve_convergence_error(detail::concat("curve continuation stalled at c=", cur.c, " (target ", c, ")"), best);
    }
    cache.push_back(cur);
    pt.value = Extended::of(rayleigh_quotient(cur.u, a));
    pt.minimizer = cur.u;
    pt.method = "kkt";
    pt.residual = res;
    pt.constraint = rayleigh_quotient(cur.u, b);
    pt.multiplier = cur.nu;
    pt.oracle = subspace_oracle(kind == Kind::beta_of_alpha, c);
    return pt;
  }

  Terms stationarity_terms(double a, double b, const State& s) const {
    return {{Term::Kind::grad, a, (1.0 - s.nu) * a},
            {Term::Kind::mass, a, -(1.0 - s.nu) * s.lambda * a},
            {Term::Kind::grad, b, s.nu * b},
            {Term::Kind::mass, b, -s.nu * s.c * b}};
  }

  /// Newton on the KKT system at fixed c; `res` receives the merit.
  bool newton(Kind kind, State& s, double& res) const {
    const double a = a_exp(kind), b = b_exp(kind);
    const double eps = prm_.eps_reg;
    const double vol = mesh_->node_volume();
    const int n = mesh_->size();
    auto residual = [&](const State& x) {
      Vec f(n + 2);
      f.head(n) = terms_gradient(x.u, stationarity_terms(a, b, x), eps);
      const double bb = lr_norm(x.u, b);
      f[n] = (grad_seminorm(x.u, b) - x.c * bb) / (x.c * bb);
      f[n + 1] = lr_norm(x.u, a) - 1.0;
      return f;
    };
    auto merit = [&](const Vec& f) { return std::sqrt(f.head(n).squaredNorm() / vol + f[n] * f[n] + f[n + 1] * f[n + 1]); };
    Vec f = residual(s);
    double m = merit(f);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt_.max_newton; ++it) {
      if (m <= opt_.tol_kkt || (m <= 1e3 * opt_.tol_kkt && m > 0.5 * prev)) {
        res = m;
        return s.nu >= -1e-12 && s.nu < 1.0;
      }
      prev = m;
      const SpMat j11 = terms_hessian(s.u, stationarity_terms(a, b, s), eps);
      const Vec dBa = terms_gradient(s.u, {{Term::Kind::mass, a, a}}, eps);
      const Vec gA_a = terms_gradient(s.u, {{Term::Kind::grad, a, a}}, eps);
      const Vec gA_b = terms_gradient(s.u, {{Term::Kind::grad, b, b}}, eps);
      const Vec dBb = terms_gradient(s.u, {{Term::Kind::mass, b, b}}, eps);
      const Vec kb = gA_b - s.c * dBb;
      const Vec ka = gA_a - s.lambda * dBa;
      const double bb = lr_norm(s.u, b);
      const double ab = grad_seminorm(s.u, b);
      Eigen::MatrixXd cols(n, 2), rows(2, n), corner = Eigen::MatrixXd::Zero(2, 2);
      cols.col(0) = -(1.0 - s.nu) * dBa;
      cols.col(1) = kb - ka;
      // d/du of (A_b - c B_b)/(c B_b)
      rows.row(0) = (kb / (s.c * bb) - (ab - s.c * bb) / (s.c * bb * bb) * dBb).transpose();
      rows.row(1) = dBa.transpose();
      auto d = sparse_solve(bordered(j11, cols, rows, corner), -f, false);
      if (!d) return false;
      bool improved = false;
      double t = 1.0;
      for (int ls = 0; ls < 30 && !improved; ++ls, t *= 0.5) {
        State trial = s;
        as_vec(trial.u) += t * d->head(n);
        trial.lambda += t * (*d)[n];
        trial.nu += t * (*d)[n + 1];
        const Vec ft = residual(trial);
        const double mt = merit(ft);
        if (mt < (1.0 - 1e-4 * t) * m) {
          s = std::move(trial);
          f = ft;
          m = mt;
          improved = true;
        }
      }
      if (!improved) {
        res = m;
        return m <= 1e3 * opt_.tol_kkt && s.nu >= -1e-12 && s.nu < 1.0;
      }
    }
    res = m;
    return m <= 1e3 * opt_.tol_kkt && s.nu >= -1e-12 && s.nu < 1.0;
  }

  MeshPtr mesh_;
  ProblemParams prm_;
  CurveOptions opt_;
  CurveConstants c_;
  std::vector<State> cache_ba_;
  std::vector<State> cache_ab_;
};

// ---------------------------------------------------------------------------
// Sampled curve and its properties

struct CriticalCurve {
  double lambda1p = 0.0, lambda1q = 0.0, alpha_star = 0.0, beta_star = 0.0;
  std::vector<CurvePoint> points;  // β*(α) samples, increasing α

  /// β*(α) nonincreasing along the finite samples, up to `slack` relative.
  bool is_nonincreasing(double slack = 1e-9) const {
    double last = std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
      if (p.value.is_inf()) continue;
      const double v = p.value.value();
      if (v > last * (1.0 + slack)) return false;
      last = v;
    }
    return true;
  }

  void write_csv(std::ostream& os) const {
    os.precision(15);
    os << "alpha,beta_star,method,residual\n";
    for (const auto& p : points) os << p.parameter << ',' << p.value.str() << ',' << p.method << ',' << p.residual << '\n';
  }
};

inline CriticalCurve sample_curve(CurveSolver& solver, std::vector<double> alphas) {
  std::sort(alphas.begin(), alphas.end());
  CriticalCurve cc;
  const auto& k = solver.constants();
  cc.lambda1p = k.lambda1p;
  cc.lambda1q = k.lambda1q;
  cc.alpha_star = k.alpha_star;
  cc.beta_star = k.beta_star;
  // solve from α* downwards so that every continuation is short
  std::vector<CurvePoint> pts(alphas.size());
  for (std::size_t i = alphas.size(); i-- > 0;) pts[i] = solver.beta_star_of_alpha(alphas[i]);
  cc.points = std::move(pts);
  return cc;
}

struct DualityRow {
  double alpha = 0.0;
  double beta = 0.0;
  double alpha_back = 0.0;
  double deviation = 0.0;  // |α*(β*(α)) - α| / α
};

struct DualityReport {
  std::vector<DualityRow> rows;
  double max_deviation = 0.0;
  bool lower_side_ok = true;  // α ≤ α*(β) + tol on every row
};

/// For α in (λ_1(p), α*) with β = β*(α) in (λ_1(q), β*): the two curves
/// coincide, i.e. α*(β*(α)) = α.
inline DualityReport check_curve_duality(CurveSolver& solver, const std::vector<double>& alphas, double tol = 1e-6) {
  const auto& k = solver.constants();
  DualityReport rep;
  for (double a : alphas) {
    if (!(a > k.lambda1p && a < k.alpha_star)) continue;
    const auto b = solver.beta_star_of_alpha(a);
    if (b.value.is_inf()) continue;
    const double beta = b.value.value();
    if (!(beta > k.lambda1q && beta < k.beta_star)) continue;
    const auto back = solver.alpha_star_of_beta(beta);
    if (back.value.is_inf()) continue;
    DualityRow row{a, beta, back.value.value(), std::abs(back.value.value() - a) / a};
    rep.max_deviation = std::max(rep.max_deviation, row.deviation);
    if (a > row.alpha_back * (1.0 + tol) + tol) rep.lower_side_ok = false;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace pqlab

#endif
