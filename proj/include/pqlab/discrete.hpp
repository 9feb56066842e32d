#ifndef PQLAB_DISCRETE_HPP
#define PQLAB_DISCRETE_HPP

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pqlab/core.hpp"
#include "pqlab/mesh.hpp"

namespace pqlab {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

inline Eigen::Map<const Vec> as_vec(const GridFunction& u) { return {u.values.data(), u.size()}; }
inline Eigen::Map<Vec> as_vec(GridFunction& u) { return {u.values.data(), u.size()}; }
inline GridFunction to_grid(const MeshPtr& mesh, const Vec& v) {
  return GridFunction(mesh, std::vector<double>(v.data(), v.data() + v.size()));
}

namespace detail {

inline void require_exponent(double r, double min, const char* what) {
  if (!(r > min) || !std::isfinite(r)) throw invalid_input(concat(what, ": exponent must be > ", min, ", got ", r));
}

inline double node(const std::vector<double>& u, int i) { return i < 0 ? 0.0 : u[i]; }

struct ElementGradient {
  double g[2] = {0.0, 0.0};
  double norm2 = 0.0;
};

inline ElementGradient element_gradient(const Element& e, const std::vector<double>& u, double inv_h) {
  ElementGradient eg;
  for (int c = 0; c < e.ncomp; ++c) {
    eg.g[c] = (node(u, e.comp[c][0]) - node(u, e.comp[c][1])) * inv_h;
    eg.norm2 += eg.g[c] * eg.g[c];
  }
  return eg;
}

}  // namespace detail

/// ‖∇u‖_r^r with the elementwise-constant gradient.
inline double grad_seminorm(const GridFunction& u, double r) {
  detail::require_exponent(r, 1.0, "grad_seminorm");
  u.require_finite();
  const double inv_h = 1.0 / u.mesh->h();
  double s = 0.0;
  for (const auto& e : u.mesh->elements()) {
    const auto eg = detail::element_gradient(e, u.values, inv_h);
    if (eg.norm2 > 0.0) s += e.vol * std::pow(eg.norm2, 0.5 * r);
  }
  return s;
}

/// ‖u‖_r^r with lumped nodal quadrature.
inline double lr_norm(const GridFunction& u, double r) {
  detail::require_exponent(r, 0.0, "lr_norm");
  u.require_finite();
  double s = 0.0;
  for (double v : u.values)
    if (v != 0.0) s += std::pow(std::abs(v), r);
  return s * u.mesh->node_volume();
}

inline double rayleigh_quotient(const GridFunction& u, double r) {
  const double den = lr_norm(u, r);
  if (den == 0.0) throw invalid_input("rayleigh_quotient: zero function");
  return grad_seminorm(u, r) / den;
}

/// W^{1,p}_0 seminorm ‖∇u‖_p (the root, for distances).
inline double sobolev_norm(const GridFunction& u, double p) { return std::pow(grad_seminorm(u, p), 1.0 / p); }

/// Mesh-weighted Euclidean dual norm of a nodal gradient vector g (where
/// g·ξ = <f, ξ>): sqrt(Σ g_i^2 / vol_i). Used as the surrogate of the
/// W^{-1,p'} norm throughout.
inline double dual_norm(const Vec& g, double node_volume) { return std::sqrt(g.squaredNorm() / node_volume); }
inline double dual_norm(const GridFunction& g) { return dual_norm(as_vec(g), g.mesh->node_volume()); }
inline double dual_dot(const Vec& a, const Vec& b, double node_volume) { return a.dot(b) / node_volume; }

/// A functional Σ_t (coef_t / r_t) Q_t(u) with Q = ‖∇u‖_r^r (grad) or
/// ‖u‖_r^r (mass). Everything the solvers differentiate is of this form.
struct Term {
  enum class Kind { grad, mass };
  Kind kind;
  double r;
  double coef;
};

using Terms = std::vector<Term>;

/// E = H_α/p + G_β/q.
inline Terms energy_terms(const ProblemParams& prm) {
  return {{Term::Kind::grad, prm.p, 1.0},
          {Term::Kind::mass, prm.p, -prm.alpha},
          {Term::Kind::grad, prm.q, 1.0},
          {Term::Kind::mass, prm.q, -prm.beta}};
}
inline Terms h_terms(const ProblemParams& prm) {
  return {{Term::Kind::grad, prm.p, prm.p}, {Term::Kind::mass, prm.p, -prm.alpha * prm.p}};
}
inline Terms g_terms(const ProblemParams& prm) {
  return {{Term::Kind::grad, prm.q, prm.q}, {Term::Kind::mass, prm.q, -prm.beta * prm.q}};
}
/// F = H + G.
inline Terms f_terms(const ProblemParams& prm) {
  Terms t = h_terms(prm);
  for (const auto& x : g_terms(prm)) t.push_back(x);
  return t;
}

/// Value of Σ (coef/r) Q. `eps > 0` evaluates the regularized gradient
/// density ((|∇u|^2 + eps)^{r/2} - eps^{r/2}) consistent with the fluxes;
/// eps = 0 is the faithful energy.
inline double terms_value(const GridFunction& u, const Terms& terms, double eps = 0.0) {
  const double inv_h = 1.0 / u.mesh->h();
  double total = 0.0;
  for (const auto& t : terms) {
    if (t.coef == 0.0) continue;
    double q = 0.0;
    if (t.kind == Term::Kind::mass) {
      q = lr_norm(u, t.r);
    } else if (eps == 0.0) {
      q = grad_seminorm(u, t.r);
    } else {
      const double base = std::pow(eps, 0.5 * t.r);
      for (const auto& e : u.mesh->elements()) {
        const auto eg = detail::element_gradient(e, u.values, inv_h);
        q += e.vol * (std::pow(eg.norm2 + eps, 0.5 * t.r) - base);
      }
    }
    total += t.coef / t.r * q;
  }
  return total;
}

/// Nodal gradient vector of Σ (coef/r) Q, with regularized fluxes
/// (|∇u|^2 + eps)^{(r-2)/2} ∇u.
inline Vec terms_gradient(const GridFunction& u, const Terms& terms, double eps) {
  u.require_finite();
  const int n = u.size();
  const double inv_h = 1.0 / u.mesh->h();
  const double vol_n = u.mesh->node_volume();
  Vec g = Vec::Zero(n);
  for (const auto& t : terms) {
    if (t.coef == 0.0) continue;
    if (t.kind == Term::Kind::mass) {
      for (int i = 0; i < n; ++i) g[i] += t.coef * vol_n * odd_pow(u.values[i], t.r - 1.0);
      continue;
    }
    const double ex = 0.5 * (t.r - 2.0);
    for (const auto& e : u.mesh->elements()) {
      const auto eg = detail::element_gradient(e, u.values, inv_h);
      const double w = t.coef * e.vol * std::pow(eg.norm2 + eps, ex) * inv_h;
      for (int c = 0; c < e.ncomp; ++c) {
        const double f = w * eg.g[c];
        if (e.comp[c][0] >= 0) g[e.comp[c][0]] += f;
        if (e.comp[c][1] >= 0) g[e.comp[c][1]] -= f;
      }
    }
  }
  return g;
}

/// Hessian of the regularized Σ (coef/r) Q. The mass terms with r < 2 use
/// (u^2 + eps)^{(r-2)/2} so the matrix stays finite at nodal zeros.
inline void terms_hessian_triplets(const GridFunction& u, const Terms& terms, double eps, Triplets& trip) {
  const int n = u.size();
  const double inv_h = 1.0 / u.mesh->h();
  const double vol_n = u.mesh->node_volume();
  for (const auto& t : terms) {
    if (t.coef == 0.0) continue;
    if (t.kind == Term::Kind::mass) {
      for (int i = 0; i < n; ++i) {
        const double v = u.values[i];
        const double d = t.r == 2.0 ? 1.0 : (t.r - 1.0) * std::pow(v * v + (t.r < 2.0 ? eps : 0.0), 0.5 * (t.r - 2.0));
        trip.emplace_back(i, i, t.coef * vol_n * d);
      }
      continue;
    }
    for (const auto& e : u.mesh->elements()) {
      const auto eg = detail::element_gradient(e, u.values, inv_h);
      const double s = eg.norm2 + eps;
      const double a = std::pow(s, 0.5 * (t.r - 2.0));
      const double b = t.r == 2.0 ? 0.0 : (t.r - 2.0) * std::pow(s, 0.5 * (t.r - 4.0));
      const double scale = t.coef * e.vol * inv_h * inv_h;
      for (int c = 0; c < e.ncomp; ++c) {
        for (int d = 0; d < e.ncomp; ++d) {
          const double m = scale * ((c == d ? a : 0.0) + b * eg.g[c] * eg.g[d]);
          const int pc[2] = {e.comp[c][0], e.comp[c][1]};
          const int pd[2] = {e.comp[d][0], e.comp[d][1]};
          for (int x = 0; x < 2; ++x) {
            if (pc[x] < 0) continue;
            for (int y = 0; y < 2; ++y) {
              if (pd[y] < 0) continue;
              trip.emplace_back(pc[x], pd[y], (x == y ? m : -m));
            }
          }
        }
      }
    }
  }
}

inline SpMat terms_hessian(const GridFunction& u, const Terms& terms, double eps) {
  Triplets trip;
  for (int i = 0; i < u.size(); ++i) trip.emplace_back(i, i, 0.0);
  terms_hessian_triplets(u, terms, eps, trip);
  SpMat hm(u.size(), u.size());
  hm.setFromTriplets(trip.begin(), trip.end());
  return hm;
}

/// Discrete gradient of E: the nodal vector g with g·ξ = <E'(u), ξ>, i.e.
/// the weak form of -Δ_p u - Δ_q u - α|u|^{p-2}u - β|u|^{q-2}u.
inline GridFunction weak_residual(const GridFunction& u, const ProblemParams& prm) {
  prm.validate();
  return to_grid(u.mesh, terms_gradient(u, energy_terms(prm), prm.eps_reg));
}

/// Full-space dual residual ‖E'(u)‖_*.
inline double residual_norm(const GridFunction& u, const ProblemParams& prm) { return dual_norm(weak_residual(u, prm)); }

/// Stiffness matrix of the discrete Laplacian (r = 2); SPD preconditioner.
inline SpMat laplacian(const MeshPtr& mesh) {
  GridFunction zero(mesh);
  return terms_hessian(zero, {{Term::Kind::grad, 2.0, 1.0}}, 0.0);
}

}  // namespace pqlab

#endif
