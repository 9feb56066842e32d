#ifndef PQLAB_NEHARI_HPP
#define PQLAB_NEHARI_HPP

#include <cmath>

#include "pqlab/functionals.hpp"

namespace pqlab {

/// Unique critical point of the fiber t ↦ E(tu): t = (-G/H)^{1/(p-q)}.
inline double fibering_t(double H, double G, double p, double q) {
  if (!(H * G < 0.0)) throw not_applicable(detail::concat("fibering_t: needs H*G < 0, got H=", H, ", G=", G));
  return std::pow(-G / H, 1.0 / (p - q));
}

inline double fibering_t(const GridFunction& u, const ProblemParams& prm) {
  const auto v = evaluate(u, prm);
  return fibering_t(v.H, v.G, prm.p, prm.q);
}

/// J(u) = E(t(u)u) = -sgn(H) (p-q)/(pq) |G|^{p/(p-q)} / |H|^{q/(p-q)}.
inline double fibered_J(double H, double G, double p, double q) {
  if (!(H * G < 0.0)) throw not_applicable(detail::concat("fibered_J: needs H*G < 0, got H=", H, ", G=", G));
  const double d = p - q;
  return -sign(H) * (d / (p * q)) * std::pow(std::abs(G), p / d) / std::pow(std::abs(H), q / d);
}

inline double fibered_J(const GridFunction& u, const ProblemParams& prm) {
  const auto v = evaluate(u, prm);
  return fibered_J(v.H, v.G, prm.p, prm.q);
}

struct NehariPoint {
  GridFunction u;
  FunctionalValues values;
  bool in_B_plus = false;
  double delta_margin = 0.0;  // G_β(u)
};

/// t(u)u on the Nehari manifold F = 0.
inline NehariPoint project_to_nehari(const GridFunction& u, const ProblemParams& prm) {
  prm.validate();
  const auto n = NormPowers::of(u, prm);
  const auto v = FunctionalValues::from(n, prm);
  const double t = fibering_t(v.H, v.G, prm.p, prm.q);
  NehariPoint pt;
  pt.u = t * u;
  pt.values = FunctionalValues::from(n.scaled(t, prm), prm);
  pt.in_B_plus = pt.values.H < 0.0 && pt.values.G > 0.0;
  pt.delta_margin = pt.values.G;
  return pt;
}

/// ‖E_N'(u)‖ = min_λ ‖E'(u) - λF'(u)‖_* in the mesh-weighted dual norm; the
/// minimizer is λ = <g_E, g_F>/‖g_F‖^2.
inline double restricted_grad_norm(const NehariPoint& pt, const ProblemParams& prm, bool require_b_plus = true) {
  prm.validate();
  if (require_b_plus && !pt.in_B_plus) throw not_applicable("restricted_grad_norm: point is not in B+");
  const double vol = pt.u.mesh->node_volume();
  const Vec gE = terms_gradient(pt.u, energy_terms(prm), prm.eps_reg);
  const Vec gF = terms_gradient(pt.u, f_terms(prm), prm.eps_reg);
  const double ff = dual_dot(gF, gF, vol);
  if (!(ff > 0.0)) throw not_applicable("restricted_grad_norm: F'(u) = 0, Nehari manifold degenerate");
  const double lam = dual_dot(gE, gF, vol) / ff;
  return dual_norm(gE - lam * gF, vol);
}

}  // namespace pqlab

#endif
