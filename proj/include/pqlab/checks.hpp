#ifndef PQLAB_CHECKS_HPP
#define PQLAB_CHECKS_HPP

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "pqlab/nehari.hpp"

namespace pqlab {

struct NehariAlgebraReport {
  int samples = 0;   // draws
  int accepted = 0;  // draws with H·G < 0
  double max_fiber_error = 0.0;  // |J(u) - E(t(u)u)| / |J(u)|
  double max_scale_error = 0.0;  // |J(cu) - J(u)| / |J(u)|
  int unique_extremum = 0;

  bool ok(double tol_fiber = 1e-10, double tol_scale = 1e-12) const {
    return accepted > 0 && max_fiber_error <= tol_fiber && max_scale_error <= tol_scale && unique_extremum == accepted;
  }
  nlohmann::json to_json() const {
    return {{"samples", samples},
            {"accepted", accepted},
            {"max_fiber_error", max_fiber_error},
            {"max_scale_error", max_scale_error},
            {"unique_extremum", unique_extremum}};
  }
};

namespace detail {

/// Number of interior local extrema of t ↦ E(tu) on a log grid around t0.
inline int fiber_extrema(const NormPowers& n, const ProblemParams& prm, double t0, int points = 4001) {
  std::vector<double> e(points);
  for (int i = 0; i < points; ++i) {
    const double t = t0 * std::pow(10.0, -3.0 + 6.0 * i / (points - 1));
    e[i] = FunctionalValues::from(n.scaled(t, prm), prm).E;
  }
  int ext = 0;
  for (int i = 1; i + 1 < points; ++i)
    if ((e[i] - e[i - 1]) * (e[i + 1] - e[i]) < 0.0) ++ext;
  return ext;
}

}  // namespace detail

/// Random functions with H·G < 0: J against the energy on the fiber, scale
/// invariance of J, and a dense scan of the fiber for a single extremum.
/// Draws until `wanted` samples have H·G < 0 or `max_draws` is reached.
inline NehariAlgebraReport check_nehari_algebra(const MeshPtr& mesh, const ProblemParams& prm, int wanted,
                                                std::uint64_t seed, int max_draws = -1) {
  prm.validate();
  if (max_draws < 0) max_draws = 100 * wanted;
  NehariAlgebraReport rep;
  std::uniform_real_distribution<double> cdist(-3.0, 3.0);
  for (int s = 0; s < max_draws && rep.accepted < wanted; ++s) {
    ++rep.samples;
    std::mt19937_64 rng(mix_seed(seed, s));
    const auto u = random_test_function(mesh, rng, prm.p);
    const auto n = NormPowers::of(u, prm);
    const auto v = FunctionalValues::from(n, prm);
    if (!(v.H * v.G < 0.0)) continue;
    ++rep.accepted;
    const double t = fibering_t(v.H, v.G, prm.p, prm.q);
    const double j = fibered_J(v.H, v.G, prm.p, prm.q);
    const double e = FunctionalValues::from(n.scaled(t, prm), prm).E;
    rep.max_fiber_error = std::max(rep.max_fiber_error, std::abs(j - e) / std::abs(j));
    double c = std::pow(10.0, cdist(rng));
    if (rng() & 1) c = -c;
    // H and G of cu by homogeneity; rescaling the norm powers and subtracting
    // again loses digits when |G| << ‖∇u‖_q^q
    const double hc = v.H * std::pow(std::abs(c), prm.p), gc = v.G * std::pow(std::abs(c), prm.q);
    rep.max_scale_error = std::max(rep.max_scale_error, std::abs(fibered_J(hc, gc, prm.p, prm.q) - j) / std::abs(j));
    if (detail::fiber_extrema(n, prm, t) == 1) ++rep.unique_extremum;
  }
  return rep;
}

struct GradientCheckReport {
  int pairs = 0;
  double h = 0.0;
  double max_rel_error = 0.0;

  bool ok(double tol = 1e-6) const { return pairs > 0 && max_rel_error < tol; }
  nlohmann::json to_json() const { return {{"pairs", pairs}, {"h", h}, {"max_rel_error", max_rel_error}}; }
};

/// g·ξ from weak_residual against (E(u+hξ) - E(u-hξ)) / 2h.
inline GradientCheckReport check_gradient(const MeshPtr& mesh, const ProblemParams& prm, int pairs, std::uint64_t seed,
                                          double h = 1e-5) {
  prm.validate();
  GradientCheckReport rep;
  rep.pairs = pairs;
  rep.h = h;
  for (int s = 0; s < pairs; ++s) {
    std::mt19937_64 rng(mix_seed(seed, s));
    const auto u = random_test_function(mesh, rng, prm.p);
    const auto xi = random_test_function(mesh, rng, prm.p);
    const Vec g = as_vec(weak_residual(u, prm));
    const double an = g.dot(as_vec(xi));
    const double fd = (energy(u + h * xi, prm) - energy(u - h * xi, prm)) / (2.0 * h);
    // relative to the Cauchy-Schwarz scale: random pairs can be nearly orthogonal
    const double scale = std::max({std::abs(an), g.norm() * as_vec(xi).norm(), 1e-300});
    rep.max_rel_error = std::max(rep.max_rel_error, std::abs(an - fd) / scale);
  }
  return rep;
}

}  // namespace pqlab

#endif
