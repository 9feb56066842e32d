#ifndef PQLAB_FUNCTIONALS_HPP
#define PQLAB_FUNCTIONALS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pqlab/discrete.hpp"

namespace pqlab {

/// The four norm powers every functional is built from.
struct NormPowers {
  double grad_p = 0.0;  // ‖∇u‖_p^p
  double lp = 0.0;      // ‖u‖_p^p
  double grad_q = 0.0;  // ‖∇u‖_q^q
  double lq = 0.0;      // ‖u‖_q^q

  static NormPowers of(const GridFunction& u, const ProblemParams& prm) {
    return {grad_seminorm(u, prm.p), lr_norm(u, prm.p), grad_seminorm(u, prm.q), lr_norm(u, prm.q)};
  }

  /// Powers of t*u, from homogeneity.
  NormPowers scaled(double t, const ProblemParams& prm) const {
    const double tp = std::pow(std::abs(t), prm.p);
    const double tq = std::pow(std::abs(t), prm.q);
    return {grad_p * tp, lp * tp, grad_q * tq, lq * tq};
  }
};

/// H_α(u), G_β(u), E(u) = H/p + G/q and F(u) = H + G.
struct FunctionalValues {
  double H = 0.0;
  double G = 0.0;
  double E = 0.0;
  double F = 0.0;

  static FunctionalValues from(const NormPowers& n, const ProblemParams& prm) {
    FunctionalValues v;
    v.H = n.grad_p - prm.alpha * n.lp;
    v.G = n.grad_q - prm.beta * n.lq;
    v.E = v.H / prm.p + v.G / prm.q;
    v.F = v.H + v.G;
    return v;
  }
};

inline FunctionalValues evaluate(const GridFunction& u, const ProblemParams& prm) {
  prm.validate();
  return FunctionalValues::from(NormPowers::of(u, prm), prm);
}

inline double energy(const GridFunction& u, const ProblemParams& prm) { return evaluate(u, prm).E; }

/// Membership of u in the level sets of H_α, G_β, E and in B⁺ = [H<0]∩[G>0].
/// Equalities hold inside a relative band tol_level times the size of the
/// corresponding gradient term.
struct LevelFlags {
  bool h_neg = false, h_zero = false, h_pos = false;
  bool g_neg = false, g_zero = false, g_pos = false;
  bool e_neg = false, e_zero = false, e_pos = false;
  bool b_plus = false;
  bool trivial = false;
};

inline LevelFlags level_membership(const GridFunction& u, const ProblemParams& prm, double tol_level = 1e-9) {
  prm.validate();
  const auto n = NormPowers::of(u, prm);
  const auto v = FunctionalValues::from(n, prm);
  LevelFlags f;
  if (n.grad_p == 0.0) {
    f.trivial = f.h_zero = f.g_zero = f.e_zero = true;
    return f;
  }
  const double bh = tol_level * n.grad_p;
  const double bg = tol_level * n.grad_q;
  const double be = tol_level * (n.grad_p / prm.p + n.grad_q / prm.q);
  f.h_zero = std::abs(v.H) <= bh;
  f.h_neg = v.H < -bh;
  f.h_pos = v.H > bh;
  f.g_zero = std::abs(v.G) <= bg;
  f.g_neg = v.G < -bg;
  f.g_pos = v.G > bg;
  f.e_zero = std::abs(v.E) <= be;
  f.e_neg = v.E < -be;
  f.e_pos = v.E > be;
  f.b_plus = f.h_neg && f.g_pos;
  return f;
}

// ---------------------------------------------------------------------------
// Random test functions

/// splitmix64, used to derive one independent stream per sample index so
/// that results do not depend on how samples are distributed over workers.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Sum of 1-8 sine modes (1D) or Gaussian bumps (2D) with random
/// coefficients, normalized to ‖∇u‖_p = 1.
inline GridFunction random_test_function(const MeshPtr& mesh, std::mt19937_64& rng, double p) {
  std::uniform_int_distribution<int> count(1, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  GridFunction u(mesh);
  const int m = count(rng);
  if (mesh->dim() == 1) {
    const double L = mesh->domain().length;
    std::uniform_int_distribution<int> mode(1, 8);
    for (int t = 0; t < m; ++t) {
      const int j = mode(rng);
      const double c = normal(rng) / j;
      for (int i = 0; i < u.size(); ++i)
        u.values[i] += c * std::sin(j * std::numbers::pi * mesh->coord(i)[0] / L);
    }
  } else {
    std::uniform_int_distribution<int> pick(0, mesh->size() - 1);
    std::uniform_real_distribution<double> width(0.05, 0.4);
    for (int t = 0; t < m; ++t) {
      const auto centre = mesh->coord(pick(rng));
      const double w = width(rng);
      const double c = normal(rng);
      for (int i = 0; i < u.size(); ++i) {
        const auto x = mesh->coord(i);
        const double d2 = (x[0] - centre[0]) * (x[0] - centre[0]) + (x[1] - centre[1]) * (x[1] - centre[1]);
        u.values[i] += c * std::exp(-d2 / (w * w));
      }
    }
  }
  const double s = grad_seminorm(u, p);
  if (s == 0.0) u.values[0] = 1.0;
  return u * (1.0 / std::pow(grad_seminorm(u, p), 1.0 / p));
}

// ---------------------------------------------------------------------------
// Sign lemma: inclusions between level sets of H_α and G_β below β*(α)

enum class SignClause {
  /// β < β*(α): [H ≤ 0] ⊂ {0} ∪ [G > 0]
  h_nonpos_implies_g_pos = 1,
  /// β ≤ β*(α): [G < 0] ⊂ [H > 0]
  g_neg_implies_h_pos = 2,
  /// λ_1(q) < β ≤ β*(α): [G ≤ 0] ⊂ [H ≥ 0]
  g_nonpos_implies_h_nonneg = 3,
};

struct SignLemmaContext {
  double lambda1_p = 0.0;
  double lambda1_q = 0.0;
  double beta_star_alpha = 0.0;
  /// Relative guard band on the hypotheses involving β*(α).
  double tol_curve = 1e-6;
  double tol_level = 1e-9;
  /// When present, half the samples are small perturbations of this
  /// function (typically the minimizer defining β*(α)), which probes the
  /// inclusion where it is sharp.
  std::optional<GridFunction> sharp_point;
  double perturbation = 1e-2;
};

struct SignLemmaReport {
  SignClause clause{};
  int samples = 0;
  int hits = 0;  // samples inside the hypothesis set of the inclusion
  int violations = 0;
  bool hypothesis_ok = false;
  std::string hypothesis;
  std::optional<FunctionalValues> witness;
  int witness_index = -1;

  nlohmann::json to_json() const {
    nlohmann::json j{{"clause", static_cast<int>(clause)}, {"samples", samples},   {"hits", hits},
                     {"violations", violations},          {"hypothesis", hypothesis}, {"hypothesis_ok", hypothesis_ok}};
    if (witness) j["witness"] = {{"index", witness_index}, {"H", witness->H}, {"G", witness->G}};
    return j;
  }
};

namespace detail {

inline bool sign_hypothesis(SignClause c, const ProblemParams& prm, const SignLemmaContext& ctx, std::string& text) {
  const double bs = ctx.beta_star_alpha;
  const double band = ctx.tol_curve * std::max(1.0, std::abs(bs));
  const bool alpha_ok = prm.alpha >= ctx.lambda1_p * (1.0 - ctx.tol_curve);
  switch (c) {
    case SignClause::h_nonpos_implies_g_pos:
      text = concat("alpha=", prm.alpha, " >= lambda1(p)=", ctx.lambda1_p, ", beta=", prm.beta, " < beta*(alpha)=", bs);
      return alpha_ok && prm.beta < bs - band;
    case SignClause::g_neg_implies_h_pos:
      text = concat("alpha=", prm.alpha, " >= lambda1(p)=", ctx.lambda1_p, ", beta=", prm.beta, " <= beta*(alpha)=", bs);
      return alpha_ok && prm.beta <= bs - band;
    case SignClause::g_nonpos_implies_h_nonneg:
      text = concat("alpha=", prm.alpha, " >= lambda1(p)=", ctx.lambda1_p, ", lambda1(q)=", ctx.lambda1_q,
                    " < beta=", prm.beta, " <= beta*(alpha)=", bs);
      return alpha_ok && prm.beta > ctx.lambda1_q * (1.0 + ctx.tol_curve) && prm.beta <= bs - band;
  }
  return false;
}

}  // namespace detail

/// Draws random functions and checks the inclusion of the given clause on
/// each of them. Violations are reported, never thrown.
inline SignLemmaReport check_sign_lemma(const MeshPtr& mesh, const ProblemParams& prm, SignClause clause, int samples,
                                        std::uint64_t seed, const SignLemmaContext& ctx, int workers = 1) {
  prm.validate();
  if (samples < 1) throw invalid_input("check_sign_lemma: samples must be >= 1");
  SignLemmaReport rep;
  rep.clause = clause;
  rep.samples = samples;
  rep.hypothesis_ok = detail::sign_hypothesis(clause, prm, ctx, rep.hypothesis);
  if (!rep.hypothesis_ok) return rep;

  struct Outcome {
    bool hit = false;
    bool violation = false;
    FunctionalValues values;
  };
  std::vector<Outcome> out(samples);
  auto run = [&](int begin, int end) {
    for (int s = begin; s < end; ++s) {
      std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(s)));
      GridFunction u = random_test_function(mesh, rng, prm.p);
      if (ctx.sharp_point && (s % 2 == 1)) {
        std::uniform_real_distribution<double> amp(0.0, ctx.perturbation);
        const double ref = sobolev_norm(*ctx.sharp_point, prm.p);
        u = *ctx.sharp_point + (amp(rng) * ref) * u;
      }
      const auto n = NormPowers::of(u, prm);
      if (n.grad_p == 0.0) continue;
      const auto v = FunctionalValues::from(n, prm);
      const double bh = ctx.tol_level * n.grad_p;
      const double bg = ctx.tol_level * n.grad_q;
      Outcome o;
      o.values = v;
      switch (clause) {
        case SignClause::h_nonpos_implies_g_pos:
          o.hit = v.H <= bh;
          o.violation = v.H < -bh && v.G < -bg;
          break;
        case SignClause::g_neg_implies_h_pos:
          o.hit = v.G < -bg;
          o.violation = v.G < -bg && v.H < -bh;
          break;
        case SignClause::g_nonpos_implies_h_nonneg:
          o.hit = v.G <= bg;
          o.violation = v.G <= bg && v.H < -bh;
          break;
      }
      out[s] = o;
    }
  };
  workers = std::max(1, std::min(workers, samples));
  if (workers == 1) {
    run(0, samples);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (samples + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w * chunk, std::min(samples, (w + 1) * chunk));
    for (auto& t : pool) t.join();
  }
  for (int s = 0; s < samples; ++s) {
    rep.hits += out[s].hit ? 1 : 0;
    if (out[s].violation) {
      if (rep.violations == 0) {
        rep.witness = out[s].values;
        rep.witness_index = s;
      }
      ++rep.violations;
    }
  }
  return rep;
}

}  // namespace pqlab

#endif
