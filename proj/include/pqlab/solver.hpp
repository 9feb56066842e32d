#ifndef PQLAB_SOLVER_HPP
#define PQLAB_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pqlab/curves.hpp"
#include "pqlab/nehari.hpp"

namespace pqlab {

// ---------------------------------------------------------------------------
// Region classification

/// Everything classify() reads. The eigenvalue entries of `table` are
/// turned into one-sided bounds with the relative margin `tol_eig`.
struct ClassifyInputs {
  ProblemParams prm;
  std::string domain_id;
  SpectralTable table;
  double alpha_star = 0.0;
  double beta_star = 0.0;
  Extended beta_star_alpha = Extended::inf();  // β*(α) at prm.alpha
  Extended alpha_star_beta = Extended::inf();  // α*(β) at prm.beta
  double tol_curve = 1e-6;
  double tol_eig = 1e-6;
  double tol_res = 1e-6;
};

struct RegionVerdict {
  int k = 0;
  std::string k_citation;
  int l = 0;
  std::string l_citation;
  bool boundary_case = false;
  Tri resonance = Tri::unknown;
  std::string thm2_status = "n/a";
  std::vector<std::string> hypotheses_log;

  nlohmann::json to_json() const {
    return {{"k", k},
            {"l", l},
            {"citations", {{"negative", k_citation}, {"positive", l_citation}}},
            {"boundary_case", boundary_case},
            {"resonance_status", to_string(resonance)},
            {"thm2_status", thm2_status},
            {"hypotheses_log", hypotheses_log}};
  }
};

namespace detail {

class EigenBounds {
 public:
  EigenBounds(const SpectralTable& t, const std::string& id, double tol) : t_(t), id_(id), tol_(tol) {}

  /// Smallest certified upper bound for λ_k(r) and the method it came from.
  std::optional<std::pair<double, std::string>> upper(double r, int k) const {
    std::optional<std::pair<double, std::string>> best;
    auto offer = [&](std::optional<double> v, double f, const char* m) {
      if (v && (!best || *v * f < best->first)) best = std::make_pair(*v * f, std::string(m));
    };
    offer(t_.find(r, k, id_, EigMethod::exact1d), 1.0 + tol_, "exact1d");
    offer(t_.find(r, k, id_, EigMethod::bump_upper), 1.0 + tol_, "bump_upper");
    if (k == 1) offer(t_.find(r, 1, id_, EigMethod::flow), 1.0 + tol_, "flow");
    return best;
  }

  /// Largest lower-bound surrogate for λ_k(r).
  std::optional<std::pair<double, std::string>> lower(double r, int k) const {
    std::optional<std::pair<double, std::string>> best;
    auto offer = [&](std::optional<double> v, const char* m) {
      if (v && (!best || *v * (1.0 - tol_) > best->first)) best = std::make_pair(*v * (1.0 - tol_), std::string(m));
    };
    offer(t_.find(r, k, id_, EigMethod::exact1d), "exact1d");
    if (k == 1) offer(t_.find(r, 1, id_, EigMethod::flow), "flow");
    return best;
  }

  std::optional<double> estimate(double r, int k) const {
    if (auto v = t_.find(r, k, id_, EigMethod::exact1d)) return v;
    if (k == 1) return t_.find(r, 1, id_, EigMethod::flow);
    return std::nullopt;
  }

  int max_k(double r) const {
    int m = 0;
    for (const auto& e : t_.entries())
      if (e.r == r && e.domain_id == id_) m = std::max(m, e.k);
    return m;
  }

 private:
  const SpectralTable& t_;
  std::string id_;
  double tol_;
};

}  // namespace detail

/// Largest k (negative energy) and l (positive energy) whose hypotheses are
/// certified by the inputs, with the case that grants them. Every comparison
/// used is written to the log.
inline RegionVerdict classify(const ClassifyInputs& in) {
  in.prm.validate();
  const auto& prm = in.prm;
  const double p = prm.p, q = prm.q, alpha = prm.alpha, beta = prm.beta;
  detail::EigenBounds eb(in.table, in.domain_id, in.tol_eig);
  RegionVerdict v;
  auto log = [&](auto&&... parts) { v.hypotheses_log.push_back(detail::concat(parts...)); };

  v.resonance = is_resonant(alpha, p, in.table, in.domain_id, in.tol_res);
  log("resonance(alpha=", alpha, ") = ", to_string(v.resonance));

  // K = number of certified q-eigenvalues below β
  int K = 0;
  for (int k = 1; k <= eb.max_k(q); ++k) {
    const auto u = eb.upper(q, k);
    if (!u) break;
    if (u->first < beta) {
      K = k;
      log("lambda_", k, "(q) <= ", u->first, " (", u->second, ") < beta = ", beta);
    } else {
      log("lambda_", k, "(q) upper bound ", u->first, " (", u->second, ") >= beta = ", beta);
      break;
    }
  }

  const auto l1p = eb.estimate(p, 1);
  const auto l1p_lo = eb.lower(p, 1);
  const double band_p = l1p ? in.tol_curve * std::max(1.0, *l1p) : 0.0;
  const bool alpha_below = l1p_lo && alpha < l1p_lo->first && !(l1p && std::abs(alpha - *l1p) <= band_p);
  const bool alpha_eq = l1p && std::abs(alpha - *l1p) <= band_p;
  const auto l1p_up = eb.upper(p, 1);
  const bool alpha_above = l1p_up && alpha > l1p_up->first && !alpha_eq;
  if (l1p)
    log("lambda_1(p) = ", *l1p, ": alpha ", alpha_below ? "below" : (alpha_eq ? "equal (within band)" : (alpha_above ? "above" : "undecided")));
  const double band_b = in.tol_curve * std::max(1.0, in.beta_star);

  struct Cand {
    int k;
    std::string cite;
    bool boundary;
  };
  std::vector<Cand> cands;
  if (K >= 1) {
    if (alpha_below) {
      log("Thm1(i): alpha = ", alpha, " < ", l1p_lo->first);
      cands.push_back({K, "Thm1(i)", false});
    }
    if (alpha_eq && beta < in.beta_star - band_b) {
      log("Thm1(ii): beta = ", beta, " < beta* = ", in.beta_star);
      cands.push_back({K, "Thm1(ii)", false});
    }
    if (alpha_eq && std::abs(beta - in.beta_star) <= band_b && p > 2.0 * q) {
      log("Thm1(iii): |beta - beta*| = ", std::abs(beta - in.beta_star), " <= ", band_b, ", p = ", p, " > 2q");
      cands.push_back({K, "Thm1(iii)", true});
    }
    if (alpha_above && alpha < in.alpha_star * (1.0 - in.tol_curve) && !in.beta_star_alpha.is_inf()) {
      const double bs = in.beta_star_alpha.value();
      const double band = in.tol_curve * std::max(1.0, bs);
      if (beta < bs - band) {
        log("Thm1(iv): lambda_1(p) < alpha < alpha* = ", in.alpha_star, ", beta = ", beta, " < beta*(alpha) = ", bs);
        cands.push_back({K, "Thm1(iv)", false});
      } else if (beta <= bs + band) {
        log("Thm1(iv) boundary: |beta - beta*(alpha)| = ", std::abs(beta - bs), " <= ", band);
        cands.push_back({K, "Thm1(iv)", true});
      }
    }
    if (in.alpha_star_beta.above(alpha)) {
      const bool inf = in.alpha_star_beta.is_inf();
      const double as = inf ? 0.0 : in.alpha_star_beta.value();
      if (inf || alpha < as - in.tol_curve * std::max(1.0, as)) {
        log("Thm1-alph: beta > lambda_", K, "(q), alpha = ", alpha, " < alpha*(beta) = ", in.alpha_star_beta.str());
        cands.push_back({K, "Thm1-alph", false});
      }
    }
  }

  // resonant case: the smallest admissible l
  for (int l = 1; l <= eb.max_k(p); ++l) {
    const auto lo = eb.lower(p, l);
    if (!lo) break;
    if (!(alpha < lo->first)) continue;
    const int kk = K - l + 1;
    if (kk < 1) {
      log("Thm2: alpha < lambda_", l, "(p) >= ", lo->first, " but only ", K, " q-eigenvalues below beta");
      break;
    }
    bool side = false;
    if (v.resonance == Tri::no) {
      side = true;
      v.thm2_status = "certified (alpha not an eigenvalue)";
    } else if (alpha_eq && std::abs(beta - in.beta_star) > band_b) {
      side = true;
      v.thm2_status = "certified (alpha = lambda_1(p), beta != beta*)";
    } else {
      v.thm2_status = "UNKNOWN";
      log("Thm2: side condition on ES(p; alpha) not certified");
    }
    if (side) {
      const std::string cite = alpha_eq && l == 2 ? "Cor. thm12(iii)" : detail::concat("Thm2 (l=", l, ")");
      log(cite, ": alpha = ", alpha, " < lambda_", l, "(p) >= ", lo->first, ", lambda_", K, "(q) < beta gives k = ", kk);
      cands.push_back({kk, cite, false});
    }
    break;
  }

  for (const auto& c : cands)
    if (c.k > v.k) {
      v.k = c.k;
      v.k_citation = c.cite;
      v.boundary_case = c.boundary;
    }

  // positive-energy pairs: α above λ_l(p), β below the curve
  bool below_curve = false;
  const auto l1q_lo = eb.lower(q, 1);
  if (l1q_lo && beta < l1q_lo->first) {
    below_curve = true;
    log("beta = ", beta, " < lambda_1(q) >= ", l1q_lo->first, " <= beta*(alpha)");
  } else if (!in.beta_star_alpha.is_inf()) {
    const double bs = in.beta_star_alpha.value();
    if (beta < bs - in.tol_curve * std::max(1.0, bs)) {
      below_curve = true;
      log("beta = ", beta, " < beta*(alpha) = ", bs);
    }
  } else if (alpha_below) {
    below_curve = true;  // β*(α) = +∞
  }
  if (below_curve) {
    for (int l = 1; l <= eb.max_k(p); ++l) {
      const auto u = eb.upper(p, l);
      if (!u || !(u->first < alpha)) break;
      v.l = l;
      log("Thm3: lambda_", l, "(p) <= ", u->first, " (", u->second, ") < alpha = ", alpha);
    }
    if (v.l > 0) v.l_citation = "Thm3";
  }
  if (v.k > 0 && v.l > 0) log("k + l = ", v.k + v.l, " distinct pairs in total");
  return v;
}

/// Fills the curve-dependent inputs from a solver on the same mesh.
inline ClassifyInputs make_classify_inputs(CurveSolver& solver, SpectralTable table, const ProblemParams& prm) {
  ClassifyInputs in;
  in.prm = prm;
  in.domain_id = solver.mesh()->id();
  in.table = std::move(table);
  const auto& c = solver.constants();
  in.alpha_star = c.alpha_star;
  in.beta_star = c.beta_star;
  in.beta_star_alpha = solver.beta_star_of_alpha(prm.alpha).value;
  in.alpha_star_beta = solver.alpha_star_of_beta(prm.beta).value;
  return in;
}

// ---------------------------------------------------------------------------
// Solutions

enum class SignClass { trivial, positive, negative, sign_changing };

inline const char* to_string(SignClass s) {
  switch (s) {
    case SignClass::trivial:
      return "trivial";
    case SignClass::positive:
      return "positive";
    case SignClass::negative:
      return "negative";
    case SignClass::sign_changing:
      return "sign-changing";
  }
  return "?";
}

struct SolutionReport {
  double residual = 0.0;
  double energy = 0.0;
  double H = 0.0;
  double G = 0.0;
  double nehari_deviation = 0.0;  // |E - (p-q)/(pq) G| / (|H|/p + |G|/q)
  SignClass sign = SignClass::trivial;
  int nodal_domains = 0;
  LevelFlags flags;

  nlohmann::json to_json() const {
    return {{"residual", residual}, {"energy", energy}, {"H", H}, {"G", G}, {"nehari_deviation", nehari_deviation},
            {"sign_class", to_string(sign)}, {"nodal_domains", nodal_domains}, {"b_plus", flags.b_plus}};
  }
};

/// Nodal domains are the connected components of [u > τ] and [u < -τ] with
/// τ = 1e-8 sup|u|.
inline SolutionReport verify_solution(const GridFunction& u, const ProblemParams& prm) {
  prm.validate();
  SolutionReport r;
  r.flags = level_membership(u, prm);
  if (u.is_zero()) {
    r.flags.trivial = true;
    return r;
  }
  const auto v = evaluate(u, prm);
  r.residual = residual_norm(u, prm);
  r.energy = v.E;
  r.H = v.H;
  r.G = v.G;
  const double scale = std::abs(v.H) / prm.p + std::abs(v.G) / prm.q;
  r.nehari_deviation = scale > 0.0 ? std::abs(v.E - (prm.p - prm.q) / (prm.p * prm.q) * v.G) / scale : 0.0;
  const double tau = 1e-8 * u.sup_norm();
  const int pos = count_components(*u.mesh, [&](int i) { return u.values[i] > tau; });
  const int neg = count_components(*u.mesh, [&](int i) { return u.values[i] < -tau; });
  r.nodal_domains = pos + neg;
  r.sign = pos && neg ? SignClass::sign_changing : (pos ? SignClass::positive : SignClass::negative);
  return r;
}

struct RegistryEntry {
  GridFunction u;
  double energy = 0.0;
  double residual = 0.0;
  SignClass sign = SignClass::trivial;
  int nodal_domains = 0;
  std::string level_tag = "none";
};

/// Distinct solution pairs ±u. Entries are stored with the sign that makes
/// the largest nodal value positive.
class SolutionRegistry {
 public:
  explicit SolutionRegistry(double p = 2.0, double sep_tol = 1e-3) : p_(p), sep_tol_(sep_tol) {}

  double sep_tol() const { return sep_tol_; }
  const std::vector<RegistryEntry>& entries() const { return entries_; }
  std::vector<RegistryEntry>& entries() { return entries_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }

  /// min(‖u - v‖, ‖u + v‖) / ‖v‖ in the W^{1,p} seminorm.
  double pair_distance(const GridFunction& u, const GridFunction& v) const {
    const double nv = sobolev_norm(v, p_);
    return std::min(sobolev_norm(u - v, p_), sobolev_norm(u + v, p_)) / nv;
  }

  bool is_new(const GridFunction& u) const {
    for (const auto& e : entries_)
      if (pair_distance(u, e.u) <= sep_tol_) return false;
    return true;
  }

  bool add(RegistryEntry e) {
    if (e.u.is_zero() || !is_new(e.u)) return false;
    int imax = 0;
    for (int i = 0; i < e.u.size(); ++i)
      if (std::abs(e.u.values[i]) > std::abs(e.u.values[imax])) imax = i;
    if (e.u.values[imax] < 0.0) {
      e.u *= -1.0;
      if (e.sign == SignClass::negative) e.sign = SignClass::positive;
    }
    entries_.push_back(std::move(e));
    return true;
  }

  void sort_by_energy() {
    std::stable_sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.energy < b.energy; });
  }

  void write_csv(std::ostream& os) const {
    os.precision(15);
    os << "index,energy,residual,sign_class,nodal_domains,level_tag\n";
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      os << i << ',' << e.energy << ',' << e.residual << ',' << to_string(e.sign) << ',' << e.nodal_domains << ','
         << e.level_tag << '\n';
    }
  }

 private:
  double p_;
  double sep_tol_;
  std::vector<RegistryEntry> entries_;
};

/// Fewer solutions than the theorem grants within the budget; the partial
/// registry is attached.
class budget_error : public convergence_error {
 public:
  budget_error(const std::string& what, SolutionRegistry reg) : convergence_error(what), reg_(std::move(reg)) {}
  const SolutionRegistry& registry() const { return reg_; }

 private:
  SolutionRegistry reg_;
};

struct SolveOptions {
  double tol_solve = 1e-6;  // full-space dual residual for acceptance
  double tol_newton = 1e-10;
  double tol_level = 1e-9;
  double sep_tol = 1e-3;
  int starts_per_level = 64;
  long max_steps = 100000;
  int max_descent = 400;
  int max_newton = 60;
  /// Starts to run even after the target count is reached (probing).
  int min_starts = 0;
  double deflation_shift = 1e-2;
  std::uint64_t seed = 1;
  int workers = 1;
};

/// What happened to each start of a search.
struct SearchStats {
  int starts = 0;
  long steps = 0;
  int accepted = 0;
  int to_zero = 0;
  int duplicates = 0;
  int failed = 0;
  int barrier_crossings = 0;  // descent reached G ≥ 0 from [G < 0]
  std::vector<std::string> outcomes;
};

// ---------------------------------------------------------------------------
// Negative level bounds

struct LevelBounds {
  std::vector<double> raw;      // min_t max_sphere E for j bumps
  std::vector<double> bounds;   // suffix minima: valid and nondecreasing
  std::vector<double> t_opt;
  std::vector<std::vector<GridFunction>> bumps;  // unit ‖·‖_q bumps per level
  std::vector<std::string> certificates;
};

namespace detail {

/// q-eigenfunctions of j equal pieces of an interval mesh (j = 1: the whole
/// interval), normalized to ‖·‖_q = 1.
inline std::vector<GridFunction> q_bumps(const MeshPtr& mesh, double r, int j) {
  if (j == 1) return {first_eigenpair(r, mesh).phi};
  if (mesh->dim() != 1) throw not_applicable("bump spheres with more than one bump need an interval mesh");
  return bump_upper_bound(r, j, mesh).bumps;
}

/// max over Σ|a_i|^q = 1 of Σ_i E(t a_i b_i) for decoupled bumps with norm
/// powers n_i, by sampling plus coordinate refinement.
inline double sphere_max(const std::vector<NormPowers>& n, const ProblemParams& prm, double t, std::mt19937_64& rng,
                         int samples) {
  const int j = static_cast<int>(n.size());
  auto val = [&](const std::vector<double>& a) {
    double s = 0.0;
    for (int i = 0; i < j; ++i) s += FunctionalValues::from(n[i].scaled(t * a[i], prm), prm).E;
    return s;
  };
  auto project = [&](std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += std::pow(std::abs(x), prm.q);
    for (double& x : a) x /= std::pow(s, 1.0 / prm.q);
  };
  std::vector<double> best(j, 0.0);
  best[0] = 1.0;
  double bv = val(best);
  for (int i = 0; i < j; ++i) {
    std::vector<double> a(j, 0.0);
    a[i] = 1.0;
    if (double v = val(a); v > bv) bv = v, best = a;
  }
  std::vector<double> eq(j, 1.0);
  project(eq);
  if (double v = val(eq); v > bv) bv = v, best = eq;
  std::exponential_distribution<double> ex(1.0);
  for (int s = 0; s < samples; ++s) {
    std::vector<double> a(j);
    for (auto& x : a) x = ex(rng);
    project(a);
    if (double v = val(a); v > bv) bv = v, best = a;
  }
  for (double step = 0.05; step > 1e-7; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int i = 0; i < j; ++i)
        for (double d : {step, -step}) {
          auto a = best;
          a[i] = std::max(0.0, a[i] + d);
          bool nz = false;
          for (double x : a) nz = nz || x > 0.0;
          if (!nz) continue;
          project(a);
          if (double v = val(a); v > bv) bv = v, best = a, improved = true;
        }
    }
  }
  return bv;
}

}  // namespace detail

/// Upper bounds for a_1..a_k from spheres of j disjoint q-eigenfunction
/// bumps scaled by t, minimized over t. Needs every bump in [G_β < 0].
inline LevelBounds negative_level_bounds(int k, const MeshPtr& mesh, const ProblemParams& prm, std::uint64_t seed = 1,
                                         int samples = 2000) {
  prm.validate();
  if (k < 1) throw invalid_input("negative_level_bounds: k must be >= 1");
  LevelBounds out;
  std::mt19937_64 rng(seed);
  for (int j = 1; j <= k; ++j) {
    auto bumps = detail::q_bumps(mesh, prm.q, j);
    if (j > 1 && !detail::supports_decouple(*mesh, bumps))
      throw construction_error(detail::concat("negative_level_bounds: bumps of level ", j, " overlap"));
    std::vector<NormPowers> n;
    for (std::size_t i = 0; i < bumps.size(); ++i) {
      n.push_back(NormPowers::of(bumps[i], prm));
      const double rq = n.back().grad_q / n.back().lq;
      if (!(rq < prm.beta))
        throw construction_error(detail::concat("negative_level_bounds: level ", j, " bump ", i, " has q-quotient ", rq,
                                                " >= beta = ", prm.beta, " (needs lambda_", j, "(q) bump bound < beta)"));
    }
    // fibering scale of the first bump sets the t range
    const auto v0 = FunctionalValues::from(n[0], prm);
    const double t0 = v0.H > 0.0 ? fibering_t(v0.H, v0.G, prm.p, prm.q) : 1.0;
    auto f = [&](double t) { return detail::sphere_max(n, prm, t, rng, samples); };
    double best_t = t0, best = f(t0);
    for (int i = -40; i <= 40; ++i) {
      const double t = t0 * std::pow(10.0, i / 10.0);
      if (double v = f(t); v < best) best = v, best_t = t;
    }
    // golden section on log t around the grid minimum
    double lo = std::log(best_t) - 0.25, hi = std::log(best_t) + 0.25;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = f(std::exp(x1)), f2 = f(std::exp(x2));
    for (int it = 0; it < 60; ++it) {
      if (f1 < f2) {
        hi = x2, x2 = x1, f2 = f1, x1 = hi - g * (hi - lo), f1 = f(std::exp(x1));
      } else {
        lo = x1, x1 = x2, f1 = f2, x2 = lo + g * (hi - lo), f2 = f(std::exp(x2));
      }
    }
    const double tm = std::exp(0.5 * (lo + hi));
    if (double v = f(tm); v < best) best = v, best_t = tm;
    if (!(best < 0.0))
      throw construction_error(detail::concat("negative_level_bounds: level ", j, " bound ", best, " is not negative"));
    out.raw.push_back(best);
    out.t_opt.push_back(best_t);
    out.bumps.push_back(std::move(bumps));
    out.certificates.push_back(detail::concat(j, " bump(s), t = ", best_t, ", max over sphere = ", best));
  }
  out.bounds = out.raw;
  for (int j = k - 2; j >= 0; --j) out.bounds[j] = std::min(out.bounds[j], out.bounds[j + 1]);
  return out;
}

// ---------------------------------------------------------------------------
// Critical point searches

namespace detail {

/// Deflation operator M(u) = Π_i (σ_i / d_i(u)^2 + 1), d_i the H^1_0
/// distance to the nearer of ±s_i; the trivial solution is deflated with
/// σ_0 / ‖u‖^2.
class Deflation {
 public:
  explicit Deflation(const MeshPtr& mesh) : k_(laplacian(mesh)) {}

  void add_root(const GridFunction& s, double shift) {
    roots_.push_back(as_vec(s));
    sigma_.push_back(shift * as_vec(s).dot(k_ * as_vec(s)));
  }
  void deflate_zero(double sigma0) { sigma0_ = sigma0; }

  /// ln M(u) and its gradient.
  std::pair<double, Vec> log_m(const Vec& u) const {
    double lm = 0.0;
    Vec g = Vec::Zero(u.size());
    auto one = [&](const Vec& d, double sigma) {
      const Vec kd = k_ * d;
      const double d2 = std::max(d.dot(kd), 1e-300);
      lm += std::log(sigma / d2 + 1.0);
      g -= (2.0 * sigma / (d2 * (sigma + d2))) * kd;
    };
    for (std::size_t i = 0; i < roots_.size(); ++i) {
      const Vec a = u - roots_[i], b = u + roots_[i];
      one(a.dot(k_ * a) <= b.dot(k_ * b) ? a : b, sigma_[i]);
    }
    if (sigma0_ > 0.0) one(u, sigma0_);
    return {lm, g};
  }

 private:
  SpMat k_;
  std::vector<Vec> roots_;
  std::vector<double> sigma_;
  double sigma0_ = 0.0;
};

/// Largest |∇u|^2 over the elements.
inline double max_grad2(const GridFunction& u) {
  const double inv_h = 1.0 / u.mesh->h();
  double m = 0.0;
  for (const auto& e : u.mesh->elements()) m = std::max(m, element_gradient(e, u.values, inv_h).norm2);
  return m;
}

/// The flux regularization has tiny spurious critical points where |∇u|^2
/// is comparable to eps; anything that small counts as the zero solution.
inline bool below_regularization_floor(const GridFunction& u, double eps) { return max_grad2(u) <= 1e4 * eps; }

enum class DescentEnd { near_critical, zero, stalled, budget };

/// plain: descent on E. nehari: E on N ∩ B⁺, reprojected by the fibering
/// map. nodal: u⁺ and u⁻ are reprojected to their own fibers, which keeps
/// sign-changing iterates sign-changing.
enum class DescentMode { plain, nehari, nodal };

/// t(w)w, or nullopt when the fiber of w has no critical point.
inline std::optional<double> fiber_scale(const GridFunction& w, const ProblemParams& prm) {
  const auto v = evaluate(w, prm);
  if (!(v.H * v.G < 0.0)) return std::nullopt;
  return fibering_t(v.H, v.G, prm.p, prm.q);
}

/// Preconditioned descent on E (metric: Hessian of the gradient terms,
/// which is SPD). Stops when the residual dropped by `drop`, at the
/// regularization floor, or on stagnation. `g_max` records the largest
/// G/‖∇u‖_q^q seen, for the barrier check.
inline DescentEnd descend(GridFunction& u, const ProblemParams& prm, int max_steps, double drop, long& steps,
                          double& g_max, DescentMode mode, DescentMode fallback = DescentMode::plain) {
  const Terms et = energy_terms(prm);
  const Terms pt{{Term::Kind::grad, prm.p, 1.0}, {Term::Kind::grad, prm.q, 1.0}};
  const double vol = u.mesh->node_volume();
  const double eps = prm.eps_reg;
  auto value = [&](const GridFunction& w) { return terms_value(w, et, eps); };
  auto track = [&](const GridFunction& w) {
    const auto n = NormPowers::of(w, prm);
    if (n.grad_q > 0.0) g_max = std::max(g_max, (n.grad_q - prm.beta * n.lq) / n.grad_q);
  };
  auto reproject = [&](GridFunction& w) {
    if (mode == DescentMode::plain) return true;
    if (mode == DescentMode::nehari) {
      const auto v = evaluate(w, prm);
      if (!(v.H < 0.0 && v.G > 0.0)) return false;
      w *= fibering_t(v.H, v.G, prm.p, prm.q);
      return true;
    }
    GridFunction pos = w, neg = w;
    for (int i = 0; i < w.size(); ++i) {
      pos.values[i] = std::max(w.values[i], 0.0);
      neg.values[i] = std::min(w.values[i], 0.0);
    }
    if (pos.is_zero() || neg.is_zero()) return false;
    const auto tp = fiber_scale(pos, prm), tn = fiber_scale(neg, prm);
    if (!tp || !tn) return false;
    w = *tp * pos + *tn * neg;
    return true;
  };
  if (!reproject(u)) {
    if (mode != DescentMode::nodal) return DescentEnd::stalled;
    mode = fallback;  // one of the parts has no fiber critical point
    if (!reproject(u)) return DescentEnd::stalled;
  }
  track(u);
  Vec g = terms_gradient(u, et, eps);
  const double r0 = dual_norm(g, vol);
  const double n0 = sobolev_norm(u, prm.p);
  double e = value(u);
  const double e0 = e;
  for (int it = 0; it < max_steps; ++it) {
    // at the floor, or E > 0 and norm or energy shrunk by 1e4
    if (below_regularization_floor(u, eps) || (e > 0.0 && (sobolev_norm(u, prm.p) <= 1e-4 * n0 || e <= 1e-4 * e0)))
      return DescentEnd::zero;
    const double rn = dual_norm(g, vol);
    if (rn <= drop * r0) return DescentEnd::near_critical;
    ++steps;
    const SpMat pm = terms_hessian(u, pt, std::max(eps, 1e-6 * mean_grad2(u)));
    auto sol = sparse_solve(pm, -g);
    Vec d = sol ? *sol : Vec(-g);
    if (d.dot(g) >= 0.0) d = -g;
    double t = 1.0;
    bool ok = false;
    for (int ls = 0; ls < 40 && !ok; ++ls, t *= 0.5) {
      GridFunction w = u;
      as_vec(w) += t * d;
      if (!reproject(w)) continue;
      const double ew = value(w);
      const double need = mode == DescentMode::plain ? e + 1e-4 * t * d.dot(g) : e;
      if (ew <= need) {
        const bool flat = std::abs(ew - e) <= 1e-15 * std::abs(e);
        u = std::move(w);
        e = ew;
        ok = true;
        if (flat) {
          track(u);
          return DescentEnd::stalled;
        }
      }
    }
    if (!ok) return DescentEnd::stalled;
    track(u);
    g = terms_gradient(u, et, eps);
  }
  return DescentEnd::budget;
}

/// Deflated Newton on E'(u) = 0: the Newton step δ is rescaled by
/// 1/(1 - ∇ln M·δ). For q < 2 the solve runs through a continuation in
/// the flux regularization. Returns true when the full residual at
/// eps_reg is below `tol`.
inline bool deflated_newton(GridFunction& u, const ProblemParams& prm, const Deflation& defl, double tol, int max_newton,
                            long& steps) {
  const Terms et = energy_terms(prm);
  const double vol = u.mesh->node_volume();
  std::vector<double> stages;
  if (prm.q < 2.0) {
    for (double e = 1e-2 * mean_grad2(u); e > prm.eps_reg; e *= 1e-2) stages.push_back(e);
  }
  stages.push_back(prm.eps_reg);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const double eps = stages[s];
    const bool last = s + 1 == stages.size();
    auto resid = [&](const GridFunction& w) { return dual_norm(terms_gradient(w, et, eps), vol); };
    auto merit = [&](const GridFunction& w, double r) { return std::exp(defl.log_m(as_vec(w)).first) * r; };
    double r = resid(u);
    const double target = last ? tol : std::max(tol, 1e-6 * r);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < (last ? max_newton : 15); ++it) {
      if (r <= target) break;
      if (last && r <= 1e3 * tol && r > 0.5 * prev) break;  // rounding floor
      prev = r;
      ++steps;
      const Vec f = terms_gradient(u, et, eps);
      auto sol = sparse_solve(terms_hessian(u, et, eps), -f);
      if (!sol) return false;
      const auto [lm, glm] = defl.log_m(as_vec(u));
      const double denom = 1.0 - glm.dot(*sol);
      const Vec d = std::abs(denom) > 1e-12 ? Vec(*sol / denom) : *sol;
      const double m0 = std::exp(lm) * r;
      double t = 1.0;
      bool ok = false;
      for (int ls = 0; ls < 20 && !ok; ++ls, t *= 0.5) {
        GridFunction w = u;
        as_vec(w) += t * d;
        if (!as_vec(w).allFinite()) continue;
        const double rw = resid(w);
        if (merit(w, rw) < (1.0 - 1e-4 * t) * m0 || rw < 0.5 * r) {
          u = std::move(w);
          r = rw;
          ok = true;
        }
      }
      if (!ok) break;
    }
  }
  return residual_norm(u, prm) <= tol;
}

inline bool changes_sign(const GridFunction& u) {
  const double tau = 1e-8 * u.sup_norm();
  bool pos = false, neg = false;
  for (double x : u.values) pos = pos || x > tau, neg = neg || x < -tau;
  return pos && neg;
}

/// Minimal norm-based scale for "E < 0" and "E > 0" decisions.
inline double energy_scale(const GridFunction& u, const ProblemParams& prm) {
  const auto n = NormPowers::of(u, prm);
  return n.grad_p / prm.p + n.grad_q / prm.q;
}

/// Unit combination Σ c_i b_i of bumps.
inline GridFunction combine(const std::vector<GridFunction>& bumps, const std::vector<double>& c) {
  GridFunction u(bumps.front().mesh);
  for (std::size_t i = 0; i < bumps.size(); ++i) u += c[i] * bumps[i];
  return u;
}

/// Deterministic start list: sign patterns on each bump sphere, then random
/// mixes of the largest one and random test functions.
inline std::vector<GridFunction> start_list(const std::vector<std::vector<GridFunction>>& spheres, const MeshPtr& mesh,
                                            double p, int count, std::uint64_t seed) {
  std::vector<GridFunction> out;
  for (auto it = spheres.rbegin(); it != spheres.rend(); ++it) {
    const auto& b = *it;
    const int j = static_cast<int>(b.size());
    // alternating signs first: the highest-genus vertex
    std::vector<double> alt(j);
    for (int i = 0; i < j; ++i) alt[i] = i % 2 ? -1.0 : 1.0;
    out.push_back(combine(b, alt));
    for (int mask = 0; mask < (1 << (j - 1)) && j <= 6; ++mask) {
      std::vector<double> c(j, 1.0);
      for (int i = 1; i < j; ++i)
        if (mask & (1 << (i - 1))) c[i] = -1.0;
      if (c == alt) continue;
      out.push_back(combine(b, c));
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::vector<GridFunction>* big = spheres.empty() ? nullptr : &spheres.back();
  for (int s = 0; static_cast<int>(out.size()) < count; ++s) {
    if (big && s % 2 == 0) {
      std::vector<double> c(big->size());
      for (auto& x : c) x = normal(rng);
      out.push_back(combine(*big, c));
    } else {
      std::mt19937_64 r2(mix_seed(seed, s));
      out.push_back(random_test_function(mesh, r2, p));
    }
  }
  out.resize(std::min<std::size_t>(out.size(), count));
  return out;
}

struct StartResult {
  std::optional<GridFunction> u;
  std::string outcome;
  long steps = 0;
  bool zero = false;
  bool barrier = false;
};

/// Generic search loop shared by the negative and positive searches.
/// `run` maps (start, deflation snapshot) to a candidate; candidates are
/// merged in start order.
template <class Run, class Accept>
SolutionRegistry run_search(int target, const std::vector<GridFunction>& starts, const ProblemParams& prm,
                            const SolveOptions& opt, const SolutionRegistry* seeds, SearchStats& stats, Run&& run,
                            Accept&& accept) {
  SolutionRegistry reg(prm.p, opt.sep_tol);
  if (seeds)
    for (const auto& e : seeds->entries()) reg.add(e);
  const int workers = std::max(1, opt.workers);
  std::size_t next = 0;
  while (next < starts.size()) {
    if (reg.size() >= target && stats.starts >= opt.min_starts) break;
    if (stats.steps >= opt.max_steps) {
      stats.outcomes.push_back("step budget exhausted");
      break;
    }
    const std::size_t batch = std::min<std::size_t>(workers, starts.size() - next);
    Deflation defl(starts.front().mesh);
    for (const auto& e : reg.entries()) defl.add_root(e.u, opt.deflation_shift);
    std::vector<StartResult> res(batch);
    auto work = [&](std::size_t i) { res[i] = run(starts[next + i], defl); };
    if (batch == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = 0; i < batch; ++i) pool.emplace_back(work, i);
      for (auto& t : pool) t.join();
    }
    for (auto& r : res) {
      ++stats.starts;
      stats.steps += r.steps;
      stats.barrier_crossings += r.barrier ? 1 : 0;
      if (r.zero) ++stats.to_zero;
      std::string outcome = r.outcome;
      if (r.u) {
        if (!accept(*r.u, outcome)) {
          ++stats.failed;
        } else {
          const auto rep = verify_solution(*r.u, prm);
          RegistryEntry e{*r.u, rep.energy, rep.residual, rep.sign, rep.nodal_domains, "none"};
          if (reg.add(std::move(e))) {
            ++stats.accepted;
            outcome += " -> accepted";
          } else {
            ++stats.duplicates;
            outcome += " -> duplicate";
          }
        }
      } else if (!r.zero) {
        ++stats.failed;
      }
      stats.outcomes.push_back(outcome);
    }
    next += batch;
  }
  return reg;
}

inline void tag_levels(SolutionRegistry& reg, const char* prefix) {
  reg.sort_by_energy();
  int j = 0;
  for (auto& e : reg.entries()) e.level_tag = concat(prefix, ++j);
}

}  // namespace detail

/// Pairs of critical points with E < 0. Starts come from the bump spheres
/// of negative_level_bounds and random mixes; each start is descended on E
/// and finished by deflated Newton.
inline SolutionRegistry find_negative(int k, const MeshPtr& mesh, const ProblemParams& prm, const SolveOptions& opt = {},
                                      const SolutionRegistry* seeds = nullptr, SearchStats* stats_out = nullptr,
                                      const char* tag = "a_") {
  prm.validate();
  if (k < 0) throw invalid_input("find_negative: k must be >= 0");
  std::vector<std::vector<GridFunction>> spheres;
  for (int j = 1; j <= std::max(k, 1); ++j) {
    try {
      auto b = detail::q_bumps(mesh, prm.q, j);
      bool neg = true;
      for (const auto& x : b) neg = neg && rayleigh_quotient(x, prm.q) < prm.beta;
      if (neg || j == 1) spheres.push_back(std::move(b));
    } catch (const error&) {
      break;
    }
  }
  const int budget = opt.starts_per_level * std::max(k, 1);
  const auto starts = detail::start_list(spheres, mesh, prm.p, std::max(budget, opt.min_starts), opt.seed);
  SearchStats stats;
  // G ≥ 0 cannot be reached from [G < 0] while E < 0 when λ1(q) < β ≤ β*(α)
  auto run = [&](const GridFunction& start, const detail::Deflation& snapshot) {
    detail::StartResult r;
    GridFunction u = start;
    const auto v = evaluate(u, prm);
    if (v.H > 0.0 && v.G < 0.0) u *= fibering_t(v.H, v.G, prm.p, prm.q);
    const bool started_neg = evaluate(u, prm).G < 0.0;
    double g_max = -std::numeric_limits<double>::infinity();
    const auto end = detail::descend(u, prm, opt.max_descent, 1e-3, r.steps, g_max, detail::changes_sign(u) ? detail::DescentMode::nodal : detail::DescentMode::plain);
    r.barrier = started_neg && g_max >= 0.0 && energy(u, prm) < 0.0;
    if (end == detail::DescentEnd::zero) {
      r.zero = true;
      r.outcome = "descent -> 0";
      return r;
    }
    detail::Deflation defl = snapshot;
    defl.deflate_zero(opt.deflation_shift * as_vec(u).dot(laplacian(mesh) * as_vec(u)));
    const bool conv = detail::deflated_newton(u, prm, defl, opt.tol_newton, opt.max_newton, r.steps);
    if (detail::below_regularization_floor(u, prm.eps_reg)) {
      r.zero = true;
      r.outcome = "newton -> 0";
      return r;
    }
    r.outcome = detail::concat("newton ", conv ? "converged" : "stopped", ", residual ", residual_norm(u, prm));
    r.u = std::move(u);
    return r;
  };
  auto accept = [&](const GridFunction& u, std::string& why) {
    const double res = residual_norm(u, prm);
    const double e = energy(u, prm);
    if (!(res <= opt.tol_solve)) return why += " (residual too large)", false;
    if (!(e < -opt.tol_level * detail::energy_scale(u, prm))) return why += " (energy not negative)", false;
    return true;
  };
  auto reg = detail::run_search(k, starts, prm, opt, seeds, stats, run, accept);
  detail::tag_levels(reg, tag);
  if (stats_out) *stats_out = stats;
  if (reg.size() < k)
    throw budget_error(detail::concat("find_negative: ", reg.size(), " of ", k, " pairs after ", stats.starts,
                                      " starts and ", stats.steps, " steps"),
                       std::move(reg));
  return reg;
}

/// Pairs of critical points with E > 0 in B⁺. Starts are built from
/// spheres of j disjoint p-eigenfunction bumps (max R_p < α), projected to
/// the Nehari manifold; descent runs on E restricted to N, then deflated
/// Newton finishes on the full space. The least-energy candidate is also
/// searched over sampled B⁺ directions.
inline SolutionRegistry find_positive(int l, const MeshPtr& mesh, const ProblemParams& prm, const SolveOptions& opt = {},
                                      const SolutionRegistry* seeds = nullptr, SearchStats* stats_out = nullptr) {
  prm.validate();
  if (l < 0) throw invalid_input("find_positive: l must be >= 0");
  std::vector<std::vector<GridFunction>> spheres;
  for (int j = 1; j <= std::max(l, 1); ++j) {
    std::vector<GridFunction> b;
    try {
      b = j == 1 ? std::vector<GridFunction>{first_eigenpair(prm.p, mesh).phi} : bump_upper_bound(prm.p, j, mesh).bumps;
    } catch (const error&) {
      break;
    }
    double mx = 0.0;
    for (const auto& x : b) mx = std::max(mx, rayleigh_quotient(x, prm.p));
    if (!(mx < prm.alpha)) {
      if (j <= l)
        throw construction_error(detail::concat("find_positive: level ", j, " sphere has max R_p = ", mx,
                                                " >= alpha = ", prm.alpha));
      break;
    }
    spheres.push_back(std::move(b));
  }
  const int budget = opt.starts_per_level * std::max(l, 1);
  auto starts = detail::start_list(spheres, mesh, prm.p, std::max(budget, opt.min_starts), opt.seed);
  // least-energy candidate: best sampled B⁺ direction by the fibered J goes first
  {
    std::optional<GridFunction> best;
    double bj = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 256; ++s) {
      std::mt19937_64 rng(mix_seed(opt.seed ^ 0x5bd1e995ULL, s));
      GridFunction u = random_test_function(mesh, rng, prm.p);
      const auto v = evaluate(u, prm);
      if (!(v.H < 0.0 && v.G > 0.0)) continue;
      if (double j = fibered_J(v.H, v.G, prm.p, prm.q); j < bj) bj = j, best = u;
    }
    if (best) starts.insert(starts.begin() + std::min<std::size_t>(starts.size(), spheres.size()), *best);
  }
  SearchStats stats;
  auto run = [&](const GridFunction& start, const detail::Deflation& snapshot) {
    detail::StartResult r;
    GridFunction u = start;
    double g_max = 0.0;
    const auto v = evaluate(u, prm);
    if (!(v.H < 0.0 && v.G > 0.0)) {
      r.outcome = "start outside B+";
      return r;
    }
    detail::descend(u, prm, opt.max_descent, 1e-3, r.steps, g_max, detail::changes_sign(u) ? detail::DescentMode::nodal : detail::DescentMode::nehari,
                    detail::DescentMode::nehari);
    detail::Deflation defl = snapshot;
    defl.deflate_zero(opt.deflation_shift * as_vec(u).dot(laplacian(mesh) * as_vec(u)));
    const bool conv = detail::deflated_newton(u, prm, defl, opt.tol_newton, opt.max_newton, r.steps);
    if (detail::below_regularization_floor(u, prm.eps_reg)) {
      r.zero = true;
      r.outcome = "newton -> 0";
      return r;
    }
    r.outcome = detail::concat("nehari descent + newton ", conv ? "converged" : "stopped", ", residual ",
                               residual_norm(u, prm));
    r.u = std::move(u);
    return r;
  };
  auto accept = [&](const GridFunction& u, std::string& why) {
    const double res = residual_norm(u, prm);
    const auto v = evaluate(u, prm);
    if (!(res <= opt.tol_solve)) return why += " (residual too large)", false;
    if (!(v.E > opt.tol_level * detail::energy_scale(u, prm))) return why += " (energy not positive)", false;
    if (!(v.H < 0.0 && v.G > 0.0)) return why += " (outside B+)", false;
    return true;
  };
  auto reg = detail::run_search(l, starts, prm, opt, seeds, stats, run, accept);
  detail::tag_levels(reg, "c_");
  if (stats_out) *stats_out = stats;
  if (reg.size() < l)
    throw budget_error(detail::concat("find_positive: ", reg.size(), " of ", l, " pairs after ", stats.starts,
                                      " starts and ", stats.steps, " steps"),
                       std::move(reg));
  return reg;
}

// ---------------------------------------------------------------------------
// Boundedness on Y(λ) = [‖∇u‖_p^p ≥ λ‖u‖_p^p]

struct BoundedBelowReport {
  double lambda = 0.0;
  int samples = 0;
  int accepted = 0;
  std::vector<double> amplitudes{1.0, 10.0, 100.0, 1000.0};
  std::vector<double> min_energy;  // per amplitude
  double ray_min_envelope = 0.0;   // min over rays of min_t E(tu)
  double fitted_constant = 0.0;    // C with E ≥ -C on all samples
  bool rays_increasing = true;     // E(10^3 u) > E(10^2 u) > 0 on every ray
  bool bounded = false;
};

inline BoundedBelowReport check_bounded_below_on_Y(double lambda, const MeshPtr& mesh, const ProblemParams& prm,
                                                   int samples, std::uint64_t seed = 1) {
  prm.validate();
  if (!(lambda > std::max(0.0, prm.alpha)))
    throw invalid_input(detail::concat("check_bounded_below_on_Y: needs lambda = ", lambda, " > max(0, alpha) = ",
                                       std::max(0.0, prm.alpha)));
  BoundedBelowReport rep;
  rep.lambda = lambda;
  rep.samples = samples;
  rep.min_energy.assign(rep.amplitudes.size(), std::numeric_limits<double>::infinity());
  rep.ray_min_envelope = 0.0;
  for (int s = 0; s < samples; ++s) {
    std::mt19937_64 rng(mix_seed(seed, s));
    const GridFunction u = random_test_function(mesh, rng, prm.p);
    const auto n = NormPowers::of(u, prm);
    if (n.grad_p < lambda * n.lp) continue;
    ++rep.accepted;
    std::vector<double> e;
    for (std::size_t i = 0; i < rep.amplitudes.size(); ++i) {
      e.push_back(FunctionalValues::from(n.scaled(rep.amplitudes[i], prm), prm).E);
      rep.min_energy[i] = std::min(rep.min_energy[i], e.back());
    }
    if (!(e[3] > e[2] && e[2] > 0.0)) rep.rays_increasing = false;
    const auto v = FunctionalValues::from(n, prm);
    if (v.G < 0.0 && v.H > 0.0) rep.ray_min_envelope = std::min(rep.ray_min_envelope, fibered_J(v.H, v.G, prm.p, prm.q));
  }
  double m = 0.0;
  for (double x : rep.min_energy)
    if (std::isfinite(x)) m = std::min(m, x);
  rep.fitted_constant = -std::min(m, rep.ray_min_envelope);
  rep.bounded = rep.accepted > 0 && std::isfinite(rep.fitted_constant) && rep.rays_increasing;
  return rep;
}

}  // namespace pqlab

#endif
