#ifndef PQLAB_BEADS_HPP
#define PQLAB_BEADS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "pqlab/curves.hpp"

namespace pqlab {

/// k disks of radius r centred at (j, 0), j = 1..k, joined by channels
/// |y| < g_ε(x) between consecutive centres. Square pixels of size h = k/nx;
/// grid nodes at x = 0.5 + i h and y symmetric about 0.
struct BeadsSpec {
  int k = 2;
  double r = 0.45;
  double eps = 0.05;
  int nx = 256;
  int ny = 128;

  double h() const { return static_cast<double>(k) / nx; }

  void validate() const {
    if (k < 1) throw invalid_input("BeadsSpec: k must be >= 1");
    if (!(r > 0.0 && r < 0.5)) throw invalid_input("BeadsSpec: radius must lie in (0, 1/2)");
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw invalid_input("BeadsSpec: eps must be >= 0");
    if (nx < 8 || ny < 8) throw invalid_input("BeadsSpec: grid too small");
    if ((ny - 1) * h() < 2.0 * r) throw invalid_input("BeadsSpec: grid does not cover the disks in y");
  }
};

namespace detail {

inline double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace detail

/// Channel half-width between centres j and j+1 at abscissa x. The ramps
/// sit inside the disks, so the gap between them sees the full height ε.
inline double channel_profile(const BeadsSpec& s, int j, double x) {
  const double a = j + 0.5 * s.r, b = j + 1.0 - 0.5 * s.r;
  if (x <= a || x >= b) return 0.0;
  const double w = 0.25 * (b - a);
  return s.eps * detail::smoothstep((x - a) / w) * detail::smoothstep((b - x) / w);
}

/// Grid mask of the disk j (1-based) alone.
inline std::vector<std::uint8_t> disk_mask(const BeadsSpec& s, int j) {
  const double h = s.h(), y0 = -0.5 * (s.ny - 1) * h;
  std::vector<std::uint8_t> m(static_cast<std::size_t>(s.nx) * s.ny, 0);
  for (int jy = 1; jy + 1 < s.ny; ++jy)
    for (int ix = 1; ix + 1 < s.nx; ++ix) {
      const double x = 0.5 + ix * h, y = y0 + jy * h;
      if ((x - j) * (x - j) + y * y < s.r * s.r) m[static_cast<std::size_t>(jy) * s.nx + ix] = 1;
    }
  return m;
}

inline Domain build_beads(const BeadsSpec& s) {
  s.validate();
  const double h = s.h();
  if (s.eps > 0.0 && 2.0 * s.eps / h < 4.0)
    throw construction_error(detail::concat("build_beads: channel resolution too coarse: 2*eps/h = ", 2.0 * s.eps / h,
                                            " pixels across, need >= 4 (eps=", s.eps, ", h=", h, ")"));
  const double y0 = -0.5 * (s.ny - 1) * h;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(s.nx) * s.ny, 0);
  for (int j = 1; j <= s.k; ++j) {
    const auto d = disk_mask(s, j);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] |= d[i];
  }
  if (s.eps > 0.0)
    for (int jy = 1; jy + 1 < s.ny; ++jy)
      for (int ix = 1; ix + 1 < s.nx; ++ix) {
        const double x = 0.5 + ix * h, y = y0 + jy * h;
        for (int j = 1; j < s.k; ++j)
          if (std::abs(y) < channel_profile(s, j, x)) mask[static_cast<std::size_t>(jy) * s.nx + ix] = 1;
      }
  return Domain::pixel(s.nx, s.ny, h, 0.5, y0, std::move(mask),
                       detail::concat("beads:k=", s.k, ",r=", s.r, ",eps=", s.eps, ",grid=", s.nx, "x", s.ny));
}

struct BeadsRow {
  double eps = 0.0;
  double lambda1_p = 0.0;
  double lambda1_q = 0.0;
  double bump_bound = 0.0;  // certified upper bound for λ_k(q; Ω_ε)
  bool bound_certified = false;
  double beta_star = 0.0;   // β*(Ω_ε) = β*(λ_1(p; Ω_ε))
  double margin = 0.0;
  int components = 0;
  std::optional<std::string> error;  // gap: the pipeline failed for this ε
};

struct BeadsReport {
  std::vector<BeadsRow> rows;  // in the order of the ε list (decreasing)
  bool lambda_monotone = true;        // λ_1(r; Ω_ε) nondecreasing as ε decreases
  bool beta_star_monotone = true;     // β*(Ω_ε) nondecreasing as ε decreases
  bool margin_increasing = true;      // margins strictly increase as ε decreases
  bool smallest_positive = false;     // margin > 0 at the smallest ε

  void write_csv(std::ostream& os) const {
    os.precision(12);
    os << "eps,lambda1_p,lambda1_q,bump_bound,beta_star,margin\n";
    for (const auto& r : rows) {
      if (r.error) {
        os << r.eps << ",,,,,\n";
        continue;
      }
      os << r.eps << ',' << r.lambda1_p << ',' << r.lambda1_q << ',' << r.bump_bound << ',' << r.beta_star << ','
         << r.margin << '\n';
    }
  }
};

inline BeadsRow beads_row(const BeadsSpec& s, const ProblemParams& prm) {
  BeadsRow row;
  row.eps = s.eps;
  try {
    const auto mesh = Mesh::build(build_beads(s));
    row.components = count_components(*mesh, [](int) { return true; });
    CurveSolver solver(mesh, prm);
    const auto& c = solver.constants();
    row.lambda1_p = c.lambda1p;
    row.lambda1_q = c.lambda1q;
    row.beta_star = solver.beta_star_of_alpha(c.lambda1p).value.value();
    std::vector<std::vector<std::uint8_t>> pieces;
    for (int j = 1; j <= s.k; ++j) pieces.push_back(disk_mask(s, j));
    const auto bb = bump_upper_bound(prm.q, mesh, pieces);
    row.bump_bound = bb.value;
    row.bound_certified = bb.certified;
    row.margin = row.beta_star - row.bump_bound;
  } catch (const error& e) {
    row.error = e.what();
  }
  return row;
}

/// β*(Ω_ε) against the disjoint-disk bound for λ_k(q; Ω_ε), one row per ε.
/// Rows are independent; `workers` > 1 runs them concurrently.
inline BeadsReport beads_experiment(const BeadsSpec& base, const std::vector<double>& eps_list, const ProblemParams& prm,
                                    int workers = 1) {
  prm.validate();
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1])) throw invalid_input("beads_experiment: eps list must be decreasing");
  BeadsReport rep;
  rep.rows.resize(eps_list.size());
  auto run = [&](std::size_t i) {
    BeadsSpec s = base;
    s.eps = eps_list[i];
    rep.rows[i] = beads_row(s, prm);
  };
  workers = std::max(1, workers);
  for (std::size_t i = 0; i < eps_list.size(); i += workers) {
    std::vector<std::thread> pool;
    for (std::size_t j = i; j < std::min(eps_list.size(), i + workers); ++j) {
      if (workers == 1)
        run(j);
      else
        pool.emplace_back(run, j);
    }
    for (auto& t : pool) t.join();
  }
  const BeadsRow* prev = nullptr;
  for (const auto& r : rep.rows) {
    if (r.error) continue;
    if (prev) {
      const double tol = 1e-9;
      if (r.lambda1_p < prev->lambda1_p * (1.0 - tol) || r.lambda1_q < prev->lambda1_q * (1.0 - tol))
        rep.lambda_monotone = false;
      if (r.beta_star < prev->beta_star * (1.0 - tol)) rep.beta_star_monotone = false;
      if (!(r.margin > prev->margin)) rep.margin_increasing = false;
    }
    prev = &r;
  }
  rep.smallest_positive = !rep.rows.empty() && !rep.rows.back().error && rep.rows.back().margin > 0.0;
  return rep;
}

}  // namespace pqlab

#endif
