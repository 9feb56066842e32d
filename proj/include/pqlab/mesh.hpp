#ifndef PQLAB_MESH_HPP
#define PQLAB_MESH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <type_traits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pqlab/core.hpp"

namespace pqlab {

/// Bounded domain with homogeneous Dirichlet data: either an interval
/// (0, L) or a set of active nodes on a uniform 2D grid. Inactive grid
/// nodes carry the zero extension.
struct Domain {
  enum class Kind { interval, pixel2d };

  Kind kind = Kind::interval;
  double length = 1.0;
  // pixel2d: grid of nx * ny nodes, node (i, j) sits at (x0 + i h, y0 + j h).
  int nx = 0;
  int ny = 0;
  double h = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
  std::vector<std::uint8_t> mask;  // row-major, index j * nx + i
  std::string id;

  static Domain interval(double L, std::string name = {}) {
    Domain d;
    d.kind = Kind::interval;
    d.length = L;
    d.id = name.empty() ? detail::concat("interval:", L) : std::move(name);
    d.validate();
    return d;
  }

  static Domain pixel(int nx, int ny, double h, double x0, double y0, std::vector<std::uint8_t> mask,
                      std::string name = "pixel") {
    Domain d;
    d.kind = Kind::pixel2d;
    d.nx = nx;
    d.ny = ny;
    d.h = h;
    d.x0 = x0;
    d.y0 = y0;
    d.mask = std::move(mask);
    d.id = std::move(name);
    // The outer ring of the grid is the Dirichlet boundary.
    for (int i = 0; i < nx && !d.mask.empty(); ++i) {
      d.mask[i] = 0;
      d.mask[static_cast<std::size_t>(ny - 1) * nx + i] = 0;
    }
    for (int j = 0; j < ny && !d.mask.empty(); ++j) {
      d.mask[static_cast<std::size_t>(j) * nx] = 0;
      d.mask[static_cast<std::size_t>(j) * nx + nx - 1] = 0;
    }
    d.validate();
    return d;
  }

  bool is_interval() const { return kind == Kind::interval; }

  void validate() const {
    if (kind == Kind::interval) {
      if (!(length > 0.0) || !std::isfinite(length)) throw invalid_input("Domain: interval length must be > 0");
      return;
    }
    if (nx < 3 || ny < 3) throw invalid_input("Domain: pixel grid needs at least 3x3 nodes");
    if (!(h > 0.0)) throw invalid_input("Domain: pixel size must be > 0");
    if (mask.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny))
      throw invalid_input("Domain: mask size does not match grid");
  }
};

/// One quadrature element of the gradient term: a cell (1D) or a triangle
/// (2D). Component c of the constant gradient is (u[plus] - u[minus]) / h,
/// with index -1 standing for a boundary node (value 0).
struct Element {
  double vol = 0.0;
  int ncomp = 1;
  std::array<std::array<int, 2>, 2> comp{{{-1, -1}, {-1, -1}}};
};

/// Uniform structured mesh restricted to the active nodes of a domain.
/// Piecewise-linear nodal functions; gradients constant per element; lumped
/// mass (node volume h^dim) for Lebesgue norms.
class Mesh {
 public:
  /// Interval meshes use `n_interior` nodes; pixel meshes take the grid of
  /// the domain and ignore it.
  static std::shared_ptr<const Mesh> build(const Domain& domain, int n_interior = 2048) {
    domain.validate();
    auto mesh = std::shared_ptr<Mesh>(new Mesh());
    mesh->domain_ = domain;
    if (domain.is_interval()) {
      if (n_interior < 2) throw invalid_input("Mesh: need at least 2 interior nodes");
      mesh->dim_ = 1;
      mesh->nx_ = n_interior + 2;
      mesh->ny_ = 1;
      mesh->h_ = domain.length / (n_interior + 1);
      mesh->x0_ = 0.0;
      mesh->y0_ = 0.0;
      mesh->grid_mask_.assign(mesh->nx_, 1);
      mesh->grid_mask_.front() = 0;
      mesh->grid_mask_.back() = 0;
    } else {
      mesh->dim_ = 2;
      mesh->nx_ = domain.nx;
      mesh->ny_ = domain.ny;
      mesh->h_ = domain.h;
      mesh->x0_ = domain.x0;
      mesh->y0_ = domain.y0;
      mesh->grid_mask_ = domain.mask;
    }
    mesh->finalize();
    return mesh;
  }

  /// Same grid, fewer active nodes. `grid_mask` must be a subset of the
  /// current active set.
  std::shared_ptr<const Mesh> restrict_to(std::vector<std::uint8_t> grid_mask, std::string id = {}) const {
    if (grid_mask.size() != grid_mask_.size()) throw invalid_input("Mesh::restrict_to: mask size mismatch");
    for (std::size_t g = 0; g < grid_mask.size(); ++g)
      if (grid_mask[g] && !grid_mask_[g]) throw invalid_input("Mesh::restrict_to: mask is not a subset");
    auto mesh = std::shared_ptr<Mesh>(new Mesh(*this));
    mesh->grid_mask_ = std::move(grid_mask);
    if (!id.empty()) mesh->domain_.id = std::move(id);
    mesh->finalize();
    return mesh;
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(interior_to_grid_.size()); }
  double h() const { return h_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double node_volume() const { return dim_ == 1 ? h_ : h_ * h_; }
  /// Σ node volumes; equals L in 1D.
  double measure() const { return node_volume() * size(); }
  const Domain& domain() const { return domain_; }
  const std::string& id() const { return domain_.id; }
  std::span<const Element> elements() const { return elements_; }
  const std::vector<std::uint8_t>& grid_mask() const { return grid_mask_; }

  int grid_index(int interior) const { return interior_to_grid_[interior]; }
  /// -1 when the grid node is inactive.
  int interior_index(int grid) const { return grid_to_interior_[grid]; }
  int interior_index(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return -1;
    return grid_to_interior_[static_cast<std::size_t>(j) * nx_ + i];
  }

  std::array<double, 2> coord(int interior) const {
    const int g = interior_to_grid_[interior];
    const int i = g % nx_;
    const int j = g / nx_;
    return {x0_ + i * h_, y0_ + j * h_};
  }

  /// Sum of element volumes (quadrature weights of the gradient term).
  double element_volume_sum() const {
    double s = 0.0;
    for (const auto& e : elements_) s += e.vol;
    return s;
  }

  /// Interior neighbours (4-connectivity in 2D) used for nodal-domain counts.
  std::vector<int> neighbours(int interior) const {
    std::vector<int> out;
    const int g = interior_to_grid_[interior];
    const int i = g % nx_;
    const int j = g / nx_;
    const int di[4] = {-1, 1, 0, 0};
    const int dj[4] = {0, 0, -1, 1};
    for (int k = 0; k < (dim_ == 1 ? 2 : 4); ++k) {
      const int m = interior_index(i + di[k], j + dj[k]);
      if (m >= 0) out.push_back(m);
    }
    return out;
  }

 private:
  Mesh() = default;

  void finalize() {
    grid_to_interior_.assign(grid_mask_.size(), -1);
    interior_to_grid_.clear();
    for (std::size_t g = 0; g < grid_mask_.size(); ++g) {
      if (grid_mask_[g]) {
        grid_to_interior_[g] = static_cast<int>(interior_to_grid_.size());
        interior_to_grid_.push_back(static_cast<int>(g));
      }
    }
    if (size() < 2) throw invalid_input("Mesh: need at least 2 interior nodes");
    elements_.clear();
    if (dim_ == 1) {
      for (int c = 0; c + 1 < nx_; ++c) {
        const int a = interior_index(c, 0);
        const int b = interior_index(c + 1, 0);
        if (a < 0 && b < 0) continue;
        Element e;
        e.vol = h_;
        e.ncomp = 1;
        e.comp[0] = {b, a};
        elements_.push_back(e);
      }
    } else {
      // Both diagonal splits of every square, each with half weight: the
      // four triangles pair {bottom, top} x-differences with {left, right}
      // y-differences, which keeps the scheme reflection symmetric.
      const double vol = 0.25 * h_ * h_;
      for (int j = 0; j + 1 < ny_; ++j) {
        for (int i = 0; i + 1 < nx_; ++i) {
          const int n00 = interior_index(i, j);
          const int n10 = interior_index(i + 1, j);
          const int n01 = interior_index(i, j + 1);
          const int n11 = interior_index(i + 1, j + 1);
          if (n00 < 0 && n10 < 0 && n01 < 0 && n11 < 0) continue;
          const std::array<int, 2> bottom{n10, n00};
          const std::array<int, 2> top{n11, n01};
          const std::array<int, 2> left{n01, n00};
          const std::array<int, 2> right{n11, n10};
          for (const auto& gx : {bottom, top}) {
            for (const auto& gy : {left, right}) {
              const bool touches = gx[0] >= 0 || gx[1] >= 0 || gy[0] >= 0 || gy[1] >= 0;
              if (!touches) continue;
              Element e;
              e.vol = vol;
              e.ncomp = 2;
              e.comp[0] = gx;
              e.comp[1] = gy;
              elements_.push_back(e);
            }
          }
        }
      }
    }
  }

  Domain domain_;
  int dim_ = 1;
  int nx_ = 0;
  int ny_ = 0;
  double h_ = 0.0;
  double x0_ = 0.0;
  double y0_ = 0.0;
  std::vector<std::uint8_t> grid_mask_;
  std::vector<int> grid_to_interior_;
  std::vector<int> interior_to_grid_;
  std::vector<Element> elements_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Nodal values on the interior nodes of a mesh; zero on the boundary by
/// construction.
struct GridFunction {
  MeshPtr mesh;
  std::vector<double> values;

  GridFunction() = default;
  explicit GridFunction(MeshPtr m) : mesh(std::move(m)), values(mesh->size(), 0.0) {}
  GridFunction(MeshPtr m, std::vector<double> v) : mesh(std::move(m)), values(std::move(v)) {
    if (static_cast<int>(values.size()) != mesh->size()) throw invalid_input("GridFunction: size mismatch");
  }

  template <class F>
  static GridFunction from(MeshPtr m, F&& f) {
    constexpr bool one_d = std::is_invocable_v<F, double>;
    if (m->dim() != (one_d ? 1 : 2)) throw invalid_input("GridFunction::from: callable arity does not match mesh dimension");
    GridFunction u(m);
    for (int i = 0; i < m->size(); ++i) {
      const auto c = m->coord(i);
      if constexpr (one_d)
        u.values[i] = f(c[0]);
      else
        u.values[i] = f(c[0], c[1]);
    }
    return u;
  }

  int size() const { return static_cast<int>(values.size()); }
  double operator[](int i) const { return values[i]; }
  double& operator[](int i) { return values[i]; }

  void require_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) throw invalid_input("GridFunction: non-finite nodal value");
  }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }

  bool is_zero() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
  }

  GridFunction& operator+=(const GridFunction& o) {
    for (int i = 0; i < size(); ++i) values[i] += o.values[i];
    return *this;
  }
  GridFunction& operator-=(const GridFunction& o) {
    for (int i = 0; i < size(); ++i) values[i] -= o.values[i];
    return *this;
  }
  GridFunction& operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
  }
  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(double s, GridFunction a) { return a *= s; }
  friend GridFunction operator*(GridFunction a, double s) { return a *= s; }
  friend GridFunction operator-(GridFunction a) { return a *= -1.0; }
};

/// Zero extension of a function on a restricted mesh into a mesh on the same
/// grid.
inline GridFunction embed(const GridFunction& u, const MeshPtr& target) {
  GridFunction out(target);
  for (int i = 0; i < u.size(); ++i) {
    const int t = target->interior_index(u.mesh->grid_index(i));
    if (t < 0) throw invalid_input("embed: source node outside target mesh");
    out.values[t] = u.values[i];
  }
  return out;
}

/// Restriction of a function to a submesh on the same grid.
inline GridFunction restrict_to(const GridFunction& u, const MeshPtr& target) {
  GridFunction out(target);
  for (int i = 0; i < target->size(); ++i) {
    const int s = u.mesh->interior_index(target->grid_index(i));
    out.values[i] = s < 0 ? 0.0 : u.values[s];
  }
  return out;
}

/// Connected components (4-connectivity) of the interior nodes selected by
/// `keep`. Returns the number of components.
template <class Pred>
int count_components(const Mesh& mesh, Pred&& keep) {
  std::vector<int> label(mesh.size(), -1);
  int count = 0;
  std::vector<int> stack;
  for (int s = 0; s < mesh.size(); ++s) {
    if (label[s] >= 0 || !keep(s)) continue;
    label[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : mesh.neighbours(v)) {
        if (label[w] < 0 && keep(w)) {
          label[w] = count;
          stack.push_back(w);
        }
      }
    }
    ++count;
  }
  return count;
}

/// Equal-length sub-intervals of an interval mesh as grid masks. Piece j
/// takes the grid nodes strictly inside (j c/k + 1/2, (j+1) c/k - 1/2) with
/// c the cell count, so neighbouring pieces never share an element and the
/// split is mirror symmetric.
inline std::vector<std::vector<std::uint8_t>> split_interval(const Mesh& mesh, int k) {
  if (mesh.dim() != 1) throw invalid_input("split_interval: interval mesh required");
  if (k < 1) throw invalid_input("split_interval: k must be >= 1");
  const double cells = mesh.nx() - 1;
  std::vector<std::vector<std::uint8_t>> out;
  for (int j = 0; j < k; ++j) {
    const double lo = j * cells / k + (j == 0 ? 0.0 : 0.5);
    const double hi = (j + 1) * cells / k - (j == k - 1 ? 0.0 : 0.5);
    std::vector<std::uint8_t> m(mesh.nx(), 0);
    int active = 0;
    for (int g = 0; g < mesh.nx(); ++g) {
      if (g > lo && g < hi && mesh.grid_mask()[g]) {
        m[g] = 1;
        ++active;
      }
    }
    if (active < 2) throw construction_error(detail::concat("split_interval: piece ", j, " too small"));
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace pqlab

#endif
