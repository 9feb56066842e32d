#ifndef PQLAB_IO_HPP
#define PQLAB_IO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "pqlab/mesh.hpp"

namespace pqlab {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical (sorted-key) dump of a config.
inline std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

/// Provenance block embedded in every output file.
inline nlohmann::json run_metadata(const nlohmann::json& config) {
  nlohmann::json m;
  m["config_hash"] = config_hash(config);
  m["seed"] = config.value("seed", 0);
  m["tolerances"] = config.value("tolerances", nlohmann::json::object());
  m["versions"] = {{"pqlab", version}, {"eigen", detail::concat(EIGEN_WORLD_VERSION, '.', EIGEN_MAJOR_VERSION, '.', EIGEN_MINOR_VERSION)}};
  return m;
}

/// One "# {json}" header line, then "x[,y],u" rows.
inline void write_grid_function(std::ostream& os, const GridFunction& u, const nlohmann::json& meta = {}) {
  nlohmann::json head = meta.is_null() ? nlohmann::json::object() : meta;
  head["mesh"] = u.mesh->id();
  head["dim"] = u.mesh->dim();
  head["nodes"] = u.size();
  os << "# " << head.dump() << '\n';
  os << (u.mesh->dim() == 1 ? "x,u\n" : "x,y,u\n");
  char buf[96];
  for (int i = 0; i < u.size(); ++i) {
    const auto c = u.mesh->coord(i);
    if (u.mesh->dim() == 1)
      std::snprintf(buf, sizeof buf, "%.10g,%.17g\n", c[0], u.values[i]);
    else
      std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.17g\n", c[0], c[1], u.values[i]);
    os << buf;
  }
}

/// Reads the values written by write_grid_function back onto `mesh`.
inline GridFunction read_grid_function(std::istream& is, const MeshPtr& mesh) {
  std::string line;
  GridFunction u(mesh);
  int i = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
    const auto pos = line.rfind(',');
    if (pos == std::string::npos) throw invalid_input("read_grid_function: malformed row");
    if (i >= u.size()) throw invalid_input("read_grid_function: more rows than mesh nodes");
    u.values[i++] = std::stod(line.substr(pos + 1));
  }
  if (i != u.size()) throw invalid_input("read_grid_function: fewer rows than mesh nodes");
  return u;
}

/// Binary PGM of a 2D grid: inactive nodes black, active nodes scaled by
/// |u| (or white when no function is given).
inline void write_pgm(std::ostream& os, const Mesh& mesh, const GridFunction* u = nullptr) {
  if (mesh.dim() != 2) throw invalid_input("write_pgm: 2D mesh required");
  const double m = u ? std::max(u->sup_norm(), 1e-300) : 1.0;
  os << "P5\n" << mesh.nx() << ' ' << mesh.ny() << "\n255\n";
  for (int j = mesh.ny() - 1; j >= 0; --j)
    for (int i = 0; i < mesh.nx(); ++i) {
      const int s = mesh.interior_index(i, j);
      unsigned char c = 0;
      if (s >= 0) c = u ? static_cast<unsigned char>(std::lround(40 + 215 * std::abs(u->values[s]) / m)) : 255;
      os.put(static_cast<char>(c));
    }
}

}  // namespace pqlab

#endif
