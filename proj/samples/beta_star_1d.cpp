// beta* on (0,1) for (p,q) = (2,1.5), and a few points of beta*(alpha).
#include <cmath>
#include <iostream>
#include <numbers>

#include "pqlab/pqlab.hpp"

int main() {
  using namespace pqlab;
  ProblemParams prm;
  prm.p = 2.0;
  prm.q = 1.5;
  const auto mesh = Mesh::build(Domain::interval(1.0), 2048);
  CurveSolver solver(mesh, prm);
  const auto& c = solver.constants();
  std::cout << "lambda1(p)=" << c.lambda1p << " lambda1(q)=" << c.lambda1q << '\n';
  std::cout << "beta*=" << c.beta_star << " (pi^1.5=" << std::pow(std::numbers::pi, 1.5) << ")\n";
  std::cout << "alpha*=" << c.alpha_star << '\n';
  for (double f : {0.9, 1.0, 1.2, 1.5, 1.05 * c.alpha_star / c.lambda1p}) {
    const auto pt = solver.beta_star_of_alpha(f * c.lambda1p);
    std::cout << "alpha=" << f * c.lambda1p << " beta*(alpha)=" << pt.value.str() << " [" << pt.method << "]\n";
  }
}
