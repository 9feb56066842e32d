// Shooting eigenvalues on (0,1) next to the closed form and the flow value.
#include <cstdio>

#include "pqlab/pqlab.hpp"

int main() {
  using namespace pqlab;
  const auto mesh = Mesh::build(Domain::interval(1.0), 2048);
  std::printf("%4s %2s %14s %14s %14s\n", "r", "k", "shooting", "closed form", "flow (k=1)");
  for (double r : {1.5, 2.0, 3.0}) {
    const double flow = first_eigenpair(r, mesh).lambda;
    for (int k = 1; k <= 4; ++k)
      std::printf("%4.1f %2d %14.8f %14.8f %14s\n", r, k, exact_1d_eigenvalue(r, k, 1.0),
                  closed_form_1d_eigenvalue(r, k, 1.0), k == 1 ? std::to_string(flow).c_str() : "");
  }
}
