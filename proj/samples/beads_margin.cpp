// Margin beta*(Omega_eps) - (bump bound for lambda_2(q)) on two beads.
// Usage: sample_beads_margin [eps ...]   (default 0.2 0.1 0.05)
#include <cstdlib>
#include <iostream>
#include <vector>

#include "pqlab/pqlab.hpp"

int main(int argc, char** argv) {
  using namespace pqlab;
  std::vector<double> eps;
  for (int i = 1; i < argc; ++i) eps.push_back(std::atof(argv[i]));
  if (eps.empty()) eps = {0.2, 0.1, 0.05};
  ProblemParams prm;
  prm.p = 3.0;
  prm.q = 1.5;
  const auto rep = beads_experiment(BeadsSpec{}, eps, prm);
  rep.write_csv(std::cout);
  std::cout << "margin increasing: " << rep.margin_increasing << ", positive at smallest eps: " << rep.smallest_positive
            << '\n';
}
