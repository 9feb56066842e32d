#ifndef PQLAB_CORE_HPP
#define PQLAB_CORE_HPP

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pqlab {

inline constexpr const char* version = "1.0.0";

// Error hierarchy. Numerical failures carry enough context to be reported
// by the CLI with the right exit code.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input data.
class invalid_input : public error {
 public:
  using error::error;
};

/// An operation was called outside of its precondition (e.g. H*G >= 0 for
/// the fibering map).
class not_applicable : public error {
 public:
  using error::error;
};

/// Iterative method ran out of budget.
class convergence_error : public error {
 public:
  using error::error;
};

/// Root bracketing failed in the shooting method.
class bracket_error : public error {
 public:
  using error::error;
};

/// Geometry or construction cannot be realized at the requested resolution.
class construction_error : public error {
 public:
  using error::error;
};

namespace detail {
template <class... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  os.precision(12);
  (os << ... << args);
  return os.str();
}
}  // namespace detail

/// Exponents and coefficients of -Δ_p u - Δ_q u = α|u|^{p-2}u + β|u|^{q-2}u.
struct ProblemParams {
  double p = 3.0;
  double q = 1.5;
  double alpha = 0.0;
  double beta = 0.0;
  /// Regularization of |∇u|^{r-2} inside fluxes only.
  double eps_reg = 1e-10;

  void validate() const {
    if (!(std::isfinite(p) && std::isfinite(q) && std::isfinite(alpha) && std::isfinite(beta)))
      throw invalid_input("ProblemParams: non-finite entry");
    if (!(q > 1.0 && q < p))
      throw invalid_input(detail::concat("ProblemParams: need 1 < q < p, got p=", p, ", q=", q));
    if (!(eps_reg > 0.0)) throw invalid_input("ProblemParams: eps_reg must be positive");
  }

  ProblemParams with(double a, double b) const {
    ProblemParams out = *this;
    out.alpha = a;
    out.beta = b;
    return out;
  }
};

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// sign(x)|x|^e, the odd power used by r-Laplacian lower order terms.
inline double odd_pow(double x, double e) { return x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), e), x); }

}  // namespace pqlab

#endif
