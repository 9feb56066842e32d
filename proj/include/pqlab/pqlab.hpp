#ifndef PQLAB_PQLAB_HPP
#define PQLAB_PQLAB_HPP

#include "pqlab/core.hpp"
#include "pqlab/mesh.hpp"
#include "pqlab/discrete.hpp"
#include "pqlab/linalg.hpp"
#include "pqlab/functionals.hpp"
#include "pqlab/spectrum.hpp"
#include "pqlab/nehari.hpp"
#include "pqlab/curves.hpp"
#include "pqlab/solver.hpp"
#include "pqlab/beads.hpp"
#include "pqlab/checks.hpp"
#include "pqlab/io.hpp"

#endif
