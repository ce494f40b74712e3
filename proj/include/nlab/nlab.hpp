#pragma once

#include "nlab/bessel.hpp"
#include "nlab/domains.hpp"
#include "nlab/eigensolver.hpp"
#include "nlab/error.hpp"
#include "nlab/experiment.hpp"
#include "nlab/io.hpp"
#include "nlab/laplacian.hpp"
#include "nlab/lattice.hpp"
#include "nlab/nodal.hpp"
#include "nlab/rearrange.hpp"
#include "nlab/sparse.hpp"
