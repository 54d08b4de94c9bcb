#pragma once

// Umbrella header for the solver library. The CSV and JSON report helpers
// (csv.hpp, report.hpp) are included separately by front ends.

#include "errors.hpp"
#include "lattice.hpp"
#include "linalg.hpp"
#include "matrix.hpp"
#include "quantizer.hpp"
#include "reduction.hpp"
#include "rounding.hpp"
