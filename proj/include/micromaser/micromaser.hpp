#pragma once

// Umbrella header for the micromaser phase-structure library.

#include "errors.hpp"
#include "params.hpp"
#include "core.hpp"
#include "quadrature.hpp"
#include "roots.hpp"
#include "potential.hpp"
#include "phase.hpp"
#include "correlation.hpp"
#include "trapping.hpp"
#include "sweep.hpp"

namespace micromaser {

inline const char *version() { return "1.0.0"; }

} // namespace micromaser
