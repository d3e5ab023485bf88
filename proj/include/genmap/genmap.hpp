#pragma once

#include "genmap/consistency.hpp"
#include "genmap/density.hpp"
#include "genmap/io.hpp"
#include "genmap/map_solver.hpp"
#include "genmap/mode_lab.hpp"
#include "genmap/posterior.hpp"
#include "genmap/prior.hpp"
#include "genmap/random.hpp"
#include "genmap/sequence.hpp"

namespace genmap {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace genmap
