#pragma once
#include <string>

#include "fpde/grids.hpp"

namespace fpde::io {

// Flat little-endian binary dump: fixed header (magic, dim, steps, cells,
// t0, h, length, components) followed by the raw float64 value block.
void save_grid_function(const std::string& path, const grids::GridFunction& u);
grids::GridFunction load_grid_function(const std::string& path);

// Plain-text export (t, x coordinates, one column per component).
void save_csv(const std::string& path, const grids::GridFunction& u);

}  // namespace fpde::io
