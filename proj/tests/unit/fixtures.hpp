#pragma once

#include <vector>

#include "lshed/criticality.hpp"

// The eight-load (power, criticality) set used across modules, ids 1..8.
inline std::vector<lshed::RatedLoad> eight_loads() {
  return {{1, 1, 0.1}, {2, 2, 0.15}, {3, 1, 0.2}, {4, 4, 0.4}, {5, 1, 0.4}, {6, 2, 0.5}, {7, 2, 0.7}, {8, 3, 0.8}};
}

// Four loads where two share criticality 0.3.
inline std::vector<lshed::RatedLoad> tie_loads() {
  return {{1, 1, 0.2}, {2, 2, 0.3}, {3, 2, 0.3}, {4, 3, 0.4}};
}
