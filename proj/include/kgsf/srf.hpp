#pragma once

#include <cstdint>
#include <vector>

#include "kgsf/structure.hpp"

namespace kgsf {

// Symmetry features.  Relation patterns are grouped by
//   x = number of zero entries (0 <= x <= k-1),
//   y = number of distinct nonzero absolute values (1 <= y <= k-x),
// giving k(k+1)/2 groups.  Bit alpha[g] is set when some pattern in group g
// yields a symmetric signature matrix, beta[g] when some pattern yields a
// skew-symmetric one.  The feature vector is [alpha; beta].

int srf_length(int k);                          // k * (k + 1)
int srf_group_count(int k);                     // k * (k + 1) / 2
int srf_group_index(int k, int x, int y);       // lexicographic (x, y) order

std::vector<uint8_t> srf_features(const StructureMatrix& a);

}  // namespace kgsf
