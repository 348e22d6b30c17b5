#pragma once

#include "texrisk/imaging/mask.hpp"

namespace texrisk::imaging {

struct DistanceMap {
    RealGrid dist;  // pixels to the nearest skin-air boundary cell; 0 outside the mask
};

// Boundary cells are mask cells with a 4-neighbour inside the image that is
// not in the mask. The image frame itself is not a skin-air boundary (the
// chest wall touches it), unless the mask has no other boundary at all.
MaskGrid boundary_cells(const MaskGrid& mask);

// Exact Euclidean distance transform (separable lower-envelope algorithm).
DistanceMap compute_distance_map(const BreastMask& mask);

}  // namespace texrisk::imaging
