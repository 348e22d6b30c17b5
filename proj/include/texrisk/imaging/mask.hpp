#pragma once

#include "texrisk/imaging/view.hpp"

namespace texrisk::imaging {

struct BreastMask {
    MaskGrid mask;  // 1 inside the breast
    int breast_area_px = 0;
};

struct MaskOptions {
    // Guard band cleared on the three non-chest-wall image edges.
    int border_guard_px = 2;
    // Disc radius of the closing element (radius 2 -> 5 px across).
    int closing_radius_px = 2;
    double min_area_fraction = 0.01;
    int histogram_bins = 256;
};

// Otsu split of the raw histogram, closing, then the largest 8-connected
// component. Throws EmptyMask when nothing above 1% of the frame remains.
BreastMask compute_breast_mask(const ViewImage& view, const MaskOptions& options = {});

// Mask of non-zero pixels; used for views whose background is already zeroed.
BreastMask mask_from_nonzero(const PixelGrid& pixels);

BreastMask make_mask(MaskGrid grid);

// Index of the chest-wall column for a given laterality.
int chest_wall_column(Laterality laterality, int cols);

}  // namespace texrisk::imaging
