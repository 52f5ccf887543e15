#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mvfuse/volume.hpp"

namespace mvfuse {

/// Slices per training step for each view. The coronal and sagittal batches are fixed; the
/// axial view takes `axial` slices per step except for its last batch, which absorbs the rest
/// so that all three views finish a patient on the same step.
struct BatchSizes {
    std::size_t axial = 10;
    std::size_t coronal = 16;
    std::size_t sagittal = 16;
    /// Required size of the last axial batch; 0 derives it from the extents.
    std::size_t axial_final = 0;

    std::size_t for_view(ViewAxis view) const noexcept;
};

struct SliceRange {
    std::size_t first = 0;
    std::size_t count = 0;

    friend bool operator==(const SliceRange&, const SliceRange&) = default;
};

struct StepPlan {
    /// Indexed by view_index(view); every list has steps() entries.
    std::array<std::vector<SliceRange>, 3> ranges;

    std::size_t steps() const noexcept { return ranges[0].size(); }
    const std::vector<SliceRange>& for_view(ViewAxis view) const noexcept { return ranges[view_index(view)]; }
};

/// Throws UnalignableBatches when the coronal and sagittal step counts differ, when the axial
/// extent cannot be split into that many batches, or when a requested axial_final disagrees.
StepPlan build_step_plan(const Dims& extents, const BatchSizes& batches);

} // namespace mvfuse
