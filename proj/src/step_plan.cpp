#include "mvfuse/step_plan.hpp"

#include <algorithm>
#include <string>

namespace mvfuse {

std::size_t BatchSizes::for_view(ViewAxis view) const noexcept
{
    switch (view) {
    case ViewAxis::Axial: return axial;
    case ViewAxis::Coronal: return coronal;
    case ViewAxis::Sagittal: return sagittal;
    }
    return 0;
}

namespace {

std::vector<SliceRange> fixed_batches(std::size_t extent, std::size_t batch)
{
    std::vector<SliceRange> out;
    for (std::size_t first = 0; first < extent; first += batch)
        out.push_back({first, std::min(batch, extent - first)});
    return out;
}

} // namespace

StepPlan build_step_plan(const Dims& extents, const BatchSizes& batches)
{
    if (extents.z == 0 || extents.y == 0 || extents.x == 0)
        fail(ErrorCode::InvalidConfig, "extents must be positive, got " + to_string(extents));
    if (batches.axial == 0 || batches.coronal == 0 || batches.sagittal == 0)
        fail(ErrorCode::InvalidConfig, "batch sizes must be >= 1");

    StepPlan plan;
    plan.ranges[view_index(ViewAxis::Coronal)] = fixed_batches(extents.y, batches.coronal);
    plan.ranges[view_index(ViewAxis::Sagittal)] = fixed_batches(extents.x, batches.sagittal);

    const std::size_t steps = plan.ranges[view_index(ViewAxis::Coronal)].size();
    if (plan.ranges[view_index(ViewAxis::Sagittal)].size() != steps)
        fail(ErrorCode::UnalignableBatches,
             "coronal needs " + std::to_string(steps) + " steps but sagittal needs " +
                 std::to_string(plan.ranges[view_index(ViewAxis::Sagittal)].size()));

    const std::size_t regular = (steps - 1) * batches.axial;
    if (regular >= extents.z)
        fail(ErrorCode::UnalignableBatches,
             std::to_string(steps) + " axial batches of " + std::to_string(batches.axial) +
                 " overrun " + std::to_string(extents.z) + " axial slices");
    const std::size_t final_batch = extents.z - regular;
    if (batches.axial_final != 0 && batches.axial_final != final_batch)
        fail(ErrorCode::UnalignableBatches,
             "last axial batch must be " + std::to_string(final_batch) + " to finish in " +
                 std::to_string(steps) + " steps, configured " + std::to_string(batches.axial_final));

    auto& axial = plan.ranges[view_index(ViewAxis::Axial)];
    for (std::size_t s = 0; s + 1 < steps; ++s)
        axial.push_back({s * batches.axial, batches.axial});
    axial.push_back({regular, final_batch});
    return plan;
}

} // namespace mvfuse
