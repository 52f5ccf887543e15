#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mvfuse/train.hpp"
#include "mvfuse/volume.hpp"

namespace mvfuse {

/// Semi-axes in voxels along (z, y, x).
using Radii = std::array<double, 3>;

/// A head-like phantom: a brain ellipsoid with a tumor of three concentric ellipsoids.
/// Enhancing tumor (4) is innermost; the core shell around it is necrosis (1) below the tumor
/// center and non-enhancing tumor (3) above; edema (2) fills the outer shell.
struct PhantomSpec {
    Dims dims{32, 32, 32};
    Radii brain{13.0, 14.0, 14.0};
    Radii complete{8.0, 8.0, 8.0};
    Radii core{5.0, 5.0, 5.0};
    Radii enhancing{3.0, 3.0, 3.0};

    /// Number of wrong voxels in each view's prediction, split evenly over the enhancing,
    /// core and edema voxels.
    std::array<std::size_t, 3> errors{0, 0, 0};
    bool disjoint = true;

    std::uint64_t seed = 0;
    double noise_stddev = 0.15;
    /// Maximum tumor center offset in voxels and relative radius change.
    double center_jitter = 0.0;
    double radius_jitter = 0.0;

    /// Radii scaled to the volume (brain 0.42, complete 0.25, core 0.16, enhancing 0.09 of
    /// each extent).
    static PhantomSpec for_dims(const Dims& dims);
};

struct Phantom {
    IntensityVolume image;  // raw, four modalities, exactly zero outside the brain
    LabelVolume labels;
    /// One-hot predictions indexed by view_index; each differs from the labels on its
    /// error set only.
    std::array<ProbVolume, 3> views;
    std::array<std::vector<std::size_t>, 3> error_voxels;
};

/// Throws InfeasibleSpec when the ellipsoids are not nested, the brain does not fit in the
/// volume, a region is empty, or the error sets do not fit in their voxel pools.
Phantom generate_phantom(const PhantomSpec& spec);

/// `count` normalized phantom samples with jittered tumors. Deterministic for a seed.
std::vector<Sample> make_phantom_dataset(std::size_t count, const Dims& dims, std::uint64_t seed);

} // namespace mvfuse
