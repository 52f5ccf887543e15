#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "mvfuse/volume.hpp"

namespace mvfuse {

/// Index of the largest entry; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> values) noexcept
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best])
            best = i;
    return best;
}

/// Binary class vector with a single 1 at the argmax.
std::vector<std::uint8_t> one_hot_argmax(std::span<const double> dist);

/// Per-voxel class tallies over k views; channel c holds the votes for class c.
struct VoteCountVolume {
    Volume<std::uint8_t> counts;
    std::size_t k_views = 0;

    const Dims& dims() const noexcept { return counts.dims(); }
    std::size_t n_classes() const noexcept { return counts.channels(); }
};

/// One non-negative weight per view, at least one positive.
class FusionWeights {
public:
    FusionWeights() = default;
    explicit FusionWeights(std::vector<double> weights);

    std::span<const double> values() const noexcept { return weights_; }
    std::size_t size() const noexcept { return weights_.size(); }

    /// Weights as applied to the views: divided by their sum unless they already sum to 1.
    std::vector<double> effective() const;

private:
    std::vector<double> weights_;
};

struct Voting {
    std::size_t reference = 0;
};

struct WeightedAveraging {
    FusionWeights weights;
};

using FusionMethod = std::variant<Voting, WeightedAveraging>;

/// Throws unless `method` can fuse `k_views` views.
void validate_method(const FusionMethod& method, std::size_t k_views);

VoteCountVolume vote_counts(std::span<const ProbVolume> views);

/// Majority label where the top tally exceeds 1, otherwise the reference view's argmax.
LabelVolume vote_decide(const VoteCountVolume& counts, const ProbVolume& ref);

LabelVolume vote_fuse(std::span<const ProbVolume> views, std::size_t ref_index);

ProbVolume weighted_average(std::span<const ProbVolume> views, const FusionWeights& weights);

LabelVolume wa_fuse(std::span<const ProbVolume> views, const FusionWeights& weights);

/// Fused class distribution consumed by the transition and decision losses:
/// the weighted average for WA, normalized vote tallies for voting.
ProbVolume fused_distribution(const FusionMethod& method, std::span<const ProbVolume> views);

/// Fused hard labels for either method.
LabelVolume fuse_labels(const FusionMethod& method, std::span<const ProbVolume> views);

/// Per-voxel argmax of a distribution volume.
LabelVolume argmax_labels(const ProbVolume& prob);

} // namespace mvfuse
