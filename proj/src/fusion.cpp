#include "mvfuse/fusion.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace mvfuse {

namespace {

constexpr double kUnitSumTolerance = 1e-12;
constexpr std::size_t kMaxClasses = 64;

void check_views(std::span<const ProbVolume> views, std::size_t min_views)
{
    if (views.size() < min_views)
        fail(ErrorCode::TooFewViews, "need at least " + std::to_string(min_views) + " views, got " +
                                         std::to_string(views.size()));
    const Dims& d = views.front().dims();
    const std::size_t classes = views.front().channels();
    if (classes == 0 || classes > kMaxClasses)
        fail(ErrorCode::DimMismatch, "unsupported class count " + std::to_string(classes));
    for (std::size_t i = 1; i < views.size(); ++i)
        if (views[i].dims() != d || views[i].channels() != classes)
            fail(ErrorCode::DimMismatch, "view " + std::to_string(i) + " is " +
                                             to_string(views[i].dims()) + "x" +
                                             std::to_string(views[i].channels()) + ", view 0 is " +
                                             to_string(d) + "x" + std::to_string(classes));
}

// Argmax over the class channels of one voxel of a planar volume.
std::size_t voxel_argmax(const ProbVolume& vol, std::size_t voxel) noexcept
{
    const std::size_t n = vol.voxels();
    const double* p = vol.data().data() + voxel;
    std::size_t best = 0;
    double best_value = p[0];
    for (std::size_t c = 1; c < vol.channels(); ++c) {
        const double v = p[c * n];
        if (v > best_value) {
            best_value = v;
            best = c;
        }
    }
    return best;
}

} // namespace

std::vector<std::uint8_t> one_hot_argmax(std::span<const double> dist)
{
    std::vector<std::uint8_t> out(dist.size(), 0);
    if (!dist.empty())
        out[argmax(dist)] = 1;
    return out;
}

FusionWeights::FusionWeights(std::vector<double> weights) : weights_(std::move(weights))
{
    bool any_positive = false;
    for (double w : weights_) {
        if (!std::isfinite(w) || w < 0.0)
            fail(ErrorCode::InvalidWeights, "fusion weights must be finite and >= 0");
        any_positive = any_positive || w > 0.0;
    }
    if (!any_positive)
        fail(ErrorCode::AllZeroWeights, "at least one fusion weight must be positive");
}

std::vector<double> FusionWeights::effective() const
{
    double sum = 0.0;
    for (double w : weights_)
        sum += w;
    std::vector<double> out = weights_;
    if (std::abs(sum - 1.0) > kUnitSumTolerance)
        for (double& w : out)
            w /= sum;
    return out;
}

void validate_method(const FusionMethod& method, std::size_t k_views)
{
    if (const auto* voting = std::get_if<Voting>(&method)) {
        if (k_views < 3)
            fail(ErrorCode::TooFewViews, "voting needs at least 3 views, got " + std::to_string(k_views));
        if (voting->reference >= k_views)
            fail(ErrorCode::InvalidReference, "reference view " + std::to_string(voting->reference) +
                                                  " out of range for " + std::to_string(k_views) + " views");
    } else {
        const auto& wa = std::get<WeightedAveraging>(method);
        if (k_views < 2)
            fail(ErrorCode::TooFewViews,
                 "weighted averaging needs at least 2 views, got " + std::to_string(k_views));
        if (wa.weights.size() != k_views)
            fail(ErrorCode::DimMismatch, std::to_string(wa.weights.size()) + " weights for " +
                                             std::to_string(k_views) + " views");
    }
}

VoteCountVolume vote_counts(std::span<const ProbVolume> views)
{
    check_views(views, 2);
    if (views.size() > std::numeric_limits<std::uint8_t>::max())
        fail(ErrorCode::DimMismatch, "too many views for 8-bit tallies");
    const ProbVolume& first = views.front();
    const std::size_t n = first.voxels();

    VoteCountVolume out{Volume<std::uint8_t>(first.dims(), first.channels(), std::uint8_t{0}),
                        views.size()};
    auto counts = out.counts.data();
    for (const ProbVolume& view : views)
        for (std::size_t v = 0; v < n; ++v)
            ++counts[voxel_argmax(view, v) * n + v];
    return out;
}

LabelVolume vote_decide(const VoteCountVolume& counts, const ProbVolume& ref)
{
    if (counts.dims() != ref.dims() || counts.n_classes() != ref.channels())
        fail(ErrorCode::DimMismatch, "vote counts " + to_string(counts.dims()) +
                                         " do not match reference " + to_string(ref.dims()));
    if (counts.k_views < 3)
        fail(ErrorCode::TooFewViews, "voting needs at least 3 views, got " + std::to_string(counts.k_views));

    const std::size_t n = counts.counts.voxels();
    const std::size_t classes = counts.n_classes();
    LabelVolume out(counts.dims(), 1, std::uint8_t{0});
    auto labels = out.data();
    auto tally = counts.counts.data();
    for (std::size_t v = 0; v < n; ++v) {
        std::size_t best = 0;
        std::uint8_t best_count = tally[v];
        for (std::size_t c = 1; c < classes; ++c)
            if (tally[c * n + v] > best_count) {
                best_count = tally[c * n + v];
                best = c;
            }
        labels[v] = static_cast<std::uint8_t>(best_count > 1 ? best : voxel_argmax(ref, v));
    }
    return out;
}

LabelVolume vote_fuse(std::span<const ProbVolume> views, std::size_t ref_index)
{
    if (views.size() < 3)
        fail(ErrorCode::TooFewViews, "voting needs at least 3 views, got " + std::to_string(views.size()));
    validate_method(Voting{ref_index}, views.size());
    check_views(views, 3);

    const ProbVolume& first = views.front();
    const std::size_t n = first.voxels();
    const std::size_t classes = first.channels();
    const ProbVolume& ref = views[ref_index];

    LabelVolume out(first.dims(), 1, std::uint8_t{0});
    auto labels = out.data();
    std::array<std::uint8_t, kMaxClasses> tally{};
    for (std::size_t v = 0; v < n; ++v) {
        std::fill_n(tally.begin(), classes, std::uint8_t{0});
        for (const ProbVolume& view : views)
            ++tally[voxel_argmax(view, v)];
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (tally[c] > tally[best])
                best = c;
        labels[v] = static_cast<std::uint8_t>(tally[best] > 1 ? best : voxel_argmax(ref, v));
    }
    return out;
}

ProbVolume weighted_average(std::span<const ProbVolume> views, const FusionWeights& weights)
{
    check_views(views, 2);
    validate_method(WeightedAveraging{weights}, views.size());
    const std::vector<double> w = weights.effective();

    const ProbVolume& first = views.front();
    ProbVolume out(first.dims(), first.channels(), 0.0);
    auto dst = out.data();
    for (std::size_t i = 0; i < views.size(); ++i) {
        auto src = views[i].data();
        const double wi = w[i];
        for (std::size_t e = 0; e < dst.size(); ++e)
            dst[e] += wi * src[e];
    }
    return out;
}

LabelVolume wa_fuse(std::span<const ProbVolume> views, const FusionWeights& weights)
{
    check_views(views, 2);
    validate_method(WeightedAveraging{weights}, views.size());
    const std::vector<double> w = weights.effective();

    const ProbVolume& first = views.front();
    const std::size_t n = first.voxels();
    const std::size_t classes = first.channels();
    LabelVolume out(first.dims(), 1, std::uint8_t{0});
    auto labels = out.data();

    // Same accumulation order as weighted_average so decisions agree bit for bit.
    std::array<double, kMaxClasses> acc{};
    for (std::size_t v = 0; v < n; ++v) {
        std::fill_n(acc.begin(), classes, 0.0);
        for (std::size_t i = 0; i < views.size(); ++i) {
            const double* p = views[i].data().data() + v;
            for (std::size_t c = 0; c < classes; ++c)
                acc[c] += w[i] * p[c * n];
        }
        labels[v] = static_cast<std::uint8_t>(argmax(std::span<const double>(acc.data(), classes)));
    }
    return out;
}

ProbVolume fused_distribution(const FusionMethod& method, std::span<const ProbVolume> views)
{
    validate_method(method, views.size());
    if (const auto* wa = std::get_if<WeightedAveraging>(&method))
        return weighted_average(views, wa->weights);

    const VoteCountVolume counts = vote_counts(views);
    ProbVolume out(counts.dims(), counts.n_classes(), 0.0);
    const double k = static_cast<double>(counts.k_views);
    auto src = counts.counts.data();
    auto dst = out.data();
    for (std::size_t e = 0; e < dst.size(); ++e)
        dst[e] = static_cast<double>(src[e]) / k;
    return out;
}

LabelVolume fuse_labels(const FusionMethod& method, std::span<const ProbVolume> views)
{
    validate_method(method, views.size());
    if (const auto* voting = std::get_if<Voting>(&method))
        return vote_fuse(views, voting->reference);
    return wa_fuse(views, std::get<WeightedAveraging>(method).weights);
}

LabelVolume argmax_labels(const ProbVolume& prob)
{
    LabelVolume out(prob.dims(), 1, std::uint8_t{0});
    auto labels = out.data();
    for (std::size_t v = 0; v < prob.voxels(); ++v)
        labels[v] = static_cast<std::uint8_t>(voxel_argmax(prob, v));
    return out;
}

} // namespace mvfuse
