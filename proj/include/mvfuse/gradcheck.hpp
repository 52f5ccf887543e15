#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mvfuse/loss.hpp"

namespace mvfuse {

/// Elementwise relative error uses max(|analytic|, |numeric|, kRelativeErrorFloor) as the
/// denominator so entries that are zero in both do not divide by zero.
inline constexpr double kRelativeErrorFloor = 1e-6;

/// Step that keeps both truncation and f64 round-off of the stencil below 1e-10 on the
/// small randomized instances.
inline constexpr double kDefaultStep = 1e-3;

/// Largest relative error between `analytic` and the fourth-order central difference
/// (8[f(x+h) - f(x-h)] - [f(x+2h) - f(x-2h)]) / 12h of `loss_fn` at `x`.
/// Throws InvalidStep unless h is finite and positive.
double finite_diff_check(const std::function<double(std::span<const double>)>& loss_fn,
                         std::span<const double> x, std::span<const double> analytic, double h);

/// A randomized instance of the full multi-view objective.
struct GradCheckInstance {
    FusionMethod method;
    std::vector<StageOutputs> logits;
    ProbVolume y;
    ClassWeights weights;
    LossConfig cfg;
    int epoch = 1;
};

/// k views with `stages` supervised outputs each over a `dims` field. Every class occurs in
/// the ground truth when the field has at least n_classes voxels.
GradCheckInstance make_gradcheck_instance(std::uint64_t seed, const FusionMethod& method,
                                          Dims dims = {1, 3, 3}, std::size_t stages = 1,
                                          std::size_t n_classes = kNumClasses);

std::vector<double> flatten(std::span<const StageOutputs> fields);
std::vector<StageOutputs> unflatten(std::span<const double> flat, std::span<const StageOutputs> like);

/// Max relative error of grad_logits against central differences on one instance.
double gradcheck_instance(const GradCheckInstance& instance, double h = kDefaultStep);

} // namespace mvfuse
