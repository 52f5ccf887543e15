#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mvfuse/fusion.hpp"
#include "mvfuse/volume.hpp"

namespace mvfuse {

/// Denominator clamp for inverse-frequency weights, as a fraction of the voxel count.
inline constexpr double kWeightEpsilon = 1e-6;
/// Probabilities below this are clamped before taking the log.
inline constexpr double kLogClamp = 1e-12;

struct ClassWeights {
    std::vector<double> omega;
    double epsilon = kWeightEpsilon;

    std::size_t size() const noexcept { return omega.size(); }
};

enum class ClassWeightSource { GroundTruth, Prediction };

/// omega_k = (T - n_k) / max(n_k, eps * T) with n_k the voxel count of class k.
ClassWeights class_weights(const LabelVolume& y, std::size_t n_classes = kNumClasses,
                           double epsilon = kWeightEpsilon);

/// Same formula with n_k = sum_j field_jk, for soft fields such as network outputs.
ClassWeights class_weights(const ProbVolume& field, double epsilon = kWeightEpsilon);

ProbVolume one_hot(const LabelVolume& labels, std::size_t n_classes = kNumClasses);

/// -(1/T) sum_j sum_k omega_k target_jk log max(pred_jk, kLogClamp)
double weighted_cross_entropy(const ProbVolume& target, const ProbVolume& pred, const ClassWeights& w);

/// Weighted cross-entropy of a prediction against a one-hot ground truth.
double wce(const ProbVolume& pred, const ProbVolume& y, const ClassWeights& w);

/// Unweighted sum of wce over every supervised stage output. Stages must already be at
/// ground-truth resolution.
double segmentation_loss(std::span<const ProbVolume> stage_outputs, const ProbVolume& y,
                         const ClassWeights& w);

/// Cross-entropy of one view's prediction against the fused distribution, which acts as a
/// constant target.
double transition_loss(const ProbVolume& fused, const ProbVolume& view_pred, const ClassWeights& w);

double decision_loss(const ProbVolume& fused, const ProbVolume& y, const ClassWeights& w);

struct LossConfig {
    double alpha = 0.5;
    double beta = 1.0;
    int engage_epoch = 3;

    void validate() const;
    bool engaged(int epoch) const noexcept { return epoch >= engage_epoch; }
};

/// Supervised outputs of one view, ordered by stage. The last entry is the view's final
/// output and is the one that takes part in fusion.
using StageOutputs = std::vector<ProbVolume>;

struct LossBundle {
    double segmentation = 0.0;
    double transition = 0.0;
    double decision = 0.0;
    /// segmentation + alpha * transition + beta * decision once engaged, segmentation before.
    double total = 0.0;
    bool engaged = false;

    std::vector<double> view_segmentation;
    std::vector<double> view_transition;

    /// d total / d logits, indexed [view][stage]. Empty when only values were requested.
    std::vector<std::vector<ProbVolume>> grad_logits;
};

/// Values of the three-part objective given already-computed probabilities and fusion.
LossBundle multi_view_fusion_loss(std::span<const StageOutputs> stages_per_view, const ProbVolume& fused,
                                  const ProbVolume& y, const ClassWeights& w, const LossConfig& cfg,
                                  int epoch);

ProbVolume softmax(const ProbVolume& logits);

/// Loss values and analytic gradients with respect to every view's stage logits.
///
/// Predictions are softmax(logits). The fused distribution comes from the final stage of
/// each view through `method`. The transition target is that fused distribution held
/// constant. The decision term back-propagates through the linear weighted average and
/// contributes nothing for voting, whose tallies are piecewise constant.
///
/// A single view is accepted when neither the transition nor the decision term is active.
LossBundle grad_logits(const FusionMethod& method, std::span<const StageOutputs> logits_per_view,
                       const ProbVolume& y, const ClassWeights& w, const LossConfig& cfg, int epoch);

/// Total objective as a plain function of the logits with the transition target frozen.
/// This is the function grad_logits differentiates.
double objective_value(const FusionMethod& method, std::span<const StageOutputs> logits_per_view,
                       const ProbVolume& y, const ClassWeights& w, const LossConfig& cfg, int epoch,
                       const ProbVolume& transition_target);

} // namespace mvfuse
