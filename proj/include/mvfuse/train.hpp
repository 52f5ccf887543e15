#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvfuse/fusion.hpp"
#include "mvfuse/loss.hpp"
#include "mvfuse/segmenter.hpp"
#include "mvfuse/step_plan.hpp"
#include "mvfuse/volume.hpp"

namespace mvfuse {

struct TrainConfig {
    double lr0 = 1e-4;
    /// The learning rate halves every `halve_every` epochs.
    int halve_every = 2;
    int epochs = 35;
    /// Kept for configuration parity; the toy segmenter has no dropout layer.
    double dropout = 0.2;
    LossConfig loss;
    BatchSizes batches;
    FusionMethod fusion = WeightedAveraging{FusionWeights({0.4, 0.3, 0.3})};
    std::uint64_t seed = 0;
    std::size_t patch = 3;
    double init_stddev = 0.01;
    /// GroundTruth: per-patient label counts. Prediction: the view's own soft output on
    /// each batch.
    ClassWeightSource class_weight_source = ClassWeightSource::Prediction;

    void validate() const;
};

/// lr0 * 0.5^floor((epoch - 1) / halve_every), epochs counted from 1.
double learning_rate(const TrainConfig& cfg, int epoch);

struct Sample {
    std::string id;
    IntensityVolume image;  // normalized modalities
    LabelVolume labels;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    /// Means over the epoch's steps of the per-step sums over views.
    double segmentation = 0.0;
    double transition = 0.0;
    double decision = 0.0;
    double total = 0.0;
    /// segmentation + alpha * transition + beta * decision whether or not the fusion terms
    /// are engaged yet.
    double objective = 0.0;
    bool engaged = false;
    /// Mean region dice on the validation set, per view (axial, coronal, sagittal) and fused.
    std::array<double, 3> view_dice{};
    double fused_dice = 0.0;
};

struct TrainResult {
    std::array<ToySegmenter, 3> models;
    std::vector<EpochRecord> history;
};

/// Initial weights of the segmenter for `view`; the same for single- and multi-view runs.
ToySegmenter initial_model(const TrainConfig& cfg, ViewAxis view);

/// Per-view class probabilities for a whole volume, indexed by view_index.
std::array<ProbVolume, 3> predict_views(const std::array<ToySegmenter, 3>& models, const IntensityVolume& image);

ProbVolume predict_view(const ToySegmenter& model, const IntensityVolume& image, ViewAxis view);

/// Trains the three view segmenters jointly. Every step processes one batch per view; the
/// fused distribution couples them through the transition and decision terms, and all three
/// models are updated only after every view's gradient for the step has been computed.
TrainResult train_multiview(std::span<const Sample> train, std::span<const Sample> validation,
                            const TrainConfig& cfg);

/// The same loop for one view with only the segmentation term.
ToySegmenter train_single_view(std::span<const Sample> train, ViewAxis view, const TrainConfig& cfg,
                               std::vector<EpochRecord>* history = nullptr);

} // namespace mvfuse
