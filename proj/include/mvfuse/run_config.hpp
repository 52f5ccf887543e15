#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "mvfuse/train.hpp"
#include "mvfuse/volume.hpp"

namespace mvfuse {

/// Settings for a CLI run, stored as a flat JSON object. Keys that are absent keep their
/// defaults; unknown keys are rejected.
///
///   output_dir, fusion ("wa" | "voting"), fusion_weights [a, c, s], reference_view,
///   alpha, beta, engage_epoch, lr0, halve_every, epochs, dropout, batch_axial,
///   batch_coronal, batch_sagittal, batch_axial_final, seed, patch, init_stddev,
///   class_weights ("ground_truth" | "prediction"), normalize_nonzero_only,
///   pad_dims [z, y, x], phantom_count, phantom_validation, phantom_dims [z, y, x]
struct RunConfig {
    std::filesystem::path output_dir = ".";
    TrainConfig train;
    bool normalize_nonzero_only = true;
    Dims pad_dims{0, 0, 0};  // all zero: no padding
    std::size_t phantom_count = 8;
    std::size_t phantom_validation = 2;
    Dims phantom_dims{32, 32, 32};

    /// Throws InvalidConfig naming the offending key.
    void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& cfg);

} // namespace mvfuse
