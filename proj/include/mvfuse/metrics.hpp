#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mvfuse/volume.hpp"

namespace mvfuse {

/// A tumor region as a set of class ids (bit c set when class c belongs to the region).
struct RegionSpec {
    std::string_view name;
    std::uint32_t classes = 0;

    bool contains(std::uint8_t label) const noexcept { return label < 32 && ((classes >> label) & 1u) != 0; }
};

/// All four tumor classes.
inline constexpr RegionSpec kCompleteRegion{"complete", 0b11110};
/// Tumor classes except edema (2).
inline constexpr RegionSpec kCoreRegion{"core", 0b11010};
/// Enhancing tumor (4) only.
inline constexpr RegionSpec kEnhancingRegion{"enhancing", 0b10000};

inline constexpr std::array<RegionSpec, 3> kRegions{kCompleteRegion, kCoreRegion, kEnhancingRegion};

Volume<std::uint8_t> region_mask(const LabelVolume& labels, const RegionSpec& region);

struct RegionOverlap {
    std::size_t gt = 0;
    std::size_t pred = 0;
    std::size_t intersection = 0;

    /// 2|GT n AT| / (|GT| + |AT|); 1 when both masks are empty.
    double dice() const noexcept;
};

RegionOverlap region_overlap(const LabelVolume& gt, const LabelVolume& pred, const RegionSpec& region);

double dice(const LabelVolume& gt, const LabelVolume& pred, const RegionSpec& region);

struct DiceReport {
    std::array<RegionOverlap, 3> regions{};  // complete, core, enhancing

    double complete() const noexcept { return regions[0].dice(); }
    double core() const noexcept { return regions[1].dice(); }
    double enhancing() const noexcept { return regions[2].dice(); }
    double mean() const noexcept { return (complete() + core() + enhancing()) / 3.0; }
};

DiceReport evaluate(const LabelVolume& gt, const LabelVolume& pred);

struct ReportRow {
    std::string case_id;
    std::string method;
    DiceReport report;
};

/// Header "case_id,method,complete,core,enhancing", dice with 6 decimals.
void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const ReportRow& row);
void write_csv(std::ostream& out, const std::vector<ReportRow>& rows);

} // namespace mvfuse
