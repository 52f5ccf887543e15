#include "mvfuse/metrics.hpp"

#include <cstdio>

namespace mvfuse {

namespace {

void check_same_dims(const LabelVolume& gt, const LabelVolume& pred)
{
    if (gt.dims() != pred.dims() || gt.channels() != pred.channels())
        fail(ErrorCode::DimMismatch, "ground truth " + to_string(gt.dims()) + " vs prediction " +
                                         to_string(pred.dims()));
}

} // namespace

Volume<std::uint8_t> region_mask(const LabelVolume& labels, const RegionSpec& region)
{
    Volume<std::uint8_t> mask(labels.dims(), 1, std::uint8_t{0});
    auto src = labels.data();
    auto dst = mask.data();
    for (std::size_t v = 0; v < src.size(); ++v)
        dst[v] = region.contains(src[v]) ? 1 : 0;
    return mask;
}

double RegionOverlap::dice() const noexcept
{
    if (gt + pred == 0)
        return 1.0;
    return 2.0 * static_cast<double>(intersection) / static_cast<double>(gt + pred);
}

RegionOverlap region_overlap(const LabelVolume& gt, const LabelVolume& pred, const RegionSpec& region)
{
    check_same_dims(gt, pred);
    RegionOverlap o;
    auto a = gt.data();
    auto b = pred.data();
    for (std::size_t v = 0; v < a.size(); ++v) {
        const bool in_gt = region.contains(a[v]);
        const bool in_pred = region.contains(b[v]);
        o.gt += in_gt;
        o.pred += in_pred;
        o.intersection += in_gt && in_pred;
    }
    return o;
}

double dice(const LabelVolume& gt, const LabelVolume& pred, const RegionSpec& region)
{
    return region_overlap(gt, pred, region).dice();
}

DiceReport evaluate(const LabelVolume& gt, const LabelVolume& pred)
{
    DiceReport r;
    for (std::size_t i = 0; i < kRegions.size(); ++i)
        r.regions[i] = region_overlap(gt, pred, kRegions[i]);
    return r;
}

void write_csv_header(std::ostream& out)
{
    out << "case_id,method,complete,core,enhancing\n";
}

void write_csv_row(std::ostream& out, const ReportRow& row)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", row.report.complete(), row.report.core(),
                  row.report.enhancing());
    out << row.case_id << ',' << row.method << ',' << buf << '\n';
}

void write_csv(std::ostream& out, const std::vector<ReportRow>& rows)
{
    write_csv_header(out);
    for (const ReportRow& row : rows)
        write_csv_row(out, row);
}

} // namespace mvfuse
