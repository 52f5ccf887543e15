#include "mvfuse/volume.hpp"

#include <algorithm>
#include <cmath>

namespace mvfuse {

std::string to_string(const Dims& dims)
{
    return std::to_string(dims.z) + "x" + std::to_string(dims.y) + "x" + std::to_string(dims.x);
}

std::string_view to_string(ViewAxis view) noexcept
{
    switch (view) {
    case ViewAxis::Axial: return "axial";
    case ViewAxis::Coronal: return "coronal";
    case ViewAxis::Sagittal: return "sagittal";
    }
    return "unknown";
}

std::optional<ViewAxis> parse_view(std::string_view name) noexcept
{
    for (ViewAxis v : kAllViews)
        if (name == to_string(v))
            return v;
    if (name == "0")
        return ViewAxis::Axial;
    if (name == "1")
        return ViewAxis::Coronal;
    if (name == "2")
        return ViewAxis::Sagittal;
    return std::nullopt;
}

std::size_t slice_count(const Dims& dims, ViewAxis view) noexcept
{
    switch (view) {
    case ViewAxis::Axial: return dims.z;
    case ViewAxis::Coronal: return dims.y;
    case ViewAxis::Sagittal: return dims.x;
    }
    return 0;
}

std::pair<std::size_t, std::size_t> slice_shape(const Dims& dims, ViewAxis view) noexcept
{
    switch (view) {
    case ViewAxis::Axial: return {dims.y, dims.x};
    case ViewAxis::Coronal: return {dims.z, dims.x};
    case ViewAxis::Sagittal: return {dims.z, dims.y};
    }
    return {0, 0};
}

void validate_distribution(const ProbVolume& prob, double tol)
{
    const std::size_t n = prob.voxels();
    for (std::size_t v = 0; v < n; ++v) {
        double sum = 0.0;
        for (std::size_t c = 0; c < prob.channels(); ++c) {
            const double p = prob.data()[c * n + v];
            if (!(p >= -tol && p <= 1.0 + tol))
                fail(ErrorCode::InvalidDistribution,
                     "probability " + std::to_string(p) + " outside [0,1] at voxel " + std::to_string(v));
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol)
            fail(ErrorCode::InvalidDistribution,
                 "distribution sums to " + std::to_string(sum) + " at voxel " + std::to_string(v));
    }
}

void validate_labels(const LabelVolume& labels, std::size_t n_classes)
{
    if (labels.channels() != 1)
        fail(ErrorCode::InvalidDistribution, "label volume must have exactly one channel");
    for (std::uint8_t l : labels.data())
        if (l >= n_classes)
            fail(ErrorCode::InvalidDistribution,
                 "label " + std::to_string(l) + " >= class count " + std::to_string(n_classes));
}

IntensityVolume zscore_normalize(const IntensityVolume& vol, bool nonzero_only)
{
    IntensityVolume out = vol;
    for (std::size_t m = 0; m < vol.channels(); ++m) {
        auto src = vol.channel(m);
        auto dst = out.channel(m);

        std::size_t count = 0;
        double sum = 0.0;
        for (float v : src) {
            if (nonzero_only && v == 0.0f)
                continue;
            sum += v;
            ++count;
        }
        if (count < 2)
            fail(ErrorCode::ZeroVariance,
                 "modality " + std::to_string(m) + " has fewer than 2 voxels in its support");
        const double mean = sum / static_cast<double>(count);

        double ss = 0.0;
        for (float v : src) {
            if (nonzero_only && v == 0.0f)
                continue;
            const double d = v - mean;
            ss += d * d;
        }
        const double stddev = std::sqrt(ss / static_cast<double>(count));
        if (!(stddev > 0.0) || !std::isfinite(stddev))
            fail(ErrorCode::ZeroVariance, "modality " + std::to_string(m) + " is constant over its support");

        for (std::size_t i = 0; i < src.size(); ++i) {
            if (nonzero_only && src[i] == 0.0f)
                continue;
            dst[i] = static_cast<float>((src[i] - mean) / stddev);
        }
    }
    return out;
}

template <typename T>
Volume<T> pad_to(const Volume<T>& vol, const Dims& target)
{
    const Dims& d = vol.dims();
    if (target.z < d.z || target.y < d.y || target.x < d.x)
        fail(ErrorCode::ShrinkNotAllowed, "cannot pad " + to_string(d) + " to " + to_string(target));
    Volume<T> out(target, vol.channels(), T{});
    for (std::size_t c = 0; c < vol.channels(); ++c)
        for (std::size_t z = 0; z < d.z; ++z)
            for (std::size_t y = 0; y < d.y; ++y) {
                const T* src = &vol.at(c, z, y, 0);
                std::copy(src, src + d.x, &out.at(c, z, y, 0));
            }
    return out;
}

template <typename T>
Volume<T> crop_to(const Volume<T>& vol, const Dims& target)
{
    const Dims& d = vol.dims();
    if (target.z > d.z || target.y > d.y || target.x > d.x)
        fail(ErrorCode::DimMismatch, "cannot crop " + to_string(d) + " to " + to_string(target));
    Volume<T> out(target, vol.channels(), T{});
    for (std::size_t c = 0; c < vol.channels(); ++c)
        for (std::size_t z = 0; z < target.z; ++z)
            for (std::size_t y = 0; y < target.y; ++y) {
                const T* src = &vol.at(c, z, y, 0);
                std::copy(src, src + target.x, &out.at(c, z, y, 0));
            }
    return out;
}

template <typename T>
Volume<T> crop_slab(const Volume<T>& vol, ViewAxis view, std::size_t first, std::size_t count)
{
    const Dims& d = vol.dims();
    if (count == 0 || first + count > slice_count(d, view))
        fail(ErrorCode::DimMismatch, "slab [" + std::to_string(first) + ", " +
                                         std::to_string(first + count) + ") outside " + to_string(d) +
                                         " along " + std::string(to_string(view)));
    Dims sd = d;
    std::size_t z0 = 0, y0 = 0, x0 = 0;
    switch (view) {
    case ViewAxis::Axial: sd.z = count; z0 = first; break;
    case ViewAxis::Coronal: sd.y = count; y0 = first; break;
    case ViewAxis::Sagittal: sd.x = count; x0 = first; break;
    }
    Volume<T> out(sd, vol.channels(), T{});
    for (std::size_t c = 0; c < vol.channels(); ++c)
        for (std::size_t z = 0; z < sd.z; ++z)
            for (std::size_t y = 0; y < sd.y; ++y) {
                const T* src = &vol.at(c, z0 + z, y0 + y, x0);
                std::copy(src, src + sd.x, &out.at(c, z, y, 0));
            }
    return out;
}

template <typename T>
SliceStack<T> extract_slices(const Volume<T>& vol, ViewAxis view)
{
    const Dims& d = vol.dims();
    const auto [height, width] = slice_shape(d, view);
    const std::size_t n = slice_count(d, view);

    SliceStack<T> stack;
    stack.view = view;
    stack.source_dims = d;
    stack.channels = vol.channels();
    stack.slices.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        Slice<T>& s = stack.slices[i];
        s.index = i;
        s.height = height;
        s.width = width;
        s.channels = vol.channels();
        s.data.resize(height * width * vol.channels());
        for (std::size_t c = 0; c < vol.channels(); ++c) {
            switch (view) {
            case ViewAxis::Axial: {
                const T* src = &vol.at(c, i, 0, 0);
                std::copy(src, src + height * width, &s.at(c, 0, 0));
                break;
            }
            case ViewAxis::Coronal:
                for (std::size_t z = 0; z < d.z; ++z) {
                    const T* src = &vol.at(c, z, i, 0);
                    std::copy(src, src + d.x, &s.at(c, z, 0));
                }
                break;
            case ViewAxis::Sagittal:
                for (std::size_t z = 0; z < d.z; ++z)
                    for (std::size_t y = 0; y < d.y; ++y)
                        s.at(c, z, y) = vol.at(c, z, y, i);
                break;
            }
        }
    }
    return stack;
}

template <typename T>
Volume<T> assemble_volume(const SliceStack<T>& stack)
{
    const Dims& d = stack.source_dims;
    const auto [height, width] = slice_shape(d, stack.view);
    const std::size_t n = slice_count(d, stack.view);

    if (stack.slices.size() != n)
        fail(ErrorCode::InconsistentStack, "expected " + std::to_string(n) + " slices, got " +
                                               std::to_string(stack.slices.size()));

    std::vector<bool> seen(n, false);
    for (const Slice<T>& s : stack.slices) {
        if (s.index >= n || seen[s.index])
            fail(ErrorCode::InconsistentStack, "slice index " + std::to_string(s.index) +
                                                   " is out of range or duplicated");
        seen[s.index] = true;
        if (s.height != height || s.width != width || s.channels != stack.channels ||
            s.data.size() != height * width * stack.channels)
            fail(ErrorCode::InconsistentStack, "slice " + std::to_string(s.index) + " has shape " +
                                                   std::to_string(s.height) + "x" +
                                                   std::to_string(s.width) + ", expected " +
                                                   std::to_string(height) + "x" + std::to_string(width));
    }

    Volume<T> vol(d, stack.channels, T{});
    for (const Slice<T>& s : stack.slices) {
        const std::size_t i = s.index;
        for (std::size_t c = 0; c < stack.channels; ++c) {
            switch (stack.view) {
            case ViewAxis::Axial: {
                const T* src = &s.at(c, 0, 0);
                std::copy(src, src + height * width, &vol.at(c, i, 0, 0));
                break;
            }
            case ViewAxis::Coronal:
                for (std::size_t z = 0; z < d.z; ++z) {
                    const T* src = &s.at(c, z, 0);
                    std::copy(src, src + d.x, &vol.at(c, z, i, 0));
                }
                break;
            case ViewAxis::Sagittal:
                for (std::size_t z = 0; z < d.z; ++z)
                    for (std::size_t y = 0; y < d.y; ++y)
                        vol.at(c, z, y, i) = s.at(c, z, y);
                break;
            }
        }
    }
    return vol;
}

namespace {

// Source coordinate of a destination pixel centre, clamped to the valid sample range.
struct Tap {
    std::size_t lo, hi;
    double frac;
};

Tap make_tap(std::size_t dst, std::size_t dst_size, std::size_t src_size)
{
    const double scale = static_cast<double>(src_size) / static_cast<double>(dst_size);
    double pos = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(src_size - 1));
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, src_size - 1);
    return {lo, hi, pos - static_cast<double>(lo)};
}

} // namespace

Slice<double> resize_bilinear(const Slice<double>& slice, std::size_t height, std::size_t width)
{
    if (slice.height == 0 || slice.width == 0 || height == 0 || width == 0)
        fail(ErrorCode::DimMismatch, "bilinear resize needs non-empty source and target");
    Slice<double> out;
    out.index = slice.index;
    out.height = height;
    out.width = width;
    out.channels = slice.channels;
    out.data.assign(height * width * slice.channels, 0.0);

    std::vector<Tap> rows(height), cols(width);
    for (std::size_t h = 0; h < height; ++h)
        rows[h] = make_tap(h, height, slice.height);
    for (std::size_t w = 0; w < width; ++w)
        cols[w] = make_tap(w, width, slice.width);

    for (std::size_t c = 0; c < slice.channels; ++c)
        for (std::size_t h = 0; h < height; ++h) {
            const Tap& r = rows[h];
            for (std::size_t w = 0; w < width; ++w) {
                const Tap& q = cols[w];
                const double top = slice.at(c, r.lo, q.lo) * (1.0 - q.frac) + slice.at(c, r.lo, q.hi) * q.frac;
                const double bot = slice.at(c, r.hi, q.lo) * (1.0 - q.frac) + slice.at(c, r.hi, q.hi) * q.frac;
                out.at(c, h, w) = top * (1.0 - r.frac) + bot * r.frac;
            }
        }
    return out;
}

SliceStack<double> resize_bilinear(const SliceStack<double>& stack, const Dims& target_dims)
{
    if (slice_count(target_dims, stack.view) != stack.slices.size())
        fail(ErrorCode::DimMismatch, "resize target " + to_string(target_dims) + " has " +
                                         std::to_string(slice_count(target_dims, stack.view)) +
                                         " slices along the stack view, stack has " +
                                         std::to_string(stack.slices.size()));
    const auto [height, width] = slice_shape(target_dims, stack.view);
    SliceStack<double> out;
    out.view = stack.view;
    out.source_dims = target_dims;
    out.channels = stack.channels;
    out.slices.reserve(stack.slices.size());
    for (const Slice<double>& s : stack.slices)
        out.slices.push_back(resize_bilinear(s, height, width));
    return out;
}

#define MVFUSE_INSTANTIATE_VOLUME_OPS(T)                                                         \
    template Volume<T> pad_to<T>(const Volume<T>&, const Dims&);                                 \
    template Volume<T> crop_to<T>(const Volume<T>&, const Dims&);                                \
    template Volume<T> crop_slab<T>(const Volume<T>&, ViewAxis, std::size_t, std::size_t);       \
    template SliceStack<T> extract_slices<T>(const Volume<T>&, ViewAxis);                        \
    template Volume<T> assemble_volume<T>(const SliceStack<T>&);

MVFUSE_INSTANTIATE_VOLUME_OPS(float)
MVFUSE_INSTANTIATE_VOLUME_OPS(double)
MVFUSE_INSTANTIATE_VOLUME_OPS(std::uint8_t)

#undef MVFUSE_INSTANTIATE_VOLUME_OPS

} // namespace mvfuse
