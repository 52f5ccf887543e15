#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mvfuse/volume.hpp"

using namespace mvfuse;

namespace {

IntensityVolume random_intensity(Dims dims, std::size_t channels, std::uint64_t seed, double zero_fraction = 0.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> value(0.5f, 10.0f);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    IntensityVolume v(dims, channels);
    for (float& x : v.data())
        x = coin(rng) < zero_fraction ? 0.0f : value(rng);
    return v;
}

// Plain two-pass mean and population std over the nonzero voxels of one channel.
std::pair<double, double> two_pass_stats(std::span<const float> ch)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (float v : ch)
        if (v != 0.0f) {
            sum += v;
            ++n;
        }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (float v : ch)
        if (v != 0.0f)
            ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(n))};
}

} // namespace

TEST_CASE("zscore maps {2, 4} to {-1, +1}")
{
    IntensityVolume v({1, 1, 2}, 1, std::vector<float>{2.0f, 4.0f});
    const IntensityVolume n = zscore_normalize(v);
    CHECK(n.data()[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(n.data()[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("zscore agrees with a two-pass oracle and keeps background at zero")
{
    const IntensityVolume v = random_intensity({5, 6, 7}, 4, 11, 0.3);
    const IntensityVolume n = zscore_normalize(v);
    for (std::size_t c = 0; c < 4; ++c) {
        const auto [mean, sd] = two_pass_stats(v.channel(c));
        for (std::size_t i = 0; i < v.voxels(); ++i) {
            const float src = v.channel(c)[i];
            if (src == 0.0f)
                CHECK(n.channel(c)[i] == 0.0f);
            else
                CHECK(n.channel(c)[i] == doctest::Approx((src - mean) / sd).epsilon(1e-5));
        }
    }
}

TEST_CASE("zscore is idempotent up to rounding")
{
    const IntensityVolume once = zscore_normalize(random_intensity({4, 4, 4}, 2, 3, 0.2));
    const IntensityVolume twice = zscore_normalize(once);
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(twice.data()[i] == doctest::Approx(once.data()[i]).epsilon(1e-4));
}

TEST_CASE("zscore rejects a constant support")
{
    IntensityVolume v({1, 2, 2}, 1, std::vector<float>{0.0f, 3.0f, 3.0f, 3.0f});
    try {
        (void)zscore_normalize(v);
        FAIL("expected ZeroVariance");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroVariance);
    }
}

TEST_CASE("all-voxel zscore includes zeros")
{
    IntensityVolume v({1, 1, 2}, 1, std::vector<float>{0.0f, 2.0f});
    const IntensityVolume n = zscore_normalize(v, false);
    CHECK(n.data()[0] == doctest::Approx(-1.0));
    CHECK(n.data()[1] == doctest::Approx(1.0));
}

TEST_CASE("padding 155 slices to 160 appends zeros and keeps the sum")
{
    const Dims src{155, 6, 5};
    const IntensityVolume v = random_intensity(src, 2, 7);
    const IntensityVolume p = pad_to(v, {160, 6, 5});
    CHECK(p.dims() == Dims{160, 6, 5});
    CHECK(p.channels() == 2);
    double before = 0.0, after = 0.0;
    for (float x : v.data())
        before += x;
    for (float x : p.data())
        after += x;
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t z = 155; z < 160; ++z)
            for (std::size_t y = 0; y < 6; ++y)
                for (std::size_t x = 0; x < 5; ++x)
                    CHECK(p.at(c, z, y, x) == 0.0f);
    CHECK(crop_to(p, src) == v);
}

TEST_CASE("pad_to refuses to shrink")
{
    const IntensityVolume v = random_intensity({4, 4, 4}, 1, 1);
    try {
        (void)pad_to(v, {3, 4, 4});
        FAIL("expected ShrinkNotAllowed");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShrinkNotAllowed);
    }
}

TEST_CASE("slice extraction on a 2x2x2 index volume")
{
    std::vector<float> idx(8);
    std::iota(idx.begin(), idx.end(), 0.0f);
    const IntensityVolume v({2, 2, 2}, 1, idx);
    // value = 4z + 2y + x
    const auto axial = extract_slices(v, ViewAxis::Axial);
    REQUIRE(axial.slices.size() == 2);
    CHECK(axial.slices[1].data == std::vector<float>{4, 5, 6, 7});
    const auto coronal = extract_slices(v, ViewAxis::Coronal);
    CHECK(coronal.slices[1].data == std::vector<float>{2, 3, 6, 7});
    const auto sagittal = extract_slices(v, ViewAxis::Sagittal);
    CHECK(sagittal.slices[1].data == std::vector<float>{1, 3, 5, 7});
}

TEST_CASE("coronal slicing of a 160x240x240 volume")
{
    const Dims d{160, 240, 240};
    CHECK(slice_count(d, ViewAxis::Coronal) == 240);
    CHECK(slice_shape(d, ViewAxis::Coronal) == std::pair<std::size_t, std::size_t>{160, 240});
    CHECK(slice_shape(d, ViewAxis::Sagittal) == std::pair<std::size_t, std::size_t>{160, 240});
    CHECK(slice_shape(d, ViewAxis::Axial) == std::pair<std::size_t, std::size_t>{240, 240});
    const LabelVolume v(d, 1, std::uint8_t{3});
    const auto stack = extract_slices(v, ViewAxis::Coronal);
    REQUIRE(stack.slices.size() == 240);
    CHECK(stack.slices.front().height == 160);
    CHECK(stack.slices.front().width == 240);
}

TEST_CASE("extract then assemble is the identity for every view")
{
    const IntensityVolume v = random_intensity({3, 5, 4}, 3, 21);
    for (ViewAxis view : kAllViews) {
        CAPTURE(to_string(view));
        CHECK(assemble_volume(extract_slices(v, view)) == v);
    }
}

TEST_CASE("assembly rejects a missing or duplicated slice")
{
    const IntensityVolume v = random_intensity({3, 4, 4}, 1, 5);
    auto stack = extract_slices(v, ViewAxis::Sagittal);
    auto missing = stack;
    missing.slices.pop_back();
    auto dup = stack;
    dup.slices[2].index = 1;
    for (const auto* s : {&missing, &dup}) {
        try {
            (void)assemble_volume(*s);
            FAIL("expected InconsistentStack");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InconsistentStack);
        }
    }
}

TEST_CASE("crop_slab keeps the requested slices")
{
    const IntensityVolume v = random_intensity({6, 5, 4}, 2, 9);
    const IntensityVolume s = crop_slab(v, ViewAxis::Coronal, 1, 3);
    CHECK(s.dims() == Dims{6, 3, 4});
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t z = 0; z < 6; ++z)
            for (std::size_t y = 0; y < 3; ++y)
                for (std::size_t x = 0; x < 4; ++x)
                    CHECK(s.at(c, z, y, x) == v.at(c, z, y + 1, x));
}

TEST_CASE("distribution and label validation")
{
    ProbVolume p({1, 1, 1}, 2, std::vector<double>{0.7, 0.2});
    CHECK_THROWS_AS(validate_distribution(p), Error);
    p.data()[1] = 0.3;
    CHECK_NOTHROW(validate_distribution(p));
    LabelVolume l({1, 1, 2}, 1, std::vector<std::uint8_t>{0, 5});
    CHECK_THROWS_AS(validate_labels(l), Error);
}

TEST_CASE("bilinear resize of a constant slice stays constant")
{
    Slice<double> s{0, 2, 2, 1, {3.0, 3.0, 3.0, 3.0}};
    const Slice<double> r = resize_bilinear(s, 8, 6);
    CHECK(r.height == 8);
    CHECK(r.width == 6);
    for (double v : r.data)
        CHECK(v == doctest::Approx(3.0));
}
