#include "mvfuse/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "mvfuse/loss.hpp"

namespace mvfuse {

namespace {

// Mean intensity of each class in the four modalities.
constexpr double kClassMeans[kNumClasses][kNumModalities] = {
    {1.0, 1.0, 1.0, 1.0},
    {1.2, 0.6, 0.7, 1.8},
    {2.0, 0.8, 0.9, 1.8},
    {1.6, 0.7, 1.0, 1.4},
    {1.5, 0.9, 2.2, 1.5},
};

constexpr double kMinBrainIntensity = 0.05;

bool inside(const std::array<double, 3>& p, const std::array<double, 3>& center, const Radii& r)
{
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = (p[a] - center[a]) / r[a];
        s += d * d;
    }
    return s <= 1.0;
}

void check_radii(const Radii& outer, const Radii& inner, const char* outer_name, const char* inner_name)
{
    for (int a = 0; a < 3; ++a) {
        if (!(inner[a] > 0.0) || !std::isfinite(inner[a]))
            fail(ErrorCode::InfeasibleSpec, std::string(inner_name) + " radii must be positive");
        if (!(inner[a] < outer[a]))
            fail(ErrorCode::InfeasibleSpec, std::string(inner_name) + " ellipsoid is not nested inside " + outer_name);
    }
}

std::uint64_t mix(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint8_t wrong_class(std::uint8_t truth, std::mt19937_64& rng)
{
    if (truth == 4) {
        std::uniform_int_distribution<int> pick(0, 3);
        return static_cast<std::uint8_t>(pick(rng));
    }
    if (truth == 1 || truth == 3) {
        std::uniform_int_distribution<int> pick(0, 1);
        return pick(rng) == 0 ? 0 : 2;
    }
    return 0;
}

} // namespace

PhantomSpec PhantomSpec::for_dims(const Dims& dims)
{
    PhantomSpec s;
    s.dims = dims;
    const std::array<double, 3> ext{static_cast<double>(dims.z), static_cast<double>(dims.y),
                                    static_cast<double>(dims.x)};
    for (int a = 0; a < 3; ++a) {
        s.brain[a] = 0.42 * ext[a];
        s.complete[a] = 0.25 * ext[a];
        s.core[a] = 0.16 * ext[a];
        s.enhancing[a] = 0.09 * ext[a];
    }
    return s;
}

Phantom generate_phantom(const PhantomSpec& spec)
{
    const Dims d = spec.dims;
    if (d.voxels() == 0)
        fail(ErrorCode::InfeasibleSpec, "phantom dims must be positive");
    for (int a = 0; a < 3; ++a)
        if (!(spec.brain[a] > 0.0))
            fail(ErrorCode::InfeasibleSpec, "brain radii must be positive");
    check_radii(spec.brain, spec.complete, "brain", "complete tumor");
    check_radii(spec.complete, spec.core, "complete tumor", "tumor core");
    check_radii(spec.core, spec.enhancing, "tumor core", "enhancing tumor");
    if (!(spec.noise_stddev >= 0.0) || !(spec.center_jitter >= 0.0) || !(spec.radius_jitter >= 0.0) ||
        !(spec.radius_jitter < 1.0))
        fail(ErrorCode::InfeasibleSpec, "noise and jitter must be non-negative, radius jitter below 1");

    const std::array<double, 3> ext{static_cast<double>(d.z), static_cast<double>(d.y), static_cast<double>(d.x)};
    std::array<double, 3> center{};
    for (int a = 0; a < 3; ++a) {
        center[a] = (ext[a] - 1.0) / 2.0;
        if (center[a] - spec.brain[a] < 0.0 || center[a] + spec.brain[a] > ext[a] - 1.0)
            fail(ErrorCode::InfeasibleSpec, "brain ellipsoid does not fit in " + to_string(d));
    }

    std::mt19937_64 rng(spec.seed);
    std::array<double, 3> tumor_center = center;
    Radii complete = spec.complete, core = spec.core, enhancing = spec.enhancing;
    {
        std::uniform_real_distribution<double> shift(-spec.center_jitter, spec.center_jitter);
        std::uniform_real_distribution<double> scale(1.0 - spec.radius_jitter, 1.0 + spec.radius_jitter);
        for (int a = 0; a < 3; ++a) {
            tumor_center[a] += shift(rng);
            const double f = scale(rng);
            complete[a] *= f;
            core[a] *= f;
            enhancing[a] *= f;
        }
    }

    Phantom ph;
    ph.labels = LabelVolume(d, 1, std::uint8_t{0});
    std::vector<bool> brain(d.voxels(), false);
    std::array<std::size_t, kNumClasses> counts{};
    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x) {
                const std::array<double, 3> p{static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
                const std::size_t v = (z * d.y + y) * d.x + x;
                const bool in_brain = inside(p, center, spec.brain);
                std::uint8_t label = 0;
                if (inside(p, tumor_center, enhancing))
                    label = 4;
                else if (inside(p, tumor_center, core))
                    label = p[0] < tumor_center[0] ? 1 : 3;
                else if (inside(p, tumor_center, complete))
                    label = 2;
                if (label != 0 && !in_brain)
                    fail(ErrorCode::InfeasibleSpec, "tumor extends outside the brain");
                brain[v] = in_brain;
                ph.labels.data()[v] = label;
                counts[label] += in_brain;
            }
    for (std::size_t c = 0; c < kNumClasses; ++c)
        if (counts[c] == 0)
            fail(ErrorCode::InfeasibleSpec, "class " + std::to_string(c) + " is empty at " + to_string(d));

    ph.image = IntensityVolume(d, kNumModalities, 0.0f);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t m = 0; m < kNumModalities; ++m) {
        auto out = ph.image.channel(m);
        for (std::size_t v = 0; v < d.voxels(); ++v) {
            if (!brain[v])
                continue;
            const double value = kClassMeans[ph.labels.data()[v]][m] + spec.noise_stddev * noise(rng);
            out[v] = static_cast<float>(std::max(value, kMinBrainIntensity));
        }
    }

    // Error pools: enhancing, core (1 and 3), edema.
    std::array<std::vector<std::size_t>, 3> pools;
    for (std::size_t v = 0; v < d.voxels(); ++v) {
        const std::uint8_t l = ph.labels.data()[v];
        if (l == 4)
            pools[0].push_back(v);
        else if (l == 1 || l == 3)
            pools[1].push_back(v);
        else if (l == 2)
            pools[2].push_back(v);
    }
    auto share = [](std::size_t n, std::size_t pool) { return n / 3 + (pool < n % 3 ? 1 : 0); };
    for (std::size_t pool = 0; pool < 3; ++pool) {
        std::size_t need = 0;
        for (std::size_t view = 0; view < 3; ++view) {
            const std::size_t n = share(spec.errors[view], pool);
            if (n > pools[pool].size())
                fail(ErrorCode::InfeasibleSpec, "error set of " + std::to_string(spec.errors[view]) +
                                                    " voxels does not fit in the tumor");
            need += n;
        }
        if (spec.disjoint && need > pools[pool].size())
            fail(ErrorCode::InfeasibleSpec, "disjoint error sets need " + std::to_string(need) +
                                                " voxels in a pool of " + std::to_string(pools[pool].size()));
    }

    const ProbVolume truth = one_hot(ph.labels);
    for (std::size_t view = 0; view < 3; ++view)
        ph.views[view] = truth;
    for (std::size_t pool = 0; pool < 3; ++pool) {
        std::vector<std::size_t>& candidates = pools[pool];
        std::shuffle(candidates.begin(), candidates.end(), rng);
        std::size_t offset = 0;
        for (std::size_t view = 0; view < 3; ++view) {
            const std::size_t n = share(spec.errors[view], pool);
            if (!spec.disjoint) {
                std::shuffle(candidates.begin(), candidates.end(), rng);
                offset = 0;
            }
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t v = candidates[offset + i];
                const std::uint8_t wrong = wrong_class(ph.labels.data()[v], rng);
                ProbVolume& p = ph.views[view];
                for (std::size_t c = 0; c < kNumClasses; ++c)
                    p.channel(c)[v] = c == wrong ? 1.0 : 0.0;
                ph.error_voxels[view].push_back(v);
            }
            offset += n;
        }
    }
    for (auto& e : ph.error_voxels)
        std::sort(e.begin(), e.end());
    return ph;
}

std::vector<Sample> make_phantom_dataset(std::size_t count, const Dims& dims, std::uint64_t seed)
{
    std::vector<Sample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        PhantomSpec spec = PhantomSpec::for_dims(dims);
        spec.seed = mix(seed * 1315423911ull + i);
        spec.center_jitter = 0.06 * static_cast<double>(std::min({dims.z, dims.y, dims.x}));
        spec.radius_jitter = 0.15;
        Phantom ph = generate_phantom(spec);
        char id[32];
        std::snprintf(id, sizeof id, "phantom_%03zu", i);
        out.push_back({id, zscore_normalize(ph.image), std::move(ph.labels)});
    }
    return out;
}

} // namespace mvfuse
