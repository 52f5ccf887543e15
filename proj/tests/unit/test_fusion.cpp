#include <algorithm>
#include <array>
#include <random>

#include "doctest.h"
#include "mvfuse/fusion.hpp"

using namespace mvfuse;

namespace {

ProbVolume single_voxel(std::vector<double> dist)
{
    const std::size_t n = dist.size();
    return ProbVolume({1, 1, 1}, n, std::move(dist));
}

ProbVolume random_prob(Dims dims, std::mt19937_64& rng, std::size_t n_classes = kNumClasses)
{
    // Coarse values make argmax ties common, which exercises the tie-break.
    std::uniform_int_distribution<int> level(0, 4);
    ProbVolume p(dims, n_classes);
    for (std::size_t v = 0; v < dims.voxels(); ++v) {
        double sum = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c)
            sum += p.data()[c * dims.voxels() + v] = level(rng) + 0.1;
        for (std::size_t c = 0; c < n_classes; ++c)
            p.data()[c * dims.voxels() + v] /= sum;
    }
    return p;
}

std::vector<double> voxel_dist(const ProbVolume& p, std::size_t v)
{
    std::vector<double> d(p.channels());
    for (std::size_t c = 0; c < p.channels(); ++c)
        d[c] = p.data()[c * p.voxels() + v];
    return d;
}

std::size_t naive_argmax(const std::vector<double>& d)
{
    std::size_t best = 0;
    for (std::size_t c = 0; c < d.size(); ++c)
        if (d[c] > d[best])
            best = c;
    return best;
}

// Brute-force voting on one voxel, written from the decision rule directly.
std::uint8_t naive_vote(const std::vector<ProbVolume>& views, std::size_t v, std::size_t ref)
{
    std::vector<int> tally(views[0].channels(), 0);
    for (const ProbVolume& p : views)
        ++tally[naive_argmax(voxel_dist(p, v))];
    int top = 0;
    std::size_t top_class = 0;
    for (std::size_t c = 0; c < tally.size(); ++c)
        if (tally[c] > top) {
            top = tally[c];
            top_class = c;
        }
    if (top > 1)
        return static_cast<std::uint8_t>(top_class);
    return static_cast<std::uint8_t>(naive_argmax(voxel_dist(views[ref], v)));
}

template <typename F>
void check_error(ErrorCode code, F&& fn)
{
    try {
        fn();
        FAIL("expected " << to_string(code));
    } catch (const Error& e) {
        CHECK(e.code() == code);
    }
}

} // namespace

TEST_CASE("one-hot of the example distribution")
{
    CHECK(one_hot_argmax(std::vector<double>{0.1, 0.2, 0.2, 0.3, 0.2}) ==
          std::vector<std::uint8_t>{0, 0, 0, 1, 0});
    CHECK(one_hot_argmax(std::vector<double>{0.2, 0.2, 0.2, 0.2, 0.2}) ==
          std::vector<std::uint8_t>{1, 0, 0, 0, 0});
}

TEST_CASE("voting reproduces the worked example")
{
    // Voxel 1: votes 00010, 01000, 01000.
    const std::vector<ProbVolume> v1{single_voxel({0.1, 0.2, 0.2, 0.3, 0.2}),
                                     single_voxel({0.1, 0.4, 0.2, 0.1, 0.2}),
                                     single_voxel({0.1, 0.5, 0.1, 0.2, 0.1})};
    const VoteCountVolume counts = vote_counts(v1);
    CHECK(std::vector<std::uint8_t>(counts.counts.data().begin(), counts.counts.data().end()) ==
          std::vector<std::uint8_t>{0, 2, 0, 1, 0});
    CHECK(vote_fuse(v1, 0).data()[0] == 1);

    // Voxel 7: votes 01000, 00100, 00010 and the axial reference favours class 2.
    const std::vector<ProbVolume> v7{single_voxel({0.1, 0.25, 0.3, 0.2, 0.15}),
                                     single_voxel({0.1, 0.6, 0.1, 0.1, 0.1}),
                                     single_voxel({0.1, 0.1, 0.1, 0.6, 0.1})};
    const VoteCountVolume c7 = vote_counts(v7);
    CHECK(std::vector<std::uint8_t>(c7.counts.data().begin(), c7.counts.data().end()) ==
          std::vector<std::uint8_t>{0, 1, 1, 1, 0});
    CHECK(vote_fuse(v7, 0).data()[0] == 2);
    CHECK(vote_fuse(v7, 1).data()[0] == 1);
    CHECK(vote_fuse(v7, 2).data()[0] == 3);
}

TEST_CASE("unanimous tallies ignore the reference")
{
    VoteCountVolume counts{LabelVolume({1, 1, 1}, 5, std::vector<std::uint8_t>{3, 0, 0, 0, 0}), 3};
    CHECK(vote_decide(counts, single_voxel({0, 0, 0, 0, 1})).data()[0] == 0);
}

TEST_CASE("fused distribution for voting is the normalized tally")
{
    const std::vector<ProbVolume> v{single_voxel({0.1, 0.2, 0.2, 0.3, 0.2}),
                                    single_voxel({0.1, 0.4, 0.2, 0.1, 0.2}),
                                    single_voxel({0.1, 0.5, 0.1, 0.2, 0.1})};
    const ProbVolume f = fused_distribution(Voting{0}, v);
    const std::array<double, 5> expected{0.0, 2.0 / 3.0, 0.0, 1.0 / 3.0, 0.0};
    for (std::size_t c = 0; c < 5; ++c)
        CHECK(f.data()[c] == doctest::Approx(expected[c]).epsilon(1e-15));
}

TEST_CASE("weighted averaging gives 0.26 and class 1")
{
    const FusionWeights w({0.4, 0.3, 0.3});
    const std::vector<ProbVolume> fig{single_voxel({0.1, 0.2, 0.2, 0.3, 0.2}),
                                      single_voxel({0.1, 0.3, 0.2, 0.2, 0.2}),
                                      single_voxel({0.2, 0.3, 0.1, 0.2, 0.2})};
    const ProbVolume f = fused_distribution(WeightedAveraging{w}, fig);
    CHECK(std::abs(f.data()[1] - 0.26) <= 1e-12);
    CHECK(wa_fuse(fig, w).data()[0] == 1);
}

TEST_CASE("weighted average of identical views is the view")
{
    std::mt19937_64 rng(4);
    const ProbVolume p = random_prob({3, 3, 3}, rng);
    const std::vector<ProbVolume> v{p, p, p};
    const ProbVolume avg = weighted_average(v, FusionWeights({0.4, 0.3, 0.3}));
    for (std::size_t i = 0; i < p.size(); ++i)
        CHECK(avg.data()[i] == doctest::Approx(p.data()[i]).epsilon(1e-14));
}

TEST_CASE("two-view equal weights match the arithmetic mean")
{
    std::mt19937_64 rng(5);
    const std::vector<ProbVolume> v{random_prob({4, 4, 4}, rng), random_prob({4, 4, 4}, rng)};
    const ProbVolume avg = weighted_average(v, FusionWeights({0.5, 0.5}));
    for (std::size_t i = 0; i < avg.size(); ++i)
        CHECK(std::abs(avg.data()[i] - (v[0].data()[i] + v[1].data()[i]) / 2.0) <= 1e-12);
}

TEST_CASE("degenerate weights select one view")
{
    std::mt19937_64 rng(6);
    const std::vector<ProbVolume> v{random_prob({3, 3, 3}, rng), random_prob({3, 3, 3}, rng),
                                    random_prob({3, 3, 3}, rng)};
    CHECK(wa_fuse(v, FusionWeights({1.0, 0.0, 0.0})) == argmax_labels(v[0]));
}

TEST_CASE("weights not summing to one are renormalized")
{
    std::mt19937_64 rng(7);
    const std::vector<ProbVolume> v{random_prob({2, 3, 4}, rng), random_prob({2, 3, 4}, rng),
                                    random_prob({2, 3, 4}, rng)};
    const ProbVolume a = weighted_average(v, FusionWeights({4.0, 3.0, 3.0}));
    CHECK_NOTHROW(validate_distribution(a, 1e-9));
    CHECK(wa_fuse(v, FusionWeights({2.8, 2.1, 2.1})) == wa_fuse(v, FusionWeights({0.4, 0.3, 0.3})));
}

TEST_CASE("randomized volumes match the brute-force oracle for every reference")
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> extent(1, 6);
    std::uniform_real_distribution<double> weight(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Dims d{extent(rng), extent(rng), extent(rng)};
        std::vector<ProbVolume> views;
        for (int i = 0; i < 3; ++i)
            views.push_back(random_prob(d, rng));
        for (std::size_t ref = 0; ref < 3; ++ref) {
            const LabelVolume fused = vote_fuse(views, ref);
            for (std::size_t v = 0; v < d.voxels(); ++v)
                REQUIRE(fused.data()[v] == naive_vote(views, v, ref));
        }
        const std::vector<double> w{weight(rng) + 0.01, weight(rng), weight(rng)};
        const double sum = w[0] + w[1] + w[2];
        const LabelVolume wa = wa_fuse(views, FusionWeights(w));
        for (std::size_t v = 0; v < d.voxels(); ++v) {
            std::vector<double> acc(kNumClasses, 0.0);
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t c = 0; c < kNumClasses; ++c)
                    acc[c] += w[i] / sum * views[i].data()[c * d.voxels() + v];
            // Near-ties can resolve either way under rounding; skip them.
            std::vector<double> sorted = acc;
            std::sort(sorted.rbegin(), sorted.rend());
            if (sorted[0] - sorted[1] > 1e-12)
                REQUIRE(wa.data()[v] == naive_argmax(acc));
        }
    }
}

TEST_CASE("vote counts are permutation invariant and sum to k")
{
    std::mt19937_64 rng(8);
    std::vector<ProbVolume> views{random_prob({3, 4, 5}, rng), random_prob({3, 4, 5}, rng),
                                  random_prob({3, 4, 5}, rng)};
    const VoteCountVolume base = vote_counts(views);
    std::sort(views.begin(), views.end(), [](const ProbVolume& a, const ProbVolume& b) {
        return a.data()[0] < b.data()[0];
    });
    std::vector<std::size_t> perm{0, 1, 2};
    do {
        std::vector<ProbVolume> p{views[perm[0]], views[perm[1]], views[perm[2]]};
        CHECK(vote_counts(p).counts == base.counts);
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (std::size_t v = 0; v < base.counts.voxels(); ++v) {
        int sum = 0;
        for (std::size_t c = 0; c < base.n_classes(); ++c)
            sum += base.counts.data()[c * base.counts.voxels() + v];
        CHECK(sum == 3);
    }
}

TEST_CASE("identical views fuse to their argmax for every reference")
{
    std::mt19937_64 rng(9);
    const ProbVolume p = random_prob({4, 4, 4}, rng);
    const std::vector<ProbVolume> v{p, p, p};
    for (std::size_t r = 0; r < 3; ++r)
        CHECK(vote_fuse(v, r) == argmax_labels(p));
    const ProbVolume f = fused_distribution(Voting{1}, v);
    const LabelVolume labels = argmax_labels(p);
    for (std::size_t vox = 0; vox < p.voxels(); ++vox)
        for (std::size_t c = 0; c < kNumClasses; ++c)
            CHECK(f.data()[c * p.voxels() + vox] == (c == labels.data()[vox] ? 1.0 : 0.0));
}

TEST_CASE("a two-view majority decides regardless of reference")
{
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const Dims d{3, 3, 3};
        std::vector<ProbVolume> views{random_prob(d, rng), random_prob(d, rng), random_prob(d, rng)};
        const LabelVolume a = argmax_labels(views[0]);
        const LabelVolume b = argmax_labels(views[1]);
        const LabelVolume c = argmax_labels(views[2]);
        for (std::size_t r = 0; r < 3; ++r) {
            const LabelVolume f = vote_fuse(views, r);
            for (std::size_t v = 0; v < d.voxels(); ++v) {
                const auto x = a.data()[v], y = b.data()[v], z = c.data()[v];
                if (x == y || x == z)
                    CHECK(f.data()[v] == x);
                else if (y == z)
                    CHECK(f.data()[v] == y);
            }
        }
    }
}

TEST_CASE("weights summing to one give valid distributions")
{
    std::mt19937_64 rng(11);
    const std::vector<ProbVolume> v{random_prob({4, 4, 4}, rng), random_prob({4, 4, 4}, rng),
                                    random_prob({4, 4, 4}, rng)};
    CHECK_NOTHROW(validate_distribution(weighted_average(v, FusionWeights({0.4, 0.3, 0.3})), 1e-9));
}

TEST_CASE("fusion preconditions")
{
    std::mt19937_64 rng(12);
    const ProbVolume a = random_prob({2, 2, 2}, rng);
    const ProbVolume b = random_prob({2, 2, 3}, rng);
    check_error(ErrorCode::TooFewViews, [&] { (void)vote_fuse(std::vector<ProbVolume>{a, a}, 0); });
    check_error(ErrorCode::TooFewViews, [&] { validate_method(Voting{0}, 2); });
    check_error(ErrorCode::InvalidReference, [&] { (void)vote_fuse(std::vector<ProbVolume>{a, a, a}, 3); });
    check_error(ErrorCode::DimMismatch, [&] { (void)vote_counts(std::vector<ProbVolume>{a, a, b}); });
    check_error(ErrorCode::AllZeroWeights, [] { (void)FusionWeights({0.0, 0.0, 0.0}); });
    check_error(ErrorCode::InvalidWeights, [] { (void)FusionWeights({0.5, -0.1, 0.6}); });
    check_error(ErrorCode::DimMismatch,
                [&] { (void)weighted_average(std::vector<ProbVolume>{a, a, a}, FusionWeights({0.5, 0.5})); });
}
