#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mvfuse/arch.hpp"
#include "mvfuse/loss.hpp"
#include "mvfuse/phantom.hpp"
#include "mvfuse/segmenter.hpp"
#include "mvfuse/step_plan.hpp"
#include "mvfuse/train.hpp"

using namespace mvfuse;

namespace {

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

struct Hwc {
    std::size_t h, w, c;
};

void check_stages(const ShapeReport& r, const std::vector<Hwc>& expected)
{
    REQUIRE(r.stages.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CAPTURE(i);
        CHECK(r.stages[i].height == expected[i].h);
        CHECK(r.stages[i].width == expected[i].w);
        CHECK(r.stages[i].channels == expected[i].c);
    }
}

void check_plan_covers(const StepPlan& plan, const Dims& d)
{
    for (ViewAxis view : kAllViews) {
        const auto& ranges = plan.for_view(view);
        CHECK(ranges.size() == plan.steps());
        std::size_t next = 0;
        for (const SliceRange& r : ranges) {
            CHECK(r.first == next);
            CHECK(r.count >= 1);
            next += r.count;
        }
        CHECK(next == slice_count(d, view));
    }
}

Slice<float> random_slice(std::size_t h, std::size_t w, std::size_t channels, std::mt19937_64& rng)
{
    std::normal_distribution<float> n(0.0f, 1.0f);
    Slice<float> s{0, h, w, channels, std::vector<float>(h * w * channels)};
    for (float& v : s.data)
        v = n(rng);
    return s;
}

} // namespace

TEST_CASE("downsampling shapes for a 240 x 240 input")
{
    const ShapeReport r = shape_check(ArchSpec::downsampling(), 240, 240);
    check_stages(r, {{120, 120, 64}, {60, 60, 128}, {30, 30, 256}, {15, 15, 256}});
    REQUIRE_FALSE(r.layers.empty());
    CHECK(r.layers.front().channels == 32);
    CHECK(r.layers.front().height == 120);
    for (const LayerShape& head : r.heads) {
        CHECK(head.height == 240);
        CHECK(head.width == 240);
        CHECK(head.channels == kNumClasses);
    }
}

TEST_CASE("downsampling shapes for a 16 x 16 input")
{
    check_stages(shape_check(ArchSpec::downsampling(), 16, 16),
                 {{8, 8, 64}, {4, 4, 128}, {2, 2, 256}, {1, 1, 256}});
}

TEST_CASE("inputs not divisible by 16 are rejected")
{
    check_error(ErrorCode::IndivisibleInput, [] { (void)shape_check(ArchSpec::downsampling(), 15, 240); });
}

TEST_CASE("step plan for the training volume size")
{
    const Dims d{160, 240, 240};
    const StepPlan plan = build_step_plan(d, BatchSizes{10, 16, 16, 20});
    CHECK(plan.steps() == 15);
    CHECK(plan.for_view(ViewAxis::Axial).back() == SliceRange{140, 20});
    for (std::size_t i = 0; i + 1 < 15; ++i)
        CHECK(plan.for_view(ViewAxis::Axial)[i].count == 10);
    check_plan_covers(plan, d);
}

TEST_CASE("step plan small cases")
{
    const StepPlan equal = build_step_plan({12, 12, 12}, BatchSizes{4, 4, 4, 0});
    CHECK(equal.steps() == 3);
    for (ViewAxis v : kAllViews)
        for (const SliceRange& r : equal.for_view(v))
            CHECK(r.count == 4);

    // Four steps of coronal and sagittal batches of 8 leave the axial view 3 x 4 + 20.
    const StepPlan cube = build_step_plan({32, 32, 32}, BatchSizes{4, 8, 8, 0});
    CHECK(cube.steps() == 4);
    CHECK(cube.for_view(ViewAxis::Axial).back() == SliceRange{12, 20});
    check_plan_covers(cube, {32, 32, 32});
}

TEST_CASE("step plans cover every slice on randomized extents")
{
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> steps(1, 6), batch(1, 5), extra(0, 3);
    int built = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = steps(rng);
        const std::size_t bc = batch(rng), bs = batch(rng), ba = batch(rng);
        const Dims d{ba * (n - 1) + ba + extra(rng), bc * n, bs * n};
        const StepPlan plan = build_step_plan(d, BatchSizes{ba, bc, bs, 0});
        CHECK(plan.steps() == n);
        check_plan_covers(plan, d);
        ++built;
    }
    CHECK(built == 200);
}

TEST_CASE("unalignable batches are rejected")
{
    check_error(ErrorCode::UnalignableBatches, [] { (void)build_step_plan({32, 32, 24}, BatchSizes{4, 8, 8, 0}); });
    check_error(ErrorCode::UnalignableBatches, [] { (void)build_step_plan({2, 32, 32}, BatchSizes{4, 8, 8, 0}); });
    check_error(ErrorCode::UnalignableBatches,
                [] { (void)build_step_plan({160, 240, 240}, BatchSizes{10, 16, 16, 30}); });
}

TEST_CASE("segmenter parameter count and zero model")
{
    ToySegmenter m(3, 4, 5);
    CHECK(m.parameter_count() == 3 * 3 * 4 * 5 + 5);
    std::mt19937_64 rng(1);
    SliceStack<float> in{ViewAxis::Axial, {1, 4, 5}, 4, {random_slice(4, 5, 4, rng)}};
    const SliceStack<double> out = m.forward(in);
    for (double p : out.slices[0].data)
        CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
    check_error(ErrorCode::InvalidConfig, [] { ToySegmenter(2, 4, 5); });
}

TEST_CASE("bias-only model prefers class 0")
{
    ToySegmenter m(3, 4, 5);
    m.bias(0) = 10.0;
    std::mt19937_64 rng(2);
    SliceStack<float> in{ViewAxis::Axial, {1, 3, 3}, 4, {random_slice(3, 3, 4, rng)}};
    const Slice<double> p = m.forward(in).slices[0];
    for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t w = 0; w < 3; ++w)
            CHECK(p.at(0, h, w) > 0.99);
}

TEST_CASE("random models output valid distributions")
{
    std::mt19937_64 rng(3);
    const ToySegmenter m = ToySegmenter::random(3, 4, 5, 9, 3.0);
    SliceStack<float> in{ViewAxis::Coronal, {6, 2, 7}, 4, {}};
    for (std::size_t i = 0; i < 2; ++i) {
        in.slices.push_back(random_slice(6, 7, 4, rng));
        in.slices.back().index = i;
    }
    const SliceStack<double> out = m.forward(in);
    for (const Slice<double>& s : out.slices)
        for (std::size_t h = 0; h < s.height; ++h)
            for (std::size_t w = 0; w < s.width; ++w) {
                double sum = 0.0;
                for (std::size_t c = 0; c < 5; ++c)
                    sum += s.at(c, h, w);
                CHECK(std::abs(sum - 1.0) <= 1e-9);
            }
}

TEST_CASE("segmenter logits match a direct patch oracle")
{
    std::mt19937_64 rng(4);
    const ToySegmenter m = ToySegmenter::random(3, 2, 3, 5, 1.0);
    ToySegmenter mm = m;
    for (std::size_t c = 0; c < 3; ++c)
        mm.bias(c) = 0.1 * static_cast<double>(c);
    const Slice<float> s = random_slice(4, 5, 2, rng);
    const Slice<double> z = mm.logits(s);
    for (std::size_t c = 0; c < 3; ++c)
        for (int h = 0; h < 4; ++h)
            for (int w = 0; w < 5; ++w) {
                double acc = mm.bias(c);
                for (std::size_t mod = 0; mod < 2; ++mod)
                    for (int dy = 0; dy < 3; ++dy)
                        for (int dx = 0; dx < 3; ++dx) {
                            const int hh = h + dy - 1, ww = w + dx - 1;
                            if (hh < 0 || hh >= 4 || ww < 0 || ww >= 5)
                                continue;
                            acc += mm.weight(c, mod, dy, dx) * s.at(mod, hh, ww);
                        }
                CHECK(z.at(c, h, w) == doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("parameter gradients match finite differences")
{
    std::mt19937_64 rng(5);
    ToySegmenter m = ToySegmenter::random(3, 2, 3, 6, 0.5);
    const Slice<float> s = random_slice(3, 4, 2, rng);
    Slice<double> g{0, 3, 4, 3, std::vector<double>(36)};
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : g.data)
        v = n(rng);
    // f(theta) = <g, logits(theta)> is linear, so its gradient is exactly accumulate_gradient.
    auto f = [&](std::span<const double> theta) {
        ToySegmenter t = m;
        std::copy(theta.begin(), theta.end(), t.parameters().begin());
        const Slice<double> z = t.logits(s);
        double acc = 0.0;
        for (std::size_t i = 0; i < z.data.size(); ++i)
            acc += g.data[i] * z.data[i];
        return acc;
    };
    std::vector<double> grad(m.parameter_count(), 0.0);
    m.accumulate_gradient(s, g, grad);
    const std::vector<double> theta(m.parameters().begin(), m.parameters().end());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        std::vector<double> up = theta, down = theta;
        up[i] += 1e-3;
        down[i] -= 1e-3;
        CHECK((f(up) - f(down)) / 2e-3 == doctest::Approx(grad[i]).epsilon(1e-8));
    }
}

TEST_CASE("one small gradient step decreases a single-voxel loss")
{
    std::mt19937_64 rng(6);
    ToySegmenter m = ToySegmenter::random(1, 4, 5, 7, 0.3);
    const Slice<float> s = random_slice(1, 1, 4, rng);
    const LabelVolume label({1, 1, 1}, 1, std::vector<std::uint8_t>{2});
    const ProbVolume y = one_hot(label);
    const ClassWeights w{std::vector<double>(5, 1.0)};
    auto loss_and_grad = [&](const ToySegmenter& model, std::vector<double>* grad) {
        const Slice<double> z = model.logits(s);
        const std::vector<StageOutputs> logits{{ProbVolume({1, 1, 1}, 5, z.data)}};
        const LossBundle b = grad_logits(WeightedAveraging{FusionWeights({1.0})}, logits, y, w,
                                         LossConfig{0.0, 0.0, 3}, 1);
        if (grad) {
            const ProbVolume& gz = b.grad_logits[0][0];
            Slice<double> gs{0, 1, 1, 5, std::vector<double>(gz.data().begin(), gz.data().end())};
            model.accumulate_gradient(s, gs, *grad);
        }
        return b.total;
    };
    std::vector<double> grad(m.parameter_count(), 0.0);
    const double before = loss_and_grad(m, &grad);
    for (std::size_t i = 0; i < grad.size(); ++i)
        m.parameters()[i] -= 1e-2 * grad[i];
    CHECK(loss_and_grad(m, nullptr) < before);
}

TEST_CASE("learning rate halves every two epochs")
{
    TrainConfig cfg;
    CHECK(learning_rate(cfg, 1) == 1e-4);
    CHECK(learning_rate(cfg, 2) == 1e-4);
    CHECK(learning_rate(cfg, 3) == 1e-4 / 2);
    CHECK(learning_rate(cfg, 5) == doctest::Approx(1e-4 / 4).epsilon(1e-15));
}

TEST_CASE("training configuration defaults and validation")
{
    TrainConfig cfg;
    CHECK(cfg.epochs == 35);
    CHECK(cfg.dropout == 0.2);
    CHECK(cfg.batches.axial == 10);
    CHECK(cfg.batches.coronal == 16);
    CHECK(cfg.batches.sagittal == 16);
    CHECK_NOTHROW(cfg.validate());
    cfg.lr0 = 0.0;
    check_error(ErrorCode::InvalidConfig, [&] { cfg.validate(); });
    cfg.lr0 = 1e-4;
    cfg.epochs = 0;
    check_error(ErrorCode::InvalidConfig, [&] { cfg.validate(); });
}

TEST_CASE("without fusion terms joint training equals independent training")
{
    const std::vector<Sample> data = make_phantom_dataset(3, {16, 16, 16}, 4);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.lr0 = 0.05;
    cfg.batches = BatchSizes{4, 4, 4, 0};
    cfg.loss.alpha = 0.0;
    cfg.loss.beta = 0.0;
    cfg.loss.engage_epoch = 1;
    const std::span<const Sample> train(data.data(), 2);
    const std::span<const Sample> val(data.data() + 2, 1);
    const TrainResult joint = train_multiview(train, val, cfg);
    for (ViewAxis view : kAllViews) {
        CAPTURE(to_string(view));
        const ToySegmenter single = train_single_view(train, view, cfg);
        CHECK(single == joint.models[view_index(view)]);
        CHECK_FALSE(single == initial_model(cfg, view));
    }
}

TEST_CASE("a short multi-view run records finite history")
{
    const std::vector<Sample> data = make_phantom_dataset(3, {16, 16, 16}, 5);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.lr0 = 0.05;
    cfg.batches = BatchSizes{4, 4, 4, 0};
    const TrainResult r = train_multiview(std::span<const Sample>(data.data(), 2),
                                          std::span<const Sample>(data.data() + 2, 1), cfg);
    REQUIRE(r.history.size() == 3);
    CHECK_FALSE(r.history[1].engaged);
    CHECK(r.history[2].engaged);
    CHECK(r.history[0].total == r.history[0].segmentation);
    for (const EpochRecord& e : r.history) {
        CHECK(std::isfinite(e.total));
        CHECK(e.lr == learning_rate(cfg, e.epoch));
        CHECK(e.objective ==
              doctest::Approx(e.segmentation + cfg.loss.alpha * e.transition + cfg.loss.beta * e.decision));
        CHECK(e.fused_dice >= 0.0);
        CHECK(e.fused_dice <= 1.0);
    }
}

TEST_CASE("checkpoints round-trip exactly")
{
    const auto dir = std::filesystem::temp_directory_path() / "mvfuse_test_model";
    std::filesystem::create_directories(dir);
    const ToySegmenter m = ToySegmenter::random(3, 4, 5, 11, 0.7);
    save_checkpoint(dir / "m.ckpt", m);
    CHECK(load_checkpoint(dir / "m.ckpt") == m);
    {
        std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
        bad << "NOPE0000000000000000";
    }
    check_error(ErrorCode::BadMagic, [&] { (void)load_checkpoint(dir / "bad.ckpt"); });
    std::filesystem::remove_all(dir);
}
