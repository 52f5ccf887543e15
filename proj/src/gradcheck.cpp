#include "mvfuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mvfuse {

double finite_diff_check(const std::function<double(std::span<const double>)>& loss_fn,
                         std::span<const double> x, std::span<const double> analytic, double h)
{
    if (!(h > 0.0) || !std::isfinite(h))
        fail(ErrorCode::InvalidStep, "finite-difference step must be finite and positive");
    if (analytic.size() != x.size())
        fail(ErrorCode::DimMismatch, "analytic gradient has " + std::to_string(analytic.size()) +
                                         " entries for " + std::to_string(x.size()) + " parameters");

    std::vector<double> probe(x.begin(), x.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        auto at = [&](double offset) {
            probe[i] = saved + offset;
            return loss_fn(probe);
        };
        const double near = at(h) - at(-h);
        const double far = at(2.0 * h) - at(-2.0 * h);
        probe[i] = saved;

        const double numeric = (8.0 * near - far) / (12.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kRelativeErrorFloor});
        const double err = std::abs(analytic[i] - numeric) / denom;
        if (!std::isfinite(err))
            return std::numeric_limits<double>::infinity();
        worst = std::max(worst, err);
    }
    return worst;
}

GradCheckInstance make_gradcheck_instance(std::uint64_t seed, const FusionMethod& method, Dims dims,
                                          std::size_t stages, std::size_t n_classes)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::size_t k = 3;
    if (const auto* wa = std::get_if<WeightedAveraging>(&method))
        k = wa->weights.size();

    GradCheckInstance inst{method, {}, {}, {}, LossConfig{0.5, 1.0, 1}, 1};

    const std::size_t n = dims.voxels();
    std::vector<std::uint8_t> labels(n);
    for (std::size_t v = 0; v < n; ++v)
        labels[v] = static_cast<std::uint8_t>(v < n_classes ? v : rng() % n_classes);
    std::shuffle(labels.begin(), labels.end(), rng);
    const LabelVolume gt(dims, 1, std::move(labels));
    inst.y = one_hot(gt, n_classes);
    inst.weights = class_weights(gt, n_classes);

    inst.logits.resize(k);
    for (StageOutputs& view : inst.logits)
        for (std::size_t s = 0; s < stages; ++s) {
            ProbVolume z(dims, n_classes, 0.0);
            for (double& v : z.data())
                v = normal(rng);
            view.push_back(std::move(z));
        }
    return inst;
}

std::vector<double> flatten(std::span<const StageOutputs> fields)
{
    std::vector<double> flat;
    for (const StageOutputs& view : fields)
        for (const ProbVolume& f : view)
            flat.insert(flat.end(), f.data().begin(), f.data().end());
    return flat;
}

std::vector<StageOutputs> unflatten(std::span<const double> flat, std::span<const StageOutputs> like)
{
    std::vector<StageOutputs> out(like.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < like.size(); ++i)
        for (const ProbVolume& f : like[i]) {
            if (offset + f.size() > flat.size())
                fail(ErrorCode::LengthMismatch, "flat parameter vector too short");
            std::vector<double> data(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                                     flat.begin() + static_cast<std::ptrdiff_t>(offset + f.size()));
            out[i].emplace_back(f.dims(), f.channels(), std::move(data));
            offset += f.size();
        }
    if (offset != flat.size())
        fail(ErrorCode::LengthMismatch, "flat parameter vector too long");
    return out;
}

double gradcheck_instance(const GradCheckInstance& inst, double h)
{
    const LossBundle bundle = grad_logits(inst.method, inst.logits, inst.y, inst.weights, inst.cfg, inst.epoch);

    // Freeze the transition target at the evaluation point, as grad_logits does.
    std::vector<ProbVolume> finals;
    for (const StageOutputs& view : inst.logits)
        finals.push_back(softmax(view.back()));
    const ProbVolume target = fused_distribution(inst.method, finals);

    const std::vector<double> x = flatten(inst.logits);
    const std::vector<double> analytic = flatten(bundle.grad_logits);
    auto loss_fn = [&](std::span<const double> flat) {
        const std::vector<StageOutputs> logits = unflatten(flat, inst.logits);
        return objective_value(inst.method, logits, inst.y, inst.weights, inst.cfg, inst.epoch, target);
    };
    return finite_diff_check(loss_fn, x, analytic, h);
}

} // namespace mvfuse
