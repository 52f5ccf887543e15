#include "mvfuse/train.hpp"

#include <cmath>

#include "mvfuse/metrics.hpp"

namespace mvfuse {

namespace {

struct Prepared {
    std::array<SliceStack<float>, 3> stacks;
    ProbVolume y;
    ClassWeights weights;
    StepPlan plan;
};

std::vector<Prepared> prepare(std::span<const Sample> samples, const TrainConfig& cfg)
{
    std::vector<Prepared> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) {
        if (s.image.dims() != s.labels.dims())
            fail(ErrorCode::DimMismatch, "sample " + s.id + ": image " + to_string(s.image.dims()) +
                                             " vs labels " + to_string(s.labels.dims()));
        validate_labels(s.labels);
        Prepared p;
        for (ViewAxis v : kAllViews)
            p.stacks[view_index(v)] = extract_slices(s.image, v);
        p.y = one_hot(s.labels);
        p.weights = class_weights(s.labels);
        p.plan = build_step_plan(s.image.dims(), cfg.batches);
        out.push_back(std::move(p));
    }
    return out;
}

std::uint64_t view_seed(std::uint64_t seed, ViewAxis view)
{
    return seed * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull * (view_index(view) + 1);
}

struct Accum {
    double segmentation = 0.0, transition = 0.0, decision = 0.0, total = 0.0, objective = 0.0;
    std::size_t steps = 0;
};

// One synchronized pass over every step of every training sample for the given views.
void run_epoch(std::span<const ViewAxis> views, std::span<ToySegmenter* const> models,
               const std::vector<Prepared>& data, const FusionMethod& method, const LossConfig& loss,
               ClassWeightSource source, int epoch, double lr, Accum& acc)
{
    const std::size_t k = views.size();
    const bool engaged = loss.engaged(epoch);
    std::vector<std::vector<double>> grads(k);

    for (const Prepared& p : data) {
        for (std::size_t step = 0; step < p.plan.steps(); ++step) {
            std::vector<ProbVolume> logits;
            logits.reserve(k);
            for (std::size_t i = 0; i < k; ++i)
                logits.push_back(assemble_volume(models[i]->logits(p.stacks[view_index(views[i])])));

            for (std::size_t i = 0; i < k; ++i)
                grads[i].assign(models[i]->parameter_count(), 0.0);

            for (std::size_t i = 0; i < k; ++i) {
                const SliceRange r = p.plan.for_view(views[i])[step];
                std::vector<StageOutputs> slabs(k);
                for (std::size_t j = 0; j < k; ++j)
                    slabs[j].push_back(crop_slab(logits[j], views[i], r.first, r.count));
                const ProbVolume y = crop_slab(p.y, views[i], r.first, r.count);
                // Prediction weights follow the view's own output on its batch.
                const ClassWeights w = source == ClassWeightSource::Prediction
                                           ? class_weights(softmax(slabs[i].front()))
                                           : p.weights;
                const LossBundle b = grad_logits(method, slabs, y, w, loss, epoch);
                if (!std::isfinite(b.total))
                    fail(ErrorCode::NonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch));

                const double seg = b.view_segmentation[i];
                const double trans = b.view_transition.empty() ? 0.0 : b.view_transition[i];
                acc.segmentation += seg;
                acc.transition += trans;
                acc.decision += b.decision;
                acc.total += seg + (engaged ? loss.alpha * trans + loss.beta * b.decision : 0.0);
                acc.objective += seg + loss.alpha * trans + loss.beta * b.decision;

                const SliceStack<double> g = extract_slices(b.grad_logits[i].front(), views[i]);
                const SliceStack<float>& input = p.stacks[view_index(views[i])];
                for (std::size_t s = 0; s < r.count; ++s)
                    models[i]->accumulate_gradient(input.slices[r.first + s], g.slices[s], grads[i]);
            }

            for (std::size_t i = 0; i < k; ++i) {
                auto params = models[i]->parameters();
                for (std::size_t e = 0; e < params.size(); ++e)
                    params[e] -= lr * grads[i][e];
            }
            ++acc.steps;
        }
    }
}

void finish(EpochRecord& rec, const Accum& acc)
{
    const double n = acc.steps == 0 ? 1.0 : static_cast<double>(acc.steps);
    rec.segmentation = acc.segmentation / n;
    rec.transition = acc.transition / n;
    rec.decision = acc.decision / n;
    rec.total = acc.total / n;
    rec.objective = acc.objective / n;
}

} // namespace

void TrainConfig::validate() const
{
    if (!(lr0 > 0.0) || !std::isfinite(lr0))
        fail(ErrorCode::InvalidConfig, "lr0 must be positive");
    if (halve_every < 1)
        fail(ErrorCode::InvalidConfig, "halve_every must be >= 1");
    if (epochs < 1)
        fail(ErrorCode::InvalidConfig, "epochs must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
        fail(ErrorCode::InvalidConfig, "dropout must lie in [0, 1)");
    if (patch == 0 || patch % 2 == 0)
        fail(ErrorCode::InvalidConfig, "patch must be odd");
    if (!(init_stddev >= 0.0) || !std::isfinite(init_stddev))
        fail(ErrorCode::InvalidConfig, "init_stddev must be non-negative");
    if (batches.axial == 0 || batches.coronal == 0 || batches.sagittal == 0)
        fail(ErrorCode::InvalidConfig, "batch sizes must be positive");
    loss.validate();
    validate_method(fusion, 3);
}

double learning_rate(const TrainConfig& cfg, int epoch)
{
    if (epoch < 1)
        fail(ErrorCode::InvalidConfig, "epoch must be >= 1");
    if (cfg.halve_every < 1)
        fail(ErrorCode::InvalidConfig, "halve_every must be >= 1");
    return cfg.lr0 * std::ldexp(1.0, -((epoch - 1) / cfg.halve_every));
}

ToySegmenter initial_model(const TrainConfig& cfg, ViewAxis view)
{
    return ToySegmenter::random(cfg.patch, kNumModalities, kNumClasses, view_seed(cfg.seed, view), cfg.init_stddev);
}

ProbVolume predict_view(const ToySegmenter& model, const IntensityVolume& image, ViewAxis view)
{
    return assemble_volume(model.forward(extract_slices(image, view)));
}

std::array<ProbVolume, 3> predict_views(const std::array<ToySegmenter, 3>& models, const IntensityVolume& image)
{
    std::array<ProbVolume, 3> out;
    for (ViewAxis v : kAllViews)
        out[view_index(v)] = predict_view(models[view_index(v)], image, v);
    return out;
}

TrainResult train_multiview(std::span<const Sample> train, std::span<const Sample> validation,
                            const TrainConfig& cfg)
{
    cfg.validate();
    const std::vector<Prepared> data = prepare(train, cfg);

    TrainResult result;
    for (ViewAxis v : kAllViews)
        result.models[view_index(v)] = initial_model(cfg, v);
    std::array<ToySegmenter*, 3> models{&result.models[0], &result.models[1], &result.models[2]};

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = learning_rate(cfg, epoch);
        rec.engaged = cfg.loss.engaged(epoch);
        Accum acc;
        run_epoch(kAllViews, models, data, cfg.fusion, cfg.loss, cfg.class_weight_source, epoch, rec.lr, acc);
        finish(rec, acc);

        for (const Sample& s : validation) {
            const std::array<ProbVolume, 3> probs = predict_views(result.models, s.image);
            for (std::size_t v = 0; v < 3; ++v)
                rec.view_dice[v] += evaluate(s.labels, argmax_labels(probs[v])).mean();
            rec.fused_dice += evaluate(s.labels, fuse_labels(cfg.fusion, probs)).mean();
        }
        if (!validation.empty()) {
            const double n = static_cast<double>(validation.size());
            for (double& d : rec.view_dice)
                d /= n;
            rec.fused_dice /= n;
        }
        result.history.push_back(rec);
    }
    return result;
}

ToySegmenter train_single_view(std::span<const Sample> train, ViewAxis view, const TrainConfig& cfg,
                               std::vector<EpochRecord>* history)
{
    cfg.validate();
    const std::vector<Prepared> data = prepare(train, cfg);
    LossConfig loss = cfg.loss;
    loss.alpha = 0.0;
    loss.beta = 0.0;

    ToySegmenter model = initial_model(cfg, view);
    const std::array<ViewAxis, 1> views{view};
    const std::array<ToySegmenter*, 1> models{&model};
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = learning_rate(cfg, epoch);
        Accum acc;
        run_epoch(views, models, data, cfg.fusion, loss, cfg.class_weight_source, epoch, rec.lr, acc);
        finish(rec, acc);
        if (history)
            history->push_back(rec);
    }
    return model;
}

} // namespace mvfuse
