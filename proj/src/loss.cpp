#include "mvfuse/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mvfuse {

namespace {

void check_pair(const ProbVolume& a, const ProbVolume& b, const char* what)
{
    if (a.dims() != b.dims() || a.channels() != b.channels())
        fail(ErrorCode::DimMismatch, std::string(what) + ": " + to_string(a.dims()) + "x" +
                                         std::to_string(a.channels()) + " vs " + to_string(b.dims()) +
                                         "x" + std::to_string(b.channels()));
}

void check_weights(const ProbVolume& field, const ClassWeights& w)
{
    if (w.size() != field.channels())
        fail(ErrorCode::DimMismatch, std::to_string(w.size()) + " class weights for " +
                                         std::to_string(field.channels()) + " classes");
}

ClassWeights weights_from_counts(const std::vector<double>& counts, double total, double epsilon)
{
    ClassWeights w;
    w.epsilon = epsilon;
    w.omega.reserve(counts.size());
    for (double n : counts)
        w.omega.push_back((total - n) / std::max(n, epsilon * total));
    return w;
}

struct Views {
    std::size_t k = 0;
    Dims dims{};
    std::size_t classes = 0;
};

Views check_stage_lists(std::span<const StageOutputs> per_view, const ProbVolume& y)
{
    if (per_view.empty())
        fail(ErrorCode::EmptyStageList, "no views given");
    for (std::size_t i = 0; i < per_view.size(); ++i) {
        if (per_view[i].empty())
            fail(ErrorCode::EmptyStageList, "view " + std::to_string(i) + " has no stage outputs");
        for (const ProbVolume& s : per_view[i])
            check_pair(s, y, "stage output vs ground truth");
    }
    return {per_view.size(), y.dims(), y.channels()};
}

// The multi-view terms need a fused distribution; a lone view cannot provide one.
bool fusion_terms_active(const LossConfig& cfg, int epoch)
{
    return cfg.engaged(epoch) && (cfg.alpha != 0.0 || cfg.beta != 0.0);
}

// Shared value path: `fused` drives the decision term, `target` the transition term.
LossBundle evaluate(std::span<const StageOutputs> probs, const ProbVolume* fused, const ProbVolume* target,
                    const ProbVolume& y, const ClassWeights& w, const LossConfig& cfg, int epoch)
{
    LossBundle b;
    b.engaged = cfg.engaged(epoch);
    b.view_segmentation.resize(probs.size(), 0.0);
    b.view_transition.resize(probs.size(), 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        b.view_segmentation[i] = segmentation_loss(probs[i], y, w);
        b.segmentation += b.view_segmentation[i];
        if (target != nullptr) {
            b.view_transition[i] = transition_loss(*target, probs[i].back(), w);
            b.transition += b.view_transition[i];
        }
    }
    if (fused != nullptr)
        b.decision = decision_loss(*fused, y, w);
    b.total = b.segmentation;
    if (b.engaged)
        b.total += cfg.alpha * b.transition + cfg.beta * b.decision;
    return b;
}

std::vector<StageOutputs> softmax_all(std::span<const StageOutputs> logits)
{
    std::vector<StageOutputs> probs(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i].reserve(logits[i].size());
        for (const ProbVolume& z : logits[i])
            probs[i].push_back(softmax(z));
    }
    return probs;
}

std::vector<ProbVolume> final_outputs(const std::vector<StageOutputs>& probs)
{
    std::vector<ProbVolume> out;
    out.reserve(probs.size());
    for (const StageOutputs& s : probs)
        out.push_back(s.back());
    return out;
}

// Adds d/dz of -(scale/T) sum_k omega_k t_k log max(p_k, clamp) to `grad`, where p = softmax(z).
// Terms whose probability sits below the clamp are constant and drop out.
void add_softmax_ce_grad(const ProbVolume& target, const ProbVolume& p, const ClassWeights& w,
                         double scale, ProbVolume& grad)
{
    const std::size_t n = p.voxels();
    const std::size_t classes = p.channels();
    const double inv_t = scale / static_cast<double>(n);
    auto pd = p.data();
    auto td = target.data();
    auto gd = grad.data();
    for (std::size_t v = 0; v < n; ++v) {
        double mass = 0.0;
        for (std::size_t k = 0; k < classes; ++k)
            if (pd[k * n + v] >= kLogClamp)
                mass += w.omega[k] * td[k * n + v];
        for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t e = c * n + v;
            const double own = pd[e] >= kLogClamp ? w.omega[c] * td[e] : 0.0;
            gd[e] += inv_t * (pd[e] * mass - own);
        }
    }
}

} // namespace

void LossConfig::validate() const
{
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        fail(ErrorCode::InvalidConfig, "alpha must be finite and >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta))
        fail(ErrorCode::InvalidConfig, "beta must be finite and >= 0");
    if (engage_epoch < 1)
        fail(ErrorCode::InvalidConfig, "engage_epoch must be >= 1");
}

ClassWeights class_weights(const LabelVolume& y, std::size_t n_classes, double epsilon)
{
    if (y.voxels() == 0)
        fail(ErrorCode::DimMismatch, "class weights need at least one voxel");
    validate_labels(y, n_classes);
    std::vector<double> counts(n_classes, 0.0);
    for (std::uint8_t l : y.data())
        counts[l] += 1.0;
    return weights_from_counts(counts, static_cast<double>(y.voxels()), epsilon);
}

ClassWeights class_weights(const ProbVolume& field, double epsilon)
{
    if (field.voxels() == 0)
        fail(ErrorCode::DimMismatch, "class weights need at least one voxel");
    std::vector<double> counts(field.channels(), 0.0);
    for (std::size_t k = 0; k < field.channels(); ++k)
        for (double v : field.channel(k))
            counts[k] += v;
    return weights_from_counts(counts, static_cast<double>(field.voxels()), epsilon);
}

ProbVolume one_hot(const LabelVolume& labels, std::size_t n_classes)
{
    validate_labels(labels, n_classes);
    ProbVolume out(labels.dims(), n_classes, 0.0);
    const std::size_t n = labels.voxels();
    auto src = labels.data();
    auto dst = out.data();
    for (std::size_t v = 0; v < n; ++v)
        dst[src[v] * n + v] = 1.0;
    return out;
}

double weighted_cross_entropy(const ProbVolume& target, const ProbVolume& pred, const ClassWeights& w)
{
    check_pair(target, pred, "cross-entropy");
    check_weights(pred, w);
    const std::size_t n = pred.voxels();
    auto pd = pred.data();
    auto td = target.data();
    double sum = 0.0;
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t k = 0; k < pred.channels(); ++k) {
            const std::size_t e = k * n + v;
            if (td[e] != 0.0)
                sum += w.omega[k] * td[e] * std::log(std::max(pd[e], kLogClamp));
        }
    return -sum / static_cast<double>(n);
}

double wce(const ProbVolume& pred, const ProbVolume& y, const ClassWeights& w)
{
    return weighted_cross_entropy(y, pred, w);
}

double segmentation_loss(std::span<const ProbVolume> stage_outputs, const ProbVolume& y, const ClassWeights& w)
{
    if (stage_outputs.empty())
        fail(ErrorCode::EmptyStageList, "segmentation loss needs at least one stage output");
    double sum = 0.0;
    for (const ProbVolume& s : stage_outputs)
        sum += wce(s, y, w);
    return sum;
}

double transition_loss(const ProbVolume& fused, const ProbVolume& view_pred, const ClassWeights& w)
{
    return weighted_cross_entropy(fused, view_pred, w);
}

double decision_loss(const ProbVolume& fused, const ProbVolume& y, const ClassWeights& w)
{
    return weighted_cross_entropy(y, fused, w);
}

LossBundle multi_view_fusion_loss(std::span<const StageOutputs> stages_per_view, const ProbVolume& fused,
                                  const ProbVolume& y, const ClassWeights& w, const LossConfig& cfg, int epoch)
{
    cfg.validate();
    if (epoch < 1)
        fail(ErrorCode::InvalidConfig, "epoch must be >= 1");
    check_stage_lists(stages_per_view, y);
    check_pair(fused, y, "fused vs ground truth");
    return evaluate(stages_per_view, &fused, &fused, y, w, cfg, epoch);
}

ProbVolume softmax(const ProbVolume& logits)
{
    ProbVolume out(logits.dims(), logits.channels(), 0.0);
    const std::size_t n = logits.voxels();
    const std::size_t classes = logits.channels();
    auto z = logits.data();
    auto p = out.data();
    for (std::size_t v = 0; v < n; ++v) {
        double top = z[v];
        for (std::size_t c = 1; c < classes; ++c)
            top = std::max(top, z[c * n + v]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            const double e = std::exp(z[c * n + v] - top);
            p[c * n + v] = e;
            sum += e;
        }
        for (std::size_t c = 0; c < classes; ++c)
            p[c * n + v] /= sum;
    }
    return out;
}

double objective_value(const FusionMethod& method, std::span<const StageOutputs> logits_per_view,
                       const ProbVolume& y, const ClassWeights& w, const LossConfig& cfg, int epoch,
                       const ProbVolume& transition_target)
{
    cfg.validate();
    const Views shape = check_stage_lists(logits_per_view, y);
    check_pair(transition_target, y, "transition target vs ground truth");
    const std::vector<StageOutputs> probs = softmax_all(logits_per_view);
    if (shape.k < 2) {
        if (fusion_terms_active(cfg, epoch))
            fail(ErrorCode::TooFewViews, "transition and decision terms need at least 2 views");
        return evaluate(probs, nullptr, nullptr, y, w, cfg, epoch).total;
    }
    const std::vector<ProbVolume> finals = final_outputs(probs);
    const ProbVolume fused = fused_distribution(method, finals);
    return evaluate(probs, &fused, &transition_target, y, w, cfg, epoch).total;
}

LossBundle grad_logits(const FusionMethod& method, std::span<const StageOutputs> logits_per_view,
                       const ProbVolume& y, const ClassWeights& w, const LossConfig& cfg, int epoch)
{
    cfg.validate();
    if (epoch < 1)
        fail(ErrorCode::InvalidConfig, "epoch must be >= 1");
    const Views shape = check_stage_lists(logits_per_view, y);
    check_weights(y, w);
    const std::vector<StageOutputs> probs = softmax_all(logits_per_view);

    LossBundle b;
    ProbVolume fused;
    if (shape.k >= 2) {
        fused = fused_distribution(method, final_outputs(probs));
        b = evaluate(probs, &fused, &fused, y, w, cfg, epoch);
    } else {
        if (fusion_terms_active(cfg, epoch))
            fail(ErrorCode::TooFewViews, "transition and decision terms need at least 2 views");
        b = evaluate(probs, nullptr, nullptr, y, w, cfg, epoch);
    }

    const double alpha = b.engaged ? cfg.alpha : 0.0;
    const double beta = b.engaged ? cfg.beta : 0.0;

    b.grad_logits.resize(shape.k);
    for (std::size_t i = 0; i < shape.k; ++i) {
        const StageOutputs& stages = probs[i];
        for (std::size_t s = 0; s < stages.size(); ++s) {
            ProbVolume g(shape.dims, shape.classes, 0.0);
            add_softmax_ce_grad(y, stages[s], w, 1.0, g);
            if (s + 1 == stages.size() && alpha != 0.0)
                add_softmax_ce_grad(fused, stages[s], w, alpha, g);
            b.grad_logits[i].push_back(std::move(g));
        }
    }

    // Decision term through the weighted average: dO_f/dO_i = omega_i, then the softmax Jacobian.
    const auto* wa = std::get_if<WeightedAveraging>(&method);
    if (beta != 0.0 && wa != nullptr) {
        const std::vector<double> view_w = wa->weights.effective();
        const std::size_t n = y.voxels();
        const double inv_t = 1.0 / static_cast<double>(n);
        auto fd = fused.data();
        auto yd = y.data();
        std::vector<double> dfused(shape.classes);
        std::vector<double> g(shape.classes);
        for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t k = 0; k < shape.classes; ++k) {
                const std::size_t e = k * n + v;
                dfused[k] = fd[e] >= kLogClamp ? -inv_t * w.omega[k] * yd[e] / fd[e] : 0.0;
            }
            for (std::size_t i = 0; i < shape.k; ++i) {
                auto p = probs[i].back().data();
                auto gz = b.grad_logits[i].back().data();
                double dot = 0.0;
                for (std::size_t k = 0; k < shape.classes; ++k) {
                    g[k] = beta * view_w[i] * dfused[k];
                    dot += g[k] * p[k * n + v];
                }
                for (std::size_t c = 0; c < shape.classes; ++c)
                    gz[c * n + v] += p[c * n + v] * (g[c] - dot);
            }
        }
    }

    for (const auto& stages : b.grad_logits)
        for (const ProbVolume& g : stages)
            for (double v : g.data())
                if (!std::isfinite(v))
                    fail(ErrorCode::NonFiniteGradient, "gradient contains a non-finite entry");
    return b;
}

} // namespace mvfuse
