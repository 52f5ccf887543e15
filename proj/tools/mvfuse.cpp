// Command-line driver: preprocessing, slicing, fusion, toy training, evaluation and checks.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mvfuse/arch.hpp"
#include "mvfuse/error.hpp"
#include "mvfuse/fusion.hpp"
#include "mvfuse/gradcheck.hpp"
#include "mvfuse/metrics.hpp"
#include "mvfuse/nifti.hpp"
#include "mvfuse/phantom.hpp"
#include "mvfuse/rawvol.hpp"
#include "mvfuse/run_config.hpp"
#include "mvfuse/segmenter.hpp"
#include "mvfuse/train.hpp"

namespace fs = std::filesystem;
using namespace mvfuse;

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

// Learning rate used by train-toy when neither --lr nor a config file sets one.
constexpr double kToyLearningRate = 0.05;

std::vector<std::size_t> parse_extents(const std::string& text, std::size_t want)
{
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != part.size() || v == 0)
            fail(ErrorCode::Usage, "bad extent '" + text + "'");
        out.push_back(v);
    }
    if (out.size() != want)
        fail(ErrorCode::Usage, "'" + text + "' needs " + std::to_string(want) + " extents separated by 'x'");
    return out;
}

Dims parse_dims(const std::string& text)
{
    const auto v = parse_extents(text, 3);
    return {v[0], v[1], v[2]};
}

ViewAxis view_arg(const std::string& name)
{
    const auto v = parse_view(name);
    if (!v)
        fail(ErrorCode::Usage, "unknown view '" + name + "' (axial, coronal or sagittal)");
    return *v;
}

bool is_rawvol(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoFailure, "cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    return in.gcount() == 4 && std::string(magic, 4) == "MVF1";
}

AnyVolume load_any(const fs::path& path)
{
    if (is_rawvol(path))
        return read_rawvol(path);
    auto v = read_nifti(path);
    if (auto* labels = std::get_if<LabelVolume>(&v))
        return std::move(*labels);
    return std::get<IntensityVolume>(std::move(v));
}

IntensityVolume load_intensity(const fs::path& path)
{
    if (is_rawvol(path))
        return read_rawvol_intensity(path);
    return read_nifti_intensity(path);
}

LabelVolume load_labels(const fs::path& path)
{
    if (!is_rawvol(path))
        return read_nifti_labels(path);
    AnyVolume any = read_rawvol(path);
    if (auto* labels = std::get_if<LabelVolume>(&any))
        return std::move(*labels);
    if (auto* prob = std::get_if<ProbVolume>(&any))
        return argmax_labels(*prob);
    fail(ErrorCode::UnsupportedDtype, path.string() + " holds intensities, not labels");
}

FusionMethod make_method(const std::string& name, const std::vector<double>& weights, const std::string& ref)
{
    if (name == "wa")
        return WeightedAveraging{FusionWeights(weights)};
    if (name == "voting")
        return Voting{view_index(view_arg(ref))};
    fail(ErrorCode::Usage, "method must be voting or wa, got '" + name + "'");
}

void write_report(const std::string& csv_path, const std::vector<ReportRow>& rows)
{
    if (csv_path.empty() || csv_path == "-") {
        write_csv(std::cout, rows);
        return;
    }
    std::ofstream out(csv_path);
    if (!out)
        fail(ErrorCode::IoFailure, "cannot open " + csv_path + " for writing");
    write_csv(out, rows);
}

// ---- normalize ----

struct NormalizeArgs {
    std::vector<std::string> inputs;
    std::string output;
    std::string pad;
    bool all_voxels = false;
};

int run_normalize(const NormalizeArgs& a)
{
    std::vector<IntensityVolume> parts;
    std::size_t channels = 0;
    for (const std::string& p : a.inputs) {
        parts.push_back(load_intensity(p));
        if (parts.back().dims() != parts.front().dims())
            fail(ErrorCode::DimMismatch, p + " has dims " + to_string(parts.back().dims()) + ", expected " +
                                             to_string(parts.front().dims()));
        channels += parts.back().channels();
    }
    std::vector<float> values;
    values.reserve(channels * parts.front().voxels());
    for (const IntensityVolume& v : parts)
        values.insert(values.end(), v.data().begin(), v.data().end());
    IntensityVolume stacked(parts.front().dims(), channels, std::move(values));
    IntensityVolume out = zscore_normalize(stacked, !a.all_voxels);
    if (!a.pad.empty())
        out = pad_to(out, parse_dims(a.pad));
    write_rawvol(a.output, out);
    std::cout << "normalized " << channels << " channel(s), dims " << to_string(out.dims()) << " -> " << a.output
              << "\n";
    return 0;
}

// ---- slice ----

struct SliceArgs {
    std::string input;
    std::string view = "axial";
    std::string output;
    bool verify = false;
};

template <typename T>
int slice_volume(const Volume<T>& vol, const SliceArgs& a)
{
    const ViewAxis view = view_arg(a.view);
    const SliceStack<T> stack = extract_slices(vol, view);
    const auto [h, w] = slice_shape(vol.dims(), view);
    std::cout << "view " << to_string(view) << ": " << stack.slices.size() << " slices of " << h << "x" << w
              << " with " << vol.channels() << " channel(s)\n";
    if (!a.output.empty()) {
        // Slices stacked along the first axis, channel-planar like every other volume.
        Volume<T> out({stack.slices.size(), h, w}, vol.channels(), T{});
        for (const Slice<T>& s : stack.slices)
            for (std::size_t c = 0; c < s.channels; ++c)
                for (std::size_t y = 0; y < s.height; ++y)
                    for (std::size_t x = 0; x < s.width; ++x)
                        out.at(c, s.index, y, x) = s.at(c, y, x);
        write_rawvol(a.output, out);
    }
    if (a.verify) {
        if (!(assemble_volume(stack) == vol)) {
            std::cerr << "error: reassembled volume differs from the input\n";
            return kExitData;
        }
        std::cout << "round trip: exact\n";
    }
    return 0;
}

int run_slice(const SliceArgs& a)
{
    return std::visit([&](const auto& vol) { return slice_volume(vol, a); }, load_any(a.input));
}

// ---- fuse ----

struct FuseArgs {
    std::vector<std::string> inputs;
    std::string method = "wa";
    std::vector<double> weights{0.4, 0.3, 0.3};
    std::string ref = "axial";
    std::string output;
    std::string prob_output;
    std::string gt;
    std::string csv;
    std::string case_id = "case";
};

int run_fuse(const FuseArgs& a)
{
    const FusionMethod method = make_method(a.method, a.weights, a.ref);
    std::vector<ProbVolume> views;
    for (const std::string& p : a.inputs) {
        views.push_back(read_rawvol_probabilities(p));
        validate_distribution(views.back(), 1e-5);
    }
    const LabelVolume fused = fuse_labels(method, views);
    if (!a.output.empty())
        write_rawvol(a.output, fused);
    if (!a.prob_output.empty())
        write_rawvol(a.prob_output, fused_distribution(method, views));

    if (!a.gt.empty()) {
        const LabelVolume gt = load_labels(a.gt);
        std::vector<ReportRow> rows;
        for (std::size_t i = 0; i < views.size(); ++i) {
            const std::string name = views.size() == 3 ? std::string(to_string(kAllViews[i])) : "view" + std::to_string(i);
            rows.push_back({a.case_id, name, evaluate(gt, argmax_labels(views[i]))});
        }
        rows.push_back({a.case_id, a.method, evaluate(gt, fused)});
        write_report(a.csv, rows);
    }
    return 0;
}

// ---- eval ----

struct EvalArgs {
    std::string gt;
    std::vector<std::string> preds;
    std::string csv;
    std::string case_id = "case";
    std::vector<std::string> methods;
};

int run_eval(const EvalArgs& a)
{
    const LabelVolume gt = load_labels(a.gt);
    std::vector<ReportRow> rows;
    for (std::size_t i = 0; i < a.preds.size(); ++i) {
        const std::string method = i < a.methods.size() ? a.methods[i] : fs::path(a.preds[i]).stem().string();
        rows.push_back({a.case_id, method, evaluate(gt, load_labels(a.preds[i]))});
    }
    write_report(a.csv, rows);
    return 0;
}

// ---- phantom ----

struct PhantomArgs {
    std::string dims = "32x32x32";
    std::uint64_t seed = 0;
    std::size_t errors = 0;
    bool overlap = false;
    std::string output_dir = ".";
};

int run_phantom(const PhantomArgs& a)
{
    PhantomSpec spec = PhantomSpec::for_dims(parse_dims(a.dims));
    spec.seed = a.seed;
    spec.errors = {a.errors, a.errors, a.errors};
    spec.disjoint = !a.overlap;
    const Phantom ph = generate_phantom(spec);

    const fs::path dir(a.output_dir);
    fs::create_directories(dir);
    write_rawvol(dir / "image.rawvol", ph.image);
    write_rawvol(dir / "labels.rawvol", ph.labels);
    for (ViewAxis v : kAllViews)
        write_rawvol(dir / ("prob_" + std::string(to_string(v)) + ".rawvol"), ph.views[view_index(v)]);
    std::cout << "phantom " << to_string(spec.dims) << " seed " << a.seed << ", " << a.errors
              << " error voxels per view (" << (spec.disjoint ? "disjoint" : "overlapping") << ") -> "
              << dir.string() << "\n";
    return 0;
}

// ---- train-toy ----

struct TrainArgs {
    std::string config;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr;
    std::optional<std::size_t> volumes;
    std::optional<std::size_t> validation;
    std::optional<std::size_t> dim;
    std::string output_dir;
    bool save = false;
};

int run_train(const TrainArgs& a)
{
    RunConfig cfg;
    if (!a.config.empty()) {
        cfg = load_run_config(a.config);
    } else {
        cfg.train.epochs = 10;
        cfg.train.lr0 = kToyLearningRate;
        cfg.train.batches = {4, 4, 4, 0};
    }
    if (a.epochs) cfg.train.epochs = *a.epochs;
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.lr) cfg.train.lr0 = *a.lr;
    if (a.volumes) cfg.phantom_count = *a.volumes;
    if (a.validation) cfg.phantom_validation = *a.validation;
    if (a.dim) cfg.phantom_dims = {*a.dim, *a.dim, *a.dim};
    if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
    cfg.validate();
    if (cfg.phantom_validation >= cfg.phantom_count)
        fail(ErrorCode::InvalidConfig, "phantom_validation must be smaller than phantom_count");

    std::vector<Sample> data = make_phantom_dataset(cfg.phantom_count, cfg.phantom_dims, cfg.train.seed);
    const std::size_t n_train = cfg.phantom_count - cfg.phantom_validation;
    const std::span<const Sample> all(data);
    const TrainResult result = train_multiview(all.first(n_train), all.subspan(n_train), cfg.train);

    std::printf("epoch,lr,segmentation,transition,decision,total,objective,axial_dice,coronal_dice,sagittal_dice,fused_dice\n");
    for (const EpochRecord& r : result.history)
        std::printf("%d,%.6g,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.lr, r.segmentation,
                    r.transition, r.decision, r.total, r.objective, r.view_dice[0], r.view_dice[1], r.view_dice[2], r.fused_dice);

    if (a.save) {
        const fs::path dir = cfg.output_dir;
        fs::create_directories(dir);
        for (ViewAxis v : kAllViews)
            save_checkpoint(dir / ("model_" + std::string(to_string(v)) + ".mvts"), result.models[view_index(v)]);
        std::ofstream(dir / "run_config.json") << dump_run_config(cfg);
    }
    return 0;
}

// ---- gradcheck ----

struct GradArgs {
    std::size_t instances = 100;
    std::uint64_t seed = 0;
    double step = kDefaultStep;
    double tolerance = 1e-5;
    std::string method = "wa";
    std::string dims = "1x3x3";
    std::size_t stages = 1;
};

int run_gradcheck(const GradArgs& a)
{
    const FusionMethod method = make_method(a.method, {0.4, 0.3, 0.3}, "axial");
    const Dims dims = parse_dims(a.dims);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.instances; ++i) {
        const GradCheckInstance inst = make_gradcheck_instance(a.seed + i, method, dims, a.stages);
        worst = std::max(worst, gradcheck_instance(inst, a.step));
    }
    std::printf("instances %zu, max relative error %.3e (tolerance %.1e)\n", a.instances, worst, a.tolerance);
    if (!(worst <= a.tolerance)) {
        std::fprintf(stderr, "error: gradient check failed\n");
        return kExitData;
    }
    return 0;
}

// ---- shapes ----

int run_shapes(const std::string& input)
{
    const auto hw = parse_extents(input, 2);
    const ShapeReport r = shape_check(ArchSpec::downsampling(), hw[0], hw[1]);
    std::printf("%-12s %6s %6s %8s\n", "layer", "height", "width", "channels");
    for (const LayerShape& l : r.layers)
        std::printf("%-12s %6zu %6zu %8zu\n", l.name.c_str(), l.height, l.width, l.channels);
    std::printf("\nstage outputs:");
    for (const LayerShape& s : r.stages)
        std::printf(" (%zu,%zu,%zu)", s.height, s.width, s.channels);
    std::printf("\n");
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-view segmentation fusion toolkit"};
    app.require_subcommand(1);

    NormalizeArgs norm;
    auto* c_norm = app.add_subcommand("normalize", "Stack modalities and z-score each over its nonzero voxels");
    c_norm->add_option("-i,--input", norm.inputs, "Modality volumes (RAWVOL or NIfTI-1)")->required();
    c_norm->add_option("-o,--output", norm.output, "Output RAWVOL")->required();
    c_norm->add_option("--pad", norm.pad, "Zero-pad to ZxYxX after normalizing");
    c_norm->add_flag("--all-voxels", norm.all_voxels, "Use every voxel for the statistics");

    SliceArgs sl;
    auto* c_slice = app.add_subcommand("slice", "Cut a volume into 2D slices along a view");
    c_slice->add_option("-i,--input", sl.input, "Input volume")->required();
    c_slice->add_option("--view", sl.view, "axial, coronal or sagittal")->capture_default_str();
    c_slice->add_option("-o,--output", sl.output, "Write the slices stacked along the first axis");
    c_slice->add_flag("--verify", sl.verify, "Reassemble and check the round trip");

    FuseArgs fu;
    auto* c_fuse = app.add_subcommand("fuse", "Fuse per-view probability volumes");
    c_fuse->add_option("-i,--inputs", fu.inputs, "Probability volumes in view order (axial coronal sagittal)")
        ->required();
    c_fuse->add_option("--method", fu.method, "voting or wa")->capture_default_str();
    c_fuse->add_option("--weights", fu.weights, "View weights for wa")->delimiter(',')->capture_default_str();
    c_fuse->add_option("--ref", fu.ref, "Reference view for voting")->capture_default_str();
    c_fuse->add_option("-o,--output", fu.output, "Fused label RAWVOL");
    c_fuse->add_option("--prob-output", fu.prob_output, "Fused distribution RAWVOL");
    c_fuse->add_option("--gt", fu.gt, "Ground-truth labels for a dice report");
    c_fuse->add_option("--csv", fu.csv, "Dice CSV path (stdout when omitted)");
    c_fuse->add_option("--case-id", fu.case_id)->capture_default_str();

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train-toy", "Train the three view segmenters on phantoms");
    c_train->add_option("--config", tr.config, "JSON run configuration");
    c_train->add_option("--epochs", tr.epochs);
    c_train->add_option("--seed", tr.seed);
    c_train->add_option("--lr", tr.lr, "Initial learning rate");
    c_train->add_option("--volumes", tr.volumes, "Phantoms generated in total");
    c_train->add_option("--validation", tr.validation, "Phantoms held out for validation");
    c_train->add_option("--dim", tr.dim, "Cubic phantom extent");
    c_train->add_option("--output-dir", tr.output_dir);
    c_train->add_flag("--save", tr.save, "Write checkpoints and the resolved config");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Dice of label volumes against ground truth");
    c_eval->add_option("--gt", ev.gt, "Ground-truth labels")->required();
    c_eval->add_option("-p,--pred", ev.preds, "Predicted labels or probabilities")->required();
    c_eval->add_option("--method", ev.methods, "Row names, one per prediction");
    c_eval->add_option("--csv", ev.csv, "CSV path (stdout when omitted)");
    c_eval->add_option("--case-id", ev.case_id)->capture_default_str();

    GradArgs gc;
    auto* c_grad = app.add_subcommand("gradcheck", "Compare analytic loss gradients with finite differences");
    c_grad->add_option("--instances", gc.instances)->capture_default_str();
    c_grad->add_option("--seed", gc.seed)->capture_default_str();
    c_grad->add_option("--step", gc.step)->capture_default_str();
    c_grad->add_option("--tolerance", gc.tolerance)->capture_default_str();
    c_grad->add_option("--method", gc.method, "wa or voting")->capture_default_str();
    c_grad->add_option("--dims", gc.dims, "ZxYxX of each instance")->capture_default_str();
    c_grad->add_option("--stages", gc.stages)->capture_default_str();

    PhantomArgs ph;
    auto* c_ph = app.add_subcommand("phantom", "Write a synthetic phantom and per-view predictions");
    c_ph->add_option("--dims", ph.dims)->capture_default_str();
    c_ph->add_option("--seed", ph.seed)->capture_default_str();
    c_ph->add_option("--errors", ph.errors, "Wrong voxels per view")->capture_default_str();
    c_ph->add_flag("--overlap", ph.overlap, "Allow error sets to overlap between views");
    c_ph->add_option("-o,--output-dir", ph.output_dir)->capture_default_str();

    std::string shapes_input = "240x240";
    auto* c_shapes = app.add_subcommand("shapes", "Layer output sizes of the downsampling path");
    c_shapes->add_option("--input", shapes_input, "HxW")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*c_norm) return run_normalize(norm);
        if (*c_slice) return run_slice(sl);
        if (*c_fuse) return run_fuse(fu);
        if (*c_train) return run_train(tr);
        if (*c_eval) return run_eval(ev);
        if (*c_grad) return run_gradcheck(gc);
        if (*c_ph) return run_phantom(ph);
        if (*c_shapes) return run_shapes(shapes_input);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const bool usage = e.code() == ErrorCode::Usage || e.code() == ErrorCode::InvalidConfig ||
                           e.code() == ErrorCode::InvalidWeights || e.code() == ErrorCode::AllZeroWeights;
        return usage ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
