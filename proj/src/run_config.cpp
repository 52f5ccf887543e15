#include "mvfuse/run_config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mvfuse {

namespace {

using nlohmann::json;

template <typename T>
T get(const json& j, const char* key)
{
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("key '") + key + "': " + e.what());
    }
}

Dims get_dims(const json& j, const char* key)
{
    const auto v = get<std::vector<std::size_t>>(j, key);
    if (v.size() != 3)
        fail(ErrorCode::InvalidConfig, std::string("key '") + key + "' needs three entries [z, y, x]");
    return {v[0], v[1], v[2]};
}

std::size_t get_count(const json& j, const char* key)
{
    if (!j.is_number_unsigned())
        fail(ErrorCode::InvalidConfig, std::string("key '") + key + "' must be a non-negative integer");
    return j.get<std::size_t>();
}

} // namespace

void RunConfig::validate() const
{
    try {
        train.validate();
    } catch (const Error& e) {
        fail(ErrorCode::InvalidConfig, e.what());
    }
    const bool any_pad = pad_dims.z != 0 || pad_dims.y != 0 || pad_dims.x != 0;
    if (any_pad && pad_dims.voxels() == 0)
        fail(ErrorCode::InvalidConfig, "pad_dims must be all zero or all positive");
    if (phantom_dims.voxels() == 0)
        fail(ErrorCode::InvalidConfig, "phantom_dims must be positive");
    if (phantom_count == 0)
        fail(ErrorCode::InvalidConfig, "phantom_count must be positive");
}

RunConfig parse_run_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::InvalidConfig, std::string("malformed config: ") + e.what());
    }
    if (!doc.is_object())
        fail(ErrorCode::InvalidConfig, "config must be a JSON object");

    RunConfig cfg;
    TrainConfig& t = cfg.train;
    std::string fusion = "wa";
    std::vector<double> weights{0.4, 0.3, 0.3};
    ViewAxis reference = ViewAxis::Axial;

    for (const auto& [key, v] : doc.items()) {
        const char* k = key.c_str();
        if (key == "output_dir") cfg.output_dir = get<std::string>(v, k);
        else if (key == "fusion") fusion = get<std::string>(v, k);
        else if (key == "fusion_weights") weights = get<std::vector<double>>(v, k);
        else if (key == "reference_view") {
            const auto view = parse_view(get<std::string>(v, k));
            if (!view)
                fail(ErrorCode::InvalidConfig, "reference_view must be axial, coronal or sagittal");
            reference = *view;
        }
        else if (key == "alpha") t.loss.alpha = get<double>(v, k);
        else if (key == "beta") t.loss.beta = get<double>(v, k);
        else if (key == "engage_epoch") t.loss.engage_epoch = get<int>(v, k);
        else if (key == "lr0") t.lr0 = get<double>(v, k);
        else if (key == "halve_every") t.halve_every = get<int>(v, k);
        else if (key == "epochs") t.epochs = get<int>(v, k);
        else if (key == "dropout") t.dropout = get<double>(v, k);
        else if (key == "batch_axial") t.batches.axial = get_count(v, k);
        else if (key == "batch_coronal") t.batches.coronal = get_count(v, k);
        else if (key == "batch_sagittal") t.batches.sagittal = get_count(v, k);
        else if (key == "batch_axial_final") t.batches.axial_final = get_count(v, k);
        else if (key == "seed") t.seed = get<std::uint64_t>(v, k);
        else if (key == "patch") t.patch = get_count(v, k);
        else if (key == "init_stddev") t.init_stddev = get<double>(v, k);
        else if (key == "class_weights") {
            const auto s = get<std::string>(v, k);
            if (s == "ground_truth") t.class_weight_source = ClassWeightSource::GroundTruth;
            else if (s == "prediction") t.class_weight_source = ClassWeightSource::Prediction;
            else fail(ErrorCode::InvalidConfig, "class_weights must be ground_truth or prediction");
        }
        else if (key == "normalize_nonzero_only") cfg.normalize_nonzero_only = get<bool>(v, k);
        else if (key == "pad_dims") cfg.pad_dims = get_dims(v, k);
        else if (key == "phantom_count") cfg.phantom_count = get_count(v, k);
        else if (key == "phantom_validation") cfg.phantom_validation = get_count(v, k);
        else if (key == "phantom_dims") cfg.phantom_dims = get_dims(v, k);
        else fail(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
    }

    if (fusion == "wa") {
        try {
            t.fusion = WeightedAveraging{FusionWeights(weights)};
        } catch (const Error& e) {
            fail(ErrorCode::InvalidConfig, std::string("fusion_weights: ") + e.what());
        }
    } else if (fusion == "voting") {
        t.fusion = Voting{view_index(reference)};
    } else {
        fail(ErrorCode::InvalidConfig, "fusion must be wa or voting, got '" + fusion + "'");
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::IoFailure, "cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str());
}

std::string dump_run_config(const RunConfig& cfg)
{
    const TrainConfig& t = cfg.train;
    json j;
    j["output_dir"] = cfg.output_dir.string();
    if (const auto* wa = std::get_if<WeightedAveraging>(&t.fusion)) {
        j["fusion"] = "wa";
        j["fusion_weights"] = std::vector<double>(wa->weights.values().begin(), wa->weights.values().end());
    } else {
        j["fusion"] = "voting";
        j["reference_view"] = std::string(to_string(kAllViews[std::get<Voting>(t.fusion).reference]));
    }
    j["alpha"] = t.loss.alpha;
    j["beta"] = t.loss.beta;
    j["engage_epoch"] = t.loss.engage_epoch;
    j["lr0"] = t.lr0;
    j["halve_every"] = t.halve_every;
    j["epochs"] = t.epochs;
    j["dropout"] = t.dropout;
    j["batch_axial"] = t.batches.axial;
    j["batch_coronal"] = t.batches.coronal;
    j["batch_sagittal"] = t.batches.sagittal;
    j["batch_axial_final"] = t.batches.axial_final;
    j["seed"] = t.seed;
    j["patch"] = t.patch;
    j["init_stddev"] = t.init_stddev;
    j["class_weights"] = t.class_weight_source == ClassWeightSource::Prediction ? "prediction" : "ground_truth";
    j["normalize_nonzero_only"] = cfg.normalize_nonzero_only;
    j["pad_dims"] = {cfg.pad_dims.z, cfg.pad_dims.y, cfg.pad_dims.x};
    j["phantom_count"] = cfg.phantom_count;
    j["phantom_validation"] = cfg.phantom_validation;
    j["phantom_dims"] = {cfg.phantom_dims.z, cfg.phantom_dims.y, cfg.phantom_dims.x};
    return j.dump(2) + "\n";
}

} // namespace mvfuse
