#include "mipa/config.hpp"

#include <fstream>
#include <stdexcept>

using nlohmann::json;

namespace mipa {

std::string to_string(Regime regime) {
    switch (regime) {
        case Regime::rgb_only: return "rgb_only";
        case Regime::ir_only: return "ir_only";
        case Regime::both: return "both";
        case Regime::mipa: return "mipa";
        case Regime::mipa_ma: return "mipa_ma";
    }
    return "?";
}

Regime regime_from_string(const std::string& name) {
    if (name == "rgb_only") return Regime::rgb_only;
    if (name == "ir_only") return Regime::ir_only;
    if (name == "both") return Regime::both;
    if (name == "mipa") return Regime::mipa;
    if (name == "mipa_ma") return Regime::mipa_ma;
    throw std::invalid_argument("unknown regime: " + name);
}

RhoPolicy RhoPolicyConfig::build(std::uint64_t seed) const {
    switch (kind) {
        case RhoKind::fixed: return RhoPolicy::make_fixed(value);
        case RhoKind::variable: return RhoPolicy::make_variable(seed);
        case RhoKind::curriculum: return RhoPolicy::make_curriculum(warmup_value, warmup_epochs, seed);
    }
    throw std::invalid_argument("invalid rho policy kind");
}

int ExperimentConfig::image_h() const {
    return dataset.type == DatasetConfig::Type::synthetic ? dataset.synthetic.scene.image_h
                                                          : dataset.coco.resize_h;
}

int ExperimentConfig::image_w() const {
    return dataset.type == DatasetConfig::Type::synthetic ? dataset.synthetic.scene.image_w
                                                          : dataset.coco.resize_w;
}

void ExperimentConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("config: eval_every must be >= 1");
    if (log_every < 1) throw std::invalid_argument("config: log_every must be >= 1");
    if (!(optimizer.lr > 0.0)) throw std::invalid_argument("config: optimizer.lr must be > 0");
    if (optimizer.weight_decay < 0.0)
        throw std::invalid_argument("config: optimizer.weight_decay must be >= 0");
    if (optimizer.name != "adamw")
        throw std::invalid_argument("config: unsupported optimizer '" + optimizer.name + "'");
    encoder.validate();

    if (regime == Regime::both && !(both_rho >= 0.0 && both_rho <= 1.0))
        throw std::invalid_argument("config: both_rho must lie in [0, 1]");
    if ((regime == Regime::mipa || regime == Regime::mipa_ma) && !has_rho_policy)
        throw std::invalid_argument("config: regime " + to_string(regime) + " requires rho_policy");
    if (regime == Regime::mipa_ma) {
        if (!has_ma) throw std::invalid_argument("config: regime mipa_ma requires ma.gamma");
        if (!(ma.gamma > 0.0)) throw std::invalid_argument("config: ma.gamma must be > 0");
    }
    if (has_rho_policy) {
        // Construction performs the field checks per kind.
        (void)rho_policy.build(0);
    }
    if (!(det.lambda_reg >= 0.0)) throw std::invalid_argument("config: det.lambda_reg must be >= 0");
    if (!(det.score_threshold >= 0.0 && det.score_threshold <= 1.0))
        throw std::invalid_argument("config: det.score_threshold must lie in [0, 1]");
    if (!(det.nms_iou >= 0.0 && det.nms_iou <= 1.0))
        throw std::invalid_argument("config: det.nms_iou must lie in [0, 1]");

    if (dataset.type == DatasetConfig::Type::synthetic) {
        dataset.synthetic.scene.validate();
        if (dataset.synthetic.train_size < 1 || dataset.synthetic.test_size < 1)
            throw std::invalid_argument("config: synthetic dataset sizes must be >= 1");
        if (static_cast<int>(dataset.synthetic.scene.affinities.size()) >
            dataset.synthetic.scene.num_classes)
            throw std::invalid_argument("config: more affinities than classes");
    } else {
        if (dataset.coco.resize_h <= 0 || dataset.coco.resize_w <= 0)
            throw std::invalid_argument("config: coco dataset requires a resize target");
    }

    const int divisor = encoder.downsample_between_stages && encoder.stage_depths.size() > 1
                            ? 2 * encoder.patch_size
                            : encoder.patch_size;
    if (image_h() % divisor != 0 || image_w() % divisor != 0)
        throw std::invalid_argument("config: image " + std::to_string(image_h()) + "x" +
                                    std::to_string(image_w()) + " must be divisible by " +
                                    std::to_string(divisor));
}

namespace {

template <typename T>
T get_or(const json& js, const char* key, T fallback) {
    const auto it = js.find(key);
    return it == js.end() ? fallback : it->get<T>();
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const json& js) {
    ExperimentConfig config;
    config.regime = regime_from_string(get_or<std::string>(js, "regime", "mipa"));
    config.seed = get_or<std::uint64_t>(js, "seed", 1);
    config.epochs = get_or<int>(js, "epochs", 12);
    config.batch_size = get_or<int>(js, "batch_size", 6);
    config.threads = get_or<int>(js, "threads", 1);
    config.eval_every = get_or<int>(js, "eval_every", 1);
    config.log_every = get_or<int>(js, "log_every", 10);

    if (js.contains("optimizer")) {
        const json& opt = js.at("optimizer");
        config.optimizer.name = get_or<std::string>(opt, "name", "adamw");
        config.optimizer.lr = get_or<double>(opt, "lr", 1e-4);
        config.optimizer.weight_decay = get_or<double>(opt, "weight_decay", 0.01);
    }

    if (js.contains("rho_policy")) {
        config.has_rho_policy = true;
        const json& rp = js.at("rho_policy");
        config.rho_policy.kind = rho_kind_from_string(get_or<std::string>(rp, "kind", "variable"));
        config.rho_policy.value = get_or<double>(rp, "value", 0.5);
        config.rho_policy.warmup_value = get_or<double>(rp, "warmup_value", 0.25);
        config.rho_policy.warmup_epochs = get_or<int>(rp, "warmup_epochs", 8);
    }
    config.both_rho = get_or<double>(js, "both_rho", 0.5);

    if (js.contains("ma")) {
        config.has_ma = true;
        config.ma.gamma = get_or<double>(js.at("ma"), "gamma", 0.10);
    }

    if (js.contains("det")) {
        const json& det = js.at("det");
        config.det.lambda_reg = get_or<double>(det, "lambda_reg", 1.0);
        config.det.score_threshold = get_or<double>(det, "score_threshold", 0.3);
        config.det.nms_iou = get_or<double>(det, "nms_iou", 0.5);
    }

    if (js.contains("encoder")) {
        const json& enc = js.at("encoder");
        config.encoder.patch_size = get_or<int>(enc, "patch_size", 4);
        config.encoder.embed_dim = get_or<int>(enc, "embed_dim", 64);
        config.encoder.stage_depths = get_or<std::vector<int>>(enc, "stage_depths", {2, 2});
        config.encoder.num_heads = get_or<int>(enc, "num_heads", 4);
        config.encoder.mlp_ratio = get_or<double>(enc, "mlp_ratio", 2.0);
        config.encoder.downsample_between_stages = get_or<bool>(enc, "downsample_between_stages", true);
    }

    if (js.contains("dataset")) {
        const json& ds = js.at("dataset");
        const std::string type = get_or<std::string>(ds, "type", "synthetic");
        if (type == "synthetic") {
            config.dataset.type = DatasetConfig::Type::synthetic;
            SyntheticDatasetConfig& synth = config.dataset.synthetic;
            if (ds.contains("image_size")) {
                const auto size = ds.at("image_size").get<std::vector<int>>();
                if (size.size() != 2) throw std::invalid_argument("config: image_size must be [h, w]");
                synth.scene.image_h = size[0];
                synth.scene.image_w = size[1];
            }
            if (ds.contains("num_objects")) {
                const auto range = ds.at("num_objects").get<std::vector<int>>();
                if (range.size() != 2) throw std::invalid_argument("config: num_objects must be [min, max]");
                synth.scene.min_objects = range[0];
                synth.scene.max_objects = range[1];
            }
            if (ds.contains("object_px")) {
                const auto range = ds.at("object_px").get<std::vector<int>>();
                if (range.size() != 2) throw std::invalid_argument("config: object_px must be [min, max]");
                synth.scene.min_object_px = range[0];
                synth.scene.max_object_px = range[1];
            }
            synth.scene.num_classes = get_or<int>(ds, "num_classes", 2);
            if (ds.contains("class_modality_affinity")) {
                synth.scene.affinities.clear();
                for (const auto& pair : ds.at("class_modality_affinity")) {
                    const auto values = pair.get<std::vector<double>>();
                    if (values.size() != 2)
                        throw std::invalid_argument("config: each affinity must be [visibility_f, visibility_g]");
                    synth.scene.affinities.push_back({values[0], values[1]});
                }
            }
            synth.scene.noise_sigma_f = get_or<double>(ds, "noise_sigma_f", 0.02);
            synth.scene.noise_sigma_g = get_or<double>(ds, "noise_sigma_g", 0.02);
            synth.scene.seed = get_or<std::uint64_t>(ds, "seed", 7777);
            synth.train_size = get_or<int>(ds, "train_size", 2000);
            synth.test_size = get_or<int>(ds, "test_size", 500);
        } else if (type == "coco") {
            config.dataset.type = DatasetConfig::Type::coco;
            CocoDatasetConfig& coco = config.dataset.coco;
            coco.root = get_or<std::string>(ds, "root", "");
            coco.train_annotations = get_or<std::string>(ds, "train_annotations", "");
            coco.test_annotations = get_or<std::string>(ds, "test_annotations", "");
            if (ds.contains("pairing")) {
                const auto rule = ds.at("pairing").get<std::vector<std::string>>();
                if (rule.size() != 2) throw std::invalid_argument("config: pairing must be [from, to]");
                coco.pairing.from = rule[0];
                coco.pairing.to = rule[1];
            }
            if (ds.contains("resize")) {
                const auto size = ds.at("resize").get<std::vector<int>>();
                if (size.size() != 2) throw std::invalid_argument("config: resize must be [h, w]");
                coco.resize_h = size[0];
                coco.resize_w = size[1];
            }
        } else {
            throw std::invalid_argument("config: unknown dataset type '" + type + "'");
        }
    }
    return config;
}

json ExperimentConfig::to_json() const {
    json js;
    js["regime"] = to_string(regime);
    js["seed"] = seed;
    js["epochs"] = epochs;
    js["batch_size"] = batch_size;
    js["threads"] = threads;
    js["eval_every"] = eval_every;
    js["log_every"] = log_every;
    js["optimizer"] = {{"name", optimizer.name}, {"lr", optimizer.lr}, {"weight_decay", optimizer.weight_decay}};
    if (has_rho_policy) {
        json rp;
        rp["kind"] = to_string(rho_policy.kind);
        if (rho_policy.kind == RhoKind::fixed) rp["value"] = rho_policy.value;
        if (rho_policy.kind == RhoKind::curriculum) {
            rp["warmup_value"] = rho_policy.warmup_value;
            rp["warmup_epochs"] = rho_policy.warmup_epochs;
        }
        js["rho_policy"] = rp;
    }
    js["both_rho"] = both_rho;
    if (has_ma) js["ma"] = {{"gamma", ma.gamma}};
    js["det"] = {{"lambda_reg", det.lambda_reg},
                 {"score_threshold", det.score_threshold},
                 {"nms_iou", det.nms_iou}};
    js["encoder"] = {{"patch_size", encoder.patch_size},
                     {"embed_dim", encoder.embed_dim},
                     {"stage_depths", encoder.stage_depths},
                     {"num_heads", encoder.num_heads},
                     {"mlp_ratio", encoder.mlp_ratio},
                     {"downsample_between_stages", encoder.downsample_between_stages}};
    json ds;
    if (dataset.type == DatasetConfig::Type::synthetic) {
        const SyntheticDatasetConfig& synth = dataset.synthetic;
        ds["type"] = "synthetic";
        ds["image_size"] = {synth.scene.image_h, synth.scene.image_w};
        ds["num_objects"] = {synth.scene.min_objects, synth.scene.max_objects};
        ds["object_px"] = {synth.scene.min_object_px, synth.scene.max_object_px};
        ds["num_classes"] = synth.scene.num_classes;
        json affinities = json::array();
        for (const ClassAffinity& a : synth.scene.affinities)
            affinities.push_back({a.visibility_f, a.visibility_g});
        ds["class_modality_affinity"] = affinities;
        ds["noise_sigma_f"] = synth.scene.noise_sigma_f;
        ds["noise_sigma_g"] = synth.scene.noise_sigma_g;
        ds["seed"] = synth.scene.seed;
        ds["train_size"] = synth.train_size;
        ds["test_size"] = synth.test_size;
    } else {
        const CocoDatasetConfig& coco = dataset.coco;
        ds["type"] = "coco";
        ds["root"] = coco.root;
        ds["train_annotations"] = coco.train_annotations;
        ds["test_annotations"] = coco.test_annotations;
        ds["pairing"] = {coco.pairing.from, coco.pairing.to};
        ds["resize"] = {coco.resize_h, coco.resize_w};
    }
    js["dataset"] = ds;
    return js;
}

void apply_override(json& config, const std::string& key_equals_value) {
    const auto eq = key_equals_value.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("override must look like key.path=value, got '" + key_equals_value + "'");
    const std::string path = key_equals_value.substr(0, eq);
    const std::string value_text = key_equals_value.substr(eq + 1);

    json value;
    try {
        value = json::parse(value_text);
    } catch (const json::parse_error&) {
        value = value_text; // plain string
    }

    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw std::invalid_argument("override has an empty path segment: " + path);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

ExperimentConfig ExperimentConfig::load(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    json js;
    try {
        js = json::parse(in);
    } catch (const json::parse_error& err) {
        throw std::runtime_error("malformed config " + path + ": " + err.what());
    }
    for (const std::string& entry : overrides) apply_override(js, entry);
    ExperimentConfig config = from_json(js);
    config.validate();
    return config;
}

} // namespace mipa
