#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mipa/coco.hpp"
#include "mipa/data_synth.hpp"
#include "mipa/model.hpp"
#include "mipa/rho_policy.hpp"

namespace mipa {

enum class Regime { rgb_only, ir_only, both, mipa, mipa_ma };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

struct OptimizerConfig {
    std::string name = "adamw"; // decoupled weight decay
    double lr = 1e-4;
    double weight_decay = 0.01;
};

struct RhoPolicyConfig {
    RhoKind kind = RhoKind::variable;
    double value = 0.5;         // fixed
    double warmup_value = 0.25; // curriculum
    int warmup_epochs = 8;      // curriculum

    RhoPolicy build(std::uint64_t seed) const;
};

struct MaConfig {
    double gamma = 0.10;
};

struct DetConfig {
    double lambda_reg = 1.0;
    double score_threshold = 0.3;
    double nms_iou = 0.5;
};

struct SyntheticDatasetConfig {
    SceneSpec scene;
    int train_size = 2000;
    int test_size = 500;
};

struct CocoDatasetConfig {
    std::string root;
    std::string train_annotations;
    std::string test_annotations;
    PairingRule pairing;
    int resize_h = 0;
    int resize_w = 0;
};

struct DatasetConfig {
    enum class Type { synthetic, coco };
    Type type = Type::synthetic;
    SyntheticDatasetConfig synthetic;
    CocoDatasetConfig coco;
};

struct ExperimentConfig {
    Regime regime = Regime::mipa;
    std::uint64_t seed = 1;
    int epochs = 12;
    int batch_size = 6;
    int threads = 1;
    int eval_every = 1; // epochs between evaluations
    int log_every = 10; // steps between loss rows
    OptimizerConfig optimizer;
    RhoPolicyConfig rho_policy;
    bool has_rho_policy = false;
    double both_rho = 0.5;
    MaConfig ma;
    bool has_ma = false;
    DetConfig det;
    nn::EncoderConfig encoder;
    DatasetConfig dataset;

    // Rejects invalid regime/field combinations before any training step.
    void validate() const;

    int image_h() const;
    int image_w() const;

    static ExperimentConfig from_json(const nlohmann::json& js);
    nlohmann::json to_json() const;

    // Reads a JSON config file and applies key=value overrides (dotted paths,
    // values parsed as JSON with plain-string fallback).
    static ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides = {});
};

void apply_override(nlohmann::json& config, const std::string& key_equals_value);

} // namespace mipa
