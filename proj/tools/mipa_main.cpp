#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mipa/coco.hpp"
#include "mipa/config.hpp"
#include "mipa/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ','))
        if (!token.empty()) seeds.push_back(std::stoull(token));
    return seeds;
}

mipa::EvalModality modality_from_string(const std::string& name) {
    if (name == "rgb") return mipa::EvalModality::rgb;
    if (name == "ir") return mipa::EvalModality::ir;
    if (name == "both-separately" || name == "both") return mipa::EvalModality::both_separately;
    throw CLI::ValidationError("--modality must be rgb, ir or both-separately");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MiPa mixed-patch RGB/IR modality-agnostic detection trainer"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint_path, modality = "both-separately";
    std::string grid_path, seeds_text = "1,2,3";
    std::vector<std::string> overrides;
    std::int64_t seed = -1;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        cmd->add_option("--config", config_path, "experiment config JSON")->required(config_required);
        cmd->add_option("--seed", seed, "override the config seed");
        cmd->add_option("--out-dir", out_dir, "output directory");
        cmd->add_option("--override", overrides, "config override key.path=value (repeatable)");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "run one training regime");
    add_common(train_cmd, true);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint per modality");
    add_common(eval_cmd, false);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint archive")->required();
    eval_cmd->add_option("--modality", modality, "rgb | ir | both-separately");

    CLI::App* grid_cmd = app.add_subcommand("grid", "run an ablation grid");
    add_common(grid_cmd, true);
    grid_cmd->add_option("--grid", grid_path, "JSON file: {\"key.path\": [values...]}")->required();
    grid_cmd->add_option("--seeds", seeds_text, "comma-separated seed list");

    CLI::App* gen_cmd = app.add_subcommand("gen-data", "write the synthetic dataset in COCO layout");
    add_common(gen_cmd, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (seed >= 0) overrides.push_back("seed=" + std::to_string(seed));

        if (train_cmd->parsed()) {
            const mipa::ExperimentConfig config = mipa::ExperimentConfig::load(config_path, overrides);
            const std::string dir = out_dir.empty() ? "runs/train" : out_dir;
            const mipa::TrainOutcome outcome = mipa::run_training(config, dir);
            std::cout << "final report:\n" << outcome.final_report.to_json() << '\n'
                      << "metrics: " << (fs::path(dir) / "metrics.csv").string() << '\n'
                      << "checkpoint: " << outcome.checkpoint_path << '\n';
        } else if (eval_cmd->parsed()) {
            std::vector<mipa::PairedSample> test_set;
            if (!config_path.empty()) {
                const mipa::ExperimentConfig config = mipa::ExperimentConfig::load(config_path, overrides);
                test_set = mipa::load_dataset(config).test;
            } else {
                auto [model, experiment] = mipa::model_from_checkpoint(checkpoint_path);
                test_set = mipa::load_dataset(experiment).test;
            }
            auto [model, experiment] = mipa::model_from_checkpoint(checkpoint_path);
            std::vector<mipa::DetectionSet> preds_rgb, preds_ir;
            const mipa::EvalReport report =
                mipa::run_eval(model, test_set, experiment.det, modality_from_string(modality),
                               experiment.threads, &preds_rgb, &preds_ir);
            std::cout << report.to_json() << '\n';
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                std::ofstream json_out(fs::path(out_dir) / "report.json");
                json_out << report.to_json() << '\n';
                std::ofstream csv_out(fs::path(out_dir) / "report.csv");
                csv_out << report.csv_header() << '\n' << report.csv_row() << '\n';
                if (!preds_rgb.empty())
                    mipa::write_prediction_dump((fs::path(out_dir) / "predictions_rgb.txt").string(),
                                                preds_rgb);
                if (!preds_ir.empty())
                    mipa::write_prediction_dump((fs::path(out_dir) / "predictions_ir.txt").string(),
                                                preds_ir);
            }
        } else if (grid_cmd->parsed()) {
            const mipa::ExperimentConfig base = mipa::ExperimentConfig::load(config_path, overrides);
            std::ifstream grid_in(grid_path);
            if (!grid_in) throw std::runtime_error("cannot open grid file " + grid_path);
            const json grid_json = json::parse(grid_in);
            mipa::GridAxes axes;
            for (const auto& [key, values] : grid_json.items())
                axes.emplace_back(key, std::vector<json>(values.begin(), values.end()));
            const std::string dir = out_dir.empty() ? "runs/grid" : out_dir;
            const mipa::GridResult result =
                mipa::run_ablation_grid(base, axes, parse_seed_list(seeds_text), dir);
            for (const mipa::GridCell& cell : result.cells)
                std::cout << cell.label << ": "
                          << (cell.failed ? "FAILED (" + cell.error + ")"
                                          : "ap50_avg=" + std::to_string(cell.mean(
                                                &mipa::ModalityMetrics::ap50, false, false)))
                          << '\n';
            std::cout << "grid csv: " << result.csv_path << '\n';
        } else if (gen_cmd->parsed()) {
            const mipa::ExperimentConfig config = mipa::ExperimentConfig::load(config_path, overrides);
            if (config.dataset.type != mipa::DatasetConfig::Type::synthetic)
                throw std::runtime_error("gen-data requires a synthetic dataset config");
            const std::string dir = out_dir.empty() ? "runs/dataset" : out_dir;
            const mipa::LoadedDataset data = mipa::load_dataset(config);
            const int classes = config.dataset.synthetic.scene.num_classes;
            // One root, two annotation files; scene ids keep the splits apart.
            mipa::write_coco_dataset(dir, data.train, classes, "annotations_train.json");
            mipa::write_coco_dataset(dir, data.test, classes, "annotations_test.json");
            std::cout << "wrote " << data.train.size() << " train / " << data.test.size()
                      << " test pairs under " << dir << '\n';
        }
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 0;
}
