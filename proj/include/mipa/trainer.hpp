#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mipa/config.hpp"
#include "mipa/metrics_log.hpp"
#include "mipa/model.hpp"

namespace mipa {

struct LoadedDataset {
    std::vector<PairedSample> train;
    std::vector<PairedSample> test;
    int num_classes = 0;
};

LoadedDataset load_dataset(const ExperimentConfig& config);

enum class EvalModality { rgb, ir, both_separately };

struct TrainOutcome {
    MetricsLog log;
    EvalReport final_report;
    double best_ap50_avg = 0.0;
    std::string checkpoint_path;      // empty when out_dir is empty
    std::string best_checkpoint_path; // "
};

// Runs one experiment. When out_dir is non-empty, writes metrics.csv,
// report.json, checkpoint.bin and checkpoint_best.bin there. A shared
// dataset skips regeneration when many runs use identical data.
TrainOutcome run_training(const ExperimentConfig& config, const std::string& out_dir = "",
                          const LoadedDataset* shared_dataset = nullptr);

// Pure-modality evaluation of a trained model; inference never sees mosaics.
// The optional out-parameters receive the raw per-image detections for
// offline dumps.
EvalReport run_eval(Model& model, const std::vector<PairedSample>& test_set,
                    const DetConfig& det, EvalModality modality, int threads = 1,
                    std::vector<DetectionSet>* out_rgb = nullptr,
                    std::vector<DetectionSet>* out_ir = nullptr);

// Checkpoint-level entry point; rejects version or config mismatches.
EvalReport run_eval_checkpoint(const std::string& checkpoint_path,
                               const std::vector<PairedSample>& test_set,
                               EvalModality modality, int threads = 1);

// Rebuilds the model stored in a checkpoint (weights restored).
std::pair<Model, ExperimentConfig> model_from_checkpoint(const std::string& checkpoint_path);

struct GridCell {
    std::string label;
    std::vector<std::pair<std::string, nlohmann::json>> assignments;
    std::vector<EvalReport> per_seed;
    bool failed = false;
    std::string error;

    double mean(double ModalityMetrics::*field, bool rgb, bool ir) const;
    double stddev(double ModalityMetrics::*field, bool rgb, bool ir) const;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::string csv_path;
};

using GridAxes = std::vector<std::pair<std::string, std::vector<nlohmann::json>>>;

// One run per grid point per seed (cartesian product over the axes, base
// config only when the grid is empty). Emits an aggregated CSV and AP50 bar
// plots when out_dir is non-empty; per-cell failures are recorded and the
// grid continues.
GridResult run_ablation_grid(const ExperimentConfig& base, const GridAxes& grid,
                             const std::vector<std::uint64_t>& seeds,
                             const std::string& out_dir = "");

} // namespace mipa
