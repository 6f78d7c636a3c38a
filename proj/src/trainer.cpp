#include "mipa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "mipa/checkpoint.hpp"
#include "mipa/nn/adamw.hpp"
#include "mipa/svg_plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mipa {

namespace {

// Index offset separating the train and test synthetic streams.
constexpr std::int64_t kTestIndexBase = 1'000'000;

json model_config_to_json(const ModelConfig& config) {
    return {{"encoder",
             {{"patch_size", config.encoder.patch_size},
              {"embed_dim", config.encoder.embed_dim},
              {"stage_depths", config.encoder.stage_depths},
              {"num_heads", config.encoder.num_heads},
              {"mlp_ratio", config.encoder.mlp_ratio},
              {"downsample_between_stages", config.encoder.downsample_between_stages}}},
            {"image_h", config.image_h},
            {"image_w", config.image_w},
            {"channels", config.channels},
            {"num_classes", config.num_classes},
            {"class_bias_prior", config.class_bias_prior}};
}

ModelConfig model_config_from_json(const json& js) {
    ModelConfig config;
    const json& enc = js.at("encoder");
    config.encoder.patch_size = enc.at("patch_size").get<int>();
    config.encoder.embed_dim = enc.at("embed_dim").get<int>();
    config.encoder.stage_depths = enc.at("stage_depths").get<std::vector<int>>();
    config.encoder.num_heads = enc.at("num_heads").get<int>();
    config.encoder.mlp_ratio = enc.at("mlp_ratio").get<double>();
    config.encoder.downsample_between_stages = enc.at("downsample_between_stages").get<bool>();
    config.image_h = js.at("image_h").get<int>();
    config.image_w = js.at("image_w").get<int>();
    config.channels = js.at("channels").get<int>();
    config.num_classes = js.at("num_classes").get<int>();
    config.class_bias_prior = js.at("class_bias_prior").get<double>();
    return config;
}

// Per-image work prepared on the main thread (all RNG happens there).
struct StepSample {
    PatchGrid input;
    TokenTargets targets;
    BinaryMap map;
    bool has_map = false;
};

void sync_clone(Model& master, Model& clone) {
    const nn::ParamRefs src = master.params();
    const nn::ParamRefs dst = clone.params();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
}

void reduce_clone_grads(Model& master, Model& clone) {
    const nn::ParamRefs src = clone.params();
    const nn::ParamRefs dst = master.params();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->grad += src[i]->grad;
}

struct BatchLosses {
    double l_det = 0.0;
    double l_ma = 0.0;
    bool has_ma = false;
};

BatchLosses run_batch(Model& master, std::vector<Model>& clones,
                      const std::vector<StepSample>& samples, double lambda_reg,
                      double grl_scale, int threads) {
    const int count = static_cast<int>(samples.size());
    const double loss_scale = 1.0 / count;
    const int workers = std::min(threads, count);

    std::vector<Model::StepLosses> results(static_cast<std::size_t>(count));
    master.zero_grad();

    auto work = [&](Model& model, int worker_index) {
        for (int i = worker_index; i < count; i += workers) {
            const StepSample& s = samples[static_cast<std::size_t>(i)];
            results[static_cast<std::size_t>(i)] =
                model.train_step(s.input, s.targets, s.has_map ? &s.map : nullptr, lambda_reg,
                                 grl_scale, loss_scale);
        }
    };

    if (workers <= 1) {
        work(master, 0);
    } else {
        for (int t = 1; t < workers; ++t) {
            sync_clone(master, clones[static_cast<std::size_t>(t - 1)]);
            clones[static_cast<std::size_t>(t - 1)].zero_grad();
        }
        std::vector<std::thread> pool;
        for (int t = 1; t < workers; ++t)
            pool.emplace_back(work, std::ref(clones[static_cast<std::size_t>(t - 1)]), t);
        work(master, 0);
        for (std::thread& th : pool) th.join();
        for (int t = 1; t < workers; ++t) reduce_clone_grads(master, clones[static_cast<std::size_t>(t - 1)]);
    }

    BatchLosses losses;
    for (int i = 0; i < count; ++i) {
        losses.l_det += results[static_cast<std::size_t>(i)].det.total;
        if (results[static_cast<std::size_t>(i)].has_ma) {
            losses.l_ma += results[static_cast<std::size_t>(i)].l_ma;
            losses.has_ma = true;
        }
    }
    losses.l_det /= count;
    if (losses.has_ma) losses.l_ma /= count;
    return losses;
}

std::vector<DetectionSet> infer_set(Model& master, const std::vector<PairedSample>& test_set,
                                    bool use_ir, const DetConfig& det, int threads) {
    const int count = static_cast<int>(test_set.size());
    std::vector<DetectionSet> preds(static_cast<std::size_t>(count));
    const int workers = std::max(1, std::min(threads, count));

    auto work = [&](Model& model, int worker_index) {
        for (int i = worker_index; i < count; i += workers) {
            const PairedSample& sample = test_set[static_cast<std::size_t>(i)];
            preds[static_cast<std::size_t>(i)] =
                model.infer(use_ir ? sample.image_f : sample.image_g, det.score_threshold,
                            det.nms_iou, sample.gt.image_id);
        }
    };

    if (workers <= 1) {
        work(master, 0);
    } else {
        std::vector<Model> clones(static_cast<std::size_t>(workers - 1), master);
        std::vector<std::thread> pool;
        for (int t = 1; t < workers; ++t)
            pool.emplace_back(work, std::ref(clones[static_cast<std::size_t>(t - 1)]), t);
        work(master, 0);
        for (std::thread& th : pool) th.join();
    }
    return preds;
}

} // namespace

LoadedDataset load_dataset(const ExperimentConfig& config) {
    LoadedDataset data;
    if (config.dataset.type == DatasetConfig::Type::synthetic) {
        const SyntheticDatasetConfig& synth = config.dataset.synthetic;
        data.train = generate_dataset(synth.scene, 0, synth.train_size);
        data.test = generate_dataset(synth.scene, kTestIndexBase, synth.test_size);
        data.num_classes = synth.scene.num_classes;
    } else {
        const CocoDatasetConfig& coco = config.dataset.coco;
        CocoLoadOptions train_options{coco.root, coco.train_annotations, coco.pairing,
                                      coco.resize_h, coco.resize_w};
        CocoLoadOptions test_options{coco.root, coco.test_annotations, coco.pairing,
                                     coco.resize_h, coco.resize_w};
        CocoDataset train = load_coco_pairs(train_options);
        CocoDataset test = load_coco_pairs(test_options);
        data.train = std::move(train.samples);
        data.test = std::move(test.samples);
        data.num_classes = std::max(train.num_classes, test.num_classes);
    }
    if (data.train.empty() || data.test.empty())
        throw std::runtime_error("dataset is empty after loading");
    return data;
}

EvalReport run_eval(Model& model, const std::vector<PairedSample>& test_set,
                    const DetConfig& det, EvalModality modality, int threads,
                    std::vector<DetectionSet>* out_rgb, std::vector<DetectionSet>* out_ir) {
    std::vector<DetectionSet> gts;
    gts.reserve(test_set.size());
    for (const PairedSample& sample : test_set) gts.push_back(sample.gt);

    std::optional<std::vector<DetectionSet>> rgb, ir;
    if (modality == EvalModality::rgb || modality == EvalModality::both_separately)
        rgb = infer_set(model, test_set, /*use_ir=*/false, det, threads);
    if (modality == EvalModality::ir || modality == EvalModality::both_separately)
        ir = infer_set(model, test_set, /*use_ir=*/true, det, threads);
    const EvalReport report = build_report(rgb ? &*rgb : nullptr, ir ? &*ir : nullptr, gts);
    if (out_rgb && rgb) *out_rgb = std::move(*rgb);
    if (out_ir && ir) *out_ir = std::move(*ir);
    return report;
}

std::pair<Model, ExperimentConfig> model_from_checkpoint(const std::string& checkpoint_path) {
    const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
    const ModelConfig model_config = model_config_from_json(checkpoint.meta.at("model"));
    Model model(model_config);
    restore_params(checkpoint, model.params());
    ExperimentConfig experiment = ExperimentConfig::from_json(checkpoint.meta.at("experiment"));
    return {std::move(model), std::move(experiment)};
}

EvalReport run_eval_checkpoint(const std::string& checkpoint_path,
                               const std::vector<PairedSample>& test_set,
                               EvalModality modality, int threads) {
    auto [model, experiment] = model_from_checkpoint(checkpoint_path);
    if (!test_set.empty()) {
        const Image& probe = test_set.front().image_g;
        if (probe.height != model.config().image_h || probe.width != model.config().image_w)
            throw std::runtime_error("checkpoint/dataset mismatch: model expects " +
                                     std::to_string(model.config().image_h) + "x" +
                                     std::to_string(model.config().image_w) + " images, got " +
                                     std::to_string(probe.height) + "x" + std::to_string(probe.width));
    }
    return run_eval(model, test_set, experiment.det, modality, threads);
}

TrainOutcome run_training(const ExperimentConfig& config, const std::string& out_dir,
                          const LoadedDataset* shared_dataset) {
    config.validate();

    LoadedDataset local_dataset;
    const LoadedDataset* data = shared_dataset;
    if (!data) {
        local_dataset = load_dataset(config);
        data = &local_dataset;
    }

    ModelConfig model_config;
    model_config.encoder = config.encoder;
    model_config.image_h = config.image_h();
    model_config.image_w = config.image_w();
    model_config.num_classes = data->num_classes;

    Model model(model_config);
    model.init(config.seed);
    nn::AdamW optimizer(model.params(), config.optimizer.lr, config.optimizer.weight_decay);

    const int threads = std::max(1, config.threads);
    std::vector<Model> clones(static_cast<std::size_t>(threads - 1), model);

    Rng shuffle_rng = Rng::stream(config.seed, "shuffle");
    Rng regime_rng = Rng::stream(config.seed, "regime");
    Rng mask_rng = Rng::stream(config.seed, "mask");
    RhoPolicy rho_policy = config.has_rho_policy
                               ? config.rho_policy.build(hash_combine(config.seed, hash64("rho")))
                               : RhoPolicy::make_fixed(0.5);

    const bool uses_mosaic = config.regime == Regime::mipa || config.regime == Regime::mipa_ma;
    const bool uses_ma = config.regime == Regime::mipa_ma;
    GrlGate gate;
    if (uses_ma) gate.gamma = config.ma.gamma;

    const int train_count = static_cast<int>(data->train.size());
    const int steps_per_epoch = (train_count + config.batch_size - 1) / config.batch_size;
    const long total_steps = static_cast<long>(steps_per_epoch) * config.epochs;
    const int grid_h = model.encoder().grid_h();
    const int grid_w = model.encoder().grid_w();
    const int final_h = model.encoder().final_grid_h();
    const int final_w = model.encoder().final_grid_w();
    const int patch_count = grid_h * grid_w;

    TrainOutcome outcome;
    std::string best_path;
    double best_ap50 = -1.0;
    bool have_report = false;

    std::vector<int> order(static_cast<std::size_t>(train_count));
    for (int i = 0; i < train_count; ++i) order[static_cast<std::size_t>(i)] = i;

    long global_step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with the dedicated stream.
        for (int i = train_count - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        for (int start = 0; start < train_count; start += config.batch_size) {
            const int batch = std::min(config.batch_size, train_count - start);
            const double progress = static_cast<double>(global_step) / static_cast<double>(total_steps);
            if (uses_ma) gate.update(progress);

            double rho = std::numeric_limits<double>::quiet_NaN();
            if (uses_mosaic) rho = rho_policy.next_rho();

            std::vector<StepSample> samples(static_cast<std::size_t>(batch));
            for (int b = 0; b < batch; ++b) {
                const PairedSample& pair = data->train[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
                StepSample& s = samples[static_cast<std::size_t>(b)];
                switch (config.regime) {
                    case Regime::rgb_only:
                        s.input = patchify(pair.image_g, config.encoder.patch_size);
                        break;
                    case Regime::ir_only:
                        s.input = patchify(pair.image_f, config.encoder.patch_size);
                        break;
                    case Regime::both: {
                        const bool use_ir = regime_rng.uniform() < config.both_rho;
                        s.input = patchify(use_ir ? pair.image_f : pair.image_g, config.encoder.patch_size);
                        break;
                    }
                    case Regime::mipa:
                    case Regime::mipa_ma: {
                        const ModalityMask mask = sample_mask(patch_count, rho, mask_rng.next_u64());
                        s.input = mix(patchify(pair.image_f, config.encoder.patch_size),
                                      patchify(pair.image_g, config.encoder.patch_size), mask);
                        if (uses_ma) {
                            s.map = modality_map_from_mask(mask, grid_h, grid_w);
                            s.has_map = true;
                        }
                        break;
                    }
                }
                s.targets = assign_targets(pair.gt, final_h, final_w, model_config.num_classes);
            }

            const double grl_scale = uses_ma ? -gate.lambda_ma : 0.0;
            const BatchLosses losses =
                run_batch(model, clones, samples, config.det.lambda_reg, grl_scale, threads);

            const double l_total = total_loss(losses.l_det, losses.has_ma ? losses.l_ma : 0.0,
                                              uses_ma ? gate.lambda_ma : 0.0);
            if (!std::isfinite(l_total))
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                         " step " + std::to_string(global_step));
            optimizer.step();

            if (global_step % config.log_every == 0) {
                MetricsRecord record;
                record.epoch = epoch;
                record.step = global_step;
                record.progress = progress;
                record.l_det = losses.l_det;
                record.l_total = l_total;
                if (uses_ma) {
                    record.l_ma = losses.l_ma;
                    record.lambda_ma = gate.lambda_ma;
                }
                if (uses_mosaic) record.rho = rho;
                outcome.log.add(record);
            }
            ++global_step;
        }

        rho_policy.advance_epoch();

        if ((epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs) {
            const EvalReport report =
                run_eval(model, data->test, config.det, EvalModality::both_separately, threads);
            MetricsRecord record;
            record.epoch = epoch;
            record.step = global_step - 1;
            record.progress = static_cast<double>(global_step) / static_cast<double>(total_steps);
            record.set_eval(report);
            outcome.log.add(record);

            outcome.final_report = report;
            have_report = true;
            if (report.average.ap50 > best_ap50) {
                best_ap50 = report.average.ap50;
                if (!out_dir.empty()) {
                    fs::create_directories(out_dir);
                    best_path = (fs::path(out_dir) / "checkpoint_best.bin").string();
                    save_checkpoint(best_path,
                                    json{{"model", model_config_to_json(model_config)},
                                         {"experiment", config.to_json()},
                                         {"epoch", epoch},
                                         {"ap50_avg", report.average.ap50}},
                                    model.params());
                }
            }
        }
    }

    if (!have_report)
        outcome.final_report =
            run_eval(model, data->test, config.det, EvalModality::both_separately, threads);
    outcome.best_ap50_avg = best_ap50 < 0.0 ? outcome.final_report.average.ap50 : best_ap50;
    outcome.best_checkpoint_path = best_path;

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        outcome.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
        save_checkpoint(outcome.checkpoint_path,
                        json{{"model", model_config_to_json(model_config)},
                             {"experiment", config.to_json()},
                             {"epoch", config.epochs - 1},
                             {"ap50_avg", outcome.final_report.average.ap50}},
                        model.params());
        outcome.log.write_csv((fs::path(out_dir) / "metrics.csv").string());
        std::ofstream report_out(fs::path(out_dir) / "report.json");
        report_out << outcome.final_report.to_json() << '\n';

        std::vector<DetectionSet> preds_rgb, preds_ir;
        run_eval(model, data->test, config.det, EvalModality::both_separately, threads, &preds_rgb,
                 &preds_ir);
        write_prediction_dump((fs::path(out_dir) / "predictions_rgb.txt").string(), preds_rgb);
        write_prediction_dump((fs::path(out_dir) / "predictions_ir.txt").string(), preds_ir);

        LineSeries loss_curve{"l_det", {}, {}}, ma_curve{"l_ma", {}, {}};
        LineSeries ap_rgb{"ap50_rgb", {}, {}}, ap_ir{"ap50_ir", {}, {}}, ap_avg{"ap50_avg", {}, {}};
        for (const MetricsRecord& r : outcome.log.records()) {
            if (r.has_eval) {
                ap_rgb.xs.push_back(r.epoch);
                ap_rgb.ys.push_back(r.ap50_rgb);
                ap_ir.xs.push_back(r.epoch);
                ap_ir.ys.push_back(r.ap50_ir);
                ap_avg.xs.push_back(r.epoch);
                ap_avg.ys.push_back(r.ap50_avg);
            } else {
                loss_curve.xs.push_back(static_cast<double>(r.step));
                loss_curve.ys.push_back(r.l_det);
                if (std::isfinite(r.l_ma)) {
                    ma_curve.xs.push_back(static_cast<double>(r.step));
                    ma_curve.ys.push_back(r.l_ma);
                }
            }
        }
        std::vector<LineSeries> losses{loss_curve};
        if (!ma_curve.xs.empty()) losses.push_back(ma_curve);
        write_line_svg((fs::path(out_dir) / "loss_curve.svg").string(), "training losses", losses,
                       "step", "loss");
        write_line_svg((fs::path(out_dir) / "ap50_curve.svg").string(), "AP50 per modality",
                       {ap_rgb, ap_ir, ap_avg}, "epoch", "AP50");
    }
    return outcome;
}

double GridCell::mean(double ModalityMetrics::*field, bool rgb, bool ir) const {
    if (per_seed.empty()) return 0.0;
    double sum = 0.0;
    for (const EvalReport& report : per_seed) {
        const ModalityMetrics& m = rgb ? (report.rgb ? *report.rgb : report.average)
                                       : ir ? (report.ir ? *report.ir : report.average)
                                            : report.average;
        sum += m.*field;
    }
    return sum / per_seed.size();
}

double GridCell::stddev(double ModalityMetrics::*field, bool rgb, bool ir) const {
    if (per_seed.size() < 2) return 0.0;
    const double mu = mean(field, rgb, ir);
    double sum = 0.0;
    for (const EvalReport& report : per_seed) {
        const ModalityMetrics& m = rgb ? (report.rgb ? *report.rgb : report.average)
                                       : ir ? (report.ir ? *report.ir : report.average)
                                            : report.average;
        sum += (m.*field - mu) * (m.*field - mu);
    }
    return std::sqrt(sum / (per_seed.size() - 1));
}

GridResult run_ablation_grid(const ExperimentConfig& base, const GridAxes& grid,
                             const std::vector<std::uint64_t>& seeds,
                             const std::string& out_dir) {
    if (seeds.empty()) throw std::invalid_argument("run_ablation_grid: need at least one seed");

    // Cartesian product over the axes; an empty grid keeps the base config.
    std::vector<std::vector<std::pair<std::string, json>>> points{{}};
    for (const auto& [key, values] : grid) {
        if (values.empty()) throw std::invalid_argument("run_ablation_grid: axis '" + key + "' is empty");
        std::vector<std::vector<std::pair<std::string, json>>> expanded;
        for (const auto& point : points)
            for (const json& value : values) {
                auto next = point;
                next.emplace_back(key, value);
                expanded.push_back(std::move(next));
            }
        points = std::move(expanded);
    }

    GridResult result;
    for (const auto& point : points) {
        GridCell cell;
        cell.assignments = point;
        std::string label;
        for (const auto& [key, value] : point) {
            if (!label.empty()) label += ',';
            label += key + "=" + value.dump();
        }
        if (label.empty()) label = "base";
        cell.label = label;

        for (const std::uint64_t seed : seeds) {
            try {
                json config_json = base.to_json();
                for (const auto& [key, value] : point) apply_override(config_json, key + "=" + value.dump());
                config_json["seed"] = seed;
                ExperimentConfig config = ExperimentConfig::from_json(config_json);
                config.validate();

                std::string run_dir;
                if (!out_dir.empty()) {
                    std::string safe = cell.label;
                    for (char& ch : safe)
                        if (ch == '/' || ch == ',' || ch == '=' || ch == '[' || ch == ']' || ch == '"' ||
                            ch == ' ')
                            ch = '_';
                    run_dir = (fs::path(out_dir) / ("run_" + safe + "_seed" + std::to_string(seed))).string();
                }
                const TrainOutcome outcome = run_training(config, run_dir);
                cell.per_seed.push_back(outcome.final_report);
            } catch (const std::exception& err) {
                cell.failed = true;
                cell.error = err.what();
            }
        }
        if (cell.per_seed.empty()) cell.failed = true;
        result.cells.push_back(std::move(cell));
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        result.csv_path = (fs::path(out_dir) / "grid.csv").string();
        std::ofstream csv(result.csv_path);
        csv << "label,status,seeds,ap50_rgb_mean,ap50_rgb_std,ap50_ir_mean,ap50_ir_std,"
               "ap50_avg_mean,ap50_avg_std,ap75_avg_mean,ap75_avg_std,ap_avg_mean,ap_avg_std\n";
        csv.precision(10);
        for (const GridCell& cell : result.cells) {
            csv << '"' << cell.label << '"' << ',' << (cell.failed ? "failed" : "ok") << ','
                << cell.per_seed.size() << ',' << cell.mean(&ModalityMetrics::ap50, true, false) << ','
                << cell.stddev(&ModalityMetrics::ap50, true, false) << ','
                << cell.mean(&ModalityMetrics::ap50, false, true) << ','
                << cell.stddev(&ModalityMetrics::ap50, false, true) << ','
                << cell.mean(&ModalityMetrics::ap50, false, false) << ','
                << cell.stddev(&ModalityMetrics::ap50, false, false) << ','
                << cell.mean(&ModalityMetrics::ap75, false, false) << ','
                << cell.stddev(&ModalityMetrics::ap75, false, false) << ','
                << cell.mean(&ModalityMetrics::ap, false, false) << ','
                << cell.stddev(&ModalityMetrics::ap, false, false) << '\n';
        }

        std::vector<std::string> categories;
        BarSeries rgb{"AP50 RGB", {}, {}}, ir{"AP50 IR", {}, {}}, avg{"AP50 avg", {}, {}};
        for (const GridCell& cell : result.cells) {
            categories.push_back(cell.label);
            rgb.values.push_back(cell.mean(&ModalityMetrics::ap50, true, false));
            rgb.errors.push_back(cell.stddev(&ModalityMetrics::ap50, true, false));
            ir.values.push_back(cell.mean(&ModalityMetrics::ap50, false, true));
            ir.errors.push_back(cell.stddev(&ModalityMetrics::ap50, false, true));
            avg.values.push_back(cell.mean(&ModalityMetrics::ap50, false, false));
            avg.errors.push_back(cell.stddev(&ModalityMetrics::ap50, false, false));
        }
        write_grouped_bar_svg((fs::path(out_dir) / "ap50_by_modality.svg").string(),
                              "AP50 per modality", categories, {rgb, ir, avg}, "AP50");
        write_grouped_bar_svg((fs::path(out_dir) / "ap50_average.svg").string(),
                              "Modality-average AP50", categories, {avg}, "AP50");
    }
    return result;
}

} // namespace mipa
