#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "egopose/data.hpp"
#include "egopose/losses.hpp"
#include "egopose/metrics.hpp"
#include "egopose/pose_model.hpp"

namespace egopose {

/// Everything one experiment needs: stage, optimization schedule, windowing,
/// loss weights, ablation selection, and the model dimensions.
struct ExperimentConfig {
  std::string stage = "heatmap";  // "heatmap" | "pose"
  uint64_t seed = 1;
  int epochs = 5;
  int batch_size = 4;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  std::string schedule = "cosine";
  double grad_clip_norm = 1.0;
  WindowConfig window{16, 8};
  LossWeights loss_weights{};
  std::string heatmap_loss = "sigmoid_xent";  // | "mse"
  std::string ablation = "full";  // full | spatial_only | motion_only | concat_fusion
  double heatmap_sigma = 2.0;
  PoseModelConfig model = PoseModelConfig::desk_scale();

  void validate() const;
  FusionMode fusion_mode() const;

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
};

/// Load a config file (JSON; missing path yields the desk-scale default) and
/// apply dotted-path overrides like {"model.heatmap.input_resolution", "64"}.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::pair<std::string, std::string>>& overrides);

struct TrainResult {
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;
  std::vector<double> epoch_losses;
  std::vector<double> epoch_lrs;
};

/// Stage 1: heatmap pretraining. Writes <out>/heatmap.ckpt, a JSONL log and a
/// loss-curve image. `resume_from` restores weights, optimizer state and the
/// epoch cursor from an earlier checkpoint of the same run. `stop_after_epoch`
/// ends the run early while keeping the full-length schedule, so a later
/// resume continues the exact same trajectory.
TrainResult train_heatmap(const ExperimentConfig& cfg, const std::filesystem::path& data_root,
                          const std::filesystem::path& out_dir,
                          const std::optional<std::filesystem::path>& resume_from = {},
                          std::optional<int> stop_after_epoch = {});

/// Stage 2: pose training on sliding windows, heatmap network frozen.
TrainResult train_pose(const ExperimentConfig& cfg, const std::filesystem::path& data_root,
                       const std::filesystem::path& heatmap_checkpoint,
                       const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume_from = {},
                       std::optional<int> stop_after_epoch = {});

/// Sliding-window inference over one record; overlapping window predictions
/// for the same frame are averaged.
PoseSequence predict_record(PoseModel& model, const SequenceRecord& record,
                            const WindowConfig& window, const std::array<double, 3>& mean,
                            const std::array<double, 3>& std_dev);

/// Loads a pose checkpoint and evaluates a dataset split; writes metrics.json,
/// per_joint.csv and a per-joint error chart into out_dir.
MetricReport evaluate(const std::filesystem::path& pose_checkpoint,
                      const std::filesystem::path& data_root, const std::string& split,
                      const std::filesystem::path& out_dir);

/// Builds a PoseModel from a pose checkpoint (weights restored, eval-ready).
struct LoadedModel {
  ExperimentConfig cfg;
  std::unique_ptr<PoseModel> model;
};
LoadedModel load_pose_model(const std::filesystem::path& pose_checkpoint);

struct AblationRow {
  std::string name;
  double mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  double final_train_loss = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> fusion_rows;  // full, spatial_only, motion_only, concat_fusion
  std::vector<AblationRow> window_rows;  // T in {32, 64, 128}

  std::string to_json() const;
  std::string to_csv() const;
};

/// Trains and evaluates the four fusion variants plus the window-size sweep
/// from one base config and dataset; writes ablation.json / ablation.csv.
AblationTable run_ablation_suite(const ExperimentConfig& base,
                                 const std::filesystem::path& data_root,
                                 const std::filesystem::path& out_dir);

}  // namespace egopose
