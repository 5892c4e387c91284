#include "egopose/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "egopose/check.hpp"
#include "egopose/checkpoint.hpp"
#include "egopose/kernels.hpp"
#include "egopose/optimizer.hpp"
#include "egopose/plot.hpp"

namespace egopose {

namespace {

using nlohmann::json;

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

json model_to_json(const PoseModelConfig& m) {
  json j;
  j["input_resolution"] = m.heatmap.input_resolution;
  j["heatmap_resolution"] = m.heatmap.heatmap_resolution;
  j["num_joints"] = m.heatmap.num_joints;
  j["encoder_channels"] = m.heatmap.encoder_channels;
  j["decoder_channels"] = m.heatmap.decoder_channels;
  j["embed_dim"] = m.embedder.embed_dim;
  j["embed_channels"] = m.embedder.channels;
  j["embedder_layernorm"] = m.embedder.layernorm;
  j["static_channels"] = m.backbone.channels;
  j["backbone_train_last_only"] = m.backbone.train_last_stage_only;
  j["model_dim"] = m.temporal.model_dim;
  j["num_blocks"] = m.temporal.num_blocks;
  j["num_local_blocks"] = m.temporal.num_local_blocks;
  j["window_w"] = m.temporal.window_w;
  j["temporal_heads"] = m.temporal.num_heads;
  j["ffn_multiplier"] = m.temporal.ffn_multiplier;
  j["temporal_frozen"] = m.temporal.frozen;
  j["literal_block"] = m.temporal.literal_block;
  j["decoder_layers"] = m.decoder.num_layers;
  j["decoder_heads"] = m.decoder.num_heads;
  j["decoder_ffn_multiplier"] = m.decoder.ffn_multiplier;
  j["dropout"] = m.decoder.dropout;
  j["output_scale"] = m.decoder.output_scale;
  return j;
}

PoseModelConfig model_from_json(const json& j) {
  PoseModelConfig m;
  m.heatmap.input_resolution = j.at("input_resolution").get<int>();
  m.heatmap.heatmap_resolution = j.at("heatmap_resolution").get<int>();
  m.heatmap.num_joints = j.at("num_joints").get<int>();
  m.heatmap.encoder_channels = j.at("encoder_channels").get<std::vector<int64_t>>();
  m.heatmap.decoder_channels = j.at("decoder_channels").get<int64_t>();
  m.embedder.embed_dim = j.at("embed_dim").get<int64_t>();
  m.embedder.channels = j.at("embed_channels").get<std::vector<int64_t>>();
  m.embedder.layernorm = j.at("embedder_layernorm").get<bool>();
  m.backbone.channels = j.at("static_channels").get<std::vector<int64_t>>();
  m.backbone.train_last_stage_only = j.at("backbone_train_last_only").get<bool>();
  m.backbone.model_dim = j.at("model_dim").get<int64_t>();
  m.temporal.model_dim = m.backbone.model_dim;
  m.temporal.num_blocks = j.at("num_blocks").get<int>();
  m.temporal.num_local_blocks = j.at("num_local_blocks").get<int>();
  m.temporal.window_w = j.at("window_w").get<int>();
  m.temporal.num_heads = j.at("temporal_heads").get<int>();
  m.temporal.ffn_multiplier = j.at("ffn_multiplier").get<int>();
  m.temporal.frozen = j.at("temporal_frozen").get<bool>();
  m.temporal.literal_block = j.at("literal_block").get<bool>();
  m.decoder.num_joints = m.heatmap.num_joints;
  m.decoder.token_dim = m.embedder.embed_dim;
  m.decoder.motion_dim = m.temporal.model_dim;
  m.decoder.num_layers = j.at("decoder_layers").get<int>();
  m.decoder.num_heads = j.at("decoder_heads").get<int>();
  m.decoder.ffn_multiplier = j.value("decoder_ffn_multiplier", 4);
  m.decoder.dropout = j.at("dropout").get<float>();
  m.decoder.output_scale = j.at("output_scale").get<float>();
  return m;
}

class JsonlLogger {
 public:
  explicit JsonlLogger(const std::filesystem::path& path) : out_(path) {
    EGOPOSE_CHECK(out_.good(), "cannot open log file: " + path.string());
  }
  void log(const json& obj) {
    const std::string line = obj.dump();
    out_ << line << "\n";
    out_.flush();
    std::cout << line << "\n";
  }

 private:
  std::ofstream out_;
};

struct LoadedDataset {
  DatasetIndex index;
  std::vector<SequenceRecord> records;  // aligned with index.records
};

LoadedDataset load_split_records(const std::filesystem::path& data_root) {
  LoadedDataset ds;
  ds.index = load_index(data_root);
  ds.records.reserve(ds.index.records.size());
  for (size_t i = 0; i < ds.index.records.size(); ++i) {
    ds.records.push_back(load_record(ds.index.record_path(static_cast<int>(i))));
  }
  return ds;
}

void check_finite_loss(double loss, const std::string& stage, int epoch, int step) {
  if (!std::isfinite(loss)) {
    throw std::runtime_error("training aborted: non-finite loss " + std::to_string(loss) +
                             " at stage=" + stage + " epoch=" + std::to_string(epoch) +
                             " step=" + std::to_string(step) +
                             " (check learning rate and data normalization)");
  }
}

int completed_epochs_of(const Checkpoint& ck) {
  const json j = json::parse(ck.config_json);
  return j.value("completed_epochs", 0);
}

json experiment_json_with(const ExperimentConfig& cfg, int completed_epochs, bool frozen) {
  json j = json::parse(cfg.to_json());
  j["completed_epochs"] = completed_epochs;
  j["frozen"] = frozen;
  return j;
}

/// Heatmap targets for one record frame, as a float (J,hm,hm) block.
void rasterized_target(const SequenceRecord& rec, int frame, int hm_res, double sigma,
                       float* dst) {
  const HeatmapStack hs = rasterize_heatmaps(rec.keypoints[frame], hm_res, hm_res, sigma,
                                             rec.width, rec.height);
  for (size_t i = 0; i < hs.maps.size(); ++i) dst[i] = static_cast<float>(hs.maps[i]);
}

struct HeatmapBatchSource {
  const LoadedDataset& ds;
  std::vector<std::pair<int, int>> samples;  // (record, frame)
  int input_res, hm_res, joints;
  double sigma;
  std::vector<Tensor> normalized;  // per record (T,3,res,res)

  HeatmapBatchSource(const LoadedDataset& dataset, const ExperimentConfig& cfg)
      : ds(dataset),
        input_res(cfg.model.heatmap.input_resolution),
        hm_res(cfg.model.heatmap.heatmap_resolution),
        joints(cfg.model.heatmap.num_joints),
        sigma(cfg.heatmap_sigma) {
    normalized.resize(ds.records.size());
    for (int ri : ds.index.split_indices("train")) {
      const SequenceRecord& rec = ds.records[ri];
      EGOPOSE_CHECK(rec.poses.poses.at(0).num_joints() == joints,
                    "dataset joints do not match the model configuration");
      normalized[ri] = normalize_frames(rec.frames.data(), rec.num_frames(), rec.height,
                                        rec.width, input_res, ds.index.channel_mean,
                                        ds.index.channel_std);
      for (int f = 0; f < rec.num_frames(); ++f) samples.emplace_back(ri, f);
    }
    EGOPOSE_CHECK(!samples.empty(), "no training frames found in dataset");
  }

  void fill(const std::vector<std::pair<int, int>>& batch, Tensor& frames, Tensor& targets) const {
    const int64_t n = static_cast<int64_t>(batch.size());
    const int64_t frame_elems = 3LL * input_res * input_res;
    const int64_t target_elems = static_cast<int64_t>(joints) * hm_res * hm_res;
    frames = Tensor({n, 3, input_res, input_res});
    targets = Tensor({n, joints, hm_res, hm_res});
    for (int64_t i = 0; i < n; ++i) {
      const auto& [ri, f] = batch[i];
      std::memcpy(frames.data() + i * frame_elems,
                  normalized[ri].data() + static_cast<int64_t>(f) * frame_elems,
                  sizeof(float) * static_cast<size_t>(frame_elems));
      rasterized_target(ds.records[ri], f, hm_res, sigma, targets.data() + i * target_elems);
    }
  }
};

struct PoseBatchSource {
  const LoadedDataset& ds;
  std::vector<std::pair<int, WindowSpan>> windows;  // (record, span)
  int input_res;
  int window_len;

  PoseBatchSource(const LoadedDataset& dataset, const ExperimentConfig& cfg)
      : ds(dataset), input_res(cfg.model.heatmap.input_resolution), window_len(cfg.window.length) {
    for (int ri : ds.index.split_indices("train")) {
      for (const WindowSpan& span : sliding_windows(ds.records[ri].num_frames(), cfg.window)) {
        windows.emplace_back(ri, span);
      }
    }
    EGOPOSE_CHECK(!windows.empty(), "no training windows found in dataset");
  }

  void fill(const std::vector<std::pair<int, WindowSpan>>& batch, Tensor& frames, Tensor& poses,
            Tensor& valid) const {
    const int64_t b = static_cast<int64_t>(batch.size());
    const int64_t t = window_len;
    const int j = ds.index.topology.num_joints();
    frames = Tensor({b, t, 3, input_res, input_res});
    poses = Tensor({b, t, j, 3});
    valid = Tensor({b, t});
    for (int64_t i = 0; i < b; ++i) {
      const auto& [ri, span] = batch[i];
      const WindowTensors wt = load_window(ds.records[ri], span, window_len, input_res,
                                           ds.index.channel_mean, ds.index.channel_std);
      std::memcpy(frames.data() + i * wt.frames.numel(), wt.frames.data(),
                  sizeof(float) * static_cast<size_t>(wt.frames.numel()));
      std::memcpy(poses.data() + i * wt.poses.numel(), wt.poses.data(),
                  sizeof(float) * static_cast<size_t>(wt.poses.numel()));
      std::memcpy(valid.data() + i * t, wt.valid.data(), sizeof(float) * static_cast<size_t>(t));
    }
  }
};

template <typename Sample>
std::vector<Sample> epoch_order(const std::vector<Sample>& samples, uint64_t seed, int epoch) {
  std::vector<Sample> order = samples;
  std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(epoch) + 17));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

void ExperimentConfig::validate() const {
  EGOPOSE_CHECK(stage == "heatmap" || stage == "pose", "config: stage must be heatmap|pose");
  EGOPOSE_CHECK(epochs >= 1, "config: epochs must be >= 1");
  EGOPOSE_CHECK(batch_size >= 1, "config: batch_size must be >= 1");
  EGOPOSE_CHECK(lr_end <= lr_start, "config: lr_end must not exceed lr_start");
  EGOPOSE_CHECK(schedule == "cosine", "config: only cosine schedule is supported");
  EGOPOSE_CHECK(heatmap_loss == "sigmoid_xent" || heatmap_loss == "mse",
                "config: heatmap_loss must be sigmoid_xent|mse");
  EGOPOSE_CHECK(loss_weights.pos >= 0 && loss_weights.bone >= 0 && loss_weights.cos >= 0,
                "config: loss weights must be non-negative");
  window.validate();
  fusion_mode();  // rejects unknown ablation names
  model.validate();
}

FusionMode ExperimentConfig::fusion_mode() const { return fusion_mode_from_name(ablation); }

std::string ExperimentConfig::to_json() const {
  json j;
  j["stage"] = stage;
  j["seed"] = seed;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr_start"] = lr_start;
  j["lr_end"] = lr_end;
  j["schedule"] = schedule;
  j["grad_clip_norm"] = grad_clip_norm;
  j["window"] = {{"length", window.length}, {"stride", window.stride}};
  j["loss_weights"] = {{"pos", loss_weights.pos},
                       {"bone", loss_weights.bone},
                       {"cos", loss_weights.cos}};
  j["heatmap_loss"] = heatmap_loss;
  j["ablation"] = ablation;
  j["heatmap_sigma"] = heatmap_sigma;
  j["model"] = model_to_json(model);
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig c;
  c.stage = j.value("stage", c.stage);
  c.seed = j.value("seed", c.seed);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_start = j.value("lr_start", c.lr_start);
  c.lr_end = j.value("lr_end", c.lr_end);
  c.schedule = j.value("schedule", c.schedule);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  if (j.contains("window")) {
    c.window.length = j.at("window").value("length", c.window.length);
    c.window.stride = j.at("window").value("stride", c.window.stride);
  }
  if (j.contains("loss_weights")) {
    c.loss_weights.pos = j.at("loss_weights").value("pos", c.loss_weights.pos);
    c.loss_weights.bone = j.at("loss_weights").value("bone", c.loss_weights.bone);
    c.loss_weights.cos = j.at("loss_weights").value("cos", c.loss_weights.cos);
  }
  c.heatmap_loss = j.value("heatmap_loss", c.heatmap_loss);
  c.ablation = j.value("ablation", c.ablation);
  c.heatmap_sigma = j.value("heatmap_sigma", c.heatmap_sigma);
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  json j;
  if (file) {
    std::ifstream in(*file);
    EGOPOSE_CHECK(in.good(), "cannot open config file: " + file->string());
    in >> j;
  } else {
    j = json::parse(ExperimentConfig{}.to_json());
  }
  for (const auto& [key, value] : overrides) {
    json* cursor = &j;
    std::istringstream parts(key);
    std::string part;
    std::vector<std::string> path;
    while (std::getline(parts, part, '.')) path.push_back(part);
    EGOPOSE_CHECK(!path.empty(), "override: empty key");
    for (size_t i = 0; i + 1 < path.size(); ++i) cursor = &(*cursor)[path[i]];
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;  // plain string
    }
    (*cursor)[path.back()] = parsed;
  }
  return ExperimentConfig::from_json(j.dump());
}

TrainResult train_heatmap(const ExperimentConfig& cfg, const std::filesystem::path& data_root,
                          const std::filesystem::path& out_dir,
                          const std::optional<std::filesystem::path>& resume_from,
                          std::optional<int> stop_after_epoch) {
  cfg.validate();
  EGOPOSE_CHECK(cfg.stage == "heatmap", "train_heatmap: config stage must be 'heatmap'");
  std::filesystem::create_directories(out_dir);

  const LoadedDataset ds = load_split_records(data_root);
  HeatmapBatchSource source(ds, cfg);

  std::mt19937_64 init_rng(mix_seed(cfg.seed, 0));
  HeatmapNetwork net;
  net.init(cfg.model.heatmap, init_rng);
  nn::ParamCollector collector;
  net.collect("heatmap", collector);

  Adam adam;
  int start_epoch = 0;
  if (resume_from) {
    const Checkpoint ck = Checkpoint::load(*resume_from);
    EGOPOSE_CHECK(ck.kind == "heatmap", "resume: checkpoint is not a heatmap checkpoint");
    ck.restore_params(collector);
    adam.import_state(ck.arrays);
    start_epoch = completed_epochs_of(ck);
  }

  const int64_t steps_per_epoch =
      (static_cast<int64_t>(source.samples.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = steps_per_epoch * cfg.epochs;

  TrainResult result;
  result.log_path = out_dir / "train_heatmap.jsonl";
  result.checkpoint_path = out_dir / "heatmap.ckpt";
  JsonlLogger logger(result.log_path);
  logger.log({{"event", "start"},
              {"stage", "heatmap"},
              {"samples", source.samples.size()},
              {"steps_per_epoch", steps_per_epoch},
              {"loss", cfg.heatmap_loss},
              {"kernels", kernels::isa_name(kernels::active_isa())},
              {"seed", cfg.seed}});

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(source.samples, cfg.seed, epoch);
    double epoch_loss = 0.0;
    double first_lr = 0.0;
    int64_t step_in_epoch = 0;
    for (size_t off = 0; off < order.size(); off += cfg.batch_size) {
      const std::vector<std::pair<int, int>> batch(
          order.begin() + off,
          order.begin() + std::min(order.size(), off + cfg.batch_size));
      Tensor frames, targets;
      source.fill(batch, frames, targets);

      const int64_t global_step = epoch * steps_per_epoch + step_in_epoch;
      const double lr = cosine_lr(global_step, total_steps, cfg.lr_start, cfg.lr_end);
      if (step_in_epoch == 0) first_lr = lr;

      Adam::zero_grad(collector.params);
      ag::Var logits = net.forward(ag::Var(std::move(frames)));
      ag::Var loss = cfg.heatmap_loss == "mse" ? heatmap_mse_loss(logits, targets)
                                               : heatmap_xent_loss(logits, targets);
      const double loss_v = loss.val().item();
      check_finite_loss(loss_v, "heatmap", epoch, static_cast<int>(step_in_epoch));
      ag::backward(loss);
      Adam::clip_global_norm(collector.params, cfg.grad_clip_norm);
      adam.step(collector.params, lr);

      epoch_loss += loss_v * static_cast<double>(batch.size());
      ++step_in_epoch;
    }
    epoch_loss /= static_cast<double>(order.size());
    result.epoch_losses.push_back(epoch_loss);
    result.epoch_lrs.push_back(first_lr);
    logger.log({{"event", "epoch"},
                {"stage", "heatmap"},
                {"epoch", epoch},
                {"loss", epoch_loss},
                {"lr", first_lr}});

    Checkpoint ck;
    ck.kind = "heatmap";
    ck.config_json = experiment_json_with(cfg, epoch + 1, epoch + 1 == cfg.epochs).dump(2);
    ck.put_params(collector);
    adam.export_state(ck.arrays);
    ck.save(result.checkpoint_path);
    if (stop_after_epoch && epoch + 1 >= *stop_after_epoch) break;
  }

  if (start_epoch >= cfg.epochs) {
    // resume of an already finished run: re-emit the restored state
    Checkpoint ck;
    ck.kind = "heatmap";
    ck.config_json = experiment_json_with(cfg, start_epoch, true).dump(2);
    ck.put_params(collector);
    adam.export_state(ck.arrays);
    ck.save(result.checkpoint_path);
  }

  plot_line_bmp(out_dir / "heatmap_loss.bmp", result.epoch_losses);
  logger.log({{"event", "done"}, {"stage", "heatmap"}, {"epochs", cfg.epochs}});
  return result;
}

namespace {

void check_heatmap_compat(const ExperimentConfig& pose_cfg, const Checkpoint& hm_ck) {
  EGOPOSE_CHECK(hm_ck.kind == "heatmap", "train_pose: not a heatmap checkpoint");
  const ExperimentConfig hm_cfg = ExperimentConfig::from_json(hm_ck.config_json);
  const auto& a = pose_cfg.model.heatmap;
  const auto& b = hm_cfg.model.heatmap;
  EGOPOSE_CHECK(a.input_resolution == b.input_resolution &&
                    a.heatmap_resolution == b.heatmap_resolution &&
                    a.num_joints == b.num_joints && a.encoder_channels == b.encoder_channels &&
                    a.decoder_channels == b.decoder_channels,
                "train_pose: heatmap checkpoint configuration does not match the model");
  const json j = json::parse(hm_ck.config_json);
  EGOPOSE_CHECK(j.value("frozen", false),
                "train_pose: heatmap checkpoint is not marked frozen (finish stage 1 first)");
}

}  // namespace

TrainResult train_pose(const ExperimentConfig& cfg, const std::filesystem::path& data_root,
                       const std::filesystem::path& heatmap_checkpoint,
                       const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume_from,
                       std::optional<int> stop_after_epoch) {
  cfg.validate();
  EGOPOSE_CHECK(cfg.stage == "pose", "train_pose: config stage must be 'pose'");
  std::filesystem::create_directories(out_dir);

  const LoadedDataset ds = load_split_records(data_root);
  PoseBatchSource source(ds, cfg);

  PoseModelConfig model_cfg = cfg.model;
  model_cfg.fusion = cfg.fusion_mode();
  model_cfg.heatmap_frozen = true;

  std::mt19937_64 init_rng(mix_seed(cfg.seed, 1));
  PoseModel model;
  model.init(model_cfg, init_rng);

  nn::ParamCollector collector;
  model.collect(collector);

  if (model.uses_spatial()) {
    const Checkpoint hm_ck = Checkpoint::load(heatmap_checkpoint);
    check_heatmap_compat(cfg, hm_ck);
    nn::ParamCollector hm_params;
    model.heatmap.collect("heatmap", hm_params);
    hm_ck.restore_params(hm_params);
  }
  model.apply_freeze_policy();  // heatmap weights stay bit-identical from here on

  Adam adam;
  int start_epoch = 0;
  if (resume_from) {
    const Checkpoint ck = Checkpoint::load(*resume_from);
    EGOPOSE_CHECK(ck.kind == "pose", "resume: checkpoint is not a pose checkpoint");
    ck.restore_params(collector);
    adam.import_state(ck.arrays);
    start_epoch = completed_epochs_of(ck);
  }

  const int64_t steps_per_epoch =
      (static_cast<int64_t>(source.windows.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = steps_per_epoch * cfg.epochs;

  TrainResult result;
  result.log_path = out_dir / "train_pose.jsonl";
  result.checkpoint_path = out_dir / "pose.ckpt";
  JsonlLogger logger(result.log_path);
  logger.log({{"event", "start"},
              {"stage", "pose"},
              {"ablation", cfg.ablation},
              {"windows", source.windows.size()},
              {"window_length", cfg.window.length},
              {"window_stride", cfg.window.stride},
              {"kernels", kernels::isa_name(kernels::active_isa())},
              {"seed", cfg.seed}});

  const uint64_t heatmap_hash_before = params_hash(collector, "heatmap.");

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(source.windows, cfg.seed, epoch);
    std::mt19937_64 dropout_rng(mix_seed(cfg.seed, 1000 + static_cast<uint64_t>(epoch)));
    nn::Ctx ctx{true, &dropout_rng};
    double epoch_loss = 0.0;
    double first_lr = 0.0;
    int64_t step_in_epoch = 0;
    for (size_t off = 0; off < order.size(); off += cfg.batch_size) {
      const std::vector<std::pair<int, WindowSpan>> batch(
          order.begin() + off,
          order.begin() + std::min(order.size(), off + cfg.batch_size));
      Tensor frames, poses, valid;
      source.fill(batch, frames, poses, valid);

      const int64_t global_step = epoch * steps_per_epoch + step_in_epoch;
      const double lr = cosine_lr(global_step, total_steps, cfg.lr_start, cfg.lr_end);
      if (step_in_epoch == 0) first_lr = lr;

      Adam::zero_grad(collector.params);
      ag::Var pred = model.forward(ag::Var(std::move(frames)), valid, ctx);
      ag::Var loss = composite_pose_loss(pred, poses, valid, ds.index.topology, cfg.loss_weights);
      const double loss_v = loss.val().item();
      check_finite_loss(loss_v, "pose", epoch, static_cast<int>(step_in_epoch));
      ag::backward(loss);
      Adam::clip_global_norm(collector.params, cfg.grad_clip_norm);
      adam.step(collector.params, lr);

      epoch_loss += loss_v * static_cast<double>(batch.size());
      ++step_in_epoch;
    }
    epoch_loss /= static_cast<double>(order.size());
    result.epoch_losses.push_back(epoch_loss);
    result.epoch_lrs.push_back(first_lr);
    logger.log({{"event", "epoch"},
                {"stage", "pose"},
                {"epoch", epoch},
                {"loss", epoch_loss},
                {"lr", first_lr}});

    Checkpoint ck;
    ck.kind = "pose";
    ck.config_json = experiment_json_with(cfg, epoch + 1, epoch + 1 == cfg.epochs).dump(2);
    ck.put_params(collector);
    adam.export_state(ck.arrays);
    ck.save(result.checkpoint_path);
    if (stop_after_epoch && epoch + 1 >= *stop_after_epoch) break;
  }

  if (start_epoch >= cfg.epochs) {
    Checkpoint ck;
    ck.kind = "pose";
    ck.config_json = experiment_json_with(cfg, start_epoch, true).dump(2);
    ck.put_params(collector);
    adam.export_state(ck.arrays);
    ck.save(result.checkpoint_path);
  }

  EGOPOSE_CHECK(params_hash(collector, "heatmap.") == heatmap_hash_before,
                "freeze contract violated: heatmap weights changed during stage 2");

  plot_line_bmp(out_dir / "pose_loss.bmp", result.epoch_losses);
  logger.log({{"event", "done"}, {"stage", "pose"}, {"epochs", cfg.epochs}});
  return result;
}

PoseSequence predict_record(PoseModel& model, const SequenceRecord& record,
                            const WindowConfig& window, const std::array<double, 3>& mean,
                            const std::array<double, 3>& std_dev) {
  const int t = record.num_frames();
  const int j = record.poses.poses.at(0).num_joints();
  std::vector<Vec3> sums(static_cast<size_t>(t) * j, Vec3{0, 0, 0});
  std::vector<int> counts(static_cast<size_t>(t), 0);

  nn::Ctx ctx{false, nullptr};
  for (const WindowSpan& span : sliding_windows(t, window)) {
    const WindowTensors wt = load_window(record, span, window.length,
                                         model.cfg.heatmap.input_resolution, mean, std_dev);
    ag::Var frames(wt.frames.reshaped({1, window.length, 3, model.cfg.heatmap.input_resolution,
                                       model.cfg.heatmap.input_resolution}));
    const Tensor valid = wt.valid.reshaped({1, window.length});
    const ag::Var pred = model.forward(frames, valid, ctx);
    const float* p = pred.val().data();
    for (int f = 0; f < span.valid; ++f) {
      const int frame = span.start + f;
      ++counts[frame];
      for (int i = 0; i < j; ++i) {
        for (int a = 0; a < 3; ++a) {
          sums[static_cast<size_t>(frame) * j + i][a] += p[(static_cast<int64_t>(f) * j + i) * 3 + a];
        }
      }
    }
  }

  PoseSequence out;
  out.frame_rate = record.poses.frame_rate;
  out.poses.resize(static_cast<size_t>(t));
  for (int f = 0; f < t; ++f) {
    EGOPOSE_CHECK(counts[f] > 0, "predict_record: frame not covered by any window");
    out.poses[f] = Pose3D::zeros(j);
    for (int i = 0; i < j; ++i) {
      for (int a = 0; a < 3; ++a) {
        out.poses[f].joints[i][a] = sums[static_cast<size_t>(f) * j + i][a] / counts[f];
      }
    }
  }
  return out;
}

LoadedModel load_pose_model(const std::filesystem::path& pose_checkpoint) {
  const Checkpoint ck = Checkpoint::load(pose_checkpoint);
  EGOPOSE_CHECK(ck.kind == "pose", "expected a pose checkpoint: " + pose_checkpoint.string());
  LoadedModel lm;
  lm.cfg = ExperimentConfig::from_json(ck.config_json);
  PoseModelConfig model_cfg = lm.cfg.model;
  model_cfg.fusion = lm.cfg.fusion_mode();
  model_cfg.heatmap_frozen = true;
  std::mt19937_64 rng(mix_seed(lm.cfg.seed, 1));
  lm.model = std::make_unique<PoseModel>();
  lm.model->init(model_cfg, rng);
  nn::ParamCollector collector;
  lm.model->collect(collector);
  ck.restore_params(collector);
  return lm;
}

MetricReport evaluate(const std::filesystem::path& pose_checkpoint,
                      const std::filesystem::path& data_root, const std::string& split,
                      const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  LoadedModel lm = load_pose_model(pose_checkpoint);
  const LoadedDataset ds = load_split_records(data_root);
  const std::vector<int> indices = ds.index.split_indices(split);
  EGOPOSE_CHECK(!indices.empty(), "evaluate: split '" + split + "' is empty");

  std::vector<PoseSequence> preds, gts;
  for (int ri : indices) {
    preds.push_back(predict_record(*lm.model, ds.records[ri], lm.cfg.window,
                                   ds.index.channel_mean, ds.index.channel_std));
    gts.push_back(ds.records[ri].poses);
  }
  const MetricReport report = compute_metrics(preds, gts);

  std::ofstream(out_dir / "metrics.json") << report.to_json() << "\n";
  std::ofstream(out_dir / "per_joint.csv")
      << report.per_joint_csv(ds.index.topology.joint_names);
  plot_bars_bmp(out_dir / "per_joint.bmp", report.per_joint_mpjpe_mm);

  JsonlLogger logger(out_dir / "eval.jsonl");
  logger.log({{"event", "eval"},
              {"split", split},
              {"records", indices.size()},
              {"mpjpe_mm", report.mpjpe_mm},
              {"pa_mpjpe_mm", report.pa_mpjpe_mm}});
  return report;
}

std::string AblationTable::to_json() const {
  json j;
  auto dump_rows = [](const std::vector<AblationRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"name", r.name},
                     {"mpjpe_mm", r.mpjpe_mm},
                     {"pa_mpjpe_mm", r.pa_mpjpe_mm},
                     {"final_train_loss", r.final_train_loss}});
    }
    return arr;
  };
  j["fusion_table"] = dump_rows(fusion_rows);
  j["window_table"] = dump_rows(window_rows);
  return j.dump(2);
}

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "table,name,mpjpe_mm,pa_mpjpe_mm,final_train_loss\n";
  for (const auto& r : fusion_rows) {
    out << "fusion," << r.name << "," << r.mpjpe_mm << "," << r.pa_mpjpe_mm << ","
        << r.final_train_loss << "\n";
  }
  for (const auto& r : window_rows) {
    out << "window," << r.name << "," << r.mpjpe_mm << "," << r.pa_mpjpe_mm << ","
        << r.final_train_loss << "\n";
  }
  return out.str();
}

AblationTable run_ablation_suite(const ExperimentConfig& base,
                                 const std::filesystem::path& data_root,
                                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  ExperimentConfig hm_cfg = base;
  hm_cfg.stage = "heatmap";
  const TrainResult hm = train_heatmap(hm_cfg, data_root, out_dir / "heatmap");

  auto run_variant = [&](const ExperimentConfig& cfg, const std::string& name) {
    const std::filesystem::path dir = out_dir / name;
    const TrainResult tr = train_pose(cfg, data_root, hm.checkpoint_path, dir);
    const MetricReport rep = evaluate(tr.checkpoint_path, data_root, "test", dir / "eval");
    AblationRow row;
    row.name = name;
    row.mpjpe_mm = rep.mpjpe_mm;
    row.pa_mpjpe_mm = rep.pa_mpjpe_mm;
    row.final_train_loss = tr.epoch_losses.back();
    return row;
  };

  AblationTable table;
  for (const std::string name : {"full", "spatial_only", "motion_only", "concat_fusion"}) {
    ExperimentConfig cfg = base;
    cfg.stage = "pose";
    cfg.ablation = name;
    table.fusion_rows.push_back(run_variant(cfg, name));
  }
  for (const int t : {32, 64, 128}) {
    ExperimentConfig cfg = base;
    cfg.stage = "pose";
    cfg.ablation = "full";
    cfg.window = WindowConfig{t, t / 2};
    table.window_rows.push_back(run_variant(cfg, "T" + std::to_string(t)));
  }

  // capacity ordering is expected, not enforced: log it
  const double full_loss = table.fusion_rows[0].final_train_loss;
  const double concat_loss = table.fusion_rows[3].final_train_loss;
  JsonlLogger logger(out_dir / "ablation.jsonl");
  logger.log({{"event", "capacity_check"},
              {"full_train_loss", full_loss},
              {"concat_train_loss", concat_loss},
              {"full_leq_concat", full_loss <= concat_loss}});

  std::ofstream(out_dir / "ablation.json") << table.to_json() << "\n";
  std::ofstream(out_dir / "ablation.csv") << table.to_csv();
  return table;
}

}  // namespace egopose
