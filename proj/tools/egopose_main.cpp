#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egopose/data.hpp"
#include "egopose/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using egopose::ExperimentConfig;

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
  std::string data_root;
  std::string out_dir = "runs";
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_data = true) {
  cmd->add_option("--config", opts.config_file, "experiment config JSON (desk-scale defaults if omitted)");
  cmd->add_option("--set", opts.sets, "override config values, e.g. --set epochs=3 --set model.embed_dim=32");
  if (needs_data) {
    cmd->add_option("--data-root", opts.data_root, "dataset root (or env EGOPOSE_DATA_ROOT)");
  }
  cmd->add_option("--out", opts.out_dir, "output directory");
}

fs::path resolve_data_root(const CommonOpts& opts) {
  if (!opts.data_root.empty()) return opts.data_root;
  if (const char* env = std::getenv("EGOPOSE_DATA_ROOT")) return env;
  throw std::invalid_argument("no dataset root: pass --data-root or set EGOPOSE_DATA_ROOT");
}

ExperimentConfig resolve_config(const CommonOpts& opts, const std::string& stage) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& kv : opts.sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got: " + kv);
    }
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  std::optional<fs::path> file;
  if (!opts.config_file.empty()) file = opts.config_file;
  ExperimentConfig cfg = egopose::load_config(file, overrides);
  cfg.stage = stage;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"egopose: dual-stream egocentric 3D pose estimation"};
  app.require_subcommand(1);

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "write a synthetic dataset");
  CommonOpts gen_opts;
  egopose::GenerateConfig gen_cfg;
  add_common(gen, gen_opts);
  gen->add_option("--records", gen_cfg.num_records, "number of records");
  gen->add_option("--frames", gen_cfg.frames_per_record, "frames per record");
  gen->add_option("--image-size", gen_cfg.image_size, "square frame size in pixels");
  gen->add_option("--test-fraction", gen_cfg.test_fraction, "fraction of records held out");
  gen->add_option("--seed", gen_cfg.seed, "generator seed");

  // train-heatmap
  auto* th = app.add_subcommand("train-heatmap", "stage 1: heatmap network pretraining");
  CommonOpts th_opts;
  std::string th_resume;
  add_common(th, th_opts);
  th->add_option("--resume", th_resume, "resume from an earlier heatmap checkpoint");

  // train-pose
  auto* tp = app.add_subcommand("train-pose", "stage 2: pose training with frozen heatmaps");
  CommonOpts tp_opts;
  std::string tp_heatmap_ckpt, tp_resume;
  add_common(tp, tp_opts);
  tp->add_option("--heatmap-checkpoint", tp_heatmap_ckpt, "frozen stage-1 checkpoint")
      ->required();
  tp->add_option("--resume", tp_resume, "resume from an earlier pose checkpoint");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a pose checkpoint on a dataset split");
  CommonOpts ev_opts;
  std::string ev_ckpt, ev_split = "test";
  add_common(ev, ev_opts);
  ev->add_option("--checkpoint", ev_ckpt, "pose checkpoint")->required();
  ev->add_option("--split", ev_split, "dataset split: train|test");

  // ablate
  auto* ab = app.add_subcommand("ablate", "fusion-variant and window-size ablation suite");
  CommonOpts ab_opts;
  add_common(ab, ab_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const fs::path root = resolve_data_root(gen_opts);
      const auto index = egopose::generate_dataset(root, gen_cfg,
                                                   egopose::SkeletonTopology::default_topology());
      std::cout << "wrote " << index.records.size() << " records under " << root << "\n";
    } else if (th->parsed()) {
      const ExperimentConfig cfg = resolve_config(th_opts, "heatmap");
      std::optional<fs::path> resume;
      if (!th_resume.empty()) resume = th_resume;
      const auto result =
          egopose::train_heatmap(cfg, resolve_data_root(th_opts), th_opts.out_dir, resume);
      std::cout << "checkpoint: " << result.checkpoint_path << "\n";
    } else if (tp->parsed()) {
      const ExperimentConfig cfg = resolve_config(tp_opts, "pose");
      std::optional<fs::path> resume;
      if (!tp_resume.empty()) resume = tp_resume;
      const auto result = egopose::train_pose(cfg, resolve_data_root(tp_opts), tp_heatmap_ckpt,
                                              tp_opts.out_dir, resume);
      std::cout << "checkpoint: " << result.checkpoint_path << "\n";
    } else if (ev->parsed()) {
      const auto report =
          egopose::evaluate(ev_ckpt, resolve_data_root(ev_opts), ev_split, ev_opts.out_dir);
      std::cout << report.to_json() << "\n";
    } else if (ab->parsed()) {
      const ExperimentConfig cfg = resolve_config(ab_opts, "pose");
      const auto table =
          egopose::run_ablation_suite(cfg, resolve_data_root(ab_opts), ab_opts.out_dir);
      std::cout << table.to_csv();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
