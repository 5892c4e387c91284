#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egopose/skeleton.hpp"
#include "egopose/tensor.hpp"

namespace egopose {

/// One captured sequence: raw frames (T,H,W,3 uint8), poses in mm, camera and
/// derived keypoints. keypoints always equal project_fisheye(poses, camera).
struct SequenceRecord {
  std::vector<uint8_t> frames;
  int width = 0;
  int height = 0;
  PoseSequence poses;
  FisheyeCamera camera;
  std::vector<Keypoints2D> keypoints;
  std::string subject_id;
  std::string action_id;
  std::array<double, 3> channel_mean = {0, 0, 0};  // stats of frames / 255
  std::array<double, 3> channel_std = {1, 1, 1};

  int num_frames() const { return poses.num_frames(); }
  const uint8_t* frame(int t) const {
    return frames.data() + static_cast<size_t>(t) * height * width * 3;
  }
  void refresh_derived();  // keypoints + channel stats
};

/// Deterministic procedural sequence: the skeleton swings smoothly around a
/// rest pose (per-bone sinusoidal rotations, so bone lengths are exactly
/// constant), and frames render the projected joints as colored discs over a
/// smooth textured background.
SequenceRecord generate_synthetic_sequence(uint64_t seed, int num_frames,
                                           const SkeletonTopology& topo,
                                           const FisheyeCamera& cam);

// On-disk record format: <dir>/manifest.json + frames.bin (raw uint8,
// T*H*W*3) + poses.bin (little-endian float32, T*J*3). Writes are atomic
// (temp dir + rename).
void write_record(const std::filesystem::path& dir, const SequenceRecord& record);
SequenceRecord load_record(const std::filesystem::path& dir);

struct DatasetIndex {
  struct Entry {
    std::string dir;
    std::string split;  // "train" | "test"
  };
  std::filesystem::path root;
  std::vector<Entry> records;
  SkeletonTopology topology;
  std::array<double, 3> channel_mean = {0, 0, 0};
  std::array<double, 3> channel_std = {1, 1, 1};

  std::vector<int> split_indices(const std::string& split) const;
  std::filesystem::path record_path(int i) const { return root / records[i].dir; }
};

struct GenerateConfig {
  int num_records = 8;
  int frames_per_record = 48;
  int image_size = 64;
  double test_fraction = 0.25;
  uint64_t seed = 1;
};

DatasetIndex generate_dataset(const std::filesystem::path& root, const GenerateConfig& cfg,
                              const SkeletonTopology& topo);
DatasetIndex load_index(const std::filesystem::path& root);

struct WindowConfig {
  int length = 64;
  int stride = 32;

  void validate() const;
};

struct WindowSpan {
  int start = 0;
  int valid = 0;  // real frames; the rest of the window is padding
};

/// Window starts at 0, stride, 2*stride, ...; a right-aligned tail window
/// covers any remainder. Records shorter than the window yield one padded
/// window.
std::vector<WindowSpan> sliding_windows(int record_frames, const WindowConfig& cfg);

/// uint8 HWC frames -> (T,3,res,res) float tensor: bilinear resize, scale to
/// [0,1], then per-channel standardization with the given statistics.
Tensor normalize_frames(const uint8_t* frames, int t, int h, int w, int out_res,
                        const std::array<double, 3>& mean, const std::array<double, 3>& std_dev);

/// Window tensors for training/eval: frames (len,3,res,res), poses (len,J,3)
/// float mm, valid (len,) 0/1. Padding frames are zeros.
struct WindowTensors {
  Tensor frames;
  Tensor poses;
  Tensor valid;
};
WindowTensors load_window(const SequenceRecord& record, const WindowSpan& span, int window_len,
                          int out_res, const std::array<double, 3>& mean,
                          const std::array<double, 3>& std_dev);

}  // namespace egopose
