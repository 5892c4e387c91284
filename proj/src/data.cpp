#include "egopose/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

#include "egopose/check.hpp"

namespace egopose {

namespace {

constexpr double kTau = 6.283185307179586477;

Vec3 rotate_axis_angle(const Vec3& v, const Vec3& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const Vec3 cross = {axis[1] * v[2] - axis[2] * v[1], axis[2] * v[0] - axis[0] * v[2],
                      axis[0] * v[1] - axis[1] * v[0]};
  const double dot = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    out[i] = v[i] * c + cross[i] * s + axis[i] * dot * (1.0 - c);
  }
  return out;
}

/// Humanoid rest offsets (child - parent, mm) for the default 15-joint rig,
/// in default bone order. Camera frame: x right, y belly-forward, z down.
const std::vector<Vec3>& default_rest_offsets() {
  static const std::vector<Vec3> offsets = {
      {-180, 0, 30},  {180, 0, 30},    // neck -> shoulders
      {-50, 40, 260}, {50, 40, 260},   // shoulders -> elbows
      {-20, 60, 250}, {20, 60, 250},   // elbows -> wrists
      {-100, 20, 540}, {100, 20, 540}, // neck -> hips
      {-10, 30, 420}, {10, 30, 420},   // hips -> knees
      {0, 20, 400},   {0, 20, 400},    // knees -> ankles
      {0, 130, 60},   {0, 130, 60},    // ankles -> feet
  };
  return offsets;
}

bool is_default_rig(const SkeletonTopology& topo) {
  static const SkeletonTopology def = SkeletonTopology::default_topology();
  return topo.joint_names == def.joint_names && topo.bones == def.bones &&
         topo.root_index == def.root_index;
}

struct BoneMotion {
  Vec3 rest;
  Vec3 axis;
  double amplitude;
  double freq_hz;
  double phase;
};

const std::array<std::array<uint8_t, 3>, 16> kJointPalette = {{
    {230, 60, 60},  {60, 200, 80},  {70, 90, 230},  {240, 200, 50},
    {200, 60, 220}, {60, 210, 210}, {240, 130, 40}, {130, 230, 60},
    {230, 60, 140}, {60, 140, 230}, {180, 180, 60}, {110, 60, 230},
    {60, 230, 150}, {230, 110, 110}, {150, 150, 230}, {200, 200, 200},
}};

void render_frame(uint8_t* dst, int width, int height, const Keypoints2D& kps,
                  const std::array<double, 6>& bg_phase) {
  // smooth deterministic background texture
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      uint8_t* px = dst + (static_cast<size_t>(y) * width + x) * 3;
      for (int c = 0; c < 3; ++c) {
        const double v = 0.5 + 0.2 * std::sin(0.11 * x + bg_phase[c]) *
                                   std::sin(0.13 * y + bg_phase[3 + (c + 1) % 3]);
        px[c] = static_cast<uint8_t>(std::lround(v * 120.0 + 40.0));
      }
    }
  }
  // disc splat per visible joint so appearance carries pose information
  const int radius = std::max(2, width / 32);
  for (int j = 0; j < kps.num_joints(); ++j) {
    if (!kps.visible[j]) continue;
    const int cx = static_cast<int>(std::lround(kps.uv[j][0]));
    const int cy = static_cast<int>(std::lround(kps.uv[j][1]));
    const auto& color = kJointPalette[j % kJointPalette.size()];
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy > radius * radius) continue;
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || x >= width || y < 0 || y >= height) continue;
        uint8_t* px = dst + (static_cast<size_t>(y) * width + x) * 3;
        px[0] = color[0];
        px[1] = color[1];
        px[2] = color[2];
      }
    }
  }
}

void write_binary(const std::filesystem::path& path, const void* data, size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  EGOPOSE_CHECK(out.good(), "cannot open for write: " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  EGOPOSE_CHECK(out.good(), "write failed: " + path.string());
}

std::vector<char> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  EGOPOSE_CHECK(in.good(), "cannot open: " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<size_t>(size));
  in.read(buf.data(), size);
  EGOPOSE_CHECK(in.good(), "read failed: " + path.string());
  return buf;
}

nlohmann::json camera_to_json(const FisheyeCamera& cam) {
  nlohmann::json j;
  j["focal"] = cam.focal;
  j["principal_point"] = {cam.cx, cam.cy};
  j["image_size"] = {cam.width, cam.height};
  j["max_theta"] = cam.max_theta;
  return j;
}

FisheyeCamera camera_from_json(const nlohmann::json& j) {
  FisheyeCamera cam;
  cam.focal = j.at("focal").get<double>();
  cam.cx = j.at("principal_point").at(0).get<double>();
  cam.cy = j.at("principal_point").at(1).get<double>();
  cam.width = j.at("image_size").at(0).get<int>();
  cam.height = j.at("image_size").at(1).get<int>();
  cam.max_theta = j.at("max_theta").get<double>();
  cam.validate();
  return cam;
}

}  // namespace

void SequenceRecord::refresh_derived() {
  keypoints.clear();
  keypoints.reserve(poses.poses.size());
  for (const auto& pose : poses.poses) {
    keypoints.push_back(project_fisheye(pose, camera));
  }
  const int64_t pixels = static_cast<int64_t>(num_frames()) * height * width;
  std::array<double, 3> mean = {0, 0, 0}, sq = {0, 0, 0};
  for (int64_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = frames[p * 3 + c] / 255.0;
      mean[c] += v;
      sq[c] += v * v;
    }
  }
  for (int c = 0; c < 3; ++c) {
    mean[c] /= static_cast<double>(pixels);
    const double var = sq[c] / static_cast<double>(pixels) - mean[c] * mean[c];
    channel_mean[c] = mean[c];
    channel_std[c] = std::sqrt(std::max(var, 1e-12));
  }
}

SequenceRecord generate_synthetic_sequence(uint64_t seed, int num_frames,
                                           const SkeletonTopology& topo,
                                           const FisheyeCamera& cam) {
  EGOPOSE_CHECK(num_frames >= 1, "generator: need at least one frame");
  topo.validate();
  cam.validate();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  SequenceRecord rec;
  rec.width = cam.width;
  rec.height = cam.height;
  rec.camera = cam;
  rec.poses.frame_rate = 30.0;
  rec.subject_id = "subj_" + std::to_string(seed % 5);
  rec.action_id = "act_" + std::to_string((seed / 5) % 7);

  const int j = topo.num_joints();
  const bool humanoid = is_default_rig(topo);

  // rest skeleton: crafted humanoid offsets for the default rig, otherwise
  // procedural bounded-length bones biased downward into the camera view.
  // Per-sequence subject scale and limb-proportion jitter; lengths stay
  // constant within the sequence.
  const double subject_scale = 0.85 + 0.30 * uni(rng);
  std::vector<BoneMotion> bones(topo.bones.size());
  for (size_t k = 0; k < topo.bones.size(); ++k) {
    const double limb_scale = subject_scale * (0.95 + 0.10 * uni(rng));
    if (humanoid) {
      const Vec3& base = default_rest_offsets()[k];
      bones[k].rest = {base[0] * limb_scale, base[1] * limb_scale, base[2] * limb_scale};
    } else {
      const double len = limb_scale * (120.0 + 260.0 * uni(rng));
      Vec3 dir = {uni(rng) * 2.0 - 1.0, uni(rng) * 2.0 - 1.0, 0.4 + uni(rng)};
      const double n = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
      bones[k].rest = {dir[0] / n * len, dir[1] / n * len, dir[2] / n * len};
    }
    // random unit rotation axis
    Vec3 axis = {uni(rng) * 2.0 - 1.0, uni(rng) * 2.0 - 1.0, uni(rng) * 2.0 - 1.0};
    double an = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (an < 1e-9) {
      axis = {1, 0, 0};
      an = 1.0;
    }
    bones[k].axis = {axis[0] / an, axis[1] / an, axis[2] / an};
    bones[k].amplitude = 0.05 + 0.30 * uni(rng);
    bones[k].freq_hz = 0.3 + 0.9 * uni(rng);
    bones[k].phase = kTau * uni(rng);
  }

  const Vec3 root_base = {0.0, 0.0, humanoid ? 250.0 : 400.0};
  std::array<BoneMotion, 3> root_motion;
  for (int a = 0; a < 3; ++a) {
    root_motion[a].amplitude = 10.0 + 30.0 * uni(rng);
    root_motion[a].freq_hz = 0.2 + 0.3 * uni(rng);
    root_motion[a].phase = kTau * uni(rng);
  }
  std::array<double, 6> bg_phase;
  for (auto& p : bg_phase) p = kTau * uni(rng);

  // children in parent-first order for forward kinematics
  rec.poses.poses.reserve(static_cast<size_t>(num_frames));
  rec.frames.resize(static_cast<size_t>(num_frames) * cam.height * cam.width * 3);
  for (int t = 0; t < num_frames; ++t) {
    const double tt = t / rec.poses.frame_rate;
    Pose3D pose = Pose3D::zeros(j);
    std::vector<bool> placed(static_cast<size_t>(j), false);
    Vec3 root = root_base;
    for (int a = 0; a < 3; ++a) {
      root[a] += root_motion[a].amplitude *
                 std::sin(kTau * root_motion[a].freq_hz * tt + root_motion[a].phase);
    }
    pose.joints[topo.root_index] = root;
    placed[topo.root_index] = true;
    bool grew = true;
    while (grew) {
      grew = false;
      for (size_t k = 0; k < topo.bones.size(); ++k) {
        const auto& [p, c] = topo.bones[k];
        if (!placed[p] || placed[c]) continue;
        const double angle = bones[k].amplitude *
                             std::sin(kTau * bones[k].freq_hz * tt + bones[k].phase);
        const Vec3 vec = rotate_axis_angle(bones[k].rest, bones[k].axis, angle);
        pose.joints[c] = {pose.joints[p][0] + vec[0], pose.joints[p][1] + vec[1],
                          pose.joints[p][2] + vec[2]};
        placed[c] = true;
        grew = true;
      }
    }
    const Keypoints2D kps = project_fisheye(pose, cam);
    render_frame(rec.frames.data() + static_cast<size_t>(t) * cam.height * cam.width * 3,
                 cam.width, cam.height, kps, bg_phase);
    rec.poses.poses.push_back(std::move(pose));
  }
  rec.refresh_derived();
  return rec;
}

void write_record(const std::filesystem::path& dir, const SequenceRecord& record) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.parent_path() / (".tmp_" + dir.filename().string());
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  const int t = record.num_frames();
  const int j = record.poses.poses.empty() ? 0 : record.poses.poses[0].num_joints();

  write_binary(tmp / "frames.bin", record.frames.data(), record.frames.size());

  std::vector<float> poses32(static_cast<size_t>(t) * j * 3);
  for (int f = 0; f < t; ++f) {
    for (int i = 0; i < j; ++i) {
      for (int a = 0; a < 3; ++a) {
        poses32[(static_cast<size_t>(f) * j + i) * 3 + a] =
            static_cast<float>(record.poses.poses[f].joints[i][a]);
      }
    }
  }
  write_binary(tmp / "poses.bin", poses32.data(), poses32.size() * sizeof(float));

  nlohmann::json m;
  m["schema_version"] = 1;
  m["subject_id"] = record.subject_id;
  m["action_id"] = record.action_id;
  m["num_frames"] = t;
  m["num_joints"] = j;
  m["frame_rate"] = record.poses.frame_rate;
  m["image_size"] = {record.width, record.height};
  m["camera"] = camera_to_json(record.camera);
  m["frames"] = {{"file", "frames.bin"}, {"dtype", "uint8"},
                 {"shape", {t, record.height, record.width, 3}}};
  m["poses"] = {{"file", "poses.bin"}, {"dtype", "float32"}, {"shape", {t, j, 3}}};
  m["channel_mean"] = record.channel_mean;
  m["channel_std"] = record.channel_std;
  std::ofstream mf(tmp / "manifest.json");
  mf << m.dump(2) << "\n";
  mf.close();

  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

SequenceRecord load_record(const std::filesystem::path& dir) {
  const auto manifest_bytes = read_binary(dir / "manifest.json");
  nlohmann::json m = nlohmann::json::parse(manifest_bytes.begin(), manifest_bytes.end());
  EGOPOSE_CHECK(m.at("schema_version").get<int>() == 1, "record: unsupported schema version");

  SequenceRecord rec;
  rec.subject_id = m.at("subject_id").get<std::string>();
  rec.action_id = m.at("action_id").get<std::string>();
  rec.width = m.at("image_size").at(0).get<int>();
  rec.height = m.at("image_size").at(1).get<int>();
  rec.camera = camera_from_json(m.at("camera"));
  rec.poses.frame_rate = m.at("frame_rate").get<double>();

  const int t = m.at("num_frames").get<int>();
  const int j = m.at("num_joints").get<int>();

  const auto frame_bytes = read_binary(dir / m.at("frames").at("file").get<std::string>());
  EGOPOSE_CHECK(frame_bytes.size() == static_cast<size_t>(t) * rec.height * rec.width * 3,
                "record: frames.bin size mismatch");
  rec.frames.assign(frame_bytes.begin(), frame_bytes.end());

  const auto pose_bytes = read_binary(dir / m.at("poses").at("file").get<std::string>());
  EGOPOSE_CHECK(pose_bytes.size() == static_cast<size_t>(t) * j * 3 * sizeof(float),
                "record: poses.bin size mismatch");
  const float* pf = reinterpret_cast<const float*>(pose_bytes.data());
  rec.poses.poses.resize(static_cast<size_t>(t));
  for (int f = 0; f < t; ++f) {
    rec.poses.poses[f] = Pose3D::zeros(j);
    for (int i = 0; i < j; ++i) {
      for (int a = 0; a < 3; ++a) {
        rec.poses.poses[f].joints[i][a] = pf[(static_cast<size_t>(f) * j + i) * 3 + a];
      }
    }
  }
  rec.refresh_derived();  // keypoints recomputed from loaded poses, stats from frames
  return rec;
}

std::vector<int> DatasetIndex::split_indices(const std::string& split) const {
  std::vector<int> out;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(static_cast<int>(i));
  }
  return out;
}

DatasetIndex generate_dataset(const std::filesystem::path& root, const GenerateConfig& cfg,
                              const SkeletonTopology& topo) {
  namespace fs = std::filesystem;
  EGOPOSE_CHECK(cfg.num_records >= 1, "generate_dataset: need at least one record");
  fs::create_directories(root);

  DatasetIndex index;
  index.root = root;
  index.topology = topo;
  const int train_count =
      std::max(1, static_cast<int>(std::lround(cfg.num_records * (1.0 - cfg.test_fraction))));
  const FisheyeCamera cam = FisheyeCamera::default_camera(cfg.image_size, cfg.image_size);

  std::array<double, 3> mean = {0, 0, 0}, sq = {0, 0, 0};
  int64_t pixel_count = 0;
  for (int i = 0; i < cfg.num_records; ++i) {
    const uint64_t rec_seed = cfg.seed * 1000003ULL + static_cast<uint64_t>(i);
    SequenceRecord rec = generate_synthetic_sequence(rec_seed, cfg.frames_per_record, topo, cam);
    char name[32];
    std::snprintf(name, sizeof(name), "rec_%04d", i);
    write_record(root / name, rec);
    const std::string split = i < train_count ? "train" : "test";
    index.records.push_back({name, split});
    if (split == "train") {
      const int64_t pixels = static_cast<int64_t>(rec.num_frames()) * rec.height * rec.width;
      for (int c = 0; c < 3; ++c) {
        mean[c] += rec.channel_mean[c] * static_cast<double>(pixels);
        sq[c] += (rec.channel_std[c] * rec.channel_std[c] +
                  rec.channel_mean[c] * rec.channel_mean[c]) *
                 static_cast<double>(pixels);
      }
      pixel_count += pixels;
    }
  }
  for (int c = 0; c < 3; ++c) {
    mean[c] /= static_cast<double>(pixel_count);
    index.channel_mean[c] = mean[c];
    index.channel_std[c] =
        std::sqrt(std::max(sq[c] / static_cast<double>(pixel_count) - mean[c] * mean[c], 1e-12));
  }

  nlohmann::json idx;
  idx["schema_version"] = 1;
  idx["topology"] = nlohmann::json::parse(topo.to_json());
  idx["channel_mean"] = index.channel_mean;
  idx["channel_std"] = index.channel_std;
  auto& recs = idx["records"] = nlohmann::json::array();
  for (const auto& e : index.records) {
    recs.push_back({{"dir", e.dir}, {"split", e.split}});
  }
  std::ofstream out(root / "index.json");
  out << idx.dump(2) << "\n";
  return index;
}

DatasetIndex load_index(const std::filesystem::path& root) {
  EGOPOSE_CHECK(std::filesystem::exists(root / "index.json"),
                "dataset not found: no index.json under " + root.string() +
                    " (run generate-data first)");
  const auto bytes = read_binary(root / "index.json");
  nlohmann::json idx = nlohmann::json::parse(bytes.begin(), bytes.end());
  DatasetIndex index;
  index.root = root;
  index.topology = SkeletonTopology::from_json(idx.at("topology").dump());
  for (int c = 0; c < 3; ++c) {
    index.channel_mean[c] = idx.at("channel_mean").at(c).get<double>();
    index.channel_std[c] = idx.at("channel_std").at(c).get<double>();
  }
  for (const auto& e : idx.at("records")) {
    index.records.push_back({e.at("dir").get<std::string>(), e.at("split").get<std::string>()});
  }
  return index;
}

void WindowConfig::validate() const {
  EGOPOSE_CHECK(length >= 1, "window: length must be positive");
  EGOPOSE_CHECK(stride >= 1 && stride <= length, "window: stride must be in [1, length]");
}

std::vector<WindowSpan> sliding_windows(int record_frames, const WindowConfig& cfg) {
  cfg.validate();
  EGOPOSE_CHECK(record_frames >= 1, "sliding_windows: empty record");
  if (record_frames <= cfg.length) {
    return {{0, record_frames}};
  }
  std::vector<WindowSpan> out;
  for (int start = 0; start + cfg.length <= record_frames; start += cfg.stride) {
    out.push_back({start, cfg.length});
  }
  if (out.back().start + cfg.length < record_frames) {
    out.push_back({record_frames - cfg.length, cfg.length});  // right-aligned tail
  }
  return out;
}

namespace {

// plain-tensor bilinear resize of one (h,w) channel plane, half-pixel centers
void resize_plane(const float* src, int h, int w, float* dst, int oh, int ow) {
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  for (int y = 0; y < oh; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      const double top = src[y0 * w + x0] * (1.0 - wx) + src[y0 * w + x1] * wx;
      const double bot = src[y1 * w + x0] * (1.0 - wx) + src[y1 * w + x1] * wx;
      dst[y * ow + x] = static_cast<float>(top * (1.0 - wy) + bot * wy);
    }
  }
}

}  // namespace

Tensor normalize_frames(const uint8_t* frames, int t, int h, int w, int out_res,
                        const std::array<double, 3>& mean, const std::array<double, 3>& std_dev) {
  Tensor out({t, 3, out_res, out_res});
  std::vector<float> plane(static_cast<size_t>(h) * w);
  for (int f = 0; f < t; ++f) {
    const uint8_t* src = frames + static_cast<size_t>(f) * h * w * 3;
    for (int c = 0; c < 3; ++c) {
      for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p) {
        plane[p] = src[p * 3 + c] / 255.0f;
      }
      float* dst = out.data() + (static_cast<int64_t>(f) * 3 + c) * out_res * out_res;
      if (h == out_res && w == out_res) {
        std::memcpy(dst, plane.data(), plane.size() * sizeof(float));
      } else {
        resize_plane(plane.data(), h, w, dst, out_res, out_res);
      }
      const float mu = static_cast<float>(mean[c]);
      const float inv = static_cast<float>(1.0 / std_dev[c]);
      for (int64_t p = 0; p < static_cast<int64_t>(out_res) * out_res; ++p) {
        dst[p] = (dst[p] - mu) * inv;
      }
    }
  }
  return out;
}

WindowTensors load_window(const SequenceRecord& record, const WindowSpan& span, int window_len,
                          int out_res, const std::array<double, 3>& mean,
                          const std::array<double, 3>& std_dev) {
  EGOPOSE_CHECK(span.start >= 0 && span.start + span.valid <= record.num_frames(),
                "load_window: span out of range");
  const int j = record.poses.poses.empty() ? 0 : record.poses.poses[0].num_joints();

  WindowTensors out;
  out.frames = Tensor({window_len, 3, out_res, out_res});
  out.poses = Tensor({window_len, j, 3});
  out.valid = Tensor({window_len});

  const Tensor real = normalize_frames(record.frame(span.start), span.valid, record.height,
                                       record.width, out_res, mean, std_dev);
  std::memcpy(out.frames.data(), real.data(), sizeof(float) * static_cast<size_t>(real.numel()));
  for (int f = 0; f < span.valid; ++f) {
    out.valid.data()[f] = 1.0f;
    const Pose3D& pose = record.poses.poses[span.start + f];
    float* dst = out.poses.data() + static_cast<int64_t>(f) * j * 3;
    for (int i = 0; i < j; ++i) {
      for (int a = 0; a < 3; ++a) dst[i * 3 + a] = static_cast<float>(pose.joints[i][a]);
    }
  }
  return out;
}

}  // namespace egopose
