#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace egopose {

using Vec3 = std::array<double, 3>;

/// Directed kinematic tree over J joints. Bones are (parent, child) index
/// pairs; exactly J-1 edges, every non-root joint appears once as a child.
struct SkeletonTopology {
  std::vector<std::string> joint_names;
  std::vector<std::pair<int, int>> bones;
  int root_index = 0;

  int num_joints() const { return static_cast<int>(joint_names.size()); }
  void validate() const;

  /// 15-joint egocentric rig: neck root plus L/R shoulder, elbow, wrist,
  /// hip, knee, ankle, foot.
  static SkeletonTopology default_topology();

  std::string to_json() const;
  static SkeletonTopology from_json(const std::string& text);
};

/// Joint positions in millimeters, camera-centered frame.
struct Pose3D {
  std::vector<Vec3> joints;

  int num_joints() const { return static_cast<int>(joints.size()); }
  static Pose3D zeros(int j) {
    Pose3D p;
    p.joints.assign(static_cast<size_t>(j), Vec3{0.0, 0.0, 0.0});
    return p;
  }
};

struct PoseSequence {
  std::vector<Pose3D> poses;
  double frame_rate = 30.0;

  int num_frames() const { return static_cast<int>(poses.size()); }
};

/// Equidistant fisheye model: image radius r = focal * theta.
struct FisheyeCamera {
  double focal = 0.0;          // pixels per radian
  double cx = 0.0, cy = 0.0;   // principal point, pixels
  int width = 0, height = 0;   // image size, pixels
  double max_theta = 1.5707963267948966;  // half-pi default: behind-camera rays invisible

  void validate() const;
  static FisheyeCamera default_camera(int width, int height);
};

struct Keypoints2D {
  std::vector<std::array<double, 2>> uv;
  std::vector<bool> visible;

  int num_joints() const { return static_cast<int>(uv.size()); }
};

/// Per-joint confidence maps in [0,1], row-major (J, Hm, Wm), doubles so the
/// Gaussian values keep full precision.
struct HeatmapStack {
  std::vector<double> maps;
  int num_joints = 0;
  int height = 0;
  int width = 0;
  double sigma = 0.0;

  double& at(int j, int y, int x) {
    return maps[(static_cast<size_t>(j) * height + y) * width + x];
  }
  double at(int j, int y, int x) const {
    return maps[(static_cast<size_t>(j) * height + y) * width + x];
  }
};

/// b_k = joints[child_k] - joints[parent_k], in bone-list order. Millimeters.
std::vector<Vec3> bone_vectors(const Pose3D& pose, const SkeletonTopology& topo);

/// Equidistant projection of every joint. A joint is visible iff theta <=
/// max_theta and the projected point lands inside the image; the camera
/// origin itself projects to an invisible point.
Keypoints2D project_fisheye(const Pose3D& pose, const FisheyeCamera& cam);

/// Gaussian splat per visible joint: H_j(u,v) = exp(-(d^2)/(2 sigma^2)) on the
/// heatmap grid, with joint coordinates scaled by the image/heatmap stride and
/// left unrounded. Invisible joints yield all-zero maps.
HeatmapStack rasterize_heatmaps(const Keypoints2D& kps, int map_h, int map_w, double sigma,
                                int image_w, int image_h);

}  // namespace egopose
