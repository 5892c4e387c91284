#include "egopose/skeleton.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "egopose/check.hpp"

namespace egopose {

void SkeletonTopology::validate() const {
  const int j = num_joints();
  EGOPOSE_CHECK(j >= 2, "topology: need at least two joints");
  EGOPOSE_CHECK(root_index >= 0 && root_index < j, "topology: root index out of range");
  EGOPOSE_CHECK(static_cast<int>(bones.size()) == j - 1, "topology: tree needs J-1 bones");
  std::set<int> seen_children;
  for (const auto& [p, c] : bones) {
    EGOPOSE_CHECK(p >= 0 && p < j && c >= 0 && c < j, "topology: bone index out of range");
    EGOPOSE_CHECK(c != root_index, "topology: root cannot be a child");
    EGOPOSE_CHECK(seen_children.insert(c).second, "topology: joint appears twice as a child");
  }
  // reachability from root guarantees a single tree (no cycles possible with
  // J-1 unique-child edges once everything is reachable)
  std::set<int> reached = {root_index};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [p, c] : bones) {
      if (reached.count(p) && !reached.count(c)) {
        reached.insert(c);
        grew = true;
      }
    }
  }
  EGOPOSE_CHECK(static_cast<int>(reached.size()) == j, "topology: graph is not a rooted tree");
}

SkeletonTopology SkeletonTopology::default_topology() {
  SkeletonTopology t;
  t.joint_names = {"neck",      "l_shoulder", "r_shoulder", "l_elbow", "r_elbow",
                   "l_wrist",   "r_wrist",    "l_hip",      "r_hip",   "l_knee",
                   "r_knee",    "l_ankle",    "r_ankle",    "l_foot",  "r_foot"};
  t.root_index = 0;
  t.bones = {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {3, 5}, {4, 6}, {0, 7},
             {0, 8}, {7, 9}, {8, 10}, {9, 11}, {10, 12}, {11, 13}, {12, 14}};
  t.validate();
  return t;
}

std::string SkeletonTopology::to_json() const {
  nlohmann::json j;
  j["joint_names"] = joint_names;
  j["root_index"] = root_index;
  auto& edges = j["bones"] = nlohmann::json::array();
  for (const auto& [p, c] : bones) edges.push_back({p, c});
  return j.dump(2);
}

SkeletonTopology SkeletonTopology::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SkeletonTopology t;
  t.joint_names = j.at("joint_names").get<std::vector<std::string>>();
  t.root_index = j.at("root_index").get<int>();
  for (const auto& e : j.at("bones")) {
    t.bones.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  }
  t.validate();
  return t;
}

void FisheyeCamera::validate() const {
  EGOPOSE_CHECK(focal > 0.0, "camera: focal must be positive");
  EGOPOSE_CHECK(width > 0 && height > 0, "camera: image size must be positive");
  EGOPOSE_CHECK(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height,
                "camera: principal point must lie inside the image");
  EGOPOSE_CHECK(max_theta > 0.0 && max_theta <= M_PI, "camera: max_theta out of (0, pi]");
}

FisheyeCamera FisheyeCamera::default_camera(int width, int height) {
  FisheyeCamera c;
  c.width = width;
  c.height = height;
  c.cx = width / 2.0;
  c.cy = height / 2.0;
  c.focal = width / 2.2;  // corner sits near theta ~ pi/2
  c.max_theta = M_PI / 2.0;
  c.validate();
  return c;
}

std::vector<Vec3> bone_vectors(const Pose3D& pose, const SkeletonTopology& topo) {
  EGOPOSE_CHECK(pose.num_joints() == topo.num_joints(),
                "bone_vectors: pose has " + std::to_string(pose.num_joints()) +
                    " joints, topology expects " + std::to_string(topo.num_joints()));
  std::vector<Vec3> out;
  out.reserve(topo.bones.size());
  for (const auto& [p, c] : topo.bones) {
    const Vec3& a = pose.joints[p];
    const Vec3& b = pose.joints[c];
    out.push_back({b[0] - a[0], b[1] - a[1], b[2] - a[2]});
  }
  return out;
}

Keypoints2D project_fisheye(const Pose3D& pose, const FisheyeCamera& cam) {
  cam.validate();
  Keypoints2D out;
  out.uv.resize(pose.joints.size());
  out.visible.resize(pose.joints.size());
  for (size_t j = 0; j < pose.joints.size(); ++j) {
    const Vec3& p = pose.joints[j];
    const double rho = std::hypot(p[0], p[1]);
    const double norm = std::hypot(rho, p[2]);
    if (norm == 0.0) {
      out.uv[j] = {cam.cx, cam.cy};
      out.visible[j] = false;
      continue;
    }
    const double theta = std::atan2(rho, p[2]);
    const double r = cam.focal * theta;
    double u = cam.cx, v = cam.cy;
    if (rho > 0.0) {
      u += r * (p[0] / rho);
      v += r * (p[1] / rho);
    }
    out.uv[j] = {u, v};
    out.visible[j] = theta <= cam.max_theta && u >= 0.0 && u < cam.width && v >= 0.0 &&
                     v < cam.height;
  }
  return out;
}

HeatmapStack rasterize_heatmaps(const Keypoints2D& kps, int map_h, int map_w, double sigma,
                                int image_w, int image_h) {
  EGOPOSE_CHECK(sigma > 0.0, "rasterize: sigma must be positive");
  EGOPOSE_CHECK(map_w > 0 && map_h > 0, "rasterize: empty heatmap");
  EGOPOSE_CHECK(image_w % map_w == 0 && image_h % map_h == 0,
                "rasterize: heatmap resolution must divide the image size");
  const double stride_x = static_cast<double>(image_w) / map_w;
  const double stride_y = static_cast<double>(image_h) / map_h;

  HeatmapStack hs;
  hs.num_joints = kps.num_joints();
  hs.height = map_h;
  hs.width = map_w;
  hs.sigma = sigma;
  hs.maps.assign(static_cast<size_t>(hs.num_joints) * map_h * map_w, 0.0);

  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
  for (int j = 0; j < hs.num_joints; ++j) {
    if (!kps.visible[j]) continue;
    const double uj = kps.uv[j][0] / stride_x;
    const double vj = kps.uv[j][1] / stride_y;
    for (int y = 0; y < map_h; ++y) {
      const double dy = y - vj;
      for (int x = 0; x < map_w; ++x) {
        const double dx = x - uj;
        hs.at(j, y, x) = std::exp(-(dx * dx + dy * dy) * inv_two_sigma_sq);
      }
    }
  }
  return hs;
}

}  // namespace egopose
