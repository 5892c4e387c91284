#include "egopose/losses.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

#include "egopose/check.hpp"

namespace egopose {

namespace {

constexpr double kCosEps = 1e-8;

std::atomic<int64_t> g_cos_skips{0};

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

void check_same_joints(const Pose3D& pred, const Pose3D& gt) {
  EGOPOSE_CHECK(pred.num_joints() == gt.num_joints(), "pose loss: joint count mismatch");
  EGOPOSE_CHECK(pred.num_joints() > 0, "pose loss: empty pose");
}

}  // namespace

int64_t cos_guard_skip_count() { return g_cos_skips.load(); }

double loss_pos(const Pose3D& pred, const Pose3D& gt) {
  check_same_joints(pred, gt);
  const int j = pred.num_joints();
  double acc = 0.0;
  for (int i = 0; i < j; ++i) {
    const Vec3 d = {pred.joints[i][0] - gt.joints[i][0], pred.joints[i][1] - gt.joints[i][1],
                    pred.joints[i][2] - gt.joints[i][2]};
    acc += norm3(d);
  }
  return acc / j;
}

double loss_pos_grad(const Pose3D& pred, const Pose3D& gt, std::vector<Vec3>& grad) {
  check_same_joints(pred, gt);
  const int j = pred.num_joints();
  grad.assign(static_cast<size_t>(j), Vec3{0.0, 0.0, 0.0});
  double acc = 0.0;
  for (int i = 0; i < j; ++i) {
    const Vec3 d = {pred.joints[i][0] - gt.joints[i][0], pred.joints[i][1] - gt.joints[i][1],
                    pred.joints[i][2] - gt.joints[i][2]};
    const double n = norm3(d);
    acc += n;
    if (n > 0.0) {
      const double c = 1.0 / (n * j);
      grad[i] = {d[0] * c, d[1] * c, d[2] * c};
    }
  }
  return acc / j;
}

double loss_bone(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo) {
  std::vector<Vec3> scratch;
  return loss_bone_grad(pred, gt, topo, scratch);
}

double loss_bone_grad(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo,
                      std::vector<Vec3>& grad) {
  check_same_joints(pred, gt);
  EGOPOSE_CHECK(pred.num_joints() == topo.num_joints(), "loss_bone: pose/topology mismatch");
  grad.assign(pred.joints.size(), Vec3{0.0, 0.0, 0.0});
  const auto bp = bone_vectors(pred, topo);
  const auto bg = bone_vectors(gt, topo);
  const double nb = static_cast<double>(topo.bones.size());
  double acc = 0.0;
  for (size_t k = 0; k < topo.bones.size(); ++k) {
    const double lp = norm3(bp[k]);
    const double lg = norm3(bg[k]);
    const double diff = lp - lg;
    acc += diff * diff;
    if (lp > 0.0) {
      // d/db = 2 (|b| - |b_gt|) b / |b|, scattered to child (+) and parent (-)
      const double c = 2.0 * diff / (lp * nb);
      const auto& [p, ch] = topo.bones[k];
      for (int a = 0; a < 3; ++a) {
        grad[ch][a] += c * bp[k][a];
        grad[p][a] -= c * bp[k][a];
      }
    }
  }
  return acc / nb;
}

double loss_cos(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo) {
  std::vector<Vec3> scratch;
  return loss_cos_grad(pred, gt, topo, scratch);
}

double loss_cos_grad(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo,
                     std::vector<Vec3>& grad) {
  check_same_joints(pred, gt);
  EGOPOSE_CHECK(pred.num_joints() == topo.num_joints(), "loss_cos: pose/topology mismatch");
  grad.assign(pred.joints.size(), Vec3{0.0, 0.0, 0.0});
  const auto bp = bone_vectors(pred, topo);
  const auto bg = bone_vectors(gt, topo);
  const double nb = static_cast<double>(topo.bones.size());
  double acc = 0.0;
  int skipped = 0;
  for (size_t k = 0; k < topo.bones.size(); ++k) {
    const double lp = norm3(bp[k]);
    const double lg = norm3(bg[k]);
    if (lp < kCosEps || lg < kCosEps) {
      ++skipped;
      continue;
    }
    const double d = dot3(bp[k], bg[k]);
    const double cosv = d / (lp * lg);
    acc -= cosv;
    // d(-cos)/db_pred = -(b_gt/(|bp||bg|) - bp * d/(|bp|^3 |bg|)), / |B|
    const auto& [p, ch] = topo.bones[k];
    for (int a = 0; a < 3; ++a) {
      const double g = -(bg[k][a] / (lp * lg) - bp[k][a] * d / (lp * lp * lp * lg)) / nb;
      grad[ch][a] += g;
      grad[p][a] -= g;
    }
  }
  if (skipped > 0) {
    g_cos_skips += skipped;
    std::cerr << "loss_cos: skipped " << skipped << " degenerate bone(s)\n";
  }
  return acc / nb;
}

double composite_loss(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo,
                      const LossWeights& w) {
  std::vector<Vec3> scratch;
  return composite_loss_grad(pred, gt, topo, w, scratch);
}

double composite_loss_grad(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo,
                           const LossWeights& w, std::vector<Vec3>& grad) {
  std::vector<Vec3> g_pos, g_bone, g_cos;
  const double lp = loss_pos_grad(pred, gt, g_pos);
  const double lb = loss_bone_grad(pred, gt, topo, g_bone);
  const double lc = loss_cos_grad(pred, gt, topo, g_cos);
  grad.assign(pred.joints.size(), Vec3{0.0, 0.0, 0.0});
  for (size_t i = 0; i < grad.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      grad[i][a] = w.pos * g_pos[i][a] + w.bone * g_bone[i][a] + w.cos * g_cos[i][a];
    }
  }
  return w.pos * lp + w.bone * lb + w.cos * lc;
}

namespace {

inline double xent_term(double x, double y) {
  // max(x,0) - x*y + log(1 + exp(-|x|))
  return std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid_d(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

double sigmoid_xent(const double* logits, const double* targets, int64_t n) {
  EGOPOSE_CHECK(n > 0, "sigmoid_xent: empty input");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += xent_term(logits[i], targets[i]);
  return acc / n;
}

double sigmoid_xent_grad(const double* logits, const double* targets, int64_t n, double* grad) {
  const double loss = sigmoid_xent(logits, targets, n);
  for (int64_t i = 0; i < n; ++i) grad[i] = (sigmoid_d(logits[i]) - targets[i]) / n;
  return loss;
}

ag::Var heatmap_xent_loss(const ag::Var& logits, const Tensor& targets) {
  EGOPOSE_CHECK(logits.val().same_shape(targets), "heatmap loss: shape mismatch");
  const int64_t n = targets.numel();
  const float* px = logits.val().data();
  const float* py = targets.data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += xent_term(px[i], py[i]);
  Tensor out = Tensor::scalar(static_cast<float>(acc / n));
  return ag::make_op(std::move(out), {logits.node()}, [targets, n](ag::Node& self) {
    Tensor& gx = self.parents[0]->ensure_grad();
    const float g = self.grad.data()[0];
    const float* px = self.parents[0]->value.data();
    const float* py = targets.data();
    float* pgx = gx.data();
    for (int64_t i = 0; i < n; ++i) {
      pgx[i] += g * static_cast<float>((sigmoid_d(px[i]) - py[i]) / n);
    }
  });
}

ag::Var heatmap_mse_loss(const ag::Var& logits, const Tensor& targets) {
  EGOPOSE_CHECK(logits.val().same_shape(targets), "heatmap loss: shape mismatch");
  const int64_t n = targets.numel();
  const float* px = logits.val().data();
  const float* py = targets.data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = sigmoid_d(px[i]) - py[i];
    acc += d * d;
  }
  Tensor out = Tensor::scalar(static_cast<float>(acc / n));
  return ag::make_op(std::move(out), {logits.node()}, [targets, n](ag::Node& self) {
    Tensor& gx = self.parents[0]->ensure_grad();
    const float g = self.grad.data()[0];
    const float* px = self.parents[0]->value.data();
    const float* py = targets.data();
    float* pgx = gx.data();
    for (int64_t i = 0; i < n; ++i) {
      const double s = sigmoid_d(px[i]);
      pgx[i] += g * static_cast<float>(2.0 * (s - py[i]) * s * (1.0 - s) / n);
    }
  });
}

ag::Var composite_pose_loss(const ag::Var& pred, const Tensor& gt, const Tensor& valid,
                            const SkeletonTopology& topo, const LossWeights& w) {
  const Shape& ps = pred.shape();
  EGOPOSE_CHECK(ps.size() == 4 && ps[3] == 3, "composite_pose_loss: pred must be (B,T,J,3)");
  EGOPOSE_CHECK(pred.val().same_shape(gt), "composite_pose_loss: gt shape mismatch");
  const int64_t b = ps[0], t = ps[1], j = ps[2];
  EGOPOSE_CHECK(j == topo.num_joints(), "composite_pose_loss: joint count mismatch");
  EGOPOSE_CHECK(valid.numel() == b * t, "composite_pose_loss: valid mask shape mismatch");

  auto frame_pose = [j](const float* base, int64_t frame) {
    Pose3D p = Pose3D::zeros(static_cast<int>(j));
    const float* src = base + frame * j * 3;
    for (int64_t i = 0; i < j; ++i) {
      p.joints[i] = {static_cast<double>(src[i * 3 + 0]), static_cast<double>(src[i * 3 + 1]),
                     static_cast<double>(src[i * 3 + 2])};
    }
    return p;
  };

  int64_t valid_frames = 0;
  double acc = 0.0;
  std::vector<Vec3> grad_scratch;
  Tensor frame_grads(ps);  // cached per-frame gradients for the backward pass
  for (int64_t f = 0; f < b * t; ++f) {
    if (valid.data()[f] <= 0.5f) continue;
    ++valid_frames;
    const Pose3D pp = frame_pose(pred.val().data(), f);
    const Pose3D pg = frame_pose(gt.data(), f);
    acc += composite_loss_grad(pp, pg, topo, w, grad_scratch);
    float* dst = frame_grads.data() + f * j * 3;
    for (int64_t i = 0; i < j; ++i) {
      for (int a = 0; a < 3; ++a) dst[i * 3 + a] = static_cast<float>(grad_scratch[i][a]);
    }
  }
  EGOPOSE_CHECK(valid_frames > 0, "composite_pose_loss: no valid frames");

  Tensor out = Tensor::scalar(static_cast<float>(acc / valid_frames));
  return ag::make_op(std::move(out), {pred.node()},
                     [frame_grads = std::move(frame_grads), valid_frames](ag::Node& self) {
                       Tensor& gx = self.parents[0]->ensure_grad();
                       const float g = self.grad.data()[0] / static_cast<float>(valid_frames);
                       const float* src = frame_grads.data();
                       float* dst = gx.data();
                       for (int64_t i = 0; i < gx.numel(); ++i) dst[i] += g * src[i];
                     });
}

}  // namespace egopose
