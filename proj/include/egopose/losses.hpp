#pragma once

#include <cstdint>
#include <vector>

#include "egopose/autograd.hpp"
#include "egopose/skeleton.hpp"
#include "egopose/tensor.hpp"

namespace egopose {

struct LossWeights {
  double pos = 1.0;
  double bone = 0.1;
  double cos = 0.01;
};

/// Count of cosine-loss bone terms skipped by the epsilon guard since process
/// start. Skips are also logged to stderr.
int64_t cos_guard_skip_count();

// Pose losses, double precision. The *_grad variants also return d/dpred and
// are the single implementation used by both the evaluation paths and the
// training graph (via composite_pose_loss below).
double loss_pos(const Pose3D& pred, const Pose3D& gt);
double loss_bone(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo);
double loss_cos(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo);
double composite_loss(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo,
                      const LossWeights& w);

double loss_pos_grad(const Pose3D& pred, const Pose3D& gt, std::vector<Vec3>& grad);
double loss_bone_grad(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo,
                      std::vector<Vec3>& grad);
double loss_cos_grad(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo,
                     std::vector<Vec3>& grad);
double composite_loss_grad(const Pose3D& pred, const Pose3D& gt, const SkeletonTopology& topo,
                           const LossWeights& w, std::vector<Vec3>& grad);

// Per-pixel sigmoid cross-entropy on logits, numerically stable form, mean
// over all elements. grad is (sigmoid(x) - y) / n.
double sigmoid_xent(const double* logits, const double* targets, int64_t n);
double sigmoid_xent_grad(const double* logits, const double* targets, int64_t n, double* grad);

// ---- training-graph loss nodes (float tensors, double internals) ----

/// Mean sigmoid cross-entropy between logits and constant targets.
ag::Var heatmap_xent_loss(const ag::Var& logits, const Tensor& targets);

/// Mean squared error between sigmoid(logits) and constant targets
/// (the heatmap-pretraining ablation axis).
ag::Var heatmap_mse_loss(const ag::Var& logits, const Tensor& targets);

/// Composite kinematic loss over a batch of windows. pred is (B,T,J,3) in mm,
/// gt matches, valid is (B,T) 0/1; the loss is the mean of the per-frame
/// composite loss over valid frames.
ag::Var composite_pose_loss(const ag::Var& pred, const Tensor& gt, const Tensor& valid,
                            const SkeletonTopology& topo, const LossWeights& w);

}  // namespace egopose
