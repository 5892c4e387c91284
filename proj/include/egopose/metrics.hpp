#pragma once

#include <array>
#include <string>
#include <vector>

#include "egopose/skeleton.hpp"

namespace egopose {

using Mat3 = std::array<std::array<double, 3>, 3>;

struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Vec3 translation = {0, 0, 0};

  Vec3 apply(const Vec3& p) const;
};

struct Svd3 {
  Mat3 u;
  Vec3 sigma;  // descending
  Mat3 v;
};

/// One-sided Jacobi SVD of a 3x3 matrix: a = u * diag(sigma) * v^T.
Svd3 svd3(const Mat3& a);

double det3(const Mat3& m);

/// Least-squares similarity transform aligning `from` onto `to` (Umeyama):
/// minimizes sum ||s R from_i + t - to_i||^2 with det(R) = +1. Degenerate
/// inputs (near-zero variance) fall back to translation-only alignment.
SimilarityTransform umeyama_align(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

/// Mean per-joint position error, millimeters.
double mpjpe(const Pose3D& pred, const Pose3D& gt);
double mpjpe(const PoseSequence& pred, const PoseSequence& gt);

/// MPJPE after per-frame Procrustes alignment of pred onto gt.
double pa_mpjpe(const Pose3D& pred, const Pose3D& gt);
double pa_mpjpe(const PoseSequence& pred, const PoseSequence& gt);

struct MetricReport {
  double mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  std::vector<double> per_joint_mpjpe_mm;

  std::string to_json() const;
  std::string per_joint_csv(const std::vector<std::string>& joint_names) const;
};

/// Full report over sequence pairs. mpjpe_mm is the mean of the per-joint
/// means, so the two agree exactly.
MetricReport compute_metrics(const std::vector<PoseSequence>& preds,
                             const std::vector<PoseSequence>& gts);

}  // namespace egopose
