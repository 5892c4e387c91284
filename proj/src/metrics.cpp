#include "egopose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "egopose/check.hpp"

namespace egopose {

namespace {

Vec3 matvec(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a[i][k] * b[k][j];
      c[i][j] = acc;
    }
  }
  return c;
}

Mat3 transpose(const Mat3& m) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) t[i][j] = m[j][i];
  }
  return t;
}

double joint_err(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

}  // namespace

Vec3 SimilarityTransform::apply(const Vec3& p) const {
  Vec3 r = matvec(rotation, p);
  return {scale * r[0] + translation[0], scale * r[1] + translation[1],
          scale * r[2] + translation[2]};
}

double det3(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Svd3 svd3(const Mat3& a) {
  // one-sided Jacobi: right-rotate until columns of w are orthogonal
  Mat3 w = a;
  Mat3 v = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < 3; ++i) {
          app += w[i][p] * w[i][p];
          aqq += w[i][q] * w[i][q];
          apq += w[i][p] * w[i][q];
        }
        off += std::abs(apq);
        if (std::abs(apq) < 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < 3; ++i) {
          const double wp = w[i][p], wq = w[i][q];
          w[i][p] = c * wp - s * wq;
          w[i][q] = s * wp + c * wq;
          const double vp = v[i][p], vq = v[i][q];
          v[i][p] = c * vp - s * vq;
          v[i][q] = s * vp + c * vq;
        }
      }
    }
    if (off < 1e-30) break;
  }

  Svd3 out;
  std::array<int, 3> order = {0, 1, 2};
  Vec3 norms;
  for (int j = 0; j < 3; ++j) {
    norms[j] = std::sqrt(w[0][j] * w[0][j] + w[1][j] * w[1][j] + w[2][j] * w[2][j]);
  }
  std::sort(order.begin(), order.end(), [&](int x, int y) { return norms[x] > norms[y]; });

  Mat3 u{};
  Mat3 vs{};
  Vec3 sigma;
  for (int j = 0; j < 3; ++j) {
    const int src = order[j];
    sigma[j] = norms[src];
    for (int i = 0; i < 3; ++i) vs[i][j] = v[i][src];
    if (norms[src] > 1e-300) {
      for (int i = 0; i < 3; ++i) u[i][j] = w[i][src] / norms[src];
    }
  }
  // complete near-null columns of u with an orthonormal basis
  for (int j = 0; j < 3; ++j) {
    double n = std::sqrt(u[0][j] * u[0][j] + u[1][j] * u[1][j] + u[2][j] * u[2][j]);
    if (n > 0.5) continue;
    const int a = (j + 1) % 3, b = (j + 2) % 3;
    Vec3 cross = {u[1][a] * u[2][b] - u[2][a] * u[1][b], u[2][a] * u[0][b] - u[0][a] * u[2][b],
                  u[0][a] * u[1][b] - u[1][a] * u[0][b]};
    n = std::sqrt(cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]);
    if (n > 1e-12) {
      for (int i = 0; i < 3; ++i) u[i][j] = cross[i] / n;
    } else {
      // two null columns: pick anything orthogonal to the remaining one
      Vec3 base = {u[0][a], u[1][a], u[2][a]};
      Vec3 probe = std::abs(base[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
      Vec3 c2 = {base[1] * probe[2] - base[2] * probe[1], base[2] * probe[0] - base[0] * probe[2],
                 base[0] * probe[1] - base[1] * probe[0]};
      const double cn = std::sqrt(c2[0] * c2[0] + c2[1] * c2[1] + c2[2] * c2[2]);
      for (int i = 0; i < 3; ++i) u[i][j] = cn > 0 ? c2[i] / cn : 0.0;
    }
  }

  out.u = u;
  out.sigma = sigma;
  out.v = vs;
  return out;
}

SimilarityTransform umeyama_align(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  EGOPOSE_CHECK(from.size() == to.size(), "umeyama: point count mismatch");
  EGOPOSE_CHECK(from.size() >= 3, "umeyama: need at least 3 points");
  const double n = static_cast<double>(from.size());

  Vec3 mu_from = {0, 0, 0}, mu_to = {0, 0, 0};
  for (size_t i = 0; i < from.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      mu_from[a] += from[i][a] / n;
      mu_to[a] += to[i][a] / n;
    }
  }

  double var_from = 0.0;
  Mat3 cov{};  // (1/n) sum (to - mu_to)(from - mu_from)^T
  for (size_t i = 0; i < from.size(); ++i) {
    Vec3 f, t;
    for (int a = 0; a < 3; ++a) {
      f[a] = from[i][a] - mu_from[a];
      t[a] = to[i][a] - mu_to[a];
    }
    var_from += (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]) / n;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cov[r][c] += t[r] * f[c] / n;
    }
  }

  SimilarityTransform out;
  if (var_from < 1e-12) {
    // degenerate source cloud: translation-only alignment
    for (int a = 0; a < 3; ++a) out.translation[a] = mu_to[a] - mu_from[a];
    return out;
  }

  const Svd3 svd = svd3(cov);
  Vec3 signs = {1.0, 1.0, 1.0};
  if (det3(svd.u) * det3(svd.v) < 0.0) signs[2] = -1.0;  // reflection fix, det(R)=+1

  Mat3 vt = transpose(svd.v);
  Mat3 us{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) us[i][j] = svd.u[i][j] * signs[j];
  }
  out.rotation = matmul(us, vt);
  out.scale = (svd.sigma[0] * signs[0] + svd.sigma[1] * signs[1] + svd.sigma[2] * signs[2]) /
              var_from;

  const Vec3 rot_mu = matvec(out.rotation, mu_from);
  for (int a = 0; a < 3; ++a) out.translation[a] = mu_to[a] - out.scale * rot_mu[a];
  return out;
}

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
  EGOPOSE_CHECK(pred.num_joints() == gt.num_joints() && pred.num_joints() > 0,
                "mpjpe: joint count mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < pred.joints.size(); ++i) acc += joint_err(pred.joints[i], gt.joints[i]);
  return acc / static_cast<double>(pred.joints.size());
}

double mpjpe(const PoseSequence& pred, const PoseSequence& gt) {
  EGOPOSE_CHECK(pred.num_frames() == gt.num_frames() && pred.num_frames() > 0,
                "mpjpe: frame count mismatch");
  double acc = 0.0;
  for (int t = 0; t < pred.num_frames(); ++t) acc += mpjpe(pred.poses[t], gt.poses[t]);
  return acc / pred.num_frames();
}

double pa_mpjpe(const Pose3D& pred, const Pose3D& gt) {
  const SimilarityTransform xf = umeyama_align(pred.joints, gt.joints);
  Pose3D aligned = pred;
  for (auto& p : aligned.joints) p = xf.apply(p);
  return mpjpe(aligned, gt);
}

double pa_mpjpe(const PoseSequence& pred, const PoseSequence& gt) {
  EGOPOSE_CHECK(pred.num_frames() == gt.num_frames() && pred.num_frames() > 0,
                "pa_mpjpe: frame count mismatch");
  double acc = 0.0;
  for (int t = 0; t < pred.num_frames(); ++t) acc += pa_mpjpe(pred.poses[t], gt.poses[t]);
  return acc / pred.num_frames();
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["mpjpe_mm"] = mpjpe_mm;
  j["pa_mpjpe_mm"] = pa_mpjpe_mm;
  j["per_joint_mpjpe_mm"] = per_joint_mpjpe_mm;
  return j.dump(2);
}

std::string MetricReport::per_joint_csv(const std::vector<std::string>& joint_names) const {
  std::ostringstream out;
  out << "joint,mpjpe_mm\n";
  out.precision(17);
  for (size_t i = 0; i < per_joint_mpjpe_mm.size(); ++i) {
    const std::string name =
        i < joint_names.size() ? joint_names[i] : "joint_" + std::to_string(i);
    out << name << "," << per_joint_mpjpe_mm[i] << "\n";
  }
  return out.str();
}

MetricReport compute_metrics(const std::vector<PoseSequence>& preds,
                             const std::vector<PoseSequence>& gts) {
  EGOPOSE_CHECK(preds.size() == gts.size() && !preds.empty(), "metrics: sequence count mismatch");
  const int j = gts[0].poses.at(0).num_joints();

  MetricReport rep;
  rep.per_joint_mpjpe_mm.assign(static_cast<size_t>(j), 0.0);
  int64_t frames = 0;
  double pa_acc = 0.0;
  for (size_t s = 0; s < preds.size(); ++s) {
    EGOPOSE_CHECK(preds[s].num_frames() == gts[s].num_frames(), "metrics: frame count mismatch");
    for (int t = 0; t < preds[s].num_frames(); ++t) {
      const Pose3D& p = preds[s].poses[t];
      const Pose3D& g = gts[s].poses[t];
      EGOPOSE_CHECK(p.num_joints() == j && g.num_joints() == j, "metrics: joint count mismatch");
      for (int i = 0; i < j; ++i) {
        rep.per_joint_mpjpe_mm[i] += joint_err(p.joints[i], g.joints[i]);
      }
      pa_acc += pa_mpjpe(p, g);
      ++frames;
    }
  }
  double total = 0.0;
  for (auto& v : rep.per_joint_mpjpe_mm) {
    v /= static_cast<double>(frames);
    total += v;
  }
  rep.mpjpe_mm = total / j;  // mean of per-joint means, exact agreement
  rep.pa_mpjpe_mm = pa_acc / static_cast<double>(frames);
  return rep;
}

}  // namespace egopose
