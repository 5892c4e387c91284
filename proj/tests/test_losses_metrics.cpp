#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "egopose/losses.hpp"
#include "egopose/metrics.hpp"
#include "test_util.hpp"

using namespace egopose;

namespace {

const SkeletonTopology& topo() {
  static const SkeletonTopology t = SkeletonTopology::default_topology();
  return t;
}

Pose3D offset_pose(const Pose3D& p, const Vec3& d) {
  Pose3D out = p;
  for (auto& j : out.joints) {
    j[0] += d[0];
    j[1] += d[1];
    j[2] += d[2];
  }
  return out;
}

/// Central finite differences of a scalar pose functional, double precision.
std::vector<Vec3> pose_fd(const std::function<double(const Pose3D&)>& f, Pose3D pose,
                          double h = 1e-5) {
  std::vector<Vec3> grad(pose.joints.size());
  for (size_t i = 0; i < pose.joints.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const double orig = pose.joints[i][a];
      pose.joints[i][a] = orig + h;
      const double fp = f(pose);
      pose.joints[i][a] = orig - h;
      const double fm = f(pose);
      pose.joints[i][a] = orig;
      grad[i][a] = (fp - fm) / (2.0 * h);
    }
  }
  return grad;
}

double grad_rel_err(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    for (int x = 0; x < 3; ++x) {
      num += (a[i][x] - b[i][x]) * (a[i][x] - b[i][x]);
      den += a[i][x] * a[i][x] + b[i][x] * b[i][x];
    }
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace

TEST_CASE("loss_pos closed forms and scalar-loop oracle") {
  std::mt19937_64 rng(1);
  const Pose3D gt = testutil::random_pose(15, rng);
  CHECK(loss_pos(gt, gt) == 0.0);
  CHECK(loss_pos(offset_pose(gt, {1, 0, 0}), gt) == doctest::Approx(1.0).epsilon(1e-12));

  // independent scalar loop on a small instance
  const Pose3D p = testutil::random_pose(3, rng);
  const Pose3D q = testutil::random_pose(3, rng);
  double manual = 0.0;
  for (int i = 0; i < 3; ++i) {
    double sq = 0.0;
    for (int a = 0; a < 3; ++a) sq += (p.joints[i][a] - q.joints[i][a]) * (p.joints[i][a] - q.joints[i][a]);
    manual += std::sqrt(sq);
  }
  manual /= 3.0;
  CHECK(std::abs(loss_pos(p, q) - manual) < 1e-12 * std::max(1.0, manual));
}

TEST_CASE("loss_bone closed forms") {
  std::mt19937_64 rng(2);
  const Pose3D gt = testutil::random_pose(15, rng);
  CHECK(loss_bone(gt, gt, topo()) == 0.0);

  // uniform doubling: each bone contributes (2L - L)^2 = L^2
  Pose3D doubled = gt;
  for (auto& j : doubled.joints) {
    j[0] *= 2.0;
    j[1] *= 2.0;
    j[2] *= 2.0;
  }
  const auto bones = bone_vectors(gt, topo());
  double expect = 0.0;
  for (const auto& b : bones) expect += b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
  expect /= static_cast<double>(bones.size());
  CHECK(loss_bone(doubled, gt, topo()) == doctest::Approx(expect).epsilon(1e-12));

  // rotations preserve lengths
  const Mat3 r = testutil::random_rotation(rng);
  Pose3D rotated = gt;
  for (auto& j : rotated.joints) j = testutil::mat_apply(r, j);
  CHECK(loss_bone(rotated, gt, topo()) < 1e-15);
}

TEST_CASE("loss_cos closed forms") {
  std::mt19937_64 rng(3);
  const Pose3D gt = testutil::random_pose(15, rng);
  CHECK(loss_cos(gt, gt, topo()) == doctest::Approx(-1.0).epsilon(1e-12));

  // antiparallel bones: flip the pose around the root
  Pose3D flipped = gt;
  const Vec3 root = gt.joints[topo().root_index];
  for (auto& j : flipped.joints) {
    for (int a = 0; a < 3; ++a) j[a] = 2.0 * root[a] - j[a];
  }
  CHECK(loss_cos(flipped, gt, topo()) == doctest::Approx(1.0).epsilon(1e-12));

  // positive scaling is invisible to the cosine
  Pose3D scaled = gt;
  for (auto& j : scaled.joints) {
    for (int a = 0; a < 3; ++a) j[a] = root[a] + 3.7 * (j[a] - root[a]);
  }
  CHECK(loss_cos(scaled, gt, topo()) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("loss_cos stays within [-1, 1] on random pairs") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const double v = loss_cos(testutil::random_pose(15, rng), testutil::random_pose(15, rng), topo());
    CHECK(v >= -1.0 - 1e-12);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("loss_cos epsilon guard skips degenerate bones") {
  std::mt19937_64 rng(5);
  const Pose3D gt = testutil::random_pose(15, rng);
  Pose3D pred = gt;
  // collapse the last bone; its child is a leaf so no other bone moves
  const auto& [leaf_parent, leaf_child] = topo().bones.back();
  pred.joints[leaf_child] = pred.joints[leaf_parent];
  const int64_t before = cos_guard_skip_count();
  const double v = loss_cos(pred, gt, topo());
  CHECK(cos_guard_skip_count() == before + 1);
  const double nb = static_cast<double>(topo().bones.size());
  CHECK(v == doctest::Approx(-(nb - 1.0) / nb).epsilon(1e-12));

  // the guard also keeps the gradient finite
  std::vector<Vec3> grad;
  loss_cos_grad(pred, gt, topo(), grad);
  for (const auto& g : grad) {
    for (int a = 0; a < 3; ++a) CHECK(std::isfinite(g[a]));
  }
}

TEST_CASE("composite loss: defaults at the optimum and composition oracle") {
  std::mt19937_64 rng(6);
  const Pose3D gt = testutil::random_pose(15, rng);
  const LossWeights w{};
  CHECK(composite_loss(gt, gt, topo(), w) == doctest::Approx(-0.01).epsilon(1e-12));

  const LossWeights zero{0.0, 0.0, 0.0};
  CHECK(composite_loss(testutil::random_pose(15, rng), gt, topo(), zero) == 0.0);

  const Pose3D pred = testutil::random_pose(15, rng);
  const double manual = w.pos * loss_pos(pred, gt) + w.bone * loss_bone(pred, gt, topo()) +
                        w.cos * loss_cos(pred, gt, topo());
  CHECK(std::abs(composite_loss(pred, gt, topo(), w) - manual) < 1e-12 * std::max(1.0, std::abs(manual)));
}

TEST_CASE("analytic gradients match central finite differences, double precision") {
  std::mt19937_64 rng(7);
  const LossWeights w{};
  for (int trial = 0; trial < 20; ++trial) {
    const Pose3D pred = testutil::random_pose(15, rng);
    const Pose3D gt = testutil::random_pose(15, rng);
    std::vector<Vec3> analytic;

    composite_loss_grad(pred, gt, topo(), w, analytic);
    auto fd = pose_fd([&](const Pose3D& p) { return composite_loss(p, gt, topo(), w); }, pred);
    CHECK(grad_rel_err(analytic, fd) < 1e-5);

    loss_pos_grad(pred, gt, analytic);
    fd = pose_fd([&](const Pose3D& p) { return loss_pos(p, gt); }, pred);
    CHECK(grad_rel_err(analytic, fd) < 1e-5);

    loss_bone_grad(pred, gt, topo(), analytic);
    fd = pose_fd([&](const Pose3D& p) { return loss_bone(p, gt, topo()); }, pred);
    CHECK(grad_rel_err(analytic, fd) < 1e-5);

    loss_cos_grad(pred, gt, topo(), analytic);
    fd = pose_fd([&](const Pose3D& p) { return loss_cos(p, gt, topo()); }, pred);
    CHECK(grad_rel_err(analytic, fd) < 1e-5);
  }
}

TEST_CASE("sigmoid cross entropy closed forms and gradient") {
  std::vector<double> logits(16, 0.0), targets(16, 0.0);
  CHECK(sigmoid_xent(logits.data(), targets.data(), 16) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // saturated perfect prediction: loss -> 0
  std::vector<double> big(16), y(16);
  for (int i = 0; i < 16; ++i) {
    y[i] = i % 2;
    big[i] = y[i] > 0.5 ? 50.0 : -50.0;
  }
  CHECK(sigmoid_xent(big.data(), y.data(), 16) < 1e-20);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  std::uniform_real_distribution<double> ydist(0.0, 1.0);
  std::vector<double> x(16), t(16), grad(16);
  for (int i = 0; i < 16; ++i) {
    x[i] = dist(rng);
    t[i] = ydist(rng);
  }
  const double loss = sigmoid_xent_grad(x.data(), t.data(), 16, grad.data());
  CHECK(loss >= 0.0);
  for (int i = 0; i < 16; ++i) {
    const double h = 1e-6;
    std::vector<double> xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (sigmoid_xent(xp.data(), t.data(), 16) -
                       sigmoid_xent(xm.data(), t.data(), 16)) / (2.0 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
    // analytic form: (sigmoid(x) - y) / n
    const double sig = 1.0 / (1.0 + std::exp(-x[i]));
    CHECK(grad[i] == doctest::Approx((sig - t[i]) / 16.0).epsilon(1e-12));
  }
}

TEST_CASE("mpjpe closed forms and decomposition") {
  std::mt19937_64 rng(9);
  const Pose3D gt = testutil::random_pose(15, rng);
  CHECK(mpjpe(gt, gt) == 0.0);
  CHECK(mpjpe(offset_pose(gt, {3, 4, 0}), gt) == doctest::Approx(5.0).epsilon(1e-12));

  PoseSequence ps, gs;
  gs.poses = {gt, testutil::random_pose(15, rng)};
  ps.poses = {testutil::random_pose(15, rng), testutil::random_pose(15, rng)};
  const double expect = 0.5 * (loss_pos(ps.poses[0], gs.poses[0]) + loss_pos(ps.poses[1], gs.poses[1]));
  CHECK(mpjpe(ps, gs) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("umeyama removes similarity transforms exactly") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> sdist(0.2, 5.0);
  std::uniform_real_distribution<double> tdist(-1000.0, 1000.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose3D gt = testutil::random_pose(15, rng);
    const double s = sdist(rng);
    const Mat3 r = testutil::random_rotation(rng);
    const Vec3 t = {tdist(rng), tdist(rng), tdist(rng)};
    Pose3D pred = gt;
    for (auto& j : pred.joints) {
      const Vec3 q = testutil::mat_apply(r, j);
      j = {s * q[0] + t[0], s * q[1] + t[1], s * q[2] + t[2]};
    }
    CHECK(pa_mpjpe(pred, gt) < 1e-6);
  }
}

TEST_CASE("umeyama identity on equal clouds") {
  std::mt19937_64 rng(11);
  const Pose3D gt = testutil::random_pose(15, rng);
  const SimilarityTransform xf = umeyama_align(gt.joints, gt.joints);
  CHECK(xf.scale == doctest::Approx(1.0).epsilon(1e-9));
  for (int i = 0; i < 3; ++i) {
    CHECK(xf.translation[i] == doctest::Approx(0.0).epsilon(1e-6));
    for (int j = 0; j < 3; ++j) {
      CHECK(xf.rotation[i][j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
    }
  }
  CHECK(pa_mpjpe(gt, gt) < 1e-9);
}

TEST_CASE("umeyama matches the brute-force optimizer oracle") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose3D pred = testutil::random_pose(15, rng);
    const Pose3D gt = testutil::random_pose(15, rng);
    const double closed = pa_mpjpe(pred, gt);
    const double brute = testutil::brute_force_pa_error(pred.joints, gt.joints, rng);
    // the closed form is the global optimum; NM must reach it from above
    CHECK(brute >= closed - 1e-3);
    CHECK(std::abs(brute - closed) < 1e-3);
  }
}

TEST_CASE("umeyama handles reflections with det(R) = +1") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose3D gt = testutil::random_pose(15, rng);
    Pose3D mirrored = gt;
    for (auto& j : mirrored.joints) j[0] = -j[0];
    const SimilarityTransform xf = umeyama_align(mirrored.joints, gt.joints);
    CHECK(det3(xf.rotation) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(xf.scale > 0.0);
  }
}

TEST_CASE("aligned error never exceeds unaligned error") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const Pose3D pred = testutil::random_pose(15, rng);
    const Pose3D gt = testutil::random_pose(15, rng);
    CHECK(pa_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-9);
  }
}

TEST_CASE("pa_mpjpe is invariant under similarity transforms of pred") {
  std::mt19937_64 rng(15);
  const Pose3D pred = testutil::random_pose(15, rng);
  const Pose3D gt = testutil::random_pose(15, rng);
  const double base = pa_mpjpe(pred, gt);
  for (int trial = 0; trial < 10; ++trial) {
    const double s = 0.3 + 2.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    const Mat3 r = testutil::random_rotation(rng);
    Pose3D warped = pred;
    for (auto& j : warped.joints) {
      const Vec3 q = testutil::mat_apply(r, j);
      j = {s * q[0] + 55.0, s * q[1] - 31.0, s * q[2] + 7.0};
    }
    CHECK(std::abs(pa_mpjpe(warped, gt) - base) / std::max(base, 1e-9) < 1e-6);
  }
}

TEST_CASE("degenerate source cloud yields a defined result") {
  Pose3D coincident = Pose3D::zeros(15);
  for (auto& j : coincident.joints) j = {10.0, 20.0, 30.0};
  std::mt19937_64 rng(16);
  const Pose3D gt = testutil::random_pose(15, rng);
  const double v = pa_mpjpe(coincident, gt);
  CHECK(std::isfinite(v));
}

TEST_CASE("metric report: per-joint mean equals mpjpe and serialization works") {
  std::mt19937_64 rng(17);
  std::vector<PoseSequence> preds(2), gts(2);
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 3; ++t) {
      preds[s].poses.push_back(testutil::random_pose(15, rng));
      gts[s].poses.push_back(testutil::random_pose(15, rng));
    }
  }
  const MetricReport rep = compute_metrics(preds, gts);
  CHECK(rep.per_joint_mpjpe_mm.size() == 15);
  double mean = 0.0;
  for (double v : rep.per_joint_mpjpe_mm) mean += v;
  mean /= 15.0;
  CHECK(std::abs(mean - rep.mpjpe_mm) < 1e-9);
  CHECK(rep.pa_mpjpe_mm <= rep.mpjpe_mm + 1e-9);

  const std::string json = rep.to_json();
  CHECK(json.find("mpjpe_mm") != std::string::npos);
  const std::string csv = rep.per_joint_csv(SkeletonTopology::default_topology().joint_names);
  CHECK(csv.find("neck") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);  // header + 15 joints
}
