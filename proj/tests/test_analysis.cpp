#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "mfs/analysis.hpp"
#include "mfs/geometry.hpp"
#include "mfs/solvers.hpp"

using namespace mfs;

namespace {

Cluster spheres_at(const std::vector<Vec3>& centers, int n, double delta = 0.3) {
  Cluster c;
  for (const auto& x : centers) {
    c.particles.push_back(make_particle(Sphere{1.0}, x, Mat3::Identity(), Discretization{n, delta, 1.2}));
  }
  return c;
}

Vec6 motion(const Vec3& v, const Vec3& w) {
  Vec6 u;
  u << v, w;
  return u;
}

}  // namespace

TEST(RAcc, KnownValues) {
  // 1 + d/2 - sqrt(d + d^2/4) by hand: d = 0.05 -> 1.025 - 0.225, d = 0.5 -> 1.25 - 0.75
  EXPECT_NEAR(r_acc(0.05), 0.8, 1e-15);
  EXPECT_NEAR(r_acc(0.5), 0.5, 1e-15);
  EXPECT_NEAR(r_acc(0.1), 0.7298437881283576, 1e-15);
  EXPECT_NEAR(r_acc(0.1), 0.7298, 1e-4);
  EXPECT_EQ(r_acc(0.0), 1.0);
}

TEST(RAcc, DecreasingInGap) {
  double prev = r_acc(0.0);
  for (double d = 0.01; d < 10.0; d *= 1.3) {
    const double r = r_acc(d);
    EXPECT_LT(r, prev);
    EXPECT_GT(r, 0.0);
    prev = r;
  }
  EXPECT_THROW(r_acc(-0.1), InvalidArgument);
  EXPECT_THROW(r_acc(std::nan("")), InvalidArgument);
}

TEST(TwoWay, SingleSphereSmallAndShrinking) {
  const std::vector<Vec6> u = {motion(Vec3(0.3, -1.0, 0.5), Vec3(0.2, 0.1, -0.4))};
  const TwoWayResult coarse = two_way_error(spheres_at({Vec3::Zero()}, 100), u);
  const TwoWayResult fine = two_way_error(spheres_at({Vec3::Zero()}, 400), u);
  EXPECT_TRUE(fine.converged);
  EXPECT_LT(fine.error, coarse.error);
  EXPECT_LE(fine.error, 1e-5);
  ASSERT_EQ(fine.mobility.motions.size(), 1u);
}

TEST(TwoWay, TranslationInvariant) {
  const std::vector<Vec6> u = {motion(Vec3(1, 0, 0), Vec3::Zero()), motion(Vec3(0, 1, 0), Vec3(0, 0, 1))};
  const Vec3 shift(0.5, -0.25, 4.0);
  const TwoWayResult a = two_way_error(spheres_at({Vec3::Zero(), Vec3(2.5, 0, 0)}, 60), u);
  const TwoWayResult b = two_way_error(spheres_at({shift, Vec3(2.5, 0, 0) + shift}, 60), u);
  EXPECT_NEAR(a.error, b.error, 1e-8 + 1e-6 * a.error);
}

TEST(TwoWay, RejectsBadInput) {
  const Cluster c = spheres_at({Vec3::Zero()}, 40);
  EXPECT_THROW(two_way_error(c, {Vec6::Zero()}), InvalidArgument);
  EXPECT_THROW(two_way_error(c, {}), InvalidArgument);
  TwoWayOptions same;
  same.mobility_sep_factor = 1.0;
  EXPECT_THROW(two_way_error(c, {motion(Vec3(1, 0, 0), Vec3::Zero())}, same), InvalidArgument);
}

TEST(Residual, LaplaceSingleSphere) {
  const Cluster c = spheres_at({Vec3::Zero()}, 400);
  const Solution s = solve_capacitance(c, {2.0});
  const ResidualReport r = surface_residual(s, c, 2);
  ASSERT_EQ(r.points.cols(), 2 * c.particles[0].m());
  ASSERT_EQ(r.values.size(), r.points.cols());
  for (Index i = 0; i < r.points.cols(); ++i) EXPECT_NEAR(r.points.col(i).norm(), 1.0, 1e-12);
  EXPECT_EQ(r.max, r.values.maxCoeff());
  EXPECT_EQ(r.values[r.argmax], r.max);
  EXPECT_NEAR(r.max_relative, r.max / 2.0, 1e-18);
  EXPECT_LE(r.max, 1e-4);
  // Finer discretization, smaller mismatch.
  const Cluster f = spheres_at({Vec3::Zero()}, 900);
  EXPECT_LT(surface_residual(solve_capacitance(f, {2.0}), f).max, r.max);
}

TEST(Residual, StokesUsesRelativeMeasure) {
  const Cluster c = spheres_at({Vec3::Zero(), Vec3(3, 0, 0)}, 150);
  const std::vector<Vec6> u = {motion(Vec3(0, 0, 1), Vec3::Zero()), motion(Vec3(0, 0, 1), Vec3::Zero())};
  const Solution s = solve_resistance(c, u);
  const ResidualReport r = surface_residual(s, c, 3);
  EXPECT_EQ(r.points.cols(), 3 * (c.particles[0].m() + c.particles[1].m()));
  EXPECT_EQ(r.max_relative, r.max);
  EXPECT_LT(r.max, 1e-2);
  // Scaling the data leaves a relative residual unchanged.
  const Solution s2 = solve_resistance(c, {u[0] * 10.0, u[1] * 10.0});
  EXPECT_NEAR(surface_residual(s2, c, 3).max, r.max, 1e-6 * r.max + 1e-12);
  EXPECT_THROW(surface_residual(s, c, 0), InvalidArgument);
  EXPECT_THROW(surface_residual(s, spheres_at({Vec3::Zero()}, 150), 2), InvalidArgument);
}

TEST(Extract, SingleSphereMobility) {
  const ExtractedMatrix m = extract_matrix(spheres_at({Vec3::Zero()}, 300), MatrixKind::Mobility);
  ASSERT_EQ(m.a.rows(), 6);
  Vec6 want;
  want << Vec3::Constant(1.0 / (6 * M_PI)), Vec3::Constant(1.0 / (8 * M_PI));
  EXPECT_TRUE(m.converged);
  EXPECT_LE((m.a - Matrix(want.asDiagonal())).cwiseAbs().maxCoeff(), 1e-4 * want.maxCoeff());
  EXPECT_LE(m.asymmetry, 1e-4);
  EXPECT_GT(m.min_eigenvalue, 0.0);
}

TEST(Extract, DecoupledCapacitance) {
  const ExtractedMatrix c = extract_matrix(spheres_at({Vec3::Zero(), Vec3(1e6, 0, 0)}, 400), MatrixKind::Capacitance);
  ASSERT_EQ(c.a.rows(), 2);
  EXPECT_NEAR(c.a(0, 0), 4 * M_PI, 1e-4);
  EXPECT_NEAR(c.a(1, 1), 4 * M_PI, 1e-4);
  EXPECT_LE(std::abs(c.a(0, 1)), 1e-4);
}

TEST(Extract, ThreeSpheresSymmetricPositiveAndInverse) {
  const Cluster c = spheres_at({Vec3::Zero(), Vec3(2.4, 0, 0), Vec3(1.1, 2.2, 0.3)}, 300);
  const ExtractedMatrix cap = extract_matrix(c, MatrixKind::Capacitance);
  const ExtractedMatrix ela = extract_matrix(c, MatrixKind::Elastance);
  EXPECT_LE(cap.asymmetry, 1e-5);
  EXPECT_LE(ela.asymmetry, 1e-5);
  EXPECT_GT(cap.min_eigenvalue, 0.0);
  EXPECT_GT(ela.min_eigenvalue, 0.0);
  // Off-diagonal capacitance coefficients are negative.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) EXPECT_LT(cap.a(i, j), 0.0);
  EXPECT_LE((cap.a * ela.a - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Extract, ResistanceTimesMobility) {
  const Cluster c = spheres_at({Vec3::Zero(), Vec3(2.5, 0.3, 0)}, 120);
  const ExtractedMatrix r = extract_matrix(c, MatrixKind::Resistance);
  const ExtractedMatrix m = extract_matrix(c, MatrixKind::Mobility);
  ASSERT_EQ(r.a.rows(), 12);
  EXPECT_LE(r.asymmetry, 1e-2);
  EXPECT_GT(r.min_eigenvalue, 0.0);
  EXPECT_LE((r.a * m.a - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Fit, RecoversExactRate) {
  std::vector<double> n, e;
  for (double x : {100.0, 200.0, 400.0, 800.0, 1600.0}) {
    n.push_back(x);
    e.push_back(std::exp(1.5 - 0.4 * std::sqrt(x)));
  }
  const RateFit f = fit_root_exponential(n, e, 1e-30);
  ASSERT_TRUE(f.accepted);
  EXPECT_NEAR(f.slope, -0.4, 1e-12);
  EXPECT_NEAR(f.intercept, 1.5, 1e-10);
  EXPECT_NEAR(f.rate, std::exp(-0.4), 1e-12);
  EXPECT_EQ(f.points_used, 5);
}

TEST(Fit, DropsPlateauAndUnusable) {
  std::vector<double> n = {100, 200, 400, 800, 1600, 3200};
  std::vector<double> e;
  for (double x : n) e.push_back(std::max(std::exp(-0.5 * std::sqrt(x)), 1e-13));
  const RateFit f = fit_root_exponential(n, e, 1e-12);
  ASSERT_TRUE(f.accepted);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_EQ(f.points_used, 5);  // exp(-0.5 sqrt(3200)) ~ 5e-13 sits below the floor

  std::vector<bool> usable(n.size(), true);
  usable[1] = false;
  const RateFit g = fit_root_exponential(n, e, 1e-12, usable);
  EXPECT_EQ(g.points_used, 4);
  EXPECT_NEAR(g.slope, -0.5, 1e-12);
}

TEST(Fit, DegenerateWarns) {
  const RateFit flat = fit_root_exponential({100, 200, 400, 800}, {1e-14, 1e-14, 1e-14, 1e-14}, 1e-12);
  EXPECT_FALSE(flat.accepted);
  EXPECT_FALSE(flat.warning.empty());
  const RateFit same = fit_root_exponential({100, 100, 100, 100}, {1e-2, 1e-3, 1e-4, 1e-5}, 1e-12);
  EXPECT_FALSE(same.accepted);
  EXPECT_FALSE(same.warning.empty());
  EXPECT_THROW(fit_root_exponential({1, 2}, {1.0}, 0.0), InvalidArgument);
}

TEST(Sweep, ElastanceTwoSpheres) {
  SweepSpec spec;
  spec.kind = ProblemKind::Elastance;
  spec.cluster = spheres_at({Vec3::Zero(), Vec3(2.5, 0, 0)}, 50);
  spec.resolutions = {60, 120, 240, 480};
  spec.scalar_data = {1.0, -0.5};
  spec.reference_resolution = 900;
  const ConvergenceRecord rec = convergence_sweep(spec);
  ASSERT_EQ(rec.points.size(), 4u);
  for (std::size_t i = 0; i < rec.points.size(); ++i) {
    EXPECT_TRUE(rec.points[i].converged);
    EXPECT_EQ(rec.points[i].sweep_value, spec.resolutions[i]);
    if (i > 0) {
      EXPECT_LT(rec.points[i].max_residual, rec.points[i - 1].max_residual);
      EXPECT_LT(rec.points[i].output_error, rec.points[i - 1].output_error);
    }
  }
  EXPECT_TRUE(rec.residual_fit.accepted);
  EXPECT_LT(rec.residual_fit.slope, 0.0);
}

TEST(Sweep, RejectsShortOrUnsorted) {
  SweepSpec spec;
  spec.cluster = spheres_at({Vec3::Zero()}, 50);
  spec.scalar_data = {1.0};
  spec.resolutions = {50, 100, 200};
  EXPECT_THROW(convergence_sweep(spec), InvalidArgument);
  spec.resolutions = {50, 100, 100, 200};
  EXPECT_THROW(convergence_sweep(spec), InvalidArgument);
  spec.resolutions = {50, 100, 150, 200};
  spec.scalar_data = {1.0, 2.0};
  EXPECT_THROW(convergence_sweep(spec), InvalidArgument);
}

TEST(Outputs, StackedPerProblem) {
  const Cluster c = spheres_at({Vec3::Zero(), Vec3(3, 0, 0)}, 60);
  const Solution s = solve_capacitance(c, {1.0, 2.0});
  const Vector o = solution_outputs(s);
  ASSERT_EQ(o.size(), 2);
  EXPECT_EQ(o[0], s.charges[0]);
  EXPECT_EQ(o[1], s.charges[1]);
}
