#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "mfs/geometry.hpp"
#include "mfs/kernels.hpp"

using namespace mfs;

namespace {

const Vec3 kY(0.2, -0.1, 0.3);

// Velocity and pressure of a unit-viscosity Stokeslet with strength lam at y.
Vec3 velocity(const Vec3& x, const Vec3& lam, double mu = 1.0) { return stokeslet(x, kY, mu) * lam; }
double pressure(const Vec3& x, const Vec3& lam) { return stokes_pressure(x, kY).dot(lam) / (8 * M_PI); }

Mat3 grad_u(const Vec3& x, const Vec3& lam, double h, double mu = 1.0) {
  Mat3 g;  // g(i, j) = d u_i / d x_j
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    g.col(j) = (velocity(x + e, lam, mu) - velocity(x - e, lam, mu)) / (2 * h);
  }
  return g;
}

Points random_points(std::mt19937_64& rng, int n, double shift) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Points p(3, n);
  for (int i = 0; i < n; ++i) p.col(i) = Vec3(u(rng) + shift, u(rng), u(rng));
  return p;
}

}  // namespace

TEST(Laplace, UnitDistance) {
  EXPECT_NEAR(laplace_green(Vec3(1, 0, 0), Vec3::Zero()), 1.0 / (4 * M_PI), 1e-16);
  EXPECT_NEAR(laplace_green(Vec3(0, 2, 0), Vec3::Zero()), 1.0 / (8 * M_PI), 1e-16);
  EXPECT_NEAR(1.0 / (4 * M_PI), 0.0795775, 1e-7);
}

TEST(Laplace, Coincident) { EXPECT_THROW(laplace_green(kY, kY), SingularityError); }

TEST(Laplace, Harmonic) {
  const Vec3 x = kY + Vec3(1.3, 0, 0);
  const double h = 1e-3;
  double lap = 0.0;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    lap += (laplace_green(x + e, kY) - 2 * laplace_green(x, kY) + laplace_green(x - e, kY)) / (h * h);
  }
  EXPECT_LE(std::abs(lap), 1e-6);
}

TEST(Stokeslet, AxisAligned) {
  const Mat3 g = stokeslet(Vec3(1, 0, 0), Vec3::Zero(), 1.0);
  const Mat3 want = Vec3(2, 1, 1).asDiagonal() * (1.0 / (8 * M_PI));
  EXPECT_LE((g - want).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Stokeslet, Symmetric) {
  std::mt19937_64 rng(1);
  const Points p = random_points(rng, 20, 0.0);
  for (int i = 0; i < 20; ++i) {
    const Mat3 g = stokeslet(p.col(i), kY + Vec3(3, 0, 0), 1.0);
    EXPECT_LE((g - g.transpose()).cwiseAbs().maxCoeff(), 1e-16);
    const Mat3 h = stokeslet(kY + Vec3(3, 0, 0), p.col(i), 1.0);
    EXPECT_LE((g - h.transpose()).cwiseAbs().maxCoeff(), 1e-16);
  }
}

TEST(Stokeslet, Errors) {
  EXPECT_THROW(stokeslet(kY, kY), SingularityError);
  EXPECT_THROW(validate_kernel(Stokeslet{0.0}), InvalidArgument);
  EXPECT_THROW(validate_kernel(StokesTraction{-1.0}), InvalidArgument);
}

TEST(Stokeslet, DivergenceFree) {
  const Vec3 x = kY + Vec3(0.9, 1.2, -0.6).normalized() * 1.7;
  for (int j = 0; j < 3; ++j) {
    Vec3 lam = Vec3::Zero();
    lam[j] = 1.0;
    EXPECT_LE(std::abs(grad_u(x, lam, 1e-3).trace()), 1e-6);
  }
}

TEST(Pressure, ClosedForm) {
  EXPECT_LE((stokes_pressure(Vec3(1, 0, 0), Vec3::Zero()) - Vec3(2, 0, 0)).norm(), 1e-16);
  EXPECT_LE((stokes_pressure(Vec3(0, 0, 2), Vec3::Zero()) - Vec3(0, 0, 0.5)).norm(), 1e-16);
  EXPECT_THROW(stokes_pressure(kY, kY), SingularityError);
}

TEST(Pressure, MomentumBalance) {
  const Vec3 x = kY + Vec3(0.3, -1.0, 0.5).normalized() * 1.5;
  const double h = 1e-3;
  const Vec3 lam(0.3, -0.7, 1.1);
  Vec3 lap_u = Vec3::Zero();
  Vec3 grad_p;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    lap_u += (velocity(x + e, lam) - 2 * velocity(x, lam) + velocity(x - e, lam)) / (h * h);
    grad_p[j] = (pressure(x + e, lam) - pressure(x - e, lam)) / (2 * h);
  }
  EXPECT_LE((-lap_u + grad_p).norm(), 1e-5);
}

TEST(Traction, MatchesFiniteDifferenceStress) {
  const Vec3 n = Vec3(0.2, 0.5, -0.8).normalized();
  const Vec3 x = kY + Vec3(-0.4, 0.9, 0.3).normalized() * 1.4;
  const double h = 1e-4;
  for (double mu : {1.0, 2.5}) {
    Mat3 fd;
    for (int j = 0; j < 3; ++j) {
      Vec3 lam = Vec3::Zero();
      lam[j] = 1.0;
      const Mat3 g = grad_u(x, lam, h, mu);
      const Mat3 sigma = -pressure(x, lam) * Mat3::Identity() + mu * (g + g.transpose());
      fd.col(j) = sigma * n;
    }
    const Mat3 t = stokes_traction_kernel(x, n, kY, mu);
    EXPECT_LE((t - fd).cwiseAbs().maxCoeff(), 1e-6) << mu;
  }
}

TEST(Traction, OrthogonalVanishes) {
  const Mat3 t = stokes_traction_kernel(Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3::Zero());
  EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Traction, HomogeneousOfDegreeMinusTwo) {
  const Vec3 n = Vec3(1, 1, 0).normalized();
  const Vec3 d = Vec3(0.3, 0.8, 0.2);
  const Mat3 a = stokes_traction_kernel(kY + d, n, kY);
  const Mat3 b = stokes_traction_kernel(kY + 2 * d, n, kY);
  EXPECT_LE((a - 4 * b).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Traction, Errors) {
  EXPECT_THROW(stokes_traction_kernel(kY, Vec3(0, 0, 1), kY), SingularityError);
  EXPECT_THROW(stokes_traction_kernel(Vec3(1, 0, 0), Vec3(0, 0, 1.1), Vec3::Zero()), InvalidArgument);
}

TEST(Assemble, SinglePair) {
  Points t(3, 1), s(3, 1);
  t.col(0) = Vec3(1, 0, 0);
  s.col(0) = Vec3::Zero();
  const DenseBlock b = assemble_block(t, s, LaplaceSingle{});
  ASSERT_EQ(b.rows(), 1);
  ASSERT_EQ(b.cols(), 1);
  EXPECT_NEAR(b.entries(0, 0), 1.0 / (4 * M_PI), 1e-17);
}

TEST(Assemble, ElementwiseLaplace) {
  std::mt19937_64 rng(2);
  const Points t = random_points(rng, 2, 0.0), s = random_points(rng, 3, 3.0);
  const DenseBlock b = assemble_block(t, s, LaplaceSingle{});
  ASSERT_EQ(b.rows(), 2);
  ASSERT_EQ(b.cols(), 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(b.entries(i, j), laplace_green(t.col(i), s.col(j)));
}

TEST(Assemble, ElementwiseAllKinds) {
  std::mt19937_64 rng(3);
  const Points t = random_points(rng, 5, 0.0), s = random_points(rng, 7, 3.0);
  Points normals(3, 5);
  for (int i = 0; i < 5; ++i) normals.col(i) = Vec3(1.0 + i, -0.5, 0.25 * i).normalized();

  const DenseBlock g = assemble_block(t, s, Stokeslet{1.5});
  const DenseBlock p = assemble_block(t, s, StokesPressure{});
  const DenseBlock tr = assemble_block(t, s, StokesTraction{1.0}, &normals);
  ASSERT_EQ(g.rows(), 15);
  ASSERT_EQ(g.cols(), 21);
  ASSERT_EQ(p.rows(), 5);
  ASSERT_EQ(p.cols(), 21);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 7; ++j) {
      EXPECT_EQ(Mat3(g.entries.block(3 * i, 3 * j, 3, 3)), stokeslet(t.col(i), s.col(j), 1.5));
      EXPECT_EQ(Mat3(tr.entries.block(3 * i, 3 * j, 3, 3)), stokes_traction_kernel(t.col(i), normals.col(i), s.col(j)));
      EXPECT_EQ(Vec3(p.entries.block<1, 3>(i, 3 * j).transpose()), stokes_pressure(t.col(i), s.col(j)) / (8 * M_PI));
    }
  }
}

TEST(Assemble, TranslationInvariant) {
  std::mt19937_64 rng(4);
  const Points t = random_points(rng, 4, 0.0), s = random_points(rng, 6, 3.0);
  const Vec3 d(0.5, -0.25, 0.125);  // exactly representable shift
  const DenseBlock a = assemble_block(t, s, Stokeslet{});
  const DenseBlock b = assemble_block(t.colwise() + d, s.colwise() + d, Stokeslet{});
  EXPECT_LE((a.entries - b.entries).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Assemble, CoincidentReportsIndices) {
  Points t(3, 2), s(3, 3);
  t << 0, 1, 0, 0, 0, 0;
  s << 5, 1, 7, 0, 0, 0, 0, 0, 0;
  try {
    assemble_block(t, s, LaplaceSingle{});
    FAIL();
  } catch (const SingularityError& e) {
    EXPECT_EQ(e.target(), 1);
    EXPECT_EQ(e.source(), 1);
  }
}

TEST(Assemble, TractionNeedsNormals) {
  Points t(3, 1), s(3, 1);
  t.col(0) = Vec3(1, 0, 0);
  s.col(0) = Vec3::Zero();
  EXPECT_THROW(assemble_block(t, s, StokesTraction{}), InvalidArgument);
}

TEST(Assemble, OneBodySphereBlockNotTruncated) {
  const Particle p = make_particle(Sphere{1.0}, Vec3::Zero(), Mat3::Identity(), Discretization{686, 0.41, 1.2});
  const DenseBlock b = assemble_block(p.collocation.points, p.proxy.points, LaplaceSingle{});
  Eigen::BDCSVD<Matrix> svd(b.entries);
  const Vector s = svd.singularValues();
  EXPECT_GT(s[s.size() - 1] / s[0], std::numeric_limits<double>::epsilon());
}
