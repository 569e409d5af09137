#include <gtest/gtest.h>

#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "mfs/geometry.hpp"
#include "mfs/kernels.hpp"
#include "mfs/linalg.hpp"
#include "mfs/solvers.hpp"

using namespace mfs;

namespace {

Vector randn(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

Cluster single_sphere(int n, double delta = 0.3) {
  Cluster c;
  c.particles.push_back(make_particle(Sphere{1.0}, Vec3::Zero(), Mat3::Identity(), Discretization{n, delta, 1.2}));
  return c;
}

Cluster spheres_at(const std::vector<Vec3>& centers, int n, double delta = 0.3) {
  Cluster c;
  for (const auto& x : centers) {
    c.particles.push_back(make_particle(Sphere{1.0}, x, Mat3::Identity(), Discretization{n, delta, 1.2}));
  }
  return c;
}

Cluster grown(int count, double sep, int n, std::uint64_t seed = 1, Shape shape = Sphere{1.0}, double delta = 0.3) {
  GrowthOptions o;
  o.count = count;
  o.min_separation = sep;
  o.shape = shape;
  o.seed = seed;
  o.discretization = Discretization{n, delta, 0.0};
  return grow_cluster(o);
}

Vec6 motion(const Vec3& v, const Vec3& w) {
  Vec6 u;
  u << v, w;
  return u;
}

KernelKind kernel_for(ProblemKind k) { return is_stokes(k) ? KernelKind{Stokeslet{}} : KernelKind{LaplaceSingle{}}; }

Matrix dense_pinv(const Matrix& a) { return a.completeOrthogonalDecomposition().pseudoInverse(); }

// Dense rigid-coupling pieces built straight from their definitions.
Matrix dense_k(const Points& nodes, const Vec3& c) {
  Matrix k(3 * nodes.cols(), 6);
  for (Index i = 0; i < nodes.cols(); ++i) {
    const Vec3 d = nodes.col(i) - c;
    Mat3 cross;
    cross << 0, d.z(), -d.y(), -d.z(), 0, d.x(), d.y(), -d.x(), 0;
    k.block<3, 3>(3 * i, 0) = Mat3::Identity();
    k.block<3, 3>(3 * i, 3) = cross;
  }
  return k;
}

Matrix dense_projector(const Particle& p, bool stokes) {
  if (!stokes) return Matrix::Constant(p.n(), p.n(), 1.0 / p.n());
  const Matrix k = dense_k(p.proxy.points, p.center);
  return k * (k.transpose() * k).inverse() * k.transpose();
}

Matrix dense_lr(const Particle& p, bool stokes) {
  if (!stokes) return Matrix::Constant(p.m(), p.n(), 1.0 / p.n());
  return dense_k(p.collocation.points, p.center) * dense_k(p.proxy.points, p.center).transpose();
}

// I + S_off * blockdiag(P_k pinv(D_k)) with D_k = S_kk (Dirichlet) or
// S_kk (I - L_k) + L_r,k and P_k = I - L_k (completion).
Matrix dense_preconditioned(const Cluster& c, ProblemKind kind) {
  const bool stokes = is_stokes(kind);
  const int d = stokes ? 3 : 1;
  const KernelKind kk = kernel_for(kind);
  Index rows = 0, cols = 0;
  std::vector<Index> ro, co;
  for (const auto& p : c.particles) {
    ro.push_back(rows);
    co.push_back(cols);
    rows += d * p.m();
    cols += d * p.n();
  }
  Matrix s(rows, cols), pre = Matrix::Zero(cols, rows);
  for (std::size_t k = 0; k < c.particles.size(); ++k) {
    const Particle& pk = c.particles[k];
    for (std::size_t l = 0; l < c.particles.size(); ++l) {
      const DenseBlock b = assemble_block(pk.collocation.points, c.particles[l].proxy.points, kk);
      s.block(ro[k], co[l], b.rows(), b.cols()) = k == l ? Matrix::Zero(b.rows(), b.cols()) : b.entries;
    }
    const Matrix skk = assemble_block(pk.collocation.points, pk.proxy.points, kk).entries;
    if (uses_completion(kind)) {
      const Matrix proj = Matrix::Identity(d * pk.n(), d * pk.n()) - dense_projector(pk, stokes);
      const Matrix sl = skk * proj + dense_lr(pk, stokes);
      pre.block(co[k], ro[k], d * pk.n(), d * pk.m()) = proj * dense_pinv(sl);
    } else {
      pre.block(co[k], ro[k], d * pk.n(), d * pk.m()) = dense_pinv(skk);
    }
  }
  return Matrix::Identity(rows, rows) + s * pre;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Problem, Names) {
  for (auto k : {ProblemKind::Capacitance, ProblemKind::Elastance, ProblemKind::Resistance, ProblemKind::Mobility}) {
    EXPECT_EQ(parse_problem_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_problem_kind("viscosity"), InvalidArgument);
  EXPECT_EQ(default_tolerance(ProblemKind::Elastance), 1e-8);
  EXPECT_EQ(default_tolerance(ProblemKind::Mobility), 1e-7);
}

TEST(Context, CongruentEllipsoidsShareOneFactorization) {
  std::mt19937_64 rng(1);
  const Ellipsoid e{0.4, 0.6, 1.0};
  Cluster c;
  c.particles.push_back(make_particle(e, Vec3::Zero(), random_orientation(rng), Discretization{12, 0.08, 1.3}));
  c.particles.push_back(make_particle(e, Vec3(3, 0, 0), random_orientation(rng), Discretization{12, 0.08, 1.3}));
  for (ProblemKind k : {ProblemKind::Resistance, ProblemKind::Mobility}) {
    const auto before = factorization_count();
    const BlockSystemContext ctx = build_context(c, k);
    EXPECT_EQ(factorization_count() - before, 1u);
    EXPECT_EQ(ctx.shapes.size(), 1u);
  }
}

TEST(Context, DifferentOffsetsGetSeparateFactors) {
  Cluster c = spheres_at({Vec3::Zero(), Vec3(3, 0, 0)}, 30);
  c.particles[1] = rediscretize(c.particles[1], Discretization{30, 0.35, 1.2});
  EXPECT_EQ(build_context(c, ProblemKind::Capacitance).shapes.size(), 2u);
}

TEST(Context, ResizedSphereScalesPseudoinverse) {
  Cluster c;
  c.particles.push_back(make_particle(Sphere{1.0}, Vec3::Zero(), Mat3::Identity(), Discretization{60, 0.3, 1.2}));
  c.particles.push_back(make_particle(Sphere{2.0}, Vec3(4, 0, 0), Mat3::Identity(), Discretization{60, 0.6, 1.2}));
  std::mt19937_64 rng(2);
  for (ProblemKind k : {ProblemKind::Capacitance, ProblemKind::Resistance}) {
    const auto before = factorization_count();
    const BlockSystemContext ctx = build_context(c, k);
    EXPECT_EQ(factorization_count() - before, 1u);
    const Vector gamma = randn(rng, ctx.total_rows);
    const Vector x = block_pinv(ctx, gamma);
    const auto& b = ctx.bodies[1];
    const Particle& p = c.particles[1];
    const Matrix s = assemble_block(p.collocation.points, p.proxy.points, kernel_for(k)).entries;
    const Vector want = dense_pinv(s) * gamma.segment(b.row_offset, b.rows);
    EXPECT_LE((x.segment(b.col_offset, b.cols) - want).norm(), 1e-12 * want.norm() * 1e3);
    EXPECT_NEAR(b.scale, 2.0, 1e-15);
  }
}

TEST(Context, CompletionBlockMatchesDense) {
  const Cluster c = single_sphere(20);
  const Particle& p = c.particles[0];
  for (ProblemKind k : {ProblemKind::Elastance, ProblemKind::Mobility}) {
    const BlockSystemContext ctx = build_context(c, k);
    const bool stokes = is_stokes(k);
    const int d = stokes ? 3 : 1;
    const Matrix s = assemble_block(p.collocation.points, p.proxy.points, kernel_for(k)).entries;
    const Matrix want = s * (Matrix::Identity(d * p.n(), d * p.n()) - dense_projector(p, stokes)) + dense_lr(p, stokes);
    const OneBodyFactor& f = ctx.shapes[0].factor;
    const Matrix got = f.left * f.singular_values.asDiagonal() * f.right.transpose();
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-13 * want.cwiseAbs().maxCoeff() * 10);
  }
}

TEST(Completion, LaplaceConstant) {
  const Vector a = completion_strengths(4 * M_PI, 100);
  ASSERT_EQ(a.size(), 100);
  EXPECT_LE((a - Vector::Constant(100, 4 * M_PI / 100)).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Completion, StokesExactLoadsAndMinimumNorm) {
  const Particle p = make_particle(Sphere{1.0}, Vec3(1, 2, 3), Mat3::Identity(), Discretization{80, 0.3, 1.2});
  const RigidMatrix kn = rigid_matrix(p.proxy.points, p.center);
  std::mt19937_64 rng(3);
  const Vec6 ft = randn(rng, 6);
  const Vector l0 = completion_strengths(ft, kn);
  EXPECT_LE((kn.apply_transpose(l0) - ft).cwiseAbs().maxCoeff(), 1e-12 * ft.cwiseAbs().maxCoeff());
  const Matrix k = dense_k(p.proxy.points, p.center);
  for (int t = 0; t < 100; ++t) {
    // any other vector with the same loads: l0 plus something in null(K^T)
    const Vector z = randn(rng, l0.size());
    const Vector mu = l0 + z - k * (k.transpose() * k).ldlt().solve(k.transpose() * z);
    EXPECT_LE((k.transpose() * mu - ft).norm(), 1e-10);
    EXPECT_LE(l0.norm(), mu.norm());
  }
}

TEST(Completion, SymmetricProxySetGivesUniformForce) {
  const NodeSet half = fibonacci_sphere_nodes(100, 0.7);
  Points y(3, 200);
  y << half.points, -half.points;
  Vec6 ft = Vec6::Zero();
  ft[2] = 1.0;
  const Vector l0 = completion_strengths(ft, rigid_matrix(y, Vec3::Zero()));
  for (Index i = 0; i < 200; ++i) EXPECT_LE((l0.segment<3>(3 * i) - Vec3(0, 0, 1.0 / 200)).norm(), 1e-12);
}

TEST(Matvec, SingleBodyIsIdentity) {
  std::mt19937_64 rng(4);
  for (ProblemKind k : {ProblemKind::Capacitance, ProblemKind::Elastance, ProblemKind::Resistance, ProblemKind::Mobility}) {
    const BlockSystemContext ctx = build_context(single_sphere(30), k);
    const Vector g = randn(rng, ctx.total_rows);
    EXPECT_EQ((preconditioned_matvec(ctx, g) - g).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Matvec, MatchesDenseOracleOnTwoBodies) {
  const Cluster c = spheres_at({Vec3::Zero(), Vec3(2.4, 0.3, -0.2)}, 5, 0.4);
  std::mt19937_64 rng(5);
  SolverOptions opt;
  opt.evaluator.backend = EvaluatorConfig::Backend::Direct;
  for (ProblemKind k : {ProblemKind::Capacitance, ProblemKind::Elastance, ProblemKind::Resistance, ProblemKind::Mobility}) {
    const BlockSystemContext ctx = build_context(c, k, opt);
    const Matrix a = dense_preconditioned(c, k);
    for (int t = 0; t < 3; ++t) {
      const Vector g = randn(rng, ctx.total_rows);
      const Vector want = a * g;
      EXPECT_LE((preconditioned_matvec(ctx, g) - want).cwiseAbs().maxCoeff(), 1e-11 * want.cwiseAbs().maxCoeff())
          << to_string(k);
    }
  }
}

TEST(Matvec, MatchesDenseOracleOnRotatedEllipsoids) {
  std::mt19937_64 rng(6);
  const Ellipsoid e{0.4, 0.6, 1.0};
  Cluster c;
  c.particles.push_back(make_particle(e, Vec3::Zero(), random_orientation(rng), Discretization{5, 0.08, 1.3}));
  c.particles.push_back(make_particle(e, Vec3(0.5, 2.5, 0.3), random_orientation(rng), Discretization{5, 0.08, 1.3}));
  for (ProblemKind k : {ProblemKind::Resistance, ProblemKind::Mobility}) {
    const BlockSystemContext ctx = build_context(c, k);
    const Vector g = randn(rng, ctx.total_rows);
    const Vector want = dense_preconditioned(c, k) * g;
    EXPECT_LE((preconditioned_matvec(ctx, g) - want).cwiseAbs().maxCoeff(), 1e-10 * want.cwiseAbs().maxCoeff());
  }
}

TEST(Matvec, MobilityOperatorWellConditioned) {
  const Cluster c = grown(10, 0.2, 40);
  const Matrix a = dense_preconditioned(c, ProblemKind::Mobility);
  const Vector s = Eigen::BDCSVD<Matrix>(a).singularValues();
  EXPECT_LE(s[0] / s[s.size() - 1], 50.0);
}

TEST(Capacitance, SingleSphere) {
  const Solution s = solve_capacitance(single_sphere(1000), {1.0});
  EXPECT_TRUE(s.report.converged);
  EXPECT_LE(rel(s.charges[0], 4 * M_PI), 1e-10);
  EXPECT_EQ(static_cast<int>(s.report.residual_history.size()), s.report.iterations + 1);
}

TEST(Capacitance, ZeroData) {
  const Solution s = solve_capacitance(spheres_at({Vec3::Zero(), Vec3(3, 0, 0)}, 50), {0.0, 0.0});
  EXPECT_EQ(s.charges[0], 0.0);
  EXPECT_EQ(s.effective_strengths[1].cwiseAbs().maxCoeff(), 0.0);
}

TEST(Capacitance, DecouplingLimit) {
  // Centres d = 102 apart. Each sphere sees the other's potential q / (4 pi d),
  // so q_k = 4 pi (phi_k - phi_l / d) + O(d^-2); the coupling is 1e-2, not negligible.
  const double d = 102.0;
  const Solution s = solve_capacitance(spheres_at({Vec3::Zero(), Vec3(d, 0, 0)}, 300), {1.0, -2.0});
  EXPECT_NEAR(s.charges[0], 4 * M_PI * (1.0 + 2.0 / d), 4 * M_PI * 3.0 / (d * d));
  EXPECT_NEAR(s.charges[1], 4 * M_PI * (-2.0 - 1.0 / d), 4 * M_PI * 3.0 / (d * d));
  const Solution far = solve_capacitance(spheres_at({Vec3::Zero(), Vec3(1e6, 0, 0)}, 300), {1.0, -2.0});
  EXPECT_LE(rel(far.charges[0], 4 * M_PI), 1e-5);
  EXPECT_LE(rel(far.charges[1], -8 * M_PI), 1e-5);
}

TEST(Elastance, SingleSphere) {
  const Solution s = solve_elastance(single_sphere(1000), {4 * M_PI});
  EXPECT_TRUE(s.report.converged);
  EXPECT_LE(rel(s.voltages[0], 1.0), 1e-10);
  EXPECT_NEAR(s.effective_strengths[0].sum(), 4 * M_PI, 1e-12);
}

TEST(Elastance, InvertsCapacitance) {
  const Cluster c = grown(10, 0.1, 400);
  std::vector<double> phi;
  std::mt19937_64 rng(7);
  for (int k = 0; k < 10; ++k) phi.push_back(std::uniform_real_distribution<double>(-1, 1)(rng));
  const Solution cap = solve_capacitance(c, phi);
  const Solution el = solve_elastance(c, cap.charges);
  for (int k = 0; k < 10; ++k) {
    EXPECT_NEAR(el.voltages[k], phi[k], 1e-6);
    EXPECT_NEAR(el.effective_strengths[k].sum(), cap.charges[k], 1e-12 * 100);
  }
}

TEST(Resistance, SingleSphereDragAndTorque) {
  const BlockSystemContext ctx = build_context(single_sphere(1000), ProblemKind::Resistance);
  const Solution t = solve_resistance(ctx, {motion(Vec3(0, 0, 1), Vec3::Zero())});
  EXPECT_LE((t.loads[0].head<3>() - Vec3(0, 0, 6 * M_PI)).norm() / (6 * M_PI), 1e-8);
  const Solution r = solve_resistance(ctx, {motion(Vec3::Zero(), Vec3(0, 0, 1))});
  EXPECT_LE((r.loads[0].tail<3>() - Vec3(0, 0, 8 * M_PI)).norm() / (8 * M_PI), 1e-8);
}

TEST(Resistance, ZeroMotion) {
  const Solution s = solve_resistance(spheres_at({Vec3::Zero(), Vec3(3, 0, 0)}, 50), {Vec6::Zero(), Vec6::Zero()});
  EXPECT_EQ(s.loads[0].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.strengths[1].cwiseAbs().maxCoeff(), 0.0);
}

TEST(Resistance, Viscosity) {
  SolverOptions o;
  o.mu = 2.5;
  const Solution s = solve_resistance(single_sphere(600), {motion(Vec3(1, 0, 0), Vec3::Zero())}, o);
  EXPECT_LE(rel(s.loads[0][0], 6 * M_PI * 2.5), 1e-6);
}

TEST(Mobility, SingleSphereSettles) {
  const Cluster c = single_sphere(1000);
  const Solution s = solve_mobility(c, {motion(Vec3(0, 0, -6 * M_PI), Vec3::Zero())});
  EXPECT_TRUE(s.report.converged);
  EXPECT_LE(s.report.iterations, 1);
  EXPECT_LE((s.motions[0].head<3>() - Vec3(0, 0, -1)).norm(), 1e-8);
  EXPECT_LE(s.motions[0].tail<3>().norm(), 1e-8);
}

TEST(Mobility, ZeroLoads) {
  const Solution s = solve_mobility(spheres_at({Vec3::Zero(), Vec3(3, 0, 0)}, 50), {Vec6::Zero(), Vec6::Zero()});
  EXPECT_EQ(s.motions[0].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.effective_strengths[1].cwiseAbs().maxCoeff(), 0.0);
}

TEST(Mobility, NetLoadsExactByConstruction) {
  const Cluster c = grown(4, 0.2, 100, 3);
  std::mt19937_64 rng(8);
  std::vector<Vec6> ft;
  for (int k = 0; k < 4; ++k) ft.push_back(randn(rng, 6));
  const Solution s = solve_mobility(c, ft);
  for (int k = 0; k < 4; ++k) {
    const auto& p = c.particles[k];
    const Vec6 got = rigid_matrix(p.proxy.points, p.center).apply_transpose(s.effective_strengths[k]);
    EXPECT_LE((got - ft[k]).cwiseAbs().maxCoeff(), 1e-10 * ft[k].cwiseAbs().maxCoeff());
    EXPECT_LE((s.loads[k] - ft[k]).cwiseAbs().maxCoeff(), 1e-10 * ft[k].cwiseAbs().maxCoeff());
  }
}

TEST(Mobility, FewerIterationsThanResistance) {
  const Cluster c = grown(6, 0.2, 200, 2);
  std::vector<Vec6> u;
  std::mt19937_64 rng(9);
  for (int k = 0; k < 6; ++k) u.push_back(randn(rng, 6));
  const Solution r = solve_resistance(c, u);
  const Solution m = solve_mobility(c, r.loads);
  EXPECT_LT(m.report.iterations, r.report.iterations);
}

TEST(Mobility, NonConvergenceFlagged) {
  SolverOptions o;
  o.max_iters = 2;
  o.tolerance = 1e-12;
  const Solution s = solve_mobility(grown(4, 0.1, 100), std::vector<Vec6>(4, motion(Vec3(0, 0, -1), Vec3::Zero())), o);
  EXPECT_FALSE(s.report.converged);
  EXPECT_EQ(s.report.iterations, 2);
}

TEST(Solve, RejectsMismatchedData) {
  const Cluster c = spheres_at({Vec3::Zero(), Vec3(3, 0, 0)}, 30);
  EXPECT_THROW(solve_capacitance(c, {1.0}), InvalidArgument);
  EXPECT_THROW(solve_mobility(c, {Vec6::Zero()}), InvalidArgument);
}

TEST(Evaluate, MonopoleField) {
  const Cluster c = single_sphere(1000);
  const Solution s = solve_elastance(c, {4 * M_PI});
  Points x(3, 2);
  x.col(0) = Vec3(2, 0, 0);
  x.col(1) = Vec3(0, -1.2, 1.6);
  const Matrix u = evaluate_solution(s, c, x, FieldKind::Potential);
  EXPECT_NEAR(u(0, 0), 0.5, 1e-8);
  EXPECT_NEAR(u(1, 0), 0.5, 1e-8);
}

TEST(Evaluate, SphereFlowAndPressure) {
  const Cluster c = single_sphere(800);
  const Vec3 f(0, 0, -6 * M_PI);
  const Solution s = solve_mobility(c, {motion(f, Vec3::Zero())});
  Points x(3, 1);
  x.col(0) = Vec3(1.5, -0.5, 2.0);
  const Vec3 r = x.col(0);
  const double rn = r.norm();
  // Translating sphere: Stokeslet plus source doublet, exact outside the body.
  const Vec3 want = (f / rn + r * r.dot(f) / std::pow(rn, 3)) / (8 * M_PI) +
                    (f / std::pow(rn, 3) - 3 * r * r.dot(f) / std::pow(rn, 5)) / (24 * M_PI);
  const double p_want = r.dot(f) / (4 * M_PI * std::pow(rn, 3));
  const Matrix up = evaluate_solution(s, c, x, FieldKind::VelocityPressure);
  EXPECT_LE((Vec3(up.block<1, 3>(0, 0).transpose()) - want).norm(), 1e-7);
  EXPECT_NEAR(up(0, 3), p_want, 1e-6);
}

TEST(Evaluate, SurfaceTractionIntegratesToForce) {
  const Cluster c = single_sphere(600);
  const Vec3 f(0.3, -0.2, 1.0);
  const Solution s = solve_mobility(c, {motion(f, Vec3::Zero())});
  // exact traction on a translating sphere is uniform: -f / (4 pi R^2)
  const NodeSet surf = fibonacci_sphere_nodes(200, 1.0);
  const Matrix t = evaluate_solution(s, c, surf.points, FieldKind::Traction, &surf.points);
  // derivative of the field, so one order less accurate than the velocity
  for (Index i = 0; i < 200; ++i) EXPECT_LE((Vec3(t.row(i).transpose()) + f / (4 * M_PI)).norm(), 1e-4 * f.norm());
}

TEST(Evaluate, FarFieldIsStokeslet) {
  const Cluster c = grown(3, 0.3, 200);
  const std::vector<Vec6> ft = {motion(Vec3(0, 0, -1), Vec3::Zero()), motion(Vec3(0, 0, -1), Vec3::Zero()),
                                motion(Vec3(0.5, 0, -1), Vec3::Zero())};
  const Solution s = solve_mobility(c, ft);
  Vec3 ftot = Vec3::Zero();
  for (const auto& x : ft) ftot += x.head<3>();
  double diam = 0.0;
  for (const auto& p : c.particles) diam = std::max(diam, 2 * (p.center.norm() + 1.0));
  const Vec3 rhat = Vec3(0.3, 0.4, -0.5).normalized();
  const double r = 50 * diam;
  Points x(3, 1);
  x.col(0) = rhat * r;
  const Vec3 u = evaluate_solution(s, c, x, FieldKind::Velocity).row(0).transpose();
  const Vec3 want = (Mat3::Identity() + rhat * rhat.transpose()) * ftot;
  EXPECT_LE((u * 8 * M_PI * r - want).norm(), 0.01 * want.norm());
}

TEST(Evaluate, CollocationReproducesRigidMotion) {
  const Cluster c = grown(3, 0.3, 300, 4);
  const Solution s = solve_mobility(c, std::vector<Vec6>(3, motion(Vec3(0, 0, -1), Vec3::Zero())));
  for (int k = 0; k < 3; ++k) {
    const auto& p = c.particles[k];
    const Matrix u = evaluate_solution(s, c, p.collocation.points, FieldKind::Velocity);
    const Vector g = rigid_matrix(p.collocation.points, p.center).apply(s.motions[k]);
    for (Index i = 0; i < p.m(); ++i) {
      EXPECT_LE((Vec3(u.row(i).transpose()) - g.segment<3>(3 * i)).norm(), 1e-3 * g.segment<3>(3 * i).norm());
    }
  }
}

TEST(Evaluate, InsidePointRejected) {
  const Cluster c = single_sphere(100);
  const Solution s = solve_capacitance(c, {1.0});
  Points x(3, 1);
  x.col(0) = Vec3(0.2, 0, 0);
  EXPECT_THROW(evaluate_solution(s, c, x, FieldKind::Potential), DomainError);
  EXPECT_THROW(evaluate_solution(s, c, x, FieldKind::Velocity), InvalidArgument);
}

TEST(Determinism, ThreadCountDoesNotChangeIterates) {
  const Cluster c = grown(5, 0.2, 200, 6);
  SolverOptions one, many;
  one.evaluator.thread_count = 1;
  many.evaluator.thread_count = 3;
  const std::vector<Vec6> f(5, motion(Vec3(0, 0, -1), Vec3::Zero()));
  const Solution a = solve_mobility(c, f, one);
  const Solution b = solve_mobility(c, f, many);
  EXPECT_EQ(a.report.iterations, b.report.iterations);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(a.motions[k], b.motions[k]);
}
