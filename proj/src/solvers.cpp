#include "mfs/solvers.hpp"

#include <atomic>
#include <chrono>
#include <cmath>

namespace mfs {

namespace {

std::atomic<std::uint64_t> g_factorizations{0};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Vector rotate_stacked(const Mat3& r, const Vector& v) {
  Vector out(v.size());
  for (Index i = 0; i < v.size() / 3; ++i) out.segment<3>(3 * i) = r * v.segment<3>(3 * i);
  return out;
}

Vector semiaxes_of(const Shape& s) {
  if (const auto* sp = std::get_if<Sphere>(&s)) return Vector::Constant(3, sp->radius);
  const auto& e = std::get<Ellipsoid>(s);
  return (Vector(3) << e.a, e.b, e.c).finished();
}

/// True when `p` is a rotated (and possibly resized) copy of `base` with the
/// same body-frame nodes; `ratio` receives the size ratio.
bool same_reference(const Particle& base, const Particle& p, bool allow_resize, double& ratio) {
  if (base.shape.index() != p.shape.index() || base.m() != p.m() || base.n() != p.n()) return false;
  const double sb = shape_scale(base.shape), sp = shape_scale(p.shape);
  ratio = sp / sb;
  if (!allow_resize && std::abs(ratio - 1.0) > 1e-12) return false;
  if ((semiaxes_of(p.shape) / sp - semiaxes_of(base.shape) / sb).cwiseAbs().maxCoeff() > 1e-12) return false;
  const double tol = 1e-12 * sp;
  if ((p.reference_collocation.points - ratio * base.reference_collocation.points).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  return (p.reference_proxy.points - ratio * base.reference_proxy.points).cwiseAbs().maxCoeff() <= tol;
}

DenseBlock completion_block(const DenseBlock& s, const Particle& base, bool stokes) {
  DenseBlock sl = s;
  if (!stokes) {
    const double n = static_cast<double>(s.cols());
    const Vector row_mean = s.entries.rowwise().sum() / n;
    sl.entries.colwise() -= row_mean;
    sl.entries.array() += 1.0 / n;
    return sl;
  }
  const RigidMatrix kn = rigid_matrix(base.reference_proxy.points, Vec3::Zero());
  const RigidMatrix km = rigid_matrix(base.reference_collocation.points, Vec3::Zero());
  const Matrix knd = kn.dense();
  const Matrix skn = s.entries * knd;
  sl.entries -= skn * gram_inverse(kn) * knd.transpose();
  sl.entries += km.dense() * knd.transpose();
  return sl;
}

void check_count(std::size_t got, Index want, const char* who) {
  if (static_cast<Index>(got) != want) {
    throw InvalidArgument(std::string(who) + ": expected one value per particle");
  }
}

struct Stacked {
  Points points;
  Vector values;
};

Stacked stack_proxy(const Cluster& cluster, const std::vector<Vector>& per_body) {
  Index n = 0, len = 0;
  for (std::size_t k = 0; k < per_body.size(); ++k) {
    n += cluster.particles[k].n();
    len += per_body[k].size();
  }
  Stacked s{Points(3, n), Vector(len)};
  Index pc = 0, vc = 0;
  for (std::size_t k = 0; k < per_body.size(); ++k) {
    const auto& p = cluster.particles[k];
    s.points.middleCols(pc, p.n()) = p.proxy.points;
    s.values.segment(vc, per_body[k].size()) = per_body[k];
    pc += p.n();
    vc += per_body[k].size();
  }
  return s;
}

double max_abs(const std::vector<Vector>& vs) {
  double m = 0.0;
  for (const auto& v : vs) {
    if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  }
  return m;
}

/// Shared tail of all four solvers: GMRES on the preconditioned system, then
/// strengths recovered body by body.
struct SolvedSystem {
  Vector gamma;
  Vector strengths;
  SolveReport report;
};

SolvedSystem run_gmres(const BlockSystemContext& ctx, const Vector& rhs, double rhs_seconds) {
  auto t0 = Clock::now();
  GmresResult g = gmres([&](const Vector& v) { return preconditioned_matvec(ctx, v); }, rhs, ctx.tolerance(),
                        ctx.options.max_iters);
  SolvedSystem out;
  out.report = g.report;
  out.report.times.assembly = ctx.assembly_seconds;
  out.report.times.factorization = ctx.factorization_seconds;
  out.report.times.rhs = rhs_seconds;
  out.report.times.gmres = seconds_since(t0);
  t0 = Clock::now();
  out.gamma = std::move(g.x);
  out.strengths = block_pinv(ctx, out.gamma);
  out.report.times.recover = seconds_since(t0);
  return out;
}

void split_per_body(const BlockSystemContext& ctx, const SolvedSystem& sys, Solution& sol) {
  const Index p = ctx.cluster.size();
  sol.strengths.resize(p);
  sol.surface_values.resize(p);
  for (Index k = 0; k < p; ++k) {
    const auto& b = ctx.bodies[k];
    sol.strengths[k] = sys.strengths.segment(b.col_offset, b.cols);
    sol.surface_values[k] = sys.gamma.segment(b.row_offset, b.rows);
  }
}

Solution new_solution(const BlockSystemContext& ctx, ProblemKind expected) {
  if (ctx.kind != expected) throw InvalidArgument("solver called with a context built for " + to_string(ctx.kind));
  Solution sol;
  sol.kind = ctx.kind;
  sol.mu = ctx.options.mu;
  return sol;
}

}  // namespace

bool is_stokes(ProblemKind kind) { return kind == ProblemKind::Resistance || kind == ProblemKind::Mobility; }

bool uses_completion(ProblemKind kind) { return kind == ProblemKind::Elastance || kind == ProblemKind::Mobility; }

double default_tolerance(ProblemKind kind) { return is_stokes(kind) ? 1e-7 : 1e-8; }

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Capacitance:
      return "capacitance";
    case ProblemKind::Elastance:
      return "elastance";
    case ProblemKind::Resistance:
      return "resistance";
    case ProblemKind::Mobility:
      return "mobility";
  }
  return "unknown";
}

ProblemKind parse_problem_kind(const std::string& name) {
  for (auto k : {ProblemKind::Capacitance, ProblemKind::Elastance, ProblemKind::Resistance, ProblemKind::Mobility}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown problem kind '" + name + "'");
}

std::uint64_t factorization_count() { return g_factorizations.load(); }

BlockSystemContext build_context(const Cluster& cluster, ProblemKind kind, const SolverOptions& options) {
  if (cluster.size() == 0) throw InvalidArgument("build_context: empty cluster");
  if (options.max_iters < 1) throw InvalidArgument("build_context: max_iters must be positive");
  if (options.tolerance && !(*options.tolerance > 0.0 && *options.tolerance < 1.0)) {
    throw InvalidArgument("build_context: tolerance must lie in (0, 1)");
  }
  if (!(options.mu > 0.0)) throw InvalidArgument("build_context: mu must be positive");
  validate_evaluator(options.evaluator);

  BlockSystemContext ctx;
  ctx.kind = kind;
  ctx.options = options;
  ctx.cluster = cluster;
  const bool stokes = is_stokes(kind);
  const bool completion = uses_completion(kind);
  const int d = stokes ? 3 : 1;
  if (stokes) {
    ctx.kernel = Stokeslet{options.mu};
  } else {
    ctx.kernel = LaplaceSingle{};
  }

  // Group bodies by reference geometry.
  std::vector<Index> base_of_shape;
  Index total_m = 0, total_n = 0;
  for (Index k = 0; k < cluster.size(); ++k) {
    const Particle& p = cluster.particles[k];
    BodyBlock b;
    b.rotation = p.rotation;
    b.rows = d * p.m();
    b.cols = d * p.n();
    b.row_offset = d * total_m;
    b.col_offset = d * total_n;
    total_m += p.m();
    total_n += p.n();
    b.shape = -1;
    for (std::size_t s = 0; s < base_of_shape.size(); ++s) {
      double ratio = 1.0;
      if (same_reference(cluster.particles[base_of_shape[s]], p, !completion, ratio)) {
        b.shape = static_cast<Index>(s);
        b.scale = ratio;
        break;
      }
    }
    if (b.shape < 0) {
      b.shape = static_cast<Index>(base_of_shape.size());
      base_of_shape.push_back(k);
      ctx.shapes.emplace_back();
    }
    ctx.shapes[b.shape].bodies.push_back(k);
    b.km = rigid_matrix(p.collocation.points, p.center);
    b.kn = rigid_matrix(p.proxy.points, p.center);
    b.projector = stokes ? Projector::stokes_rigid(b.kn) : Projector::laplace_mean(p.n());
    ctx.bodies.push_back(std::move(b));
  }
  ctx.total_rows = d * total_m;
  ctx.total_cols = d * total_n;
  ctx.collocation.resize(3, total_m);
  ctx.proxy.resize(3, total_n);
  Index mc = 0, nc = 0;
  for (const auto& p : cluster.particles) {
    ctx.collocation.middleCols(mc, p.m()) = p.collocation.points;
    ctx.proxy.middleCols(nc, p.n()) = p.proxy.points;
    mc += p.m();
    nc += p.n();
  }

  for (std::size_t s = 0; s < ctx.shapes.size(); ++s) {
    const Particle& base = cluster.particles[base_of_shape[s]];
    auto t0 = Clock::now();
    ctx.shapes[s].self_block =
        assemble_block(base.reference_collocation.points, base.reference_proxy.points, ctx.kernel);
    DenseBlock diag = completion ? completion_block(ctx.shapes[s].self_block, base, stokes) : DenseBlock{};
    ctx.assembly_seconds += seconds_since(t0);
    t0 = Clock::now();
    ctx.shapes[s].factor = factorize(completion ? diag : ctx.shapes[s].self_block, options.trunc_eps,
                                     options.factor_method);
    ++g_factorizations;
    ctx.factorization_seconds += seconds_since(t0);
  }
  return ctx;
}

Vector completion_strengths(double charge, Index n) {
  if (n <= 0) throw InvalidArgument("completion_strengths: empty proxy set");
  if (!std::isfinite(charge)) throw InvalidArgument("completion_strengths: charge is not finite");
  return Vector::Constant(n, charge / static_cast<double>(n));
}

Vector completion_strengths(const Vec6& load, const RigidMatrix& kn) {
  if (!load.allFinite()) throw InvalidArgument("completion_strengths: load is not finite");
  return kn.apply(gram_inverse(kn) * load);
}

Vector block_pinv(const BlockSystemContext& ctx, const Vector& gamma) {
  if (gamma.size() != ctx.total_rows) throw InvalidArgument("block_pinv: wrong surface vector length");
  const bool stokes = is_stokes(ctx.kind);
  Vector out(ctx.total_cols);
  for (const auto& shape : ctx.shapes) {
    const Index nb = static_cast<Index>(shape.bodies.size());
    Matrix rhs(shape.factor.rows, nb);
    for (Index c = 0; c < nb; ++c) {
      const auto& b = ctx.bodies[shape.bodies[c]];
      const Vector seg = gamma.segment(b.row_offset, b.rows);
      rhs.col(c) = stokes ? rotate_stacked(b.rotation.transpose(), seg) : seg;
    }
    const Matrix x = apply_pinv(shape.factor, rhs);
    for (Index c = 0; c < nb; ++c) {
      const auto& b = ctx.bodies[shape.bodies[c]];
      const Vector xc = x.col(c);
      out.segment(b.col_offset, b.cols) = b.scale * (stokes ? rotate_stacked(b.rotation, xc) : xc);
    }
  }
  return out;
}

Vector project_strengths(const BlockSystemContext& ctx, const Vector& strengths) {
  if (strengths.size() != ctx.total_cols) throw InvalidArgument("project_strengths: wrong strength vector length");
  if (!uses_completion(ctx.kind)) return strengths;
  Vector out(strengths.size());
  for (const auto& b : ctx.bodies) {
    out.segment(b.col_offset, b.cols) = b.projector.complement(strengths.segment(b.col_offset, b.cols));
  }
  return out;
}

Vector self_block_product(const BlockSystemContext& ctx, const Vector& strengths) {
  if (strengths.size() != ctx.total_cols) throw InvalidArgument("self_block_product: wrong strength vector length");
  const bool stokes = is_stokes(ctx.kind);
  Vector out(ctx.total_rows);
  for (const auto& shape : ctx.shapes) {
    const Index nb = static_cast<Index>(shape.bodies.size());
    Matrix x(shape.self_block.cols(), nb);
    for (Index c = 0; c < nb; ++c) {
      const auto& b = ctx.bodies[shape.bodies[c]];
      const Vector seg = strengths.segment(b.col_offset, b.cols);
      x.col(c) = stokes ? rotate_stacked(b.rotation.transpose(), seg) : seg;
    }
    const Matrix y = shape.self_block.entries * x;
    for (Index c = 0; c < nb; ++c) {
      const auto& b = ctx.bodies[shape.bodies[c]];
      const Vector yc = y.col(c);
      out.segment(b.row_offset, b.rows) = (stokes ? rotate_stacked(b.rotation, yc) : yc) / b.scale;
    }
  }
  return out;
}

Vector eval_with_self_correction(const BlockSystemContext& ctx, const Vector& strengths) {
  if (strengths.size() != ctx.total_cols) throw InvalidArgument("eval_with_self_correction: wrong length");
  if (ctx.cluster.size() == 1) return Vector::Zero(ctx.total_rows);
  return eval_field(ctx.kernel, ctx.proxy, strengths, ctx.collocation, ctx.options.evaluator) -
         self_block_product(ctx, strengths);
}

Vector preconditioned_matvec(const BlockSystemContext& ctx, const Vector& gamma) {
  const Vector strengths = project_strengths(ctx, block_pinv(ctx, gamma));
  return eval_with_self_correction(ctx, strengths) + gamma;
}

Solution solve_capacitance(const BlockSystemContext& ctx, const std::vector<double>& voltages) {
  Solution sol = new_solution(ctx, ProblemKind::Capacitance);
  check_count(voltages.size(), ctx.cluster.size(), "solve_capacitance");
  auto t0 = Clock::now();
  Vector rhs(ctx.total_rows);
  for (Index k = 0; k < ctx.cluster.size(); ++k) {
    if (!std::isfinite(voltages[k])) throw InvalidArgument("solve_capacitance: voltage is not finite");
    const auto& b = ctx.bodies[k];
    rhs.segment(b.row_offset, b.rows).setConstant(voltages[k]);
  }
  const SolvedSystem sys = run_gmres(ctx, rhs, seconds_since(t0));
  split_per_body(ctx, sys, sol);
  sol.effective_strengths = sol.strengths;
  sol.voltages = voltages;
  for (const auto& a : sol.strengths) sol.charges.push_back(a.sum());
  sol.report = sys.report;
  sol.report.max_strength_magnitude = max_abs(sol.effective_strengths);
  return sol;
}

Solution solve_elastance(const BlockSystemContext& ctx, const std::vector<double>& charges) {
  Solution sol = new_solution(ctx, ProblemKind::Elastance);
  check_count(charges.size(), ctx.cluster.size(), "solve_elastance");
  auto t0 = Clock::now();
  Vector alpha0(ctx.total_cols);
  for (Index k = 0; k < ctx.cluster.size(); ++k) {
    const auto& b = ctx.bodies[k];
    alpha0.segment(b.col_offset, b.cols) = completion_strengths(charges[k], b.cols);
  }
  const Vector rhs = -eval_field(ctx.kernel, ctx.proxy, alpha0, ctx.collocation, ctx.options.evaluator);
  const SolvedSystem sys = run_gmres(ctx, rhs, seconds_since(t0));
  split_per_body(ctx, sys, sol);
  const Vector effective = project_strengths(ctx, sys.strengths) + alpha0;
  for (Index k = 0; k < ctx.cluster.size(); ++k) {
    const auto& b = ctx.bodies[k];
    sol.effective_strengths.push_back(effective.segment(b.col_offset, b.cols));
    sol.voltages.push_back(-sol.strengths[k].mean());
  }
  sol.charges = charges;
  sol.report = sys.report;
  sol.report.max_strength_magnitude = max_abs(sol.effective_strengths);
  return sol;
}

Solution solve_resistance(const BlockSystemContext& ctx, const std::vector<Vec6>& motions) {
  Solution sol = new_solution(ctx, ProblemKind::Resistance);
  check_count(motions.size(), ctx.cluster.size(), "solve_resistance");
  auto t0 = Clock::now();
  Vector rhs(ctx.total_rows);
  for (Index k = 0; k < ctx.cluster.size(); ++k) {
    if (!motions[k].allFinite()) throw InvalidArgument("solve_resistance: motion is not finite");
    const auto& b = ctx.bodies[k];
    rhs.segment(b.row_offset, b.rows) = b.km.apply(motions[k]);
  }
  const SolvedSystem sys = run_gmres(ctx, rhs, seconds_since(t0));
  split_per_body(ctx, sys, sol);
  sol.effective_strengths = sol.strengths;
  sol.motions = motions;
  for (Index k = 0; k < ctx.cluster.size(); ++k) sol.loads.push_back(ctx.bodies[k].kn.apply_transpose(sol.strengths[k]));
  sol.report = sys.report;
  sol.report.max_strength_magnitude = max_abs(sol.effective_strengths);
  return sol;
}

Solution solve_mobility(const BlockSystemContext& ctx, const std::vector<Vec6>& loads) {
  Solution sol = new_solution(ctx, ProblemKind::Mobility);
  check_count(loads.size(), ctx.cluster.size(), "solve_mobility");
  auto t0 = Clock::now();
  Vector lambda0(ctx.total_cols);
  for (Index k = 0; k < ctx.cluster.size(); ++k) {
    const auto& b = ctx.bodies[k];
    lambda0.segment(b.col_offset, b.cols) = b.kn.apply(b.projector.gram_inverse() * loads[k]);
    if (!loads[k].allFinite()) throw InvalidArgument("solve_mobility: load is not finite");
  }
  const Vector rhs = -eval_field(ctx.kernel, ctx.proxy, lambda0, ctx.collocation, ctx.options.evaluator);
  const SolvedSystem sys = run_gmres(ctx, rhs, seconds_since(t0));
  split_per_body(ctx, sys, sol);
  const Vector effective = project_strengths(ctx, sys.strengths) + lambda0;
  for (Index k = 0; k < ctx.cluster.size(); ++k) {
    const auto& b = ctx.bodies[k];
    sol.effective_strengths.push_back(effective.segment(b.col_offset, b.cols));
    sol.motions.push_back(-b.kn.apply_transpose(sol.strengths[k]));
  }
  sol.loads = loads;
  sol.report = sys.report;
  sol.report.max_strength_magnitude = max_abs(sol.effective_strengths);
  return sol;
}

Solution solve_capacitance(const Cluster& cluster, const std::vector<double>& voltages, const SolverOptions& options) {
  return solve_capacitance(build_context(cluster, ProblemKind::Capacitance, options), voltages);
}

Solution solve_elastance(const Cluster& cluster, const std::vector<double>& charges, const SolverOptions& options) {
  return solve_elastance(build_context(cluster, ProblemKind::Elastance, options), charges);
}

Solution solve_resistance(const Cluster& cluster, const std::vector<Vec6>& motions, const SolverOptions& options) {
  return solve_resistance(build_context(cluster, ProblemKind::Resistance, options), motions);
}

Solution solve_mobility(const Cluster& cluster, const std::vector<Vec6>& loads, const SolverOptions& options) {
  return solve_mobility(build_context(cluster, ProblemKind::Mobility, options), loads);
}

int field_columns(FieldKind want) {
  switch (want) {
    case FieldKind::Potential:
      return 1;
    case FieldKind::VelocityPressure:
      return 4;
    default:
      return 3;
  }
}

Matrix evaluate_solution(const Solution& solution, const Cluster& cluster, const Points& points, FieldKind want,
                         const Points* normals, const EvaluatorConfig& cfg) {
  const bool stokes = is_stokes(solution.kind);
  if (stokes == (want == FieldKind::Potential)) {
    throw InvalidArgument("evaluate_solution: requested field does not match the problem kind");
  }
  check_count(solution.effective_strengths.size(), cluster.size(), "evaluate_solution");
  for (Index k = 0; k < cluster.size(); ++k) {
    if (solution.effective_strengths[k].size() != (stokes ? 3 : 1) * cluster.particles[k].n()) {
      throw InvalidArgument("evaluate_solution: strengths do not match the cluster discretization");
    }
  }
  for (Index i = 0; i < points.cols(); ++i) {
    const Vec3 x = points.col(i);
    for (const auto& p : cluster.particles) {
      if ((x - p.center).norm() <= bounding_radius(p.shape) && p.contains(x)) {
        throw DomainError("evaluate_solution: point " + std::to_string(i) + " lies inside a particle");
      }
    }
  }
  const Stacked src = stack_proxy(cluster, solution.effective_strengths);
  const Index np = points.cols();
  Matrix out(np, field_columns(want));
  auto to_rows = [&](const Vector& v, int comps, int first_col) {
    for (Index i = 0; i < np; ++i) {
      for (int c = 0; c < comps; ++c) out(i, first_col + c) = v[comps * i + c];
    }
  };
  switch (want) {
    case FieldKind::Potential:
      to_rows(eval_field(LaplaceSingle{}, src.points, src.values, points, cfg), 1, 0);
      break;
    case FieldKind::Velocity:
    case FieldKind::VelocityPressure:
      to_rows(eval_field(Stokeslet{solution.mu}, src.points, src.values, points, cfg), 3, 0);
      if (want == FieldKind::VelocityPressure) {
        to_rows(eval_field(StokesPressure{}, src.points, src.values, points, cfg), 1, 3);
      }
      break;
    case FieldKind::Traction:
      to_rows(eval_field(StokesTraction{solution.mu}, src.points, src.values, points, cfg, normals), 3, 0);
      break;
  }
  return out;
}

}  // namespace mfs
