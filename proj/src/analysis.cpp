#include "mfs/analysis.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace mfs {

namespace {

Vector stack6(const std::vector<Vec6>& v) {
  Vector out(6 * v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out.segment<6>(6 * k) = v[k];
  return out;
}

Vector stack1(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

Cluster with_resolution(const Cluster& cluster, int resolution, double delta_sep, double rect) {
  Cluster out = cluster;
  for (auto& p : out.particles) {
    Discretization d = p.discretization;
    d.resolution = resolution;
    if (delta_sep > 0.0) d.delta_sep = delta_sep;
    if (rect > 0.0) d.rectangularity = rect;
    p = rediscretize(p, d);
  }
  return out;
}

Solution solve_kind(const Cluster& cluster, const SweepSpec& spec, const SolverOptions& options) {
  switch (spec.kind) {
    case ProblemKind::Capacitance:
      return solve_capacitance(cluster, spec.scalar_data, options);
    case ProblemKind::Elastance:
      return solve_elastance(cluster, spec.scalar_data, options);
    case ProblemKind::Resistance:
      return solve_resistance(cluster, spec.rigid_data, options);
    case ProblemKind::Mobility:
      return solve_mobility(cluster, spec.rigid_data, options);
  }
  throw InvalidArgument("convergence_sweep: unknown problem kind");
}

double relative_inf(const Vector& x, const Vector& ref) {
  const double denom = ref.cwiseAbs().maxCoeff();
  if (denom == 0.0) return (x - ref).cwiseAbs().maxCoeff();
  return (x - ref).cwiseAbs().maxCoeff() / denom;
}

}  // namespace

double r_acc(double delta) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw InvalidArgument("r_acc: delta must be non-negative");
  return 1.0 + delta / 2.0 - std::sqrt(delta + delta * delta / 4.0);
}

TwoWayResult two_way_error(const Cluster& cluster, const std::vector<Vec6>& u_ref, const TwoWayOptions& options) {
  if (static_cast<Index>(u_ref.size()) != cluster.size()) {
    throw InvalidArgument("two_way_error: expected one motion per particle");
  }
  const Vector ref = stack6(u_ref);
  if (ref.cwiseAbs().maxCoeff() == 0.0) throw InvalidArgument("two_way_error: reference motion is zero");
  if (!(options.mobility_sep_factor > 0.0) || options.mobility_sep_factor == 1.0) {
    throw InvalidArgument("two_way_error: the two legs need distinct proxy offsets");
  }
  TwoWayResult out;
  out.resistance = solve_resistance(cluster, u_ref, options.resistance);
  out.mobility_cluster = cluster;
  for (auto& p : out.mobility_cluster.particles) {
    Discretization d = p.discretization;
    d.delta_sep *= options.mobility_sep_factor;
    p = rediscretize(p, d);
  }
  out.mobility = solve_mobility(out.mobility_cluster, out.resistance.loads, options.mobility);
  out.error = relative_inf(stack6(out.mobility.motions), ref);
  out.converged = out.resistance.report.converged && out.mobility.report.converged;
  return out;
}

ResidualReport surface_residual(const Solution& solution, const Cluster& cluster, int multiplier,
                                const EvaluatorConfig& cfg) {
  if (multiplier < 1) throw InvalidArgument("surface_residual: multiplier must be positive");
  const bool stokes = is_stokes(solution.kind);
  if (stokes ? static_cast<Index>(solution.motions.size()) != cluster.size()
             : static_cast<Index>(solution.voltages.size()) != cluster.size()) {
    throw InvalidArgument("surface_residual: solution does not match the cluster");
  }
  ResidualReport r;
  std::vector<NodeSet> sets;
  Index total = 0;
  for (const auto& p : cluster.particles) {
    sets.push_back(surface_test_points(p, multiplier * p.m()));
    total += sets.back().size();
  }
  r.points.resize(3, total);
  Index c = 0;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    r.points.middleCols(c, sets[k].size()) = sets[k].points;
    for (Index i = 0; i < sets[k].size(); ++i) r.body.push_back(static_cast<Index>(k));
    c += sets[k].size();
  }
  const Matrix u = evaluate_solution(solution, cluster, r.points, stokes ? FieldKind::Velocity : FieldKind::Potential,
                                     nullptr, cfg);
  r.values.resize(total);
  r.absolute.assign(total, !stokes);
  for (Index i = 0; i < total; ++i) {
    const Index k = r.body[i];
    if (!stokes) {
      r.values[i] = std::abs(u(i, 0) - solution.voltages[k]);
    } else {
      const Particle& p = cluster.particles[k];
      const Vec6& m = solution.motions[k];
      const Vec3 g = m.head<3>() + m.tail<3>().cross(Vec3(r.points.col(i)) - p.center);
      const double err = (u.row(i).transpose() - g).norm();
      const double gn = g.norm();
      if (gn > 0.0) {
        r.values[i] = err / gn;
      } else {
        r.values[i] = err;
        r.absolute[i] = true;
      }
    }
  }
  if (total > 0) r.max = r.values.maxCoeff(&r.argmax);
  r.max_relative = r.max;
  if (!stokes) {
    double phi = 0.0;
    for (double v : solution.voltages) phi = std::max(phi, std::abs(v));
    if (phi > 0.0) r.max_relative = r.max / phi;
  }
  return r;
}

ExtractedMatrix extract_matrix(const Cluster& cluster, MatrixKind which, const SolverOptions& options) {
  const ProblemKind kind = which == MatrixKind::Capacitance  ? ProblemKind::Capacitance
                           : which == MatrixKind::Elastance  ? ProblemKind::Elastance
                           : which == MatrixKind::Resistance ? ProblemKind::Resistance
                                                             : ProblemKind::Mobility;
  const BlockSystemContext ctx = build_context(cluster, kind, options);
  const Index p = cluster.size();
  const Index dim = is_stokes(kind) ? 6 * p : p;
  ExtractedMatrix out;
  out.a.resize(dim, dim);
  for (Index j = 0; j < dim; ++j) {
    Solution s;
    if (is_stokes(kind)) {
      std::vector<Vec6> data(p, Vec6::Zero());
      data[j / 6][j % 6] = 1.0;
      s = kind == ProblemKind::Resistance ? solve_resistance(ctx, data) : solve_mobility(ctx, data);
    } else {
      std::vector<double> data(p, 0.0);
      data[j] = 1.0;
      s = kind == ProblemKind::Capacitance ? solve_capacitance(ctx, data) : solve_elastance(ctx, data);
    }
    out.a.col(j) = solution_outputs(s);
    out.converged = out.converged && s.report.converged;
    out.max_iterations = std::max(out.max_iterations, s.report.iterations);
  }
  out.asymmetry = (out.a - out.a.transpose()).norm() / out.a.norm();
  const Matrix sym = 0.5 * (out.a + out.a.transpose());
  out.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  return out;
}

RateFit fit_root_exponential(const std::vector<double>& n, const std::vector<double>& errors, double floor,
                             const std::vector<bool>& usable) {
  if (n.size() != errors.size() || (!usable.empty() && usable.size() != n.size())) {
    throw InvalidArgument("fit_root_exponential: series lengths differ");
  }
  std::vector<double> xs, ys;
  double last = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!usable.empty() && !usable[i]) continue;
    const double e = errors[i];
    if (!std::isfinite(e) || e <= 0.0 || e < floor) continue;
    if (e >= last) break;
    last = e;
    xs.push_back(std::sqrt(n[i]));
    ys.push_back(std::log(e));
  }
  RateFit fit;
  fit.points_used = static_cast<int>(xs.size());
  if (xs.size() < 3) {
    fit.warning = "degenerate data: fewer than three decaying points above the plateau";
    return fit;
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) {
    fit.warning = "degenerate data: all sweep values coincide";
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.rate = std::exp(fit.slope);
  fit.accepted = true;
  return fit;
}

Vector solution_outputs(const Solution& s) {
  switch (s.kind) {
    case ProblemKind::Capacitance:
      return stack1(s.charges);
    case ProblemKind::Elastance:
      return stack1(s.voltages);
    case ProblemKind::Resistance:
      return stack6(s.loads);
    case ProblemKind::Mobility:
      return stack6(s.motions);
  }
  return {};
}

ConvergenceRecord convergence_sweep(const SweepSpec& spec) {
  if (spec.resolutions.size() < 4) throw InvalidArgument("convergence_sweep: at least four sweep points are required");
  for (std::size_t i = 1; i < spec.resolutions.size(); ++i) {
    if (spec.resolutions[i] <= spec.resolutions[i - 1]) {
      throw InvalidArgument("convergence_sweep: sweep values must be strictly increasing");
    }
  }
  const Index p = spec.cluster.size();
  if (p == 0) throw InvalidArgument("convergence_sweep: empty cluster");
  if (is_stokes(spec.kind) ? static_cast<Index>(spec.rigid_data.size()) != p
                           : static_cast<Index>(spec.scalar_data.size()) != p) {
    throw InvalidArgument("convergence_sweep: boundary data does not match the cluster");
  }

  ConvergenceRecord rec;
  std::vector<Vector> outputs;
  for (int res : spec.resolutions) {
    const auto t0 = std::chrono::steady_clock::now();
    const Cluster c = with_resolution(spec.cluster, res, spec.delta_sep, spec.rectangularity);
    const Solution s = solve_kind(c, spec, spec.options);
    const ResidualReport r = surface_residual(s, c, spec.residual_multiplier, spec.options.evaluator);
    SweepPoint pt;
    pt.sweep_value = res;
    pt.max_residual = r.max;
    pt.iterations = s.report.iterations;
    pt.max_strength = s.report.max_strength_magnitude;
    pt.converged = s.report.converged;
    pt.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& q : c.particles) pt.unknowns += (is_stokes(spec.kind) ? 3 : 1) * q.n();
    if (!pt.converged) rec.warnings.push_back("sweep point " + std::to_string(res) + " did not converge");
    rec.points.push_back(pt);
    outputs.push_back(solution_outputs(s));
  }

  Vector reference = outputs.back();
  if (spec.reference_resolution) {
    SolverOptions ro = spec.options;
    ro.factor_method = spec.reference_method;
    const Cluster c = with_resolution(spec.cluster, *spec.reference_resolution, spec.delta_sep, spec.rectangularity);
    const Solution s = solve_kind(c, spec, ro);
    if (!s.report.converged) rec.warnings.push_back("reference solve did not converge");
    reference = solution_outputs(s);
  }
  std::vector<double> ns, res_err, out_err;
  std::vector<bool> usable;
  for (std::size_t i = 0; i < rec.points.size(); ++i) {
    rec.points[i].output_error = relative_inf(outputs[i], reference);
    ns.push_back(rec.points[i].sweep_value);
    res_err.push_back(rec.points[i].max_residual);
    out_err.push_back(rec.points[i].output_error);
    usable.push_back(rec.points[i].converged);
  }
  const double floor = 10.0 * spec.options.tolerance.value_or(default_tolerance(spec.kind));
  rec.residual_fit = fit_root_exponential(ns, res_err, floor, usable);
  rec.output_fit = fit_root_exponential(ns, out_err, floor, usable);
  if (!rec.residual_fit.accepted) rec.warnings.push_back("residual fit rejected: " + rec.residual_fit.warning);
  if (!rec.output_fit.accepted) rec.warnings.push_back("output fit rejected: " + rec.output_fit.warning);
  return rec;
}

}  // namespace mfs
