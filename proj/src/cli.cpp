#include "mfs/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <omp.h>

namespace mfs {

namespace {

namespace fs = std::filesystem;

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ValidationError(std::string("'") + key + "' must be an object");
  return j.at(key);
}

template <class T>
T get(const Json& j, const char* key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("bad value for '") + key + "'");
  }
}

Vec3 vec3(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(std::string(what) + ": expected [x, y, z]");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ValidationError(std::string(what) + ": expected [x, y, z]");
    v[i] = j[i].get<double>();
  }
  return v;
}

Vec6 vec6(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 6) throw ValidationError(std::string(what) + ": expected six numbers");
  Vec6 v;
  for (int i = 0; i < 6; ++i) {
    if (!j[i].is_number()) throw ValidationError(std::string(what) + ": expected six numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

DiscretizationSpec parse_discretization(const Json& j) {
  DiscretizationSpec d;
  d.resolution = get<int>(j, "resolution", 0);
  if (d.resolution <= 0) throw ValidationError("discretization: 'resolution' must be a positive integer");
  if (j.contains("delta_sep") == j.contains("proxy_radius")) {
    throw ValidationError("discretization: give exactly one of 'delta_sep' and 'proxy_radius'");
  }
  if (j.contains("delta_sep")) d.delta_sep = get<double>(j, "delta_sep", 0.0);
  if (j.contains("proxy_radius")) d.proxy_radius = get<double>(j, "proxy_radius", 0.0);
  d.rectangularity = get<double>(j, "rectangularity", 0.0);
  return d;
}

FieldKind parse_field(const std::string& s) {
  if (s == "potential") return FieldKind::Potential;
  if (s == "velocity") return FieldKind::Velocity;
  if (s == "velocity_pressure") return FieldKind::VelocityPressure;
  if (s == "traction") return FieldKind::Traction;
  throw ValidationError("eval: unknown field '" + s + "'");
}

TargetSpec parse_targets(const Json& j) {
  TargetSpec t;
  if (j.contains("surface")) {
    t.kind = TargetSpec::Kind::Surface;
    t.surface_multiplier = get<int>(j.at("surface"), "multiplier", 2);
    if (t.surface_multiplier < 1) throw ValidationError("targets.surface: multiplier must be positive");
  } else if (j.contains("line")) {
    const Json& l = j.at("line");
    const Vec3 a = vec3(l.at("from"), "targets.line.from");
    const Vec3 b = vec3(l.at("to"), "targets.line.to");
    const int n = get<int>(l, "count", 0);
    if (n < 2) throw ValidationError("targets.line: count must be at least 2");
    t.kind = TargetSpec::Kind::Line;
    t.points.resize(3, n);
    for (int i = 0; i < n; ++i) t.points.col(i) = a + (b - a) * (static_cast<double>(i) / (n - 1));
  } else if (j.contains("plane")) {
    const Json& p = j.at("plane");
    const Vec3 o = vec3(p.at("origin"), "targets.plane.origin");
    const Vec3 u = vec3(p.at("u"), "targets.plane.u");
    const Vec3 v = vec3(p.at("v"), "targets.plane.v");
    const int nu = get<int>(p, "nu", 0);
    const int nv = get<int>(p, "nv", 0);
    if (nu < 2 || nv < 2) throw ValidationError("targets.plane: nu and nv must be at least 2");
    t.kind = TargetSpec::Kind::Plane;
    t.points.resize(3, static_cast<Index>(nu) * nv);
    for (int a = 0; a < nv; ++a) {
      for (int b = 0; b < nu; ++b) {
        t.points.col(static_cast<Index>(a) * nu + b) =
            o + u * (static_cast<double>(b) / (nu - 1)) + v * (static_cast<double>(a) / (nv - 1));
      }
    }
  } else {
    const Json pts = j.value("points", Json::array());
    if (!pts.is_array()) throw ValidationError("targets.points: expected a list of [x, y, z]");
    t.points.resize(3, static_cast<Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) t.points.col(static_cast<Index>(i)) = vec3(pts[i], "targets.points");
  }
  return t;
}

void parse_data(const Json& j, RunConfig& cfg) {
  if (j.empty()) return;
  const bool stokes = cfg.problem && is_stokes(*cfg.problem);
  if (get<bool>(j, "random", false)) {
    if (!stokes) throw ValidationError("data.random is only available for Stokes problems");
    cfg.random_data = true;
    return;
  }
  Json list;
  if (j.contains("value")) {
    list = Json::array({j.at("value")});
  } else if (j.contains("per_body")) {
    list = j.at("per_body");
    if (!list.is_array() || list.empty()) throw ValidationError("data.per_body: expected a non-empty list");
  } else {
    throw ValidationError("data: expected 'value', 'per_body' or 'random'");
  }
  for (const auto& e : list) {
    if (stokes) {
      cfg.rigid_data.push_back(vec6(e, "data"));
    } else {
      if (!e.is_number()) throw ValidationError("data: expected numbers for a Laplace problem");
      cfg.scalar_data.push_back(e.get<double>());
    }
  }
}

template <class T>
std::vector<T> broadcast(const std::vector<T>& v, Index bodies, const char* what) {
  if (v.size() == 1) return std::vector<T>(static_cast<std::size_t>(bodies), v.front());
  if (static_cast<Index>(v.size()) != bodies) {
    throw ValidationError(std::string(what) + ": got " + std::to_string(v.size()) + " entries for " +
                          std::to_string(bodies) + " bodies");
  }
  return v;
}

Json outputs_json(const Solution& s) {
  Json bodies = Json::array();
  for (std::size_t k = 0; k < s.strengths.size(); ++k) {
    Json b = Json::object();
    if (is_stokes(s.kind)) {
      const Vec6& u = s.motions[k];
      const Vec6& f = s.loads[k];
      b["velocity"] = {u[0], u[1], u[2]};
      b["angular_velocity"] = {u[3], u[4], u[5]};
      b["force"] = {f[0], f[1], f[2]};
      b["torque"] = {f[3], f[4], f[5]};
    } else {
      b["voltage"] = s.voltages[k];
      b["charge"] = s.charges[k];
    }
    bodies.push_back(std::move(b));
  }
  return bodies;
}

Json residual_json(const ResidualReport& r) {
  return Json{{"max", r.max}, {"max_relative", r.max_relative}, {"test_points", r.points.cols()}};
}

Json fit_json(const RateFit& f) {
  return Json{{"accepted", f.accepted}, {"intercept", f.intercept}, {"slope", f.slope},
              {"rate", f.rate},         {"points_used", f.points_used}, {"warning", f.warning}};
}

void require_problem(const RunConfig& cfg) {
  if (!cfg.problem) throw ValidationError("config: 'problem' is required");
}

void require_data(const RunConfig& cfg) {
  const bool stokes = is_stokes(*cfg.problem);
  if (stokes && cfg.rigid_data.empty() && !cfg.random_data) throw ValidationError("config: 'data' is required");
  if (!stokes && cfg.scalar_data.empty()) throw ValidationError("config: 'data' is required");
}

Solution run_solver(const Cluster& cluster, const RunConfig& cfg) {
  const Index p = cluster.size();
  switch (*cfg.problem) {
    case ProblemKind::Capacitance:
      return solve_capacitance(cluster, scalar_data_for(cfg, p), cfg.solver);
    case ProblemKind::Elastance:
      return solve_elastance(cluster, scalar_data_for(cfg, p), cfg.solver);
    case ProblemKind::Resistance:
      return solve_resistance(cluster, rigid_data_for(cfg, p), cfg.solver);
    case ProblemKind::Mobility:
      return solve_mobility(cluster, rigid_data_for(cfg, p), cfg.solver);
  }
  throw InvalidArgument("unknown problem kind");
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

}  // namespace

Discretization DiscretizationSpec::for_shape(const Shape& shape) const {
  Discretization d;
  d.resolution = resolution;
  d.rectangularity = rectangularity;
  if (proxy_radius) {
    const auto* s = std::get_if<Sphere>(&shape);
    if (!s) throw ValidationError("discretization: 'proxy_radius' applies to spheres only");
    if (!(*proxy_radius > 0.0 && *proxy_radius < s->radius)) {
      throw ValidationError("discretization: proxy radius must lie strictly inside the sphere");
    }
    d.delta_sep = s->radius - *proxy_radius;
  } else {
    d.delta_sep = delta_sep.value_or(0.0);
  }
  return d;
}

RunConfig parse_config(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  RunConfig cfg;
  if (j.contains("problem")) {
    try {
      cfg.problem = parse_problem_kind(get<std::string>(j, "problem", ""));
    } catch (const InvalidArgument& e) {
      throw ValidationError(e.what());
    }
  }
  cfg.seed = get<std::uint64_t>(j, "seed", 1);

  if (j.contains("discretization")) cfg.discretization = parse_discretization(section(j, "discretization"));

  const Json& geo = section(j, "geometry");
  if (geo.contains("cluster_file") == geo.contains("grow") && !geo.empty()) {
    throw ValidationError("geometry: give exactly one of 'cluster_file' and 'grow'");
  }
  if (geo.contains("cluster_file")) {
    cfg.cluster_file = resolve(base_dir, get<std::string>(geo, "cluster_file", ""));
    if (!fs::is_regular_file(*cfg.cluster_file)) {
      throw ValidationError("geometry: cluster file not found: " + cfg.cluster_file->string());
    }
  } else if (geo.contains("grow")) {
    const Json& g = geo.at("grow");
    GrowthOptions opt;
    opt.count = get<int>(g, "count", 0);
    if (opt.count < 1) throw ValidationError("geometry.grow: 'count' must be positive");
    opt.min_separation = get<double>(g, "min_separation", 0.0);
    if (!(opt.min_separation > 0.0) || !std::isfinite(opt.min_separation)) {
      throw ValidationError("geometry.grow: 'min_separation' must be positive");
    }
    opt.shape = shape_from_json(g.value("shape", Json{{"type", "sphere"}, {"radius", 1.0}}));
    const std::string orient = get<std::string>(g, "orientation", "random");
    if (orient == "random") {
      opt.orientation = OrientationPolicy::Random;
    } else if (orient == "identity") {
      opt.orientation = OrientationPolicy::Identity;
    } else {
      throw ValidationError("geometry.grow: unknown orientation '" + orient + "'");
    }
    const std::string policy = get<std::string>(g, "policy", "exact");
    if (policy == "exact") {
      opt.policy = GrowthPolicy::ExactDistance;
    } else if (policy == "bounding_sphere") {
      opt.policy = GrowthPolicy::BoundingSphere;
    } else {
      throw ValidationError("geometry.grow: unknown policy '" + policy + "'");
    }
    if (!cfg.discretization) throw ValidationError("geometry.grow: a 'discretization' section is required");
    opt.discretization = cfg.discretization->for_shape(opt.shape);
    cfg.grow = opt;
  }
  if (cfg.discretization && cfg.discretization->proxy_radius && cfg.grow) {
    cfg.discretization->for_shape(cfg.grow->shape);
  }

  parse_data(section(j, "data"), cfg);

  const Json& s = section(j, "solver");
  if (s.contains("tolerance")) cfg.solver.tolerance = get<double>(s, "tolerance", 0.0);
  if (cfg.solver.tolerance && !(*cfg.solver.tolerance > 0.0 && *cfg.solver.tolerance < 1.0)) {
    throw ValidationError("solver: tolerance must lie in (0, 1)");
  }
  cfg.solver.max_iters = get<int>(s, "max_iters", cfg.solver.max_iters);
  if (cfg.solver.max_iters < 1) throw ValidationError("solver: max_iters must be positive");
  cfg.solver.trunc_eps = get<double>(s, "trunc_eps", cfg.solver.trunc_eps);
  cfg.solver.mu = get<double>(s, "mu", cfg.solver.mu);
  if (!(cfg.solver.mu > 0.0)) throw ValidationError("solver: mu must be positive");
  const std::string fm = get<std::string>(s, "factorization", "svd");
  if (fm == "svd") {
    cfg.solver.factor_method = FactorMethod::Svd;
  } else if (fm == "qr") {
    cfg.solver.factor_method = FactorMethod::HouseholderQr;
  } else {
    throw ValidationError("solver: unknown factorization '" + fm + "'");
  }
  if (s.contains("two_way")) {
    cfg.two_way_sep_factor = get<double>(s.at("two_way"), "mobility_sep_factor", 1.05);
    if (!cfg.problem || *cfg.problem != ProblemKind::Resistance) {
      throw ValidationError("solver.two_way needs problem = resistance");
    }
  }

  const Json& e = section(j, "evaluator");
  const std::string backend = get<std::string>(e, "backend", "accelerated");
  if (backend == "direct") {
    cfg.solver.evaluator.backend = EvaluatorConfig::Backend::Direct;
  } else if (backend == "accelerated") {
    cfg.solver.evaluator.backend = EvaluatorConfig::Backend::Accelerated;
  } else {
    throw ValidationError("evaluator: unknown backend '" + backend + "'");
  }
  cfg.solver.evaluator.tolerance = get<double>(e, "tolerance", cfg.solver.evaluator.tolerance);
  cfg.solver.evaluator.thread_count = get<int>(e, "threads", 0);
  try {
    validate_evaluator(cfg.solver.evaluator);
  } catch (const InvalidArgument& ex) {
    throw ValidationError(ex.what());
  }

  const Json& out = section(j, "output");
  cfg.output_dir = resolve(base_dir, get<std::string>(out, "dir", "."));
  cfg.write_strengths = get<bool>(out, "strengths_csv", true);
  cfg.residual_multiplier = get<int>(out, "residual_multiplier", 2);
  if (cfg.residual_multiplier < 1) throw ValidationError("output: residual_multiplier must be positive");

  const Json& sw = section(j, "sweep");
  if (!sw.empty()) {
    cfg.sweep_resolutions = get<std::vector<int>>(sw, "resolutions", {});
    if (cfg.sweep_resolutions.size() < 4) throw ValidationError("sweep: at least four resolutions are required");
    for (std::size_t i = 1; i < cfg.sweep_resolutions.size(); ++i) {
      if (cfg.sweep_resolutions[i] <= cfg.sweep_resolutions[i - 1]) {
        throw ValidationError("sweep: resolutions must be strictly increasing");
      }
    }
    if (sw.contains("reference_resolution")) cfg.sweep_reference = get<int>(sw, "reference_resolution", 0);
  }

  const Json& ev = section(j, "eval");
  if (!ev.empty()) {
    if (ev.contains("solution_file")) {
      cfg.solution_file = resolve(base_dir, get<std::string>(ev, "solution_file", ""));
      if (!fs::is_regular_file(*cfg.solution_file)) {
        throw ValidationError("eval: solution file not found: " + cfg.solution_file->string());
      }
    }
    if (ev.contains("field")) {
      cfg.field = parse_field(get<std::string>(ev, "field", ""));
      cfg.field_set = true;
    }
    cfg.targets = parse_targets(section(ev, "targets"));
    if (cfg.field == FieldKind::Traction && cfg.targets.kind != TargetSpec::Kind::Surface) {
      throw ValidationError("eval: traction needs surface targets (normals)");
    }
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  const Json j = read_json(path);
  return parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

Cluster build_cluster(const RunConfig& cfg) {
  if (cfg.grow) return grow_cluster(*cfg.grow);
  if (!cfg.cluster_file) throw ValidationError("config: a 'geometry' section is required");
  Cluster c = read_cluster(*cfg.cluster_file);
  if (cfg.discretization) {
    for (auto& p : c.particles) p = rediscretize(p, cfg.discretization->for_shape(p.shape));
  }
  return c;
}

std::vector<double> scalar_data_for(const RunConfig& cfg, Index bodies) {
  return broadcast(cfg.scalar_data, bodies, "data");
}

std::vector<Vec6> rigid_data_for(const RunConfig& cfg, Index bodies) {
  if (!cfg.random_data) return broadcast(cfg.rigid_data, bodies, "data");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::vector<Vec6> out(static_cast<std::size_t>(bodies));
  for (auto& u : out) {
    for (int i = 0; i < 6; ++i) u[i] = normal(rng);
  }
  return out;
}

int cmd_solve(const RunConfig& cfg) {
  require_problem(cfg);
  require_data(cfg);
  const Cluster cluster = build_cluster(cfg);
  const EvaluatorConfig& ecfg = cfg.solver.evaluator;

  Json report{{"problem", to_string(*cfg.problem)}, {"bodies", cluster.size()}};
  Index unknowns = 0;
  for (const auto& p : cluster.particles) unknowns += p.n() * (is_stokes(*cfg.problem) ? 3 : 1);
  report["unknowns"] = unknowns;

  Solution sol;
  bool converged = true;
  if (cfg.two_way_sep_factor) {
    TwoWayOptions opt;
    opt.resistance = cfg.solver;
    opt.mobility = cfg.solver;
    opt.mobility_sep_factor = *cfg.two_way_sep_factor;
    TwoWayResult tw = two_way_error(cluster, rigid_data_for(cfg, cluster.size()), opt);
    sol = std::move(tw.resistance);
    converged = tw.converged;
    report["two_way"] = Json{{"error", tw.error},
                             {"mobility_iterations", tw.mobility.report.iterations},
                             {"mobility_converged", tw.mobility.report.converged},
                             {"mobility_max_strength", tw.mobility.report.max_strength_magnitude}};
  } else {
    sol = run_solver(cluster, cfg);
    converged = sol.report.converged;
  }
  report["converged"] = converged;
  report["iterations"] = sol.report.iterations;
  report["max_strength"] = sol.report.max_strength_magnitude;
  report["residual"] = residual_json(surface_residual(sol, cluster, cfg.residual_multiplier, ecfg));
  report["outputs"] = outputs_json(sol);
  report["solver"] = report_to_json(sol.report);

  fs::create_directories(cfg.output_dir);
  write_json(cfg.output_dir / "report.json", report);
  write_solution(cfg.output_dir / "solution.json", sol, cluster);
  if (cfg.write_strengths) write_strengths_csv(cfg.output_dir / "strengths.csv", sol, cluster);
  if (!converged) {
    std::cerr << "mfs: GMRES did not converge within " << cfg.solver.max_iters << " iterations\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_convergence(const RunConfig& cfg) {
  require_problem(cfg);
  require_data(cfg);
  if (cfg.sweep_resolutions.size() < 4) throw ValidationError("convergence: a 'sweep' with four or more points is required");
  SweepSpec spec;
  spec.kind = *cfg.problem;
  spec.cluster = build_cluster(cfg);
  spec.resolutions = cfg.sweep_resolutions;
  spec.delta_sep = 0.0;  // build_cluster already applied the configured offset
  if (cfg.discretization) spec.rectangularity = cfg.discretization->rectangularity;
  if (is_stokes(spec.kind)) {
    spec.rigid_data = rigid_data_for(cfg, spec.cluster.size());
  } else {
    spec.scalar_data = scalar_data_for(cfg, spec.cluster.size());
  }
  spec.options = cfg.solver;
  spec.residual_multiplier = cfg.residual_multiplier;
  spec.reference_resolution = cfg.sweep_reference;
  const ConvergenceRecord rec = convergence_sweep(spec);

  fs::create_directories(cfg.output_dir);
  write_convergence_csv(cfg.output_dir / "convergence.csv", rec);
  bool converged = true;
  for (const auto& p : rec.points) converged = converged && p.converged;
  Json warnings = Json::array();
  for (const auto& w : rec.warnings) warnings.push_back(w);
  write_json(cfg.output_dir / "summary.json", Json{{"problem", to_string(spec.kind)},
                                                   {"variable", rec.variable},
                                                   {"points", rec.points.size()},
                                                   {"converged", converged},
                                                   {"residual_fit", fit_json(rec.residual_fit)},
                                                   {"output_fit", fit_json(rec.output_fit)},
                                                   {"warnings", warnings}});
  return converged ? kExitOk : kExitRuntime;
}

int cmd_cluster(const RunConfig& cfg) {
  if (!cfg.grow) throw ValidationError("cluster: 'geometry.grow' is required");
  const Cluster c = grow_cluster(*cfg.grow);
  if (c.size() > 1) {
    const double d = min_pair_distance(c);
    if (d < c.min_separation * (1.0 - 1e-6)) throw PlacementError("cluster: grown bodies violate the separation");
  }
  fs::create_directories(cfg.output_dir);
  write_cluster(cfg.output_dir / "cluster.json", c);
  return kExitOk;
}

int cmd_eval_field(const RunConfig& cfg) {
  if (!cfg.solution_file) throw ValidationError("eval-field: 'eval.solution_file' is required");
  const LoadedSolution loaded = read_solution(*cfg.solution_file);
  const Solution& sol = loaded.solution;
  const Cluster& cluster = loaded.cluster;
  const EvaluatorConfig& ecfg = cfg.solver.evaluator;
  FieldKind field = cfg.field;
  if (!cfg.field_set) field = is_stokes(sol.kind) ? FieldKind::Velocity : FieldKind::Potential;
  if (is_stokes(sol.kind) == (field == FieldKind::Potential)) {
    throw ValidationError("eval-field: field does not match the solved problem");
  }

  const bool surface = cfg.targets.kind == TargetSpec::Kind::Surface;
  Points pts = cfg.targets.points;
  ResidualReport res;
  Points normals;
  if (surface) {
    res = surface_residual(sol, cluster, cfg.targets.surface_multiplier, ecfg);
    pts = res.points;
    if (field == FieldKind::Traction) {
      normals.resize(3, pts.cols());
      Index at = 0;
      for (const auto& p : cluster.particles) {
        Index cnt = 0;
        while (at + cnt < pts.cols() && res.body[at + cnt] == &p - cluster.particles.data()) ++cnt;
        normals.middleCols(at, cnt) = surface_normals(p, pts.middleCols(at, cnt));
        at += cnt;
      }
    }
  }

  std::vector<bool> inside(static_cast<std::size_t>(pts.cols()), false);
  std::vector<Index> keep;
  for (Index i = 0; i < pts.cols(); ++i) {
    for (const auto& p : cluster.particles) {
      if (!surface && p.contains(pts.col(i))) inside[i] = true;
    }
    if (!inside[i]) keep.push_back(i);
  }
  Points kept(3, static_cast<Index>(keep.size()));
  Points kept_normals(3, normals.cols() ? kept.cols() : 0);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    kept.col(i) = pts.col(keep[i]);
    if (normals.cols()) kept_normals.col(i) = normals.col(keep[i]);
  }
  const int cols = field_columns(field);
  Matrix vals(kept.cols(), cols);
  if (kept.cols() > 0) vals = evaluate_solution(sol, cluster, kept, field, normals.cols() ? &kept_normals : nullptr, ecfg);

  fs::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir / "field.csv", std::ios::binary);
  if (!out) throw Error("cannot write field.csv");
  out << "x,y,z";
  if (surface) out << ",body";
  out << ",inside";
  static const char* names[4][4] = {{"u"}, {"u_x", "u_y", "u_z"}, {"u_x", "u_y", "u_z", "p"}, {"t_x", "t_y", "t_z"}};
  for (int c = 0; c < cols; ++c) out << ',' << names[static_cast<int>(field)][c];
  if (surface) out << ",residual";
  out << '\n';
  Index row = 0;
  for (Index i = 0; i < pts.cols(); ++i) {
    out << num(pts(0, i)) << ',' << num(pts(1, i)) << ',' << num(pts(2, i));
    if (surface) out << ',' << res.body[i];
    out << ',' << (inside[i] ? 1 : 0);
    for (int c = 0; c < cols; ++c) out << ',' << (inside[i] ? std::string("nan") : num(vals(row, c)));
    if (surface) out << ',' << num(res.values[i]);
    out << '\n';
    if (!inside[i]) ++row;
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Method of fundamental solutions for rigid particle clusters"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  const std::vector<std::string> names = {"solve", "convergence", "cluster", "eval-field"};
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--threads", threads, "evaluator threads")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", seed, "random seed (overrides the config)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) {
      cfg.seed = *seed;
      if (cfg.grow) cfg.grow->seed = *seed;
    } else if (cfg.grow) {
      cfg.grow->seed = cfg.seed;
    }
    if (threads > 0) {
      cfg.solver.evaluator.thread_count = threads;
      omp_set_num_threads(threads);
    }
  } catch (const Error& e) {
    std::cerr << "mfs: config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (cmd == "solve") return cmd_solve(cfg);
    if (cmd == "convergence") return cmd_convergence(cfg);
    if (cmd == "cluster") return cmd_cluster(cfg);
    return cmd_eval_field(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "mfs: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "mfs: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "mfs: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "mfs: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace mfs
