#include "mfs/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mfs {

namespace {

Json vec_to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + ": expected an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(std::string(what) + ": expected an array of numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

template <int Rows>
Eigen::Matrix<double, Rows, 1> fixed_from_json(const Json& j, const char* what) {
  const Vector v = vec_from_json(j, what);
  if (v.size() != Rows) throw ValidationError(std::string(what) + ": expected " + std::to_string(Rows) + " numbers");
  return v;
}

double number(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw ValidationError(std::string("missing number '") + key + "'");
  return j.at(key).get<double>();
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json shape_to_json(const Shape& shape) {
  if (const auto* s = std::get_if<Sphere>(&shape)) return Json{{"type", "sphere"}, {"radius", s->radius}};
  const auto& e = std::get<Ellipsoid>(shape);
  return Json{{"type", "ellipsoid"}, {"semiaxes", {e.a, e.b, e.c}}};
}

Shape shape_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("type")) throw ValidationError("shape: missing 'type'");
  const std::string type = j.at("type").get<std::string>();
  Shape s;
  if (type == "sphere") {
    s = Sphere{number(j, "radius")};
  } else if (type == "ellipsoid") {
    const Vec3 a = fixed_from_json<3>(j.at("semiaxes"), "semiaxes");
    s = Ellipsoid{a[0], a[1], a[2]};
  } else {
    throw ValidationError("shape: unknown type '" + type + "'");
  }
  try {
    validate_shape(s);
  } catch (const InvalidArgument& e) {
    throw ValidationError(e.what());
  }
  return s;
}

Json cluster_to_json(const Cluster& cluster) {
  Json ps = Json::array();
  for (const auto& p : cluster.particles) {
    const auto& q = p.orientation;
    ps.push_back(Json{{"shape", shape_to_json(p.shape)},
                      {"center", {p.center.x(), p.center.y(), p.center.z()}},
                      {"quaternion", {q.w(), q.x(), q.y(), q.z()}},
                      {"resolution", p.discretization.resolution},
                      {"delta_sep", p.discretization.delta_sep},
                      {"rectangularity", p.discretization.rectangularity}});
  }
  return Json{{"min_separation", cluster.min_separation}, {"particles", ps}};
}

Cluster cluster_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("particles") || !j.at("particles").is_array()) {
    throw ValidationError("cluster: missing 'particles' array");
  }
  Cluster c;
  c.min_separation = j.value("min_separation", 0.0);
  for (const auto& pj : j.at("particles")) {
    const Shape shape = shape_from_json(pj.at("shape"));
    const Vec3 center = fixed_from_json<3>(pj.at("center"), "center");
    const Eigen::Vector4d q = fixed_from_json<4>(pj.value("quaternion", Json{1.0, 0.0, 0.0, 0.0}), "quaternion");
    if (q.norm() == 0.0) throw ValidationError("cluster: zero quaternion");
    Discretization d;
    d.resolution = pj.at("resolution").get<int>();
    d.delta_sep = number(pj, "delta_sep");
    d.rectangularity = pj.value("rectangularity", 0.0);
    try {
      c.particles.push_back(
          make_particle(shape, center, Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized(), d));
    } catch (const InvalidArgument& e) {
      throw ValidationError(std::string("cluster: ") + e.what());
    }
  }
  if (c.particles.empty()) throw ValidationError("cluster: no particles");
  try {
    if (c.size() > 1) min_pair_distance(c);
  } catch (const OverlapError& e) {
    throw ValidationError(std::string("cluster: ") + e.what());
  }
  return c;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + e.what(), line);
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_cluster(const std::filesystem::path& path, const Cluster& cluster) {
  write_json(path, cluster_to_json(cluster));
}

Cluster read_cluster(const std::filesystem::path& path) { return cluster_from_json(read_json(path)); }

Json report_to_json(const SolveReport& r) {
  Json h = Json::array();
  for (double v : r.residual_history) h.push_back(v);
  return Json{{"iterations", r.iterations},
              {"converged", r.converged},
              {"residual_history", h},
              {"max_strength_magnitude", r.max_strength_magnitude},
              {"seconds",
               {{"assembly", r.times.assembly},
                {"factorization", r.times.factorization},
                {"rhs", r.times.rhs},
                {"gmres", r.times.gmres},
                {"recover", r.times.recover}}}};
}

SolveReport report_from_json(const Json& j) {
  SolveReport r;
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  for (const auto& v : j.at("residual_history")) r.residual_history.push_back(v.get<double>());
  r.max_strength_magnitude = j.at("max_strength_magnitude").get<double>();
  const auto& t = j.at("seconds");
  r.times.assembly = t.at("assembly").get<double>();
  r.times.factorization = t.at("factorization").get<double>();
  r.times.rhs = t.at("rhs").get<double>();
  r.times.gmres = t.at("gmres").get<double>();
  r.times.recover = t.at("recover").get<double>();
  return r;
}

Json solution_to_json(const Solution& s, const Cluster& cluster) {
  Json bodies = Json::array();
  for (std::size_t k = 0; k < s.strengths.size(); ++k) {
    Json b{{"strengths", vec_to_json(s.strengths[k])},
           {"effective_strengths", vec_to_json(s.effective_strengths[k])},
           {"surface_values", vec_to_json(s.surface_values[k])}};
    if (is_stokes(s.kind)) {
      b["motion"] = vec_to_json(s.motions[k]);
      b["load"] = vec_to_json(s.loads[k]);
    } else {
      b["voltage"] = s.voltages[k];
      b["charge"] = s.charges[k];
    }
    bodies.push_back(std::move(b));
  }
  return Json{{"problem", to_string(s.kind)},
              {"mu", s.mu},
              {"report", report_to_json(s.report)},
              {"cluster", cluster_to_json(cluster)},
              {"bodies", bodies}};
}

LoadedSolution solution_from_json(const Json& j) {
  LoadedSolution out;
  try {
    out.solution.kind = parse_problem_kind(j.at("problem").get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ValidationError(e.what());
  }
  out.solution.mu = j.at("mu").get<double>();
  out.solution.report = report_from_json(j.at("report"));
  out.cluster = cluster_from_json(j.at("cluster"));
  const auto& bodies = j.at("bodies");
  if (static_cast<Index>(bodies.size()) != out.cluster.size()) {
    throw ValidationError("solution: body count does not match the cluster");
  }
  const int d = is_stokes(out.solution.kind) ? 3 : 1;
  for (std::size_t k = 0; k < bodies.size(); ++k) {
    const auto& b = bodies[k];
    Solution& s = out.solution;
    s.strengths.push_back(vec_from_json(b.at("strengths"), "strengths"));
    s.effective_strengths.push_back(vec_from_json(b.at("effective_strengths"), "effective_strengths"));
    s.surface_values.push_back(vec_from_json(b.at("surface_values"), "surface_values"));
    if (s.effective_strengths.back().size() != d * out.cluster.particles[k].n()) {
      throw ValidationError("solution: strength count does not match the discretization");
    }
    if (d == 3) {
      s.motions.push_back(fixed_from_json<6>(b.at("motion"), "motion"));
      s.loads.push_back(fixed_from_json<6>(b.at("load"), "load"));
    } else {
      s.voltages.push_back(b.at("voltage").get<double>());
      s.charges.push_back(b.at("charge").get<double>());
    }
  }
  return out;
}

void write_solution(const std::filesystem::path& path, const Solution& solution, const Cluster& cluster) {
  write_json(path, solution_to_json(solution, cluster));
}

LoadedSolution read_solution(const std::filesystem::path& path) { return solution_from_json(read_json(path)); }

void write_strengths_csv(const std::filesystem::path& path, const Solution& s, const Cluster& cluster) {
  auto out = open_out(path);
  const int d = is_stokes(s.kind) ? 3 : 1;
  out << "body,node,x,y,z";
  if (d == 1) {
    out << ",alpha";
  } else {
    out << ",lambda_x,lambda_y,lambda_z";
  }
  out << '\n';
  for (std::size_t k = 0; k < s.effective_strengths.size(); ++k) {
    const auto& p = cluster.particles[k];
    for (Index i = 0; i < p.n(); ++i) {
      out << k << ',' << i;
      for (int c = 0; c < 3; ++c) out << ',' << format_double(p.proxy.points(c, i));
      for (int c = 0; c < d; ++c) out << ',' << format_double(s.effective_strengths[k][d * i + c]);
      out << '\n';
    }
  }
}

void write_convergence_csv(const std::filesystem::path& path, const ConvergenceRecord& record) {
  auto out = open_out(path);
  out << "sweep_value,max_residual,output_error,iterations,max_strength,seconds\n";
  for (const auto& p : record.points) {
    out << format_double(p.sweep_value) << ',' << format_double(p.max_residual) << ','
        << format_double(p.output_error) << ',' << p.iterations << ',' << format_double(p.max_strength) << ','
        << format_double(p.seconds) << '\n';
  }
}

}  // namespace mfs
