#include "mfs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace mfs {

namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vec3 semiaxes(const Shape& shape) {
  return std::visit(Overloaded{[](const Sphere& s) { return Vec3(s.radius, s.radius, s.radius); },
                               [](const Ellipsoid& e) { return Vec3(e.a, e.b, e.c); }},
                    shape);
}

// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n, ascending order.
std::vector<double> gauss_legendre_nodes(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p1 = x, p0 = 1.0;
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    t[i] = -x;
    t[n - 1 - i] = x;
  }
  if (n % 2 == 1) t[n / 2] = 0.0;
  return t;
}

// Total node count for nv rings: rings sized by the relative circumference
// sqrt(1 - t^2), the same for every ellipsoid.
Index grid_total(const std::vector<double>& t, int nv) {
  Index total = 0;
  for (double ti : t) {
    const double rho = std::sqrt(std::max(0.0, 1.0 - ti * ti));
    total += std::max(4, static_cast<int>(std::ceil(0.6175 * nv * rho + 5.5)));
  }
  return total;
}

// Splits grid_total over the rings in proportion to ring circumference over
// meridional spacing, so cells stay roughly square on elongated shapes.
// Largest-remainder rounding keeps the total fixed.
std::vector<int> ring_counts(const std::vector<double>& t, int nv, double a, double b, double c) {
  const std::size_t n = t.size();
  const Index total = grid_total(t, nv);
  std::vector<double> w(n);
  constexpr int kSamples = 64;
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = std::sqrt(1.0 - t[i] * t[i]);
    const double lo = i == 0 ? -1.0 : t[i - 1];
    const double hi = i + 1 == n ? 1.0 : t[i + 1];
    double circ = 0.0, speed = 0.0;
    for (int k = 0; k < kSamples; ++k) {
      const double s = 2.0 * kPi * k / kSamples;
      const double ds = std::hypot(a * std::sin(s), b * std::cos(s));
      circ += rho * ds;
      const double r2 = std::pow(a * std::cos(s), 2) + std::pow(b * std::sin(s), 2);
      speed += std::sqrt(r2 * t[i] * t[i] / (rho * rho) + c * c);
    }
    circ *= 2.0 * kPi / kSamples;
    speed /= kSamples;
    w[i] = circ / (speed * 0.5 * (hi - lo));
  }
  double wsum = 0.0;
  for (double x : w) wsum += x;
  std::vector<int> counts(n);
  std::vector<std::pair<double, std::size_t>> rem(n);
  Index used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = w[i] / wsum * static_cast<double>(total);
    counts[i] = std::max(4, static_cast<int>(std::floor(share)));
    rem[i] = {share - std::floor(share), i};
    used += counts[i];
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t k = 0; used < total; k = (k + 1) % n, ++used) ++counts[rem[k].second];
  return counts;
}

NodeSet ellipsoid_grid_impl(double a, double b, double c, int nv, double offset) {
  if (nv < 4) throw InvalidArgument("ellipsoid_grid: nv must be >= 4");
  if (!(a > 0 && b > 0 && c > 0)) throw InvalidArgument("ellipsoid_grid: semiaxes must be positive");
  const auto t = gauss_legendre_nodes(nv);
  const auto counts = ring_counts(t, nv, a, b, c);
  Index total = 0;
  for (int n : counts) total += n;
  NodeSet out;
  out.points.resize(3, total);
  Index col = 0;
  for (int i = 0; i < nv; ++i) {
    const double rho = std::sqrt(1.0 - t[i] * t[i]);
    const int n = counts[i];
    const double shift = (i % 2 == 0) ? 0.0 : 0.5;
    for (int j = 0; j < n; ++j) {
      const double s = 2.0 * kPi * (j + shift) / n;
      Vec3 x(a * rho * std::cos(s), b * rho * std::sin(s), c * t[i]);
      if (offset != 0.0) {
        Vec3 normal(x[0] / (a * a), x[1] / (b * b), x[2] / (c * c));
        x -= offset * normal.normalized();
      }
      out.points.col(col++) = x;
    }
  }
  return out;
}

Points transform_points(const Points& body, const Vec3& center, const Mat3& rotation) {
  Points world = rotation * body;
  world.colwise() += center;
  return world;
}

void assign_pose(Particle& p, const Vec3& center, const Eigen::Quaterniond& orientation) {
  p.center = center;
  p.orientation = orientation.normalized();
  p.rotation = p.orientation.toRotationMatrix();
  p.collocation.points = transform_points(p.reference_collocation.points, p.center, p.rotation);
  p.proxy.points = transform_points(p.reference_proxy.points, p.center, p.rotation);
}

void check_rotation(const Mat3& r, const char* who) {
  if (!r.allFinite() || (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12 ||
      r.determinant() < 0.0) {
    throw InvalidArgument(std::string(who) + ": rotation is not orthogonal");
  }
}

// Surface point and outward normal of a body in the world frame.
struct Body {
  const Shape* shape;
  Vec3 center;
  Mat3 rotation;

  Vec3 to_body(const Vec3& x) const { return rotation.transpose() * (x - center); }
  double implicit(const Vec3& x) const { return implicit_value(*shape, to_body(x)); }

  Vec3 project(const Vec3& x) const {
    const Vec3 local = to_body(x);
    return center + rotation * std::visit(Overloaded{[&](const Sphere& s) -> Vec3 {
                                                       return local * (s.radius / local.norm());
                                                     },
                                                     [&](const Ellipsoid& e) -> Vec3 {
                                                       return project_to_ellipsoid(e, local);
                                                     }},
                                          *shape);
  }

  // Rough depth of an interior point below the surface.
  double depth(const Vec3& x) const {
    const Vec3 ax = semiaxes(*shape);
    return (1.0 - std::sqrt(std::max(0.0, implicit(x)))) * ax.minCoeff();
  }
};

}  // namespace

void validate_shape(const Shape& shape) {
  const Vec3 ax = semiaxes(shape);
  if (!ax.allFinite() || ax.minCoeff() <= 0.0) throw InvalidArgument("shape lengths must be strictly positive");
}

double shape_scale(const Shape& shape) { return semiaxes(shape).maxCoeff(); }

double bounding_radius(const Shape& shape) { return semiaxes(shape).maxCoeff(); }

double min_curvature_radius(const Shape& shape) {
  const Vec3 ax = semiaxes(shape);
  const double lo = ax.minCoeff();
  return lo * lo / ax.maxCoeff();
}

double implicit_value(const Shape& shape, const Vec3& p) {
  const Vec3 ax = semiaxes(shape);
  return p.cwiseQuotient(ax).squaredNorm();
}

Vec3 outward_normal(const Shape& shape, const Vec3& p) {
  const Vec3 ax = semiaxes(shape);
  return p.cwiseQuotient(ax.cwiseProduct(ax)).normalized();
}

double default_rectangularity(const Shape& shape) {
  return std::holds_alternative<Sphere>(shape) ? 1.2 : 1.3;
}

bool Particle::contains(const Vec3& world, double rel_tol) const {
  return implicit_value(shape, to_body(world)) < 1.0 - rel_tol;
}

NodeSet fibonacci_sphere_nodes(Index n, double radius, const Vec3& center) {
  if (n < 4) throw InvalidArgument("fibonacci_sphere_nodes: n must be >= 4");
  if (!(radius > 0.0)) throw InvalidArgument("fibonacci_sphere_nodes: radius must be positive");
  const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
  NodeSet out;
  out.points.resize(3, n);
  for (Index i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    Vec3 u(r * std::cos(phi), r * std::sin(phi), z);
    out.points.col(i) = center + radius * u.normalized();
  }
  return out;
}

NodeSet load_point_set(const std::filesystem::path& path, double radius, const Vec3& center) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("load_point_set: cannot open " + path.string());
  std::vector<Vec3> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Vec3 p;
    std::string extra;
    if (!(ls >> p[0] >> p[1] >> p[2]) || (ls >> extra)) {
      throw ParseError("load_point_set: malformed line " + std::to_string(lineno), lineno);
    }
    if (std::abs(p.norm() - 1.0) > 1e-6) {
      throw ValidationError("load_point_set: point on line " + std::to_string(lineno) +
                            " is not on the unit sphere");
    }
    pts.push_back(p);
  }
  NodeSet out;
  out.points.resize(3, static_cast<Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) out.points.col(static_cast<Index>(i)) = center + radius * pts[i];
  return out;
}

Index ellipsoid_grid_count(int nv) {
  if (nv < 4) throw InvalidArgument("ellipsoid_grid_count: nv must be >= 4");
  return grid_total(gauss_legendre_nodes(nv), nv);
}

NodeSet ellipsoid_grid(double a, double b, double c, int nv) { return ellipsoid_grid_impl(a, b, c, nv, 0.0); }

NodeSet ellipsoid_offset_grid(double a, double b, double c, int nv, double offset) {
  return ellipsoid_grid_impl(a, b, c, nv, offset);
}

Particle make_particle(const Shape& shape, const Vec3& center, const Mat3& rotation,
                       const Discretization& disc) {
  check_rotation(rotation, "make_particle");
  return make_particle(shape, center, Eigen::Quaterniond(rotation), disc);
}

Particle make_particle(const Shape& shape, const Vec3& center, const Eigen::Quaterniond& orientation,
                       const Discretization& disc) {
  validate_shape(shape);
  if (!(disc.delta_sep > 0.0)) throw InvalidArgument("make_particle: delta_sep must be positive");
  if (disc.delta_sep >= min_curvature_radius(shape)) {
    throw InvalidArgument("make_particle: delta_sep degenerates the proxy surface");
  }
  if (!center.allFinite()) throw InvalidArgument("make_particle: non-finite centre");
  Particle p;
  p.shape = shape;
  p.discretization = disc;
  if (p.discretization.rectangularity <= 0.0) p.discretization.rectangularity = default_rectangularity(shape);
  const double rect = p.discretization.rectangularity;
  if (rect <= 1.0) throw InvalidArgument("make_particle: rectangularity must exceed 1");

  if (const auto* s = std::get_if<Sphere>(&shape)) {
    const Index n = disc.resolution;
    const Index m = static_cast<Index>(std::lround(rect * static_cast<double>(n)));
    p.reference_proxy = fibonacci_sphere_nodes(n, s->radius - disc.delta_sep);
    p.reference_collocation = fibonacci_sphere_nodes(m, s->radius);
  } else {
    const auto& e = std::get<Ellipsoid>(shape);
    const int nv = disc.resolution;
    p.reference_proxy = ellipsoid_offset_grid(e.a, e.b, e.c, nv, disc.delta_sep);
    const double target = rect * static_cast<double>(p.reference_proxy.size());
    int nv_m = nv + 1;
    while (static_cast<double>(ellipsoid_grid_count(nv_m + 1)) <= target) ++nv_m;
    if (std::abs(static_cast<double>(ellipsoid_grid_count(nv_m + 1)) - target) <
        std::abs(static_cast<double>(ellipsoid_grid_count(nv_m)) - target)) {
      ++nv_m;
    }
    p.reference_collocation = ellipsoid_grid(e.a, e.b, e.c, nv_m);
  }
  if (p.reference_collocation.size() <= p.reference_proxy.size()) {
    throw InvalidArgument("make_particle: need more collocation than proxy nodes");
  }
  assign_pose(p, center, orientation);
  return p;
}

Particle transform_particle(const Particle& p, const Vec3& shift, const Mat3& rotation) {
  check_rotation(rotation, "transform_particle");
  Particle out = p;
  assign_pose(out, p.center + shift, Eigen::Quaterniond(rotation) * p.orientation);
  return out;
}

Particle rediscretize(const Particle& p, const Discretization& disc) {
  return make_particle(p.shape, p.center, p.orientation, disc);
}

Cluster rediscretize(const Cluster& cluster, const Discretization& disc) {
  Cluster out;
  out.min_separation = cluster.min_separation;
  out.particles.reserve(cluster.particles.size());
  for (const auto& p : cluster.particles) out.particles.push_back(rediscretize(p, disc));
  return out;
}

NodeSet surface_test_points(const Particle& p, Index min_count) {
  NodeSet body;
  if (const auto* s = std::get_if<Sphere>(&p.shape)) {
    body = fibonacci_sphere_nodes(std::max<Index>(min_count, 4), s->radius);
  } else {
    const auto& e = std::get<Ellipsoid>(p.shape);
    int nv = 4;
    while (ellipsoid_grid_count(nv) < min_count) ++nv;
    body = ellipsoid_grid(e.a, e.b, e.c, nv);
  }
  return NodeSet{transform_points(body.points, p.center, p.rotation)};
}

Points surface_normals(const Particle& p, const Points& world) {
  Points normals(3, world.cols());
  for (Index i = 0; i < world.cols(); ++i) {
    normals.col(i) = p.rotation * outward_normal(p.shape, p.to_body(world.col(i)));
  }
  return normals;
}

Vec3 project_to_ellipsoid(const Ellipsoid& e, const Vec3& p) {
  const Vec3 a2(e.a * e.a, e.b * e.b, e.c * e.c);
  const double amin = std::min({e.a, e.b, e.c});
  const double amax2 = a2.maxCoeff();
  // Closest point is x_i = a_i^2 p_i / (a_i^2 + tau) with tau > 0 the root of
  // F(tau) = sum (a_i p_i / (a_i^2 + tau))^2 - 1; F is convex and decreasing,
  // so Newton from a point left of the root converges monotonically.
  double tau = std::max(0.0, amin * p.norm() - amax2);
  for (int it = 0; it < 200; ++it) {
    double f = -1.0, df = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = a2[i] + tau;
      const double q = std::sqrt(a2[i]) * p[i] / d;
      f += q * q;
      df -= 2.0 * q * q / d;
    }
    if (f <= 0.0 || df == 0.0) break;
    const double step = f / df;
    tau -= step;
    if (std::abs(step) <= 1e-16 * (tau + amin * amin)) break;
  }
  return Vec3(a2[0] * p[0] / (a2[0] + tau), a2[1] * p[1] / (a2[1] + tau), a2[2] * p[2] / (a2[2] + tau));
}

double pair_distance(const Shape& s1, const Vec3& c1, const Mat3& r1, const Shape& s2, const Vec3& c2,
                     const Mat3& r2) {
  if (std::holds_alternative<Sphere>(s1) && std::holds_alternative<Sphere>(s2)) {
    const double d = (c1 - c2).norm() - std::get<Sphere>(s1).radius - std::get<Sphere>(s2).radius;
    if (d < 0.0) throw OverlapError("pair_distance: spheres overlap", -d);
    return d;
  }
  const Body body1{&s1, c1, r1};
  const Body body2{&s2, c2, r2};
  if (body1.implicit(c2) < 1.0 || body2.implicit(c1) < 1.0) {
    throw OverlapError("pair_distance: centre inside the other body",
                       std::max(body1.depth(c2), body2.depth(c1)));
  }
  Vec3 pb = c2;
  Vec3 pa = body1.project(pb);
  for (int sweep = 0; sweep < 200; ++sweep) {
    if (body2.implicit(pa) < 1.0 - 1e-12) {
      throw OverlapError("pair_distance: surfaces intersect", body2.depth(pa));
    }
    const Vec3 pb_next = body2.project(pa);
    if (body1.implicit(pb_next) < 1.0 - 1e-12) {
      throw OverlapError("pair_distance: surfaces intersect", body1.depth(pb_next));
    }
    const Vec3 pa_next = body1.project(pb_next);
    const double moved = std::max((pb_next - pb).norm(), (pa_next - pa).norm());
    pa = pa_next;
    pb = pb_next;
    if (moved < 1e-10) break;
  }
  return (pa - pb).norm();
}

double pair_distance(const Particle& p1, const Particle& p2) {
  return pair_distance(p1.shape, p1.center, p1.rotation, p2.shape, p2.center, p2.rotation);
}

double min_pair_distance(const Cluster& cluster) {
  double best = std::numeric_limits<double>::infinity();
  const auto& ps = cluster.particles;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t j = i + 1; j < ps.size(); ++j) best = std::min(best, pair_distance(ps[i], ps[j]));
  }
  return best;
}

Eigen::Quaterniond random_orientation(std::mt19937_64& rng) {
  // Shoemake's method: three uniforms give a uniformly distributed unit quaternion.
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u1 = uni(rng), u2 = uni(rng), u3 = uni(rng);
  const double s1 = std::sqrt(1.0 - u1), s2 = std::sqrt(u1);
  Eigen::Quaterniond q(s2 * std::cos(2 * kPi * u3), s1 * std::sin(2 * kPi * u2), s1 * std::cos(2 * kPi * u2),
                       s2 * std::sin(2 * kPi * u3));
  return q.normalized();
}

namespace {

struct Placed {
  Shape shape;
  Vec3 center;
  Eigen::Quaterniond orientation;
  Mat3 rotation;
};

// Smallest surface distance from a candidate to the placed set minus delta;
// -infinity on overlap.
double clearance(const std::vector<Placed>& placed, const Shape& shape, const Vec3& center, const Mat3& rot,
                 double delta) {
  const double rb = bounding_radius(shape);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : placed) {
    const double gap_bound = (q.center - center).norm() - rb - bounding_radius(q.shape);
    if (gap_bound - delta > best) continue;
    try {
      best = std::min(best, pair_distance(shape, center, rot, q.shape, q.center, q.rotation) - delta);
    } catch (const OverlapError&) {
      return -std::numeric_limits<double>::infinity();
    }
  }
  return best;
}

std::vector<Placed> grow_placements(int count, double delta, const Shape& shape, bool random_orient,
                                    std::mt19937_64& rng) {
  std::vector<Placed> placed;
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto orient = [&]() { return random_orient ? random_orientation(rng) : Eigen::Quaterniond::Identity(); };
  {
    auto q = orient();
    placed.push_back({shape, Vec3::Zero(), q, q.toRotationMatrix()});
  }
  const double rb = bounding_radius(shape);
  const Vec3 ax = semiaxes(shape);
  for (int k = 1; k < count; ++k) {
    Vec3 dir;
    do {
      dir = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (dir.norm() < 1e-8);
    dir.normalize();
    const auto q = orient();
    const Mat3 rot = q.toRotationMatrix();

    double hi = 0.0;
    for (const auto& p : placed) hi = std::max(hi, p.center.norm() + bounding_radius(p.shape));
    hi += rb + delta + 1.0;
    // March inward until the candidate becomes invalid, then bisect on the crossing.
    const double step = 0.5 * (delta + ax.minCoeff());
    double lo = hi;
    while (lo > 0.0) {
      lo = std::max(0.0, lo - step);
      if (clearance(placed, shape, lo * dir, rot, delta) < 0.0) break;
      hi = lo;
    }
    int it = 0;
    for (; it < 200 && hi - lo > 1e-11; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (clearance(placed, shape, mid * dir, rot, delta) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double g = clearance(placed, shape, hi * dir, rot, delta);
    if (it == 200 || !(g >= 0.0) || g > 1e-8) {
      throw PlacementError("grow_cluster: bisection failed to place particle " + std::to_string(k));
    }
    placed.push_back({shape, hi * dir, q, rot});
  }
  return placed;
}

}  // namespace

Cluster grow_cluster(const GrowthOptions& options) {
  if (options.count < 1) throw InvalidArgument("grow_cluster: count must be >= 1");
  if (!(options.min_separation > 0.0)) throw InvalidArgument("grow_cluster: min_separation must be positive");
  validate_shape(options.shape);
  std::mt19937_64 rng(options.seed);
  const bool is_sphere = std::holds_alternative<Sphere>(options.shape);
  const bool random_orient = !is_sphere && options.orientation == OrientationPolicy::Random;

  std::vector<Placed> placed;
  if (options.policy == GrowthPolicy::BoundingSphere && !is_sphere) {
    const Shape ball = Sphere{bounding_radius(options.shape)};
    placed = grow_placements(options.count, options.min_separation, ball, false, rng);
    for (auto& p : placed) {
      p.shape = options.shape;
      p.orientation = random_orient ? random_orientation(rng) : Eigen::Quaterniond::Identity();
      p.rotation = p.orientation.toRotationMatrix();
    }
  } else {
    placed = grow_placements(options.count, options.min_separation, options.shape, random_orient, rng);
  }

  Cluster cluster;
  cluster.min_separation = options.min_separation;
  for (const auto& p : placed) {
    cluster.particles.push_back(make_particle(p.shape, p.center, p.orientation, options.discretization));
  }
  return cluster;
}

}  // namespace mfs
