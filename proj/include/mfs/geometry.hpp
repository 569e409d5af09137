#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/Geometry>

#include "mfs/types.hpp"

namespace mfs {

struct Sphere {
  double radius = 1.0;
};

/// Triaxial ellipsoid in its body frame; c is the third (symmetry-breaking) axis.
struct Ellipsoid {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
};

using Shape = std::variant<Sphere, Ellipsoid>;

/// Throws InvalidArgument unless every length is strictly positive.
void validate_shape(const Shape& shape);

/// Characteristic length used to compare resized copies of a shape.
double shape_scale(const Shape& shape);
/// Radius of the smallest origin-centred ball containing the body.
double bounding_radius(const Shape& shape);
/// Smallest principal radius of curvature on the surface.
double min_curvature_radius(const Shape& shape);
/// (x/a)^2 + (y/b)^2 + (z/c)^2 in the body frame; 1 on the surface.
double implicit_value(const Shape& shape, const Vec3& body_point);
/// Outward unit normal at a body-frame point on the surface.
Vec3 outward_normal(const Shape& shape, const Vec3& body_point);

struct NodeSet {
  Points points;
  Index size() const { return points.cols(); }
};

/// Per-particle discretization parameters. `resolution` is N for spheres and
/// N_v (number of Gauss-Legendre rings) for ellipsoids. A rectangularity <= 0
/// selects the shape default (1.2 for spheres, 1.3 for ellipsoids).
struct Discretization {
  int resolution = 0;
  double delta_sep = 0.0;
  double rectangularity = 0.0;
};

double default_rectangularity(const Shape& shape);

struct Particle {
  Shape shape;
  Vec3 center = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Mat3 rotation = Mat3::Identity();  // always orientation.toRotationMatrix()
  Discretization discretization;

  NodeSet collocation;  // M points on the physical surface (world frame)
  NodeSet proxy;        // N points on the inner proxy surface (world frame)

  // Same node sets in the body frame (centre at origin, identity orientation).
  NodeSet reference_collocation;
  NodeSet reference_proxy;

  Index m() const { return collocation.size(); }
  Index n() const { return proxy.size(); }
  double delta_sep() const { return discretization.delta_sep; }

  Vec3 to_body(const Vec3& world) const { return rotation.transpose() * (world - center); }
  Vec3 to_world(const Vec3& body) const { return center + rotation * body; }
  /// True when the point lies strictly inside the body (relative tolerance on the implicit function).
  bool contains(const Vec3& world, double rel_tol = 1e-9) const;
};

struct Cluster {
  std::vector<Particle> particles;
  double min_separation = 0.0;

  Index size() const { return static_cast<Index>(particles.size()); }
};

// --- node generation ---

NodeSet fibonacci_sphere_nodes(Index n, double radius, const Vec3& center = Vec3::Zero());

/// Reads a unit-sphere point file (one "x y z" per line, '#' comments) and
/// maps it to the sphere of given radius and centre.
NodeSet load_point_set(const std::filesystem::path& path, double radius,
                       const Vec3& center = Vec3::Zero());

/// Number of nodes ellipsoid_grid produces for a given ring count.
Index ellipsoid_grid_count(int nv);

/// Quasi-uniform (s, t) grid on the ellipsoid surface: nv Gauss-Legendre rings
/// in t, periodic trapezoid nodes in s. Ring counts follow ring circumference
/// over meridional spacing; the total depends on nv only.
NodeSet ellipsoid_grid(double a, double b, double c, int nv);

/// Same grid, but every node is moved a distance `offset` along the inward normal.
NodeSet ellipsoid_offset_grid(double a, double b, double c, int nv, double offset);

// --- particles ---

Particle make_particle(const Shape& shape, const Vec3& center, const Mat3& rotation,
                       const Discretization& disc);
Particle make_particle(const Shape& shape, const Vec3& center,
                       const Eigen::Quaterniond& orientation, const Discretization& disc);

/// Rotates the particle about its own centre by `rotation`, then translates it by `shift`.
Particle transform_particle(const Particle& p, const Vec3& shift, const Mat3& rotation);

/// Re-generates node sets with a new discretization at the same pose.
Particle rediscretize(const Particle& p, const Discretization& disc);
Cluster rediscretize(const Cluster& cluster, const Discretization& disc);

/// Test points on the physical surface with at least `min_count` nodes,
/// from the same generator family as the collocation nodes.
NodeSet surface_test_points(const Particle& p, Index min_count);
/// Outward normals at world-frame surface points of the particle.
Points surface_normals(const Particle& p, const Points& world_points);

// --- distances and clusters ---

/// Closest point on the ellipsoid surface to a body-frame point outside it.
Vec3 project_to_ellipsoid(const Ellipsoid& e, const Vec3& p);

/// Minimum surface-to-surface distance. Analytic for sphere pairs, alternating
/// projection otherwise. Throws OverlapError when the bodies intersect.
double pair_distance(const Particle& p1, const Particle& p2);
double pair_distance(const Shape& s1, const Vec3& c1, const Mat3& r1, const Shape& s2,
                     const Vec3& c2, const Mat3& r2);

double min_pair_distance(const Cluster& cluster);

enum class OrientationPolicy { Identity, Random };
enum class GrowthPolicy {
  ExactDistance,   // true surface distances for every placement
  BoundingSphere,  // grow bounding spheres, then drop random-oriented bodies inside
};

struct GrowthOptions {
  int count = 1;
  double min_separation = 0.1;
  Shape shape = Sphere{1.0};
  Discretization discretization;
  OrientationPolicy orientation = OrientationPolicy::Random;
  GrowthPolicy policy = GrowthPolicy::ExactDistance;
  std::uint64_t seed = 1;
};

Cluster grow_cluster(const GrowthOptions& options);

/// Uniformly distributed random rotation (quaternion method).
Eigen::Quaterniond random_orientation(std::mt19937_64& rng);

}  // namespace mfs
