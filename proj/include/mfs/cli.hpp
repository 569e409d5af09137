#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfs/analysis.hpp"
#include "mfs/geometry.hpp"
#include "mfs/io.hpp"
#include "mfs/solvers.hpp"

namespace mfs {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitRuntime = 3 };

/// Discretization as written in a config: Delta_sep directly or a proxy radius
/// (spheres only), turned into a Discretization per shape.
struct DiscretizationSpec {
  int resolution = 0;
  std::optional<double> delta_sep;
  std::optional<double> proxy_radius;
  double rectangularity = 0.0;

  Discretization for_shape(const Shape& shape) const;
};

struct TargetSpec {
  enum class Kind { Points, Surface, Line, Plane };
  Kind kind = Kind::Points;
  Points points = Points(3, 0);  // explicit points, or the generated line/plane
  int surface_multiplier = 2;
};

struct RunConfig {
  std::optional<ProblemKind> problem;

  // geometry: exactly one of these
  std::optional<std::filesystem::path> cluster_file;
  std::optional<GrowthOptions> grow;
  std::optional<DiscretizationSpec> discretization;

  // boundary data: one entry per body, or a single entry broadcast to all
  std::vector<double> scalar_data;
  std::vector<Vec6> rigid_data;
  bool random_data = false;  // standard normal rigid motions/loads from the seed

  SolverOptions solver;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = ".";
  bool write_strengths = true;
  int residual_multiplier = 2;

  // resistance only: follow up with the mobility leg and report the 2-way error
  std::optional<double> two_way_sep_factor;

  // convergence
  std::vector<int> sweep_resolutions;
  std::optional<int> sweep_reference;

  // eval-field
  std::optional<std::filesystem::path> solution_file;
  FieldKind field = FieldKind::Potential;
  bool field_set = false;
  TargetSpec targets;
};

/// Relative paths are resolved against `base_dir`. Throws ValidationError.
RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Grows or loads the cluster and applies the configured discretization.
Cluster build_cluster(const RunConfig& cfg);

std::vector<double> scalar_data_for(const RunConfig& cfg, Index bodies);
std::vector<Vec6> rigid_data_for(const RunConfig& cfg, Index bodies);

int cmd_solve(const RunConfig& cfg);
int cmd_convergence(const RunConfig& cfg);
int cmd_cluster(const RunConfig& cfg);
int cmd_eval_field(const RunConfig& cfg);

/// Entry point of the mfs executable.
int run_cli(int argc, char** argv);

}  // namespace mfs
