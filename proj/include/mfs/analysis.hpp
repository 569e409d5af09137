#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfs/solvers.hpp"

namespace mfs {

/// Accumulation radius of the image series for two unit spheres a gap delta apart.
double r_acc(double delta);

struct TwoWayOptions {
  SolverOptions resistance;
  SolverOptions mobility;
  /// Proxy offset of the mobility leg relative to the resistance leg.
  double mobility_sep_factor = 1.05;
};

struct TwoWayResult {
  double error = 0.0;  // |U - U_ref|_inf / |U_ref|_inf
  bool converged = false;
  Solution resistance;
  Solution mobility;
  Cluster mobility_cluster;
};

/// Resistance solve with U_ref, then mobility with the resulting loads on the
/// same bodies discretized with a larger proxy offset.
TwoWayResult two_way_error(const Cluster& cluster, const std::vector<Vec6>& u_ref, const TwoWayOptions& options = {});

struct ResidualReport {
  Points points;              // dense surface test points, all bodies
  std::vector<Index> body;    // owning body per point
  Vector values;              // relative (Stokes) or absolute (Laplace) residual per point
  std::vector<bool> absolute; // Stokes points where the boundary data vanishes
  double max = 0.0;
  Index argmax = -1;
  /// max divided by the largest |phi_k| for Laplace; equal to max for Stokes.
  double max_relative = 0.0;
};

/// Boundary-condition mismatch of a solved representation on `multiplier` x M
/// test points per body: |u - phi| (Laplace) or |u - g| / |g| with g the rigid
/// velocity (Stokes).
ResidualReport surface_residual(const Solution& solution, const Cluster& cluster, int multiplier = 2,
                                const EvaluatorConfig& cfg = {});

enum class MatrixKind { Capacitance, Elastance, Resistance, Mobility };

struct ExtractedMatrix {
  Matrix a;
  double asymmetry = 0.0;       // |A - A^T|_F / |A|_F
  double min_eigenvalue = 0.0;  // of (A + A^T) / 2
  bool converged = true;
  int max_iterations = 0;
};

/// Builds the P x P (Laplace) or 6P x 6P (Stokes) matrix column by column from
/// unit boundary data. Meant for small clusters.
ExtractedMatrix extract_matrix(const Cluster& cluster, MatrixKind which, const SolverOptions& options = {});

struct RateFit {
  bool accepted = false;
  double intercept = 0.0;  // a in ln(err) = a + b sqrt(N)
  double slope = 0.0;      // b
  double rate = 0.0;       // exp(b)
  int points_used = 0;
  std::string warning;
};

/// Least-squares fit of ln(err) against sqrt(n) over the decaying part of the
/// series. Points below `floor`, non-positive or non-finite errors, and
/// everything after the first non-decrease are dropped. At least three points
/// must remain.
RateFit fit_root_exponential(const std::vector<double>& n, const std::vector<double>& errors, double floor,
                             const std::vector<bool>& usable = {});

struct SweepPoint {
  double sweep_value = 0.0;
  double max_residual = 0.0;
  double output_error = 0.0;
  int iterations = 0;
  double max_strength = 0.0;
  double seconds = 0.0;
  bool converged = false;
  Index unknowns = 0;
};

struct ConvergenceRecord {
  std::string variable = "resolution";
  std::vector<SweepPoint> points;
  RateFit residual_fit;
  RateFit output_fit;
  std::vector<std::string> warnings;
};

struct SweepSpec {
  ProblemKind kind = ProblemKind::Elastance;
  Cluster cluster;               // poses and shapes; nodes are regenerated per point
  std::vector<int> resolutions;  // strictly increasing, at least four
  double delta_sep = 0.0;        // <= 0 keeps each particle's own offset
  double rectangularity = 0.0;
  std::vector<double> scalar_data;  // voltages or charges
  std::vector<Vec6> rigid_data;     // motions or loads
  SolverOptions options;
  int residual_multiplier = 2;
  /// Separate reference solve for the output error; otherwise the finest point.
  std::optional<int> reference_resolution;
  FactorMethod reference_method = FactorMethod::Svd;
};

/// Solved outputs stacked: charges, voltages, loads or motions.
Vector solution_outputs(const Solution& solution);

ConvergenceRecord convergence_sweep(const SweepSpec& spec);

}  // namespace mfs
