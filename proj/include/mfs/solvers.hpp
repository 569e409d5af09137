#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfs/evaluator.hpp"
#include "mfs/geometry.hpp"
#include "mfs/kernels.hpp"
#include "mfs/linalg.hpp"

namespace mfs {

enum class ProblemKind { Capacitance, Elastance, Resistance, Mobility };

bool is_stokes(ProblemKind kind);
/// Elastance and mobility: prescribed net loads, completion strengths, S_L blocks.
bool uses_completion(ProblemKind kind);
/// 1e-8 for Laplace problems, 1e-7 for Stokes problems.
double default_tolerance(ProblemKind kind);
std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& name);

struct SolverOptions {
  std::optional<double> tolerance;  // GMRES relative tolerance; default_tolerance() when unset
  int max_iters = 300;
  double trunc_eps = kDefaultTruncEps;
  FactorMethod factor_method = FactorMethod::Svd;
  EvaluatorConfig evaluator;
  double mu = 1.0;  // viscosity (Stokes)
};

/// Dense diagonal block of a reference body and its factorization, shared by
/// every rotated (and, for Dirichlet problems, resized) copy of that body.
struct ShapeBlock {
  DenseBlock self_block;  // S in the reference body frame
  OneBodyFactor factor;   // of S (Dirichlet) or S_L = S (I - L) + L_r (completion)
  std::vector<Index> bodies;
};

struct BodyBlock {
  Index shape = 0;
  Mat3 rotation = Mat3::Identity();
  double scale = 1.0;  // body size over reference size; S^(kk) = R S R^T / scale
  Index row_offset = 0;  // into stacked collocation values
  Index col_offset = 0;  // into stacked strengths
  Index rows = 0;
  Index cols = 0;
  RigidMatrix km;  // collocation nodes
  RigidMatrix kn;  // proxy nodes
  Projector projector;
};

/// Everything the preconditioned operator needs. Immutable once built, so
/// concurrent solves may share it.
struct BlockSystemContext {
  ProblemKind kind = ProblemKind::Capacitance;
  SolverOptions options;
  Cluster cluster;
  KernelKind kernel;
  std::vector<ShapeBlock> shapes;
  std::vector<BodyBlock> bodies;
  Points collocation;  // all bodies, stacked
  Points proxy;
  Index total_rows = 0;
  Index total_cols = 0;
  double assembly_seconds = 0.0;
  double factorization_seconds = 0.0;

  int values_per_node() const { return is_stokes(kind) ? 3 : 1; }
  double tolerance() const { return options.tolerance.value_or(default_tolerance(kind)); }
};

BlockSystemContext build_context(const Cluster& cluster, ProblemKind kind, const SolverOptions& options = {});

/// Number of one-body factorizations performed by build_context so far.
std::uint64_t factorization_count();

/// Laplace: q / N in every entry.
Vector completion_strengths(double charge, Index n);
/// Stokes: minimum-norm lambda_0 = K_N (K_N^T K_N)^{-1} [f; t].
Vector completion_strengths(const Vec6& load, const RigidMatrix& kn);

/// Per-body pseudoinverse of the diagonal blocks (rotation and scale aware).
Vector block_pinv(const BlockSystemContext& ctx, const Vector& gamma);
/// Per-body (I - L) for completion problems; identity otherwise.
Vector project_strengths(const BlockSystemContext& ctx, const Vector& strengths);
/// Per-body S^(kk) strengths^(k).
Vector self_block_product(const BlockSystemContext& ctx, const Vector& strengths);
/// Global field at all collocation nodes minus each body's own contribution.
Vector eval_with_self_correction(const BlockSystemContext& ctx, const Vector& strengths);
/// One-body preconditioned operator applied to stacked surface values.
Vector preconditioned_matvec(const BlockSystemContext& ctx, const Vector& gamma);

struct Solution {
  ProblemKind kind = ProblemKind::Capacitance;
  double mu = 1.0;
  std::vector<Vector> strengths;            // alpha or lambda, as solved for
  std::vector<Vector> effective_strengths;  // strengths used in the representation
  std::vector<Vector> surface_values;       // gamma
  std::vector<double> voltages;             // Laplace
  std::vector<double> charges;              // Laplace
  std::vector<Vec6> motions;                // Stokes [v; omega]
  std::vector<Vec6> loads;                  // Stokes [f; t]
  SolveReport report;
};

Solution solve_capacitance(const BlockSystemContext& ctx, const std::vector<double>& voltages);
Solution solve_elastance(const BlockSystemContext& ctx, const std::vector<double>& charges);
Solution solve_resistance(const BlockSystemContext& ctx, const std::vector<Vec6>& motions);
Solution solve_mobility(const BlockSystemContext& ctx, const std::vector<Vec6>& loads);

Solution solve_capacitance(const Cluster& cluster, const std::vector<double>& voltages,
                           const SolverOptions& options = {});
Solution solve_elastance(const Cluster& cluster, const std::vector<double>& charges,
                         const SolverOptions& options = {});
Solution solve_resistance(const Cluster& cluster, const std::vector<Vec6>& motions,
                          const SolverOptions& options = {});
Solution solve_mobility(const Cluster& cluster, const std::vector<Vec6>& loads, const SolverOptions& options = {});

enum class FieldKind {
  Potential,         // Laplace, 1 column
  Velocity,          // Stokes, 3 columns
  VelocityPressure,  // Stokes, 4 columns
  Traction,          // Stokes, 3 columns; needs unit normals
};

int field_columns(FieldKind want);

/// Evaluates the solved representation at arbitrary points, one row per point.
/// Throws DomainError for points inside a particle (surface points are allowed).
Matrix evaluate_solution(const Solution& solution, const Cluster& cluster, const Points& points, FieldKind want,
                         const Points* normals = nullptr, const EvaluatorConfig& cfg = {});

}  // namespace mfs
