#pragma once

#include <variant>

#include "mfs/types.hpp"

namespace mfs {

struct LaplaceSingle {};
struct Stokeslet {
  double mu = 1.0;
};
struct StokesPressure {};
struct StokesTraction {
  double mu = 1.0;
};

using KernelKind = std::variant<LaplaceSingle, Stokeslet, StokesPressure, StokesTraction>;

/// Components produced per target point.
int kernel_output_dim(const KernelKind& kind);
/// Components of strength per source point.
int kernel_input_dim(const KernelKind& kind);
bool kernel_needs_normals(const KernelKind& kind);
/// Throws InvalidArgument for mu <= 0.
void validate_kernel(const KernelKind& kind);

/// 1 / (4 pi |x - y|).
double laplace_green(const Vec3& x, const Vec3& y);

/// (1 / (8 pi mu r)) (I + r r^T / r^2), r = x - y.
Mat3 stokeslet(const Vec3& x, const Vec3& y, double mu = 1.0);

/// Pi(x, y) = 2 (x - y) / |x - y|^3. The pressure of a Stokeslet of strength
/// lambda is Pi . lambda / (8 pi), independent of mu.
Vec3 stokes_pressure(const Vec3& x, const Vec3& y);

/// T with T lambda = sigma(u, p) n for the Stokeslet pair of strength lambda:
/// -(3 / 4 pi) (r . n) r r^T / r^5. The mu factors cancel.
Mat3 stokes_traction_kernel(const Vec3& x, const Vec3& normal, const Vec3& y, double mu = 1.0);

/// Dense target-from-source matrix. Row index = target * out_dim + component,
/// column index = source * in_dim + component.
struct DenseBlock {
  Matrix entries;
  int target_dim = 1;
  int source_dim = 1;

  Index rows() const { return entries.rows(); }
  Index cols() const { return entries.cols(); }
};

/// Assembles the block for all target/source pairs. `normals` (one per target)
/// is required for StokesTraction and ignored otherwise.
DenseBlock assemble_block(const Points& targets, const Points& sources, const KernelKind& kind,
                          const Points* normals = nullptr);

}  // namespace mfs
