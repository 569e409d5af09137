#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/QR>

#include "mfs/kernels.hpp"
#include "mfs/types.hpp"

namespace mfs {

inline constexpr double kDefaultTruncEps = 1e-14;

enum class FactorMethod {
  Svd,            // truncated SVD pseudoinverse (default)
  HouseholderQr,  // least squares via QR; no truncation, for large reference solves
};

/// Factorization of a one-body block S = U diag(sigma) V^T. Singular values
/// below sigma_1 * trunc_eps are kept in storage but inverted as zero.
struct OneBodyFactor {
  FactorMethod method = FactorMethod::Svd;
  Matrix left;              // U, rows x r
  Vector singular_values;   // descending
  Matrix right;             // V, cols x r
  double trunc_eps = kDefaultTruncEps;
  Index kept = 0;           // number of singular values inverted

  // method == HouseholderQr; shared so copies of a factor stay cheap.
  std::shared_ptr<const Eigen::HouseholderQR<Matrix>> qr;

  Index rows = 0;
  Index cols = 0;
  int target_dim = 1;
  int source_dim = 1;

  bool is_truncated(Index i) const { return i >= kept; }
};

OneBodyFactor factorize(const DenseBlock& block, double trunc_eps = kDefaultTruncEps,
                        FactorMethod method = FactorMethod::Svd);

/// V diag(1/sigma) (U^T rhs), applied as two products; never forms the pseudoinverse.
Vector apply_pinv(const OneBodyFactor& factor, const Vector& rhs);
/// Column-wise version for a batch of right-hand sides.
Matrix apply_pinv(const OneBodyFactor& factor, const Matrix& rhs);

/// Pseudoinverse apply for a rotated (and optionally resized) copy of the body
/// the factor was built for: scale * R_N V Sigma^+ U^T R_M^T rhs. Stokes
/// (three-component) factors only.
Vector rotated_pinv_apply(const OneBodyFactor& base, const Mat3& rotation, const Vector& rhs,
                          double scale = 1.0);

/// Rigid-body matrix K = [I | (x - c)_x] stacked per node: K [v; w] = v + w x (x - c).
class RigidMatrix {
 public:
  RigidMatrix() = default;
  RigidMatrix(Points nodes, const Vec3& center);

  Index nodes() const { return offsets_.cols(); }
  const Vec3& center() const { return center_; }
  const Points& offsets() const { return offsets_; }

  /// 3n vector of nodal velocities v + w x (x_i - c).
  Vector apply(const Vec6& motion) const;
  /// (sum lambda_i, sum (x_i - c) x lambda_i).
  Vec6 apply_transpose(const Vector& strengths) const;
  /// K^T K, assembled directly.
  Mat6 gram() const;
  Matrix dense() const;

 private:
  Points offsets_;  // x_i - c
  Vec3 center_ = Vec3::Zero();
};

RigidMatrix rigid_matrix(const Points& nodes, const Vec3& center);

/// Orthogonal projector onto constant vectors (Laplace) or rigid-body strength
/// vectors K (K^T K)^{-1} K^T (Stokes). Applied through thin products only.
class Projector {
 public:
  static Projector laplace_mean(Index n);
  static Projector stokes_rigid(RigidMatrix k);

  bool is_stokes() const { return stokes_; }
  Index size() const { return stokes_ ? 3 * k_.nodes() : n_; }
  const Mat6& gram_inverse() const { return gram_inverse_; }
  const RigidMatrix& rigid() const { return k_; }

  Vector apply(const Vector& v) const;
  Vector complement(const Vector& v) const { return v - apply(v); }

 private:
  bool stokes_ = false;
  Index n_ = 0;
  RigidMatrix k_;
  Mat6 gram_inverse_ = Mat6::Zero();
};

/// Solves K^T K x = rhs by Cholesky; throws DegenerateGeometryError when the
/// Gram matrix is singular or its condition number exceeds 1e12.
Mat6 gram_inverse(const RigidMatrix& k);

/// Rectangular rigid coupling L_r: K_M K_N^T (Stokes, rank 6) or the matrix
/// with all entries 1/N (Laplace, rank 1). Applied as two thin products.
class RigidCoupling {
 public:
  static RigidCoupling laplace(Index m, Index n);
  static RigidCoupling stokes(RigidMatrix km, RigidMatrix kn);

  Index rows() const { return stokes_ ? 3 * km_.nodes() : m_; }
  Index cols() const { return stokes_ ? 3 * kn_.nodes() : n_; }
  Vector apply(const Vector& x) const;
  Matrix dense() const;

 private:
  bool stokes_ = false;
  Index m_ = 0, n_ = 0;
  RigidMatrix km_, kn_;
};

RigidCoupling coupling_lr(const RigidMatrix& km, const RigidMatrix& kn);

struct PhaseTimes {
  double assembly = 0.0;
  double factorization = 0.0;
  double rhs = 0.0;
  double gmres = 0.0;
  double recover = 0.0;
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;  // relative, starts at 1 (or 0 for b = 0)
  bool converged = false;
  double max_strength_magnitude = 0.0;
  PhaseTimes times;
};

using LinearOperator = std::function<Vector(const Vector&)>;

struct GmresResult {
  Vector x;
  SolveReport report;
};

/// Non-restarted GMRES with modified Gram-Schmidt, zero initial guess. Stops
/// when the relative residual drops to rel_tol; otherwise returns the final
/// (minimum-residual) iterate with converged = false.
GmresResult gmres(const LinearOperator& matvec, const Vector& b, double rel_tol, int max_iters = 300);

}  // namespace mfs
