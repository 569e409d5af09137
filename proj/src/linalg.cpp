#include "mfs/linalg.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace mfs {

namespace {

Mat3 cross_matrix(const Vec3& d) {
  // (d)_x w = w x d
  Mat3 m;
  m << 0.0, d[2], -d[1], -d[2], 0.0, d[0], d[1], -d[0], 0.0;
  return m;
}

OneBodyFactor factorize_svd(const DenseBlock& block, double trunc_eps) {
  OneBodyFactor f;
  f.method = FactorMethod::Svd;
  f.rows = block.rows();
  f.cols = block.cols();
  f.target_dim = block.target_dim;
  f.source_dim = block.source_dim;
  f.trunc_eps = trunc_eps;

  Eigen::BDCSVD<Matrix> svd(block.entries, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("factorize: SVD did not converge");
  f.singular_values = svd.singularValues();
  f.left = svd.matrixU();
  f.right = svd.matrixV();

  const Index r = f.singular_values.size();
  const double threshold = r > 0 ? f.singular_values[0] * trunc_eps : 0.0;
  f.kept = 0;
  while (f.kept < r && f.singular_values[f.kept] >= threshold && f.singular_values[f.kept] > 0.0) ++f.kept;
  return f;
}

OneBodyFactor factorize_qr(const DenseBlock& block) {
  OneBodyFactor f;
  f.method = FactorMethod::HouseholderQr;
  f.rows = block.rows();
  f.cols = block.cols();
  f.target_dim = block.target_dim;
  f.source_dim = block.source_dim;
  f.trunc_eps = 0.0;
  if (f.rows < f.cols) throw InvalidArgument("factorize: QR least squares needs rows >= cols");
  f.qr = std::make_shared<const Eigen::HouseholderQR<Matrix>>(block.entries);
  f.kept = f.cols;
  return f;
}

Matrix apply_qr(const OneBodyFactor& f, const Matrix& rhs) {
  // R^{-1} (Q^T rhs)_{1:n}
  Matrix qtb = f.qr->householderQ().transpose() * rhs;
  return f.qr->matrixQR().topLeftCorner(f.cols, f.cols).triangularView<Eigen::Upper>().solve(qtb.topRows(f.cols));
}

}  // namespace

OneBodyFactor factorize(const DenseBlock& block, double trunc_eps, FactorMethod method) {
  if (!block.entries.allFinite()) throw InvalidArgument("factorize: block has non-finite entries");
  if (block.rows() == 0 || block.cols() == 0) throw InvalidArgument("factorize: empty block");
  if (method == FactorMethod::HouseholderQr) return factorize_qr(block);
  if (!(trunc_eps >= std::numeric_limits<double>::epsilon() && trunc_eps <= 1e-2)) {
    throw InvalidArgument("factorize: trunc_eps must lie in [machine epsilon, 1e-2]");
  }
  return factorize_svd(block, trunc_eps);
}

Matrix apply_pinv(const OneBodyFactor& f, const Matrix& rhs) {
  if (rhs.rows() != f.rows) throw InvalidArgument("apply_pinv: right-hand side has the wrong length");
  if (f.method == FactorMethod::HouseholderQr) return apply_qr(f, rhs);
  const Index k = f.kept;
  Matrix coeff = f.left.leftCols(k).transpose() * rhs;  // U^T rhs, materialized
  for (Index i = 0; i < k; ++i) coeff.row(i) /= f.singular_values[i];
  return f.right.leftCols(k) * coeff;
}

Vector apply_pinv(const OneBodyFactor& f, const Vector& rhs) {
  Matrix out = apply_pinv(f, Matrix(rhs));
  return out.col(0);
}

Vector rotated_pinv_apply(const OneBodyFactor& base, const Mat3& rotation, const Vector& rhs, double scale) {
  if (base.target_dim != 3 || base.source_dim != 3) {
    throw InvalidArgument("rotated_pinv_apply: only defined for three-component (Stokes) factors");
  }
  if (rhs.size() != base.rows) throw InvalidArgument("rotated_pinv_apply: right-hand side has the wrong length");
  Vector local(rhs.size());
  for (Index i = 0; i < rhs.size() / 3; ++i) local.segment<3>(3 * i) = rotation.transpose() * rhs.segment<3>(3 * i);
  Vector x = apply_pinv(base, local);
  for (Index i = 0; i < x.size() / 3; ++i) x.segment<3>(3 * i) = scale * (rotation * x.segment<3>(3 * i));
  return x;
}

RigidMatrix::RigidMatrix(Points nodes, const Vec3& center) : offsets_(std::move(nodes)), center_(center) {
  offsets_.colwise() -= center;
}

RigidMatrix rigid_matrix(const Points& nodes, const Vec3& center) {
  if (nodes.cols() == 0) throw InvalidArgument("rigid_matrix: empty node set");
  return RigidMatrix(nodes, center);
}

Vector RigidMatrix::apply(const Vec6& motion) const {
  const Vec3 v = motion.head<3>(), w = motion.tail<3>();
  Vector out(3 * nodes());
  for (Index i = 0; i < nodes(); ++i) out.segment<3>(3 * i) = v + w.cross(Vec3(offsets_.col(i)));
  return out;
}

Vec6 RigidMatrix::apply_transpose(const Vector& strengths) const {
  if (strengths.size() != 3 * nodes()) throw InvalidArgument("RigidMatrix: strength vector has the wrong length");
  Vec3 f = Vec3::Zero(), t = Vec3::Zero();
  for (Index i = 0; i < nodes(); ++i) {
    const Vec3 l = strengths.segment<3>(3 * i);
    f += l;
    t += Vec3(offsets_.col(i)).cross(l);
  }
  Vec6 out;
  out << f, t;
  return out;
}

Mat6 RigidMatrix::gram() const {
  Mat6 g = Mat6::Zero();
  for (Index i = 0; i < nodes(); ++i) {
    const Mat3 x = cross_matrix(offsets_.col(i));
    g.block<3, 3>(0, 3) += x;
    g.block<3, 3>(3, 3) += x.transpose() * x;
  }
  g.block<3, 3>(0, 0) = static_cast<double>(nodes()) * Mat3::Identity();
  g.block<3, 3>(3, 0) = g.block<3, 3>(0, 3).transpose();
  return g;
}

Matrix RigidMatrix::dense() const {
  Matrix k(3 * nodes(), 6);
  for (Index i = 0; i < nodes(); ++i) {
    k.block<3, 3>(3 * i, 0) = Mat3::Identity();
    k.block<3, 3>(3 * i, 3) = cross_matrix(offsets_.col(i));
  }
  return k;
}

Mat6 gram_inverse(const RigidMatrix& k) {
  const Mat6 g = k.gram();
  Eigen::SelfAdjointEigenSolver<Mat6> eig(g, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) throw DegenerateGeometryError("rigid Gram matrix K^T K is singular");
  Eigen::LLT<Mat6> llt(g);
  if (llt.info() != Eigen::Success) throw DegenerateGeometryError("rigid Gram matrix K^T K is not SPD");
  return llt.solve(Mat6::Identity());
}

Projector Projector::laplace_mean(Index n) {
  if (n <= 0) throw InvalidArgument("Projector: empty vector space");
  Projector p;
  p.n_ = n;
  return p;
}

Projector Projector::stokes_rigid(RigidMatrix k) {
  Projector p;
  p.stokes_ = true;
  p.gram_inverse_ = mfs::gram_inverse(k);
  p.k_ = std::move(k);
  p.n_ = 3 * p.k_.nodes();
  return p;
}

Vector Projector::apply(const Vector& v) const {
  if (v.size() != size()) throw InvalidArgument("Projector: vector has the wrong length");
  if (!stokes_) return Vector::Constant(n_, v.mean());
  return k_.apply(gram_inverse_ * k_.apply_transpose(v));
}

RigidCoupling RigidCoupling::laplace(Index m, Index n) {
  RigidCoupling c;
  c.m_ = m;
  c.n_ = n;
  return c;
}

RigidCoupling RigidCoupling::stokes(RigidMatrix km, RigidMatrix kn) {
  if ((km.center() - kn.center()).norm() > 0.0) throw InvalidArgument("coupling_lr: K_M and K_N centres differ");
  RigidCoupling c;
  c.stokes_ = true;
  c.km_ = std::move(km);
  c.kn_ = std::move(kn);
  return c;
}

RigidCoupling coupling_lr(const RigidMatrix& km, const RigidMatrix& kn) { return RigidCoupling::stokes(km, kn); }

Vector RigidCoupling::apply(const Vector& x) const {
  if (x.size() != cols()) throw InvalidArgument("RigidCoupling: vector has the wrong length");
  if (!stokes_) return Vector::Constant(m_, x.sum() / static_cast<double>(n_));
  return km_.apply(kn_.apply_transpose(x));
}

Matrix RigidCoupling::dense() const {
  if (!stokes_) return Matrix::Constant(m_, n_, 1.0 / static_cast<double>(n_));
  return km_.dense() * kn_.dense().transpose();
}

GmresResult gmres(const LinearOperator& matvec, const Vector& b, double rel_tol, int max_iters) {
  if (!b.allFinite()) throw InvalidArgument("gmres: right-hand side is not finite");
  if (max_iters < 1) throw InvalidArgument("gmres: max_iters must be positive");
  GmresResult out;
  const Index n = b.size();
  const double beta = b.norm();
  out.x = Vector::Zero(n);
  if (beta == 0.0) {
    out.report.residual_history = {0.0};
    out.report.converged = true;
    return out;
  }
  out.report.residual_history = {1.0};

  std::vector<Vector> basis;
  basis.reserve(static_cast<std::size_t>(max_iters) + 1);
  basis.push_back(b / beta);
  Matrix h = Matrix::Zero(max_iters + 1, max_iters);
  Vector cs = Vector::Zero(max_iters), sn = Vector::Zero(max_iters);
  Vector g = Vector::Zero(max_iters + 1);
  g[0] = beta;

  int k = 0;
  for (int j = 0; j < max_iters; ++j) {
    Vector w = matvec(basis[j]);
    if (w.size() != n) throw InvalidArgument("gmres: operator changed the vector length");
    const double wnorm = w.norm();
    for (int i = 0; i <= j; ++i) {
      h(i, j) = basis[i].dot(w);
      w -= h(i, j) * basis[i];
    }
    h(j + 1, j) = w.norm();
    for (int i = 0; i < j; ++i) {
      const double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
      h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
      h(i, j) = t;
    }
    const double denom = std::hypot(h(j, j), h(j + 1, j));
    cs[j] = denom == 0.0 ? 1.0 : h(j, j) / denom;
    sn[j] = denom == 0.0 ? 0.0 : h(j + 1, j) / denom;
    const double hj1 = h(j + 1, j);
    h(j, j) = cs[j] * h(j, j) + sn[j] * hj1;
    h(j + 1, j) = 0.0;
    g[j + 1] = -sn[j] * g[j];
    g[j] = cs[j] * g[j];

    k = j + 1;
    const double res = std::abs(g[j + 1]) / beta;
    out.report.residual_history.push_back(res);
    if (res <= rel_tol) {
      out.report.converged = true;
      break;
    }
    if (hj1 <= 1e-14 * wnorm) break;  // Krylov space is invariant
    basis.push_back(w / hj1);
  }
  out.report.iterations = k;
  if (!out.report.converged && out.report.residual_history.back() <= rel_tol) out.report.converged = true;

  Vector y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
  for (int i = 0; i < k; ++i) out.x += y[i] * basis[i];
  return out;
}

}  // namespace mfs
