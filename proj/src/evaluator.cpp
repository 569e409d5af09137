#include "mfs/evaluator.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include <omp.h>

namespace mfs {

namespace {

std::atomic<std::uint64_t> g_pairs{0};

constexpr double kPi = std::numbers::pi;
constexpr Index kBlock = 8;

int resolve_threads(const EvaluatorConfig& cfg) {
  return cfg.thread_count > 0 ? cfg.thread_count : omp_get_max_threads();
}

[[noreturn]] void throw_coincident(Index t, Index s) {
  throw SingularityError("eval_field: target " + std::to_string(t) + " coincides with source " + std::to_string(s),
                         t, s);
}

/// Finds the first coincident pair for target t, if any.
Index find_coincident(const Points& sources, const Vec3& x) {
  for (Index j = 0; j < sources.cols(); ++j) {
    if ((sources.col(j) - x).squaredNorm() == 0.0) return j;
  }
  return -1;
}

Vector direct_sum(const KernelKind& kind, const Points& sources, const Vector& strengths, const Points& targets,
                  const Points* normals, int threads) {
  const int od = kernel_output_dim(kind);
  const Index nt = targets.cols(), ns = sources.cols();
  Vector out = Vector::Zero(nt * od);
  std::atomic<bool> bad{false};
  Index bad_t = -1, bad_s = -1;
#pragma omp parallel for schedule(static) num_threads(threads)
  for (Index i = 0; i < nt; ++i) {
    const Vec3 x = targets.col(i);
    const Index hit = find_coincident(sources, x);
    if (hit >= 0) {
#pragma omp critical
      if (!bad) {
        bad = true;
        bad_t = i;
        bad_s = hit;
      }
      continue;
    }
    if (std::holds_alternative<LaplaceSingle>(kind)) {
      double acc = 0.0;
      for (Index j = 0; j < ns; ++j) acc += laplace_green(x, sources.col(j)) * strengths[j];
      out[i] = acc;
    } else if (const auto* k = std::get_if<Stokeslet>(&kind)) {
      Vec3 acc = Vec3::Zero();
      for (Index j = 0; j < ns; ++j) acc += stokeslet(x, sources.col(j), k->mu) * strengths.segment<3>(3 * j);
      out.segment<3>(3 * i) = acc;
    } else if (std::holds_alternative<StokesPressure>(kind)) {
      double acc = 0.0;
      for (Index j = 0; j < ns; ++j) acc += stokes_pressure(x, sources.col(j)).dot(strengths.segment<3>(3 * j));
      out[i] = acc / (8.0 * kPi);
    } else {
      const auto& t = std::get<StokesTraction>(kind);
      const Vec3 n = normals->col(i);
      Vec3 acc = Vec3::Zero();
      for (Index j = 0; j < ns; ++j) {
        acc += stokes_traction_kernel(x, n, sources.col(j), t.mu) * strengths.segment<3>(3 * j);
      }
      out.segment<3>(3 * i) = acc;
    }
  }
  if (bad) throw_coincident(bad_t, bad_s);
  return out;
}

// Blocked sums: kBlock targets share each source load; the short inner loop
// vectorizes. Partial blocks are padded by repeating the last target.
struct TargetBlock {
  alignas(64) double x[kBlock];
  alignas(64) double y[kBlock];
  alignas(64) double z[kBlock];
  Index count = 0;

  TargetBlock(const Points& targets, Index start) {
    const Index nt = targets.cols();
    count = std::min(kBlock, nt - start);
    for (Index l = 0; l < kBlock; ++l) {
      const Index i = start + std::min(l, count - 1);
      x[l] = targets(0, i);
      y[l] = targets(1, i);
      z[l] = targets(2, i);
    }
  }
};

void laplace_block(const TargetBlock& tb, const Points& sources, const double* q, double* acc) {
  alignas(64) double a[kBlock] = {};
  const Index ns = sources.cols();
  const double* s = sources.data();
  for (Index j = 0; j < ns; ++j) {
    const double sx = s[3 * j], sy = s[3 * j + 1], sz = s[3 * j + 2], qj = q[j];
#pragma omp simd aligned(a : 64)
    for (Index l = 0; l < kBlock; ++l) {
      const double dx = tb.x[l] - sx, dy = tb.y[l] - sy, dz = tb.z[l] - sz;
      a[l] += qj / std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  }
  for (Index l = 0; l < kBlock; ++l) acc[l] = a[l] / (4.0 * kPi);
}

void stokeslet_block(const TargetBlock& tb, const Points& sources, const double* f, double mu, double* acc) {
  alignas(64) double ux[kBlock] = {}, uy[kBlock] = {}, uz[kBlock] = {};
  const Index ns = sources.cols();
  const double* s = sources.data();
  for (Index j = 0; j < ns; ++j) {
    const double sx = s[3 * j], sy = s[3 * j + 1], sz = s[3 * j + 2];
    const double fx = f[3 * j], fy = f[3 * j + 1], fz = f[3 * j + 2];
#pragma omp simd aligned(ux, uy, uz : 64)
    for (Index l = 0; l < kBlock; ++l) {
      const double dx = tb.x[l] - sx, dy = tb.y[l] - sy, dz = tb.z[l] - sz;
      const double rinv = 1.0 / std::sqrt(dx * dx + dy * dy + dz * dz);
      const double c = (dx * fx + dy * fy + dz * fz) * rinv * rinv * rinv;
      ux[l] += fx * rinv + c * dx;
      uy[l] += fy * rinv + c * dy;
      uz[l] += fz * rinv + c * dz;
    }
  }
  const double scale = 1.0 / (8.0 * kPi * mu);
  for (Index l = 0; l < kBlock; ++l) {
    acc[3 * l] = ux[l] * scale;
    acc[3 * l + 1] = uy[l] * scale;
    acc[3 * l + 2] = uz[l] * scale;
  }
}

Vector blocked_sum(const KernelKind& kind, const Points& sources, const Vector& strengths, const Points& targets,
                   const Points* normals, int threads) {
  const bool laplace = std::holds_alternative<LaplaceSingle>(kind);
  const auto* stokes = std::get_if<Stokeslet>(&kind);
  if (!laplace && stokes == nullptr) return direct_sum(kind, sources, strengths, targets, normals, threads);

  const int od = kernel_output_dim(kind);
  const Index nt = targets.cols();
  const Index nblocks = (nt + kBlock - 1) / kBlock;
  Vector out = Vector::Zero(nt * od);
  std::atomic<bool> nonfinite{false};
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
  for (Index b = 0; b < nblocks; ++b) {
    const TargetBlock tb(targets, b * kBlock);
    double acc[3 * kBlock];
    if (laplace) {
      laplace_block(tb, sources, strengths.data(), acc);
    } else {
      stokeslet_block(tb, sources, strengths.data(), stokes->mu, acc);
    }
    for (Index l = 0; l < tb.count * od; ++l) {
      if (!std::isfinite(acc[l])) nonfinite = true;
      out[b * kBlock * od + l] = acc[l];
    }
  }
  if (nonfinite) {
    // A zero distance produced inf/nan; locate it for the error message.
    for (Index i = 0; i < nt; ++i) {
      const Index hit = find_coincident(sources, targets.col(i));
      if (hit >= 0) throw_coincident(i, hit);
    }
    throw NumericalError("eval_field: non-finite field value");
  }
  return out;
}

}  // namespace

void validate_evaluator(const EvaluatorConfig& cfg) {
  if (cfg.backend == EvaluatorConfig::Backend::Accelerated && !(cfg.tolerance >= 1e-14 && cfg.tolerance <= 1e-2)) {
    throw InvalidArgument("evaluator tolerance must lie in [1e-14, 1e-2]");
  }
  if (cfg.thread_count < 0) throw InvalidArgument("evaluator thread count must be non-negative");
}

Vector eval_field(const KernelKind& kind, const Points& sources, const Vector& strengths, const Points& targets,
                  const EvaluatorConfig& cfg, const Points* normals) {
  validate_evaluator(cfg);
  validate_kernel(kind);
  if (strengths.size() != sources.cols() * kernel_input_dim(kind)) {
    throw InvalidArgument("eval_field: strength vector does not match the source count");
  }
  if (kernel_needs_normals(kind) && (normals == nullptr || normals->cols() != targets.cols())) {
    throw InvalidArgument("eval_field: traction needs one normal per target");
  }
  if (kernel_needs_normals(kind)) {
    for (Index i = 0; i < normals->cols(); ++i) {
      if (std::abs(normals->col(i).norm() - 1.0) > 1e-12) throw InvalidArgument("eval_field: normal is not unit");
    }
  }
  g_pairs += static_cast<std::uint64_t>(sources.cols()) * static_cast<std::uint64_t>(targets.cols());
  const int threads = resolve_threads(cfg);
  if (cfg.backend == EvaluatorConfig::Backend::Direct) {
    return direct_sum(kind, sources, strengths, targets, normals, threads);
  }
  if (cfg.plugin) {
    Vector out = cfg.plugin->evaluate(kind, sources, strengths, targets, normals, cfg.tolerance, threads);
    if (out.size() != targets.cols() * kernel_output_dim(kind)) {
      throw NumericalError("eval_field: plug-in backend returned the wrong length");
    }
    return out;
  }
  return blocked_sum(kind, sources, strengths, targets, normals, threads);
}

std::uint64_t pair_evaluations() { return g_pairs.load(); }
void reset_pair_evaluations() { g_pairs = 0; }

}  // namespace mfs
