#include "mfs/kernels.hpp"

#include <cmath>
#include <numbers>
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

double checked_distance(const Vec3& x, const Vec3& y, const char* who) {
  const double r = (x - y).norm();
  if (r == 0.0) throw SingularityError(std::string(who) + ": coincident target and source");
  return r;
}

}  // namespace

int kernel_output_dim(const KernelKind& kind) {
  return std::visit(Overloaded{[](const LaplaceSingle&) { return 1; }, [](const Stokeslet&) { return 3; },
                               [](const StokesPressure&) { return 1; }, [](const StokesTraction&) { return 3; }},
                    kind);
}

int kernel_input_dim(const KernelKind& kind) { return std::holds_alternative<LaplaceSingle>(kind) ? 1 : 3; }

bool kernel_needs_normals(const KernelKind& kind) { return std::holds_alternative<StokesTraction>(kind); }

void validate_kernel(const KernelKind& kind) {
  const double mu = std::visit(Overloaded{[](const Stokeslet& k) { return k.mu; },
                                          [](const StokesTraction& k) { return k.mu; },
                                          [](const auto&) { return 1.0; }},
                               kind);
  if (!(mu > 0.0)) throw InvalidArgument("kernel viscosity must be positive");
}

double laplace_green(const Vec3& x, const Vec3& y) {
  return 1.0 / (4.0 * kPi * checked_distance(x, y, "laplace_green"));
}

Mat3 stokeslet(const Vec3& x, const Vec3& y, double mu) {
  if (!(mu > 0.0)) throw InvalidArgument("stokeslet: mu must be positive");
  const Vec3 d = x - y;
  const double r = checked_distance(x, y, "stokeslet");
  return (Mat3::Identity() + d * d.transpose() / (r * r)) / (8.0 * kPi * mu * r);
}

Vec3 stokes_pressure(const Vec3& x, const Vec3& y) {
  const Vec3 d = x - y;
  const double r = checked_distance(x, y, "stokes_pressure");
  return 2.0 * d / (r * r * r);
}

Mat3 stokes_traction_kernel(const Vec3& x, const Vec3& normal, const Vec3& y, double mu) {
  if (!(mu > 0.0)) throw InvalidArgument("stokes_traction_kernel: mu must be positive");
  if (std::abs(normal.norm() - 1.0) > 1e-12) throw InvalidArgument("stokes_traction_kernel: normal is not unit");
  const Vec3 d = x - y;
  const double r = checked_distance(x, y, "stokes_traction_kernel");
  const double r2 = r * r;
  return (-3.0 / (4.0 * kPi)) * d.dot(normal) * d * d.transpose() / (r2 * r2 * r);
}

DenseBlock assemble_block(const Points& targets, const Points& sources, const KernelKind& kind,
                          const Points* normals) {
  validate_kernel(kind);
  if (kernel_needs_normals(kind) && (normals == nullptr || normals->cols() != targets.cols())) {
    throw InvalidArgument("assemble_block: traction kernel needs one normal per target");
  }
  DenseBlock block;
  block.target_dim = kernel_output_dim(kind);
  block.source_dim = kernel_input_dim(kind);
  const Index nt = targets.cols(), ns = sources.cols();
  block.entries.resize(nt * block.target_dim, ns * block.source_dim);

  bool singular = false;
  Index bad_t = -1, bad_s = -1;
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < ns; ++j) {
    const Vec3 y = sources.col(j);
    for (Index i = 0; i < nt; ++i) {
      const Vec3 x = targets.col(i);
      if (x == y) {
#pragma omp critical
        {
          if (!singular) {
            singular = true;
            bad_t = i;
            bad_s = j;
          }
        }
        continue;
      }
      std::visit(Overloaded{[&](const LaplaceSingle&) { block.entries(i, j) = laplace_green(x, y); },
                            [&](const Stokeslet& k) {
                              block.entries.block<3, 3>(3 * i, 3 * j) = stokeslet(x, y, k.mu);
                            },
                            [&](const StokesPressure&) {
                              block.entries.block<1, 3>(i, 3 * j) = stokes_pressure(x, y).transpose() / (8.0 * kPi);
                            },
                            [&](const StokesTraction& k) {
                              block.entries.block<3, 3>(3 * i, 3 * j) =
                                  stokes_traction_kernel(x, normals->col(i), y, k.mu);
                            }},
                 kind);
    }
  }
  if (singular) {
    throw SingularityError("assemble_block: target " + std::to_string(bad_t) + " coincides with source " +
                               std::to_string(bad_s),
                           bad_t, bad_s);
  }
  return block;
}

}  // namespace mfs
