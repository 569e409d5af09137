#pragma once

#include <cstdint>
#include <memory>

#include "mfs/kernels.hpp"
#include "mfs/types.hpp"

namespace mfs {

/// Plug-in slot for a fast summation method (treecode, FMM, ...). An
/// implementation must return every target value with relative error at most
/// `tolerance` against the direct sum, scaled by the 1-norm of the strengths.
class FieldBackend {
 public:
  virtual ~FieldBackend() = default;
  virtual Vector evaluate(const KernelKind& kind, const Points& sources, const Vector& strengths,
                          const Points& targets, const Points* normals, double tolerance,
                          int threads) const = 0;
};

struct EvaluatorConfig {
  enum class Backend { Direct, Accelerated };
  Backend backend = Backend::Accelerated;
  /// Requested relative accuracy of the accelerated backend, in [1e-14, 1e-2].
  double tolerance = 1e-12;
  /// Number of threads; 0 uses the OpenMP default.
  int thread_count = 0;
  /// Optional replacement for the built-in accelerated summation.
  std::shared_ptr<const FieldBackend> plugin;
};

void validate_evaluator(const EvaluatorConfig& cfg);

/// Field of all sources at all targets, stacked per target (out_dim values
/// each). The built-in accelerated path is a target-blocked, vectorized direct
/// sum; both built-in backends accumulate each target in source order, so the
/// result does not depend on the thread count.
Vector eval_field(const KernelKind& kind, const Points& sources, const Vector& strengths,
                  const Points& targets, const EvaluatorConfig& cfg, const Points* normals = nullptr);

/// Running total of source-target pairs processed by eval_field.
std::uint64_t pair_evaluations();
void reset_pair_evaluations();

}  // namespace mfs
