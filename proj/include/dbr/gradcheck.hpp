#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dbr/tensor.hpp"

namespace dbr {

struct GradCheckReport {
  std::string op;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::size_t probes = 0;
};

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  /// 0 probes every element of every input; otherwise a seeded random subset.
  std::size_t max_probes = 0;
  std::uint64_t seed = 7;
};

using GradFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares reverse-mode gradients of `fn` against central differences.
/// Inputs whose requires_grad flag is set are probed. Non-scalar outputs are
/// projected onto a fixed random direction first. Relative error per element
/// is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(std::string name, const GradFn& fn, std::vector<Tensor> inputs,
                           const GradCheckOptions& opt = {});

}  // namespace dbr
