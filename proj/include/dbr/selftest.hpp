#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dbr {

struct CheckResult {
  std::string group;  // gradient, oracle, invariant, metric
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct SuiteOptions {
  /// Replaces every per-check tolerance when set.
  std::optional<double> tol;
  std::size_t oracle_trials = 50;
  std::size_t invariant_draws = 100;
  std::size_t composite_probes = 24;
  std::uint64_t seed = 2024;
};

/// Finite-difference checks of every primitive (tol 1e-4) and of the
/// composites slice, deformable_conv, the three losses and the full
/// decomposition (tol 1e-3).
std::vector<CheckResult> gradient_suite(const SuiteOptions& opt = {});
/// Library kernels against the loop references.
std::vector<CheckResult> oracle_suite(const SuiteOptions& opt = {});
/// Decomposition properties over random parameter draws.
std::vector<CheckResult> invariant_suite(const SuiteOptions& opt = {});
/// Closed-form metric examples and reference cross-checks.
std::vector<CheckResult> metric_suite(const SuiteOptions& opt = {});

std::vector<CheckResult> run_selftest(const SuiteOptions& opt = {});

/// One line per check: status, group, name, error and tolerance.
std::string format_results(const std::vector<CheckResult>& results);

}  // namespace dbr
