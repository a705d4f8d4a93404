#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vista {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  double worst = 0.0;  ///< largest error seen (meaning depends on the check)
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 20240611;
  /// Instances per check; 0 means the check's own default.
  std::size_t instances = 0;
  /// Failing oracle instances are serialized here (tensor format).
  std::filesystem::path replay_dir;
  /// Multiplies every pass tolerance; 0 makes any nonzero error fail.
  double tolerance_scale = 1.0;
};

/// Relative difference max|a - b| / max(1, max|b|).
double relative_error(std::span<const double> a, std::span<const double> b);

/// Production kernels against the scalar-loop oracles: conv2d, resize,
/// z_step, m_step, v_step, k_step_closed, refine_scale. Default 100 random
/// instances each (S <= 3, C <= 4, H, W <= 4, T <= 3), tolerance 1e-9.
std::vector<CheckResult> oracle_checks(const CheckOptions& opts = {});

/// matricization_rank(assemble(att)) == T for generic factors, T in {1,2,3}.
/// Default 60 cases.
CheckResult rank_structure_check(const CheckOptions& opts = {});

/// After refine_scale every inferred map entry is in (0,1) and every channel vector
/// is positive and sums to 1 within 1e-9. Default 1000 instances.
CheckResult posterior_constraint_check(const CheckOptions& opts = {});

/// grad_check (h = 1e-5) through a full refine_scale pass and each task
/// loss; passes when the max relative error is below 1e-5. Default 20 seeds.
std::vector<CheckResult> gradient_checks(const CheckOptions& opts = {});

/// Suite names: oracle, grad, invariants. Prints one line per check.
std::vector<CheckResult> run_check_suite(std::string_view suite, std::ostream& log,
                                         const CheckOptions& opts = {});

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace vista
