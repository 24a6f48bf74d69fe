#pragma once

#include <stdexcept>
#include <string>

namespace facov {

/// Error categories carried by every facov exception so callers can react
/// to specific failures (e.g. report an NPD covariance instead of aborting).
enum class errc {
  invalid_argument,
  dimension_mismatch,
  negative_threshold,
  not_positive_definite,  // Cholesky breakdown on an input required to be PD
  npd_covariance,         // implied covariance Sigma_y lost positive definiteness
  singular_system,
  rank_deficient,
  eigen_failure,
  non_convergence,
  backtracking_failed,
  monotonicity_violation,
  singular_regression,
  io_error,
};

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::invalid_argument: return "invalid_argument";
    case errc::dimension_mismatch: return "dimension_mismatch";
    case errc::negative_threshold: return "negative_threshold";
    case errc::not_positive_definite: return "not_positive_definite";
    case errc::npd_covariance: return "npd_covariance";
    case errc::singular_system: return "singular_system";
    case errc::rank_deficient: return "rank_deficient";
    case errc::eigen_failure: return "eigen_failure";
    case errc::non_convergence: return "non_convergence";
    case errc::backtracking_failed: return "backtracking_failed";
    case errc::monotonicity_violation: return "monotonicity_violation";
    case errc::singular_regression: return "singular_regression";
    case errc::io_error: return "io_error";
  }
  return "unknown";
}

}  // namespace facov
