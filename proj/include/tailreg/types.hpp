// Common scalar/linear-algebra aliases and error types used across the library.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tailreg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr const char* kVersion = "0.1.0";

// Counter for predictor clamps at +-40; callers pass one to collect warnings.
using ClampCounter = std::atomic<std::uint64_t>;

// Error categories; the CLI maps them to exit codes (config 2, data 3,
// convergence 4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& msg, std::string trace = {})
      : std::runtime_error(msg), trace(std::move(trace)) {}
  std::string trace;  // e.g. per-iteration objective/gradient log
};

}  // namespace tailreg
