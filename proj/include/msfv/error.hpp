#ifndef MSFV_ERROR_HPP
#define MSFV_ERROR_HPP

#include <stdexcept>
#include <string>

namespace msfv {

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorCategory { input, numerical };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

/// Invalid grid sizes, generator parameters or run configuration.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::input, what) {}
};

/// Problems reading or parsing an input file.
class InputError : public Error {
public:
  explicit InputError(const std::string& what)
      : Error(ErrorCategory::input, what) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorCategory::numerical, what) {}
};

/// Iterative solver stopped before reaching its tolerance.
class SolverFailure : public NumericalError {
public:
  SolverFailure(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// A dual-cell Gram block that cannot be inverted.
class SingularBlock : public NumericalError {
public:
  SingularBlock(const std::string& what, int dual_cell)
      : NumericalError(what), dual_cell_(dual_cell) {}

  int dual_cell() const noexcept { return dual_cell_; }

private:
  int dual_cell_;
};

/// Neumann data whose boundary flux does not balance the source.
class CompatibilityError : public NumericalError {
public:
  CompatibilityError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// Explicit transport step requested above its stability bound.
class CflViolation : public NumericalError {
public:
  CflViolation(const std::string& what, double dt_max)
      : NumericalError(what), dt_max_(dt_max) {}

  double dt_max() const noexcept { return dt_max_; }

private:
  double dt_max_;
};

} // namespace msfv

#endif // MSFV_ERROR_HPP
